#include "doctest.h"
#include "oracles.hpp"

#include "shardscreen/error.hpp"
#include "shardscreen/knockoff.hpp"

#include <cmath>
#include <random>

using namespace shardscreen;

namespace {

Eigen::MatrixXd random_block(std::mt19937_64& rng, Eigen::Index n, Eigen::Index d, double mix = 0.5) {
    std::normal_distribution<double> nd;
    Eigen::MatrixXd a(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
        double prev = nd(rng);
        for (Eigen::Index j = 0; j < d; ++j) {
            prev = mix * prev + nd(rng);
            a(i, j) = prev + 2.0;
        }
    }
    return a;
}

Eigen::MatrixXd two_by_two(double off) {
    Eigen::MatrixXd g(2, 2);
    g << 1.0, off, off, 1.0;
    return g;
}

ErrorCode code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an Error");
    return ErrorCode::Io;
}

} // namespace

TEST_CASE("scale_block") {
    std::mt19937_64 rng(1);
    SUBCASE("matches the naive Gram") {
        const auto a = random_block(rng, 40, 5);
        const auto sb = scale_block(a);
        CHECK((sb.gram - oracle::naive_gram(sb.scaled)).cwiseAbs().maxCoeff() < 1e-12);
        for (Eigen::Index j = 0; j < 5; ++j) {
            CHECK(std::fabs(sb.gram(j, j) - 1.0) < 1e-12);
            CHECK(std::fabs(sb.scaled.col(j).sum()) < 1e-12);
        }
    }
    SUBCASE("orthonormal centered columns give the identity") {
        Eigen::MatrixXd a(4, 2);
        a << 1, 1, -1, 1, 1, -1, -1, -1;
        const auto sb = scale_block(a / 2.0);
        CHECK((sb.gram - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-15);
    }
    SUBCASE("duplicated column") {
        Eigen::MatrixXd a = random_block(rng, 20, 3);
        a.col(2) = a.col(0);
        CHECK(std::fabs(scale_block(a).gram(0, 2) - 1.0) < 1e-12);
    }
    SUBCASE("errors") {
        Eigen::MatrixXd a = random_block(rng, 20, 3);
        a.col(1).setConstant(4.0);
        try {
            scale_block(a);
            FAIL("no error");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::ConstantColumn);
            CHECK(e.index() == std::optional<std::size_t>(1));
        }
        CHECK(code_of([&] { scale_block(random_block(rng, 5, 3)); }) == ErrorCode::InsufficientRows);
    }
}

TEST_CASE("equicorrelated s") {
    CHECK(knockoff_s_equi(Eigen::MatrixXd::Identity(3, 3)) == Eigen::VectorXd::Ones(3));
    const auto s5 = knockoff_s_equi(two_by_two(0.5));
    CHECK(s5(0) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(s5(1) == doctest::Approx(1.0).epsilon(1e-14));
    const auto s9 = knockoff_s_equi(two_by_two(0.9));
    CHECK(s9(0) == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(s9(1) == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(code_of([] { knockoff_s_equi(two_by_two(1.0)); }) == ErrorCode::NearSingularGram);
}

TEST_CASE("ridge keeps a unit diagonal") {
    const auto r = ridge_gram(two_by_two(1.0));
    CHECK(r(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(min_eigenvalue(r) > KnockoffTolerances::eig_floor);
    CHECK_NOTHROW(knockoff_s_equi(r));
}

TEST_CASE("SDP-style s") {
    SUBCASE("identity") {
        const auto sol = knockoff_s_sdp(Eigen::MatrixXd::Identity(4, 4));
        CHECK(sol.s == Eigen::VectorXd::Ones(4));
    }
    SUBCASE("off-diagonal 0.5 ties the equicorrelated objective") {
        const auto sol = knockoff_s_sdp(two_by_two(0.5));
        CHECK((1.0 - sol.s.array()).abs().sum() <= 1e-8);
    }
    SUBCASE("feasible and no worse than equicorrelated on random Grams") {
        std::mt19937_64 rng(2);
        for (int trial = 0; trial < 30; ++trial) {
            const auto d = static_cast<Eigen::Index>(2 + rng() % 15);
            const auto sb = scale_block(random_block(rng, 4 * d + 10, d, 0.9));
            const auto sol = knockoff_s_sdp(sb.gram);
            const auto equi = knockoff_s_equi(sb.gram);
            Eigen::MatrixXd slack = 2.0 * sb.gram;
            slack.diagonal() -= sol.s;
            CHECK(min_eigenvalue(slack) >= -KnockoffTolerances::psd_tol);
            CHECK((sol.s.array() >= 0.0).all());
            CHECK((sol.s.array() <= 1.0).all());
            CHECK((1.0 - sol.s.array()).abs().sum() <= (1.0 - equi.array()).abs().sum() + 1e-8);
        }
    }
}

TEST_CASE("generate_knockoffs") {
    std::mt19937_64 rng(3);
    SUBCASE("s = 0 copies the block") {
        const auto sb = scale_block(random_block(rng, 30, 4));
        const auto m = generate_knockoffs(sb.scaled, Eigen::VectorXd::Zero(4), 1);
        CHECK((m.knockoffs - sb.scaled).cwiseAbs().maxCoeff() < 1e-12);
    }
    SUBCASE("identity Gram with s = 1") {
        Eigen::MatrixXd a(8, 2);
        a << 1, 1, -1, 1, 1, -1, -1, -1, 1, 1, -1, 1, 1, -1, -1, -1;
        const auto sb = scale_block(a);
        const auto m = generate_knockoffs(sb.scaled, Eigen::VectorXd::Ones(2), 4);
        CHECK((m.knockoffs.transpose() * sb.scaled).cwiseAbs().maxCoeff() < 1e-10);
        CHECK((m.knockoffs.transpose() * m.knockoffs - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() <
              1e-10);
    }
    SUBCASE("random 60 x 10 with equicorrelated s") {
        const auto sb = scale_block(random_block(rng, 60, 10));
        const auto m = generate_knockoffs(sb.scaled, knockoff_s_equi(sb.gram), 5);
        const auto r = gram_residuals(sb.scaled, m);
        CHECK(r.knock_knock < 1e-8);
        CHECK(r.real_knock < 1e-8);
        CHECK(r.basis_real < 1e-8);
        CHECK(r.min_eig_slack >= -KnockoffTolerances::psd_tol);
        // C is upper triangular and U has orthonormal columns orthogonal to 1
        CHECK(m.c_factor.triangularView<Eigen::StrictlyLower>().toDenseMatrix().cwiseAbs().maxCoeff() == 0.0);
        CHECK((m.ortho_basis.transpose() * m.ortho_basis - Eigen::MatrixXd::Identity(10, 10)).norm() < 1e-10);
        CHECK(m.ortho_basis.colwise().sum().cwiseAbs().maxCoeff() < 1e-10);
        CHECK(m.knockoffs.colwise().sum().cwiseAbs().maxCoeff() < 1e-10);
    }
    SUBCASE("same seed, same knockoffs") {
        const auto sb = scale_block(random_block(rng, 30, 5));
        const auto s = knockoff_s_equi(sb.gram);
        CHECK(generate_knockoffs(sb.scaled, s, 9).knockoffs == generate_knockoffs(sb.scaled, s, 9).knockoffs);
        CHECK(generate_knockoffs(sb.scaled, s, 9).knockoffs != generate_knockoffs(sb.scaled, s, 10).knockoffs);
    }
    SUBCASE("too few rows") {
        const auto sb = scale_block(random_block(rng, 10, 5));
        CHECK(code_of([&] { generate_knockoffs(sb.scaled, knockoff_s_equi(sb.gram), 1); }) ==
              ErrorCode::InsufficientRows);
    }
}

TEST_CASE("Gram identities over 100 random shapes") {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 100; ++trial) {
        const auto d = static_cast<Eigen::Index>(1 + rng() % 40);
        const auto n = 2 * d + 5 + static_cast<Eigen::Index>(rng() % 60);
        const auto sb = scale_block(random_block(rng, n, d, 0.3 + 0.6 * (trial % 2)));
        const bool sdp = trial % 3 == 0;
        const Eigen::VectorXd s = sdp ? knockoff_s_sdp(sb.gram).s : knockoff_s_equi(sb.gram);
        const auto m = generate_knockoffs(sb.scaled, s, static_cast<std::uint64_t>(trial));
        const auto r = gram_residuals(sb.scaled, m);
        CHECK(r.knock_knock < 1e-8);
        CHECK(r.real_knock < 1e-8);
        CHECK(r.basis_real < 1e-8);
        CHECK(r.min_eig_slack >= -KnockoffTolerances::psd_tol);
    }
}

TEST_CASE("knockoff statistics") {
    std::mt19937_64 rng(5);
    const Eigen::Index n = 90;
    Eigen::VectorXd y(n), z(n);
    std::normal_distribution<double> nd;
    for (Eigen::Index i = 0; i < n; ++i) {
        z(i) = nd(rng);
        y(i) = nd(rng);
    }
    const auto sb = scale_block(random_block(rng, n, 6));
    y += 2.0 * std::sqrt(static_cast<double>(n)) * sb.scaled.col(0);
    const auto m = generate_knockoffs(sb.scaled, knockoff_s_equi(sb.gram), 3);

    for (Method method : {Method::Saps, Method::Acps, Method::Jdps}) {
        const auto self = knockoff_stats(y, z, sb.scaled, sb.scaled, method, 3);
        for (double v : self.psi) CHECK(v == 0.0);

        const auto fwd = knockoff_stats(y, z, sb.scaled, m.knockoffs, method, 3);
        const auto rev = knockoff_stats(y, z, m.knockoffs, sb.scaled, method, 3);
        for (std::size_t j = 0; j < 6; ++j) {
            CHECK(fwd.psi[j] == -rev.psi[j]);
            CHECK(fwd.psi[j] == fwd.omega_real[j] - fwd.omega_knock[j]);
            CHECK(std::fabs(fwd.psi[j]) <= 1.0);
        }
        CHECK(fwd.psi[0] > 0.0);

        // swapping one column between the blocks negates only that entry
        Eigen::MatrixXd real = sb.scaled, knock = m.knockoffs;
        real.col(2).swap(knock.col(2));
        const auto swapped = knockoff_stats(y, z, real, knock, method, 3);
        CHECK(swapped.psi[2] == -fwd.psi[2]);
        CHECK(swapped.psi[1] == fwd.psi[1]);
    }
}

TEST_CASE("fdp_hat") {
    const std::vector<double> psi{0.5, 0.3, -0.2};
    CHECK(fdp_hat(psi, 0.2) == 0.5);
    const std::vector<double> pos{0.5, 0.3, 0.2};
    CHECK(fdp_hat(pos, 0.1) == 0.0);
    CHECK(std::isinf(fdp_hat(pos, 0.9)));
    CHECK(code_of([&] { fdp_hat(psi, 0.0); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("select_threshold") {
    SUBCASE("hand example") {
        const std::vector<double> psi{0.9, 0.8, 0.7, -0.1};
        const auto sel = select_threshold(psi, 0.5);
        // t = 0.1 gives (1 + 1) / 3 > 0.5; t = 0.7 gives 1 / 3
        CHECK(sel.threshold == 0.7);
        CHECK(sel.selected == std::vector<std::size_t>{0, 1, 2});
        CHECK(sel.fdp_hat_at_threshold == 0.0);
    }
    SUBCASE("all negative") {
        const std::vector<double> psi{-0.3, -0.1, -0.2};
        const auto sel = select_threshold(psi, 1.0);
        CHECK(std::isinf(sel.threshold));
        CHECK(sel.selected.empty());
    }
    SUBCASE("zeros never selected") {
        const std::vector<double> psi{0.0, 0.0, 0.4};
        const auto sel = select_threshold(psi, 1.0);
        CHECK(sel.threshold == 0.4);
        CHECK(sel.selected == std::vector<std::size_t>{2});
    }
    SUBCASE("alpha range") {
        const std::vector<double> psi{0.1};
        CHECK(code_of([&] { select_threshold(psi, 1.5); }) == ErrorCode::InvalidArgument);
        CHECK(code_of([&] { select_threshold(psi, -0.1); }) == ErrorCode::InvalidArgument);
    }
    SUBCASE("brute force and monotone in alpha") {
        std::mt19937_64 rng(6);
        std::uniform_real_distribution<double> u(-0.3, 1.0);
        for (int trial = 0; trial < 300; ++trial) {
            const std::size_t p = 1 + rng() % 100;
            std::vector<double> psi(p);
            for (double& v : psi) v = std::round(u(rng) * 40.0) / 40.0;  // forces ties and zeros
            double prev_t = std::numeric_limits<double>::infinity();
            std::vector<std::size_t> prev_sel;
            for (int a = 0; a <= 20; ++a) {
                const double alpha = a / 20.0;
                const auto sel = select_threshold(psi, alpha);
                CHECK(sel.threshold == oracle::brute_threshold(psi, alpha));
                CHECK(sel.threshold <= prev_t);
                CHECK(std::includes(sel.selected.begin(), sel.selected.end(), prev_sel.begin(), prev_sel.end()));
                for (std::size_t j : sel.selected) CHECK(psi[j] >= sel.threshold);
                prev_t = sel.threshold;
                prev_sel = sel.selected;
            }
        }
    }
}
