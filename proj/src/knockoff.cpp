#include "shardscreen/knockoff.hpp"
#include "shardscreen/error.hpp"

#include <boost/random/mersenne_twister.hpp>
#include <boost/random/normal_distribution.hpp>

#include <algorithm>
#include <cmath>
#include <string>

namespace shardscreen {

namespace {

constexpr int kMaxSdpSweeps = 100;
// Fraction of the largest feasible coordinate step actually taken; keeps
// the slack matrix strictly positive definite so it stays invertible.
constexpr double kStepShrink = 1e-3;
constexpr int kMaxBasisDraws = 10;

double objective(const Eigen::VectorXd& s) { return (1.0 - s.array()).abs().sum(); }

Eigen::MatrixXd draw_gaussian(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
    boost::random::mt19937_64 rng(seed);
    boost::random::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd g(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j) {
        for (Eigen::Index i = 0; i < rows; ++i) g(i, j) = normal(rng);
    }
    return g;
}

} // namespace

ScaledBlock scale_block(const Eigen::Ref<const Eigen::MatrixXd>& block) {
    const Eigen::Index n = block.rows();
    const Eigen::Index d = block.cols();
    if (n < 2 * d) {
        throw Error(ErrorCode::InsufficientRows,
                    "knockoff block needs at least 2d = " + std::to_string(2 * d) + " rows, has " +
                        std::to_string(n));
    }
    ScaledBlock out;
    out.scaled.resize(n, d);
    for (Eigen::Index j = 0; j < d; ++j) {
        const auto col = block.col(j);
        if (!col.allFinite()) {
            throw Error(ErrorCode::NonFiniteInput, "non-finite entry in knockoff block column " +
                                                       std::to_string(j),
                        static_cast<std::size_t>(j));
        }
        const double mean = col.mean();
        out.scaled.col(j) = col.array() - mean;
        const double norm = out.scaled.col(j).norm();
        const double scale = col.cwiseAbs().maxCoeff();
        if (!(norm > 1e-12 * scale * std::sqrt(static_cast<double>(n)))) {
            throw Error(ErrorCode::ConstantColumn,
                        "knockoff block column " + std::to_string(j) + " is constant",
                        static_cast<std::size_t>(j));
        }
        out.scaled.col(j) /= norm;
    }
    out.gram = out.scaled.transpose() * out.scaled;
    return out;
}

double min_eigenvalue(const Eigen::MatrixXd& symmetric) {
    if (symmetric.size() == 0) return 0.0;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(symmetric, Eigen::EigenvaluesOnly);
    return eig.eigenvalues().minCoeff();
}

Eigen::MatrixXd ridge_gram(const Eigen::MatrixXd& gram, double delta) {
    Eigen::MatrixXd out = gram;
    out.diagonal().array() += delta;
    return out / (1.0 + delta);
}

Eigen::VectorXd knockoff_s_equi(const Eigen::MatrixXd& gram) {
    const double lambda = min_eigenvalue(gram);
    if (!(lambda > KnockoffTolerances::eig_floor)) {
        throw Error(ErrorCode::NearSingularGram,
                    "Gram matrix smallest eigenvalue " + std::to_string(lambda) +
                        " is at or below the floor");
    }
    return Eigen::VectorXd::Constant(gram.rows(), std::min(2.0 * lambda, 1.0));
}

SdpSolution knockoff_s_sdp(const Eigen::MatrixXd& gram) {
    const Eigen::VectorXd equi = knockoff_s_equi(gram);
    const Eigen::Index d = gram.rows();
    SdpSolution out;
    if (d == 0 || (equi.array() >= 1.0).all()) {
        out.s = equi;
        return out;
    }

    Eigen::VectorXd s = equi * (1.0 - kStepShrink);
    for (int sweep = 0; sweep < kMaxSdpSweeps; ++sweep) {
        Eigen::MatrixXd slack = 2.0 * gram;
        slack.diagonal() -= s;
        Eigen::LDLT<Eigen::MatrixXd> ldlt(slack);
        if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) break;
        Eigen::MatrixXd inv = ldlt.solve(Eigen::MatrixXd::Identity(d, d));

        double gained = 0.0;
        for (Eigen::Index j = 0; j < d; ++j) {
            const double a = inv(j, j);
            if (!(a > 0.0)) continue;
            // slack - delta e_j e_j' stays PSD iff delta <= 1 / inv(j, j)
            const double step = std::min(1.0 - s(j), (1.0 - kStepShrink) / a);
            if (!(step > 0.0)) continue;
            s(j) += step;
            gained += step;
            const Eigen::VectorXd col = inv.col(j);
            inv.noalias() += (step / (1.0 - step * a)) * col * col.transpose();
        }
        out.sweeps = sweep + 1;
        if (gained < 1e-10 * static_cast<double>(d)) break;
    }

    Eigen::MatrixXd slack = 2.0 * gram;
    slack.diagonal() -= s;
    const bool feasible = (s.array() >= 0.0).all() && (s.array() <= 1.0).all() &&
                          min_eigenvalue(slack) >= -KnockoffTolerances::psd_tol;
    if (!feasible || objective(s) > objective(equi) + 1e-8) {
        out.s = equi;
        out.fell_back = true;
        return out;
    }
    out.s = s;
    return out;
}

KnockoffModel generate_knockoffs(const Eigen::MatrixXd& scaled, const Eigen::MatrixXd& gram,
                                 const Eigen::VectorXd& s, std::uint64_t seed) {
    const Eigen::Index n = scaled.rows();
    const Eigen::Index d = scaled.cols();
    if (gram.rows() != d || gram.cols() != d || s.size() != d) {
        throw Error(ErrorCode::InvalidArgument, "Gram matrix and s must match the block width");
    }
    if (n < 2 * d + 1) {
        throw Error(ErrorCode::InsufficientRows,
                    "knockoff construction needs more than 2d = " + std::to_string(2 * d) +
                        " rows, has " + std::to_string(n));
    }
    if ((s.array() < 0.0).any() || (s.array() > 1.0).any()) {
        throw Error(ErrorCode::InvalidArgument, "s entries must lie in [0, 1]");
    }

    Eigen::LLT<Eigen::MatrixXd> llt(gram);
    if (llt.info() != Eigen::Success) {
        throw Error(ErrorCode::NearSingularGram, "Gram matrix is not positive definite");
    }
    // Sigma^{-1} diag(s)
    const Eigen::MatrixXd inv_gram_s = llt.solve(Eigen::MatrixXd(s.asDiagonal()));

    Eigen::MatrixXd cc = 2.0 * Eigen::MatrixXd(s.asDiagonal()) - s.asDiagonal() * inv_gram_s;
    cc = 0.5 * (cc + cc.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cc);
    const double cc_scale = std::max(1.0, cc.cwiseAbs().maxCoeff());
    if (eig.eigenvalues().minCoeff() < -KnockoffTolerances::psd_tol * cc_scale) {
        throw Error(ErrorCode::InvalidArgument,
                    "2 diag(s) - diag(s) Sigma^{-1} diag(s) is not positive semidefinite");
    }
    const Eigen::VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    const Eigen::MatrixXd b = root.asDiagonal() * eig.eigenvectors().transpose();
    // B = QR gives R'R = B'B = cc with R upper triangular.
    Eigen::HouseholderQR<Eigen::MatrixXd> bqr(b);
    const Eigen::MatrixXd c_factor = bqr.matrixQR().triangularView<Eigen::Upper>();

    Eigen::MatrixXd basis;
    std::uint64_t draw_seed = seed;
    for (int attempt = 0; attempt < kMaxBasisDraws; ++attempt, ++draw_seed) {
        Eigen::MatrixXd stacked(n, 2 * d + 1);
        stacked.col(0).setConstant(1.0 / std::sqrt(static_cast<double>(n)));
        stacked.middleCols(1, d) = scaled;
        stacked.rightCols(d) = draw_gaussian(n, d, draw_seed);
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(stacked);
        const auto& r = qr.matrixQR();
        bool full_rank = true;
        for (Eigen::Index i = d + 1; i < 2 * d + 1; ++i) {
            if (!(std::fabs(r(i, i)) > 1e-10 * std::sqrt(static_cast<double>(n)))) full_rank = false;
        }
        if (!full_rank) continue;
        const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, 2 * d + 1);
        basis = q.rightCols(d);
        break;
    }
    if (basis.size() == 0 && d > 0) {
        throw Error(ErrorCode::InsufficientRows, "could not draw an orthogonal complement basis");
    }

    KnockoffModel model;
    model.gram = gram;
    model.s = s;
    model.ortho_basis = basis;
    model.c_factor = c_factor;
    model.knockoffs = scaled - scaled * inv_gram_s;
    if (d > 0) model.knockoffs.noalias() += basis * c_factor;
    return model;
}

KnockoffModel generate_knockoffs(const Eigen::MatrixXd& scaled, const Eigen::VectorXd& s,
                                 std::uint64_t seed) {
    const Eigen::MatrixXd gram = scaled.transpose() * scaled;
    return generate_knockoffs(scaled, gram, s, seed);
}

GramResiduals gram_residuals(const Eigen::MatrixXd& scaled, const KnockoffModel& model) {
    const Eigen::MatrixXd sigma = scaled.transpose() * scaled;
    const double norm = std::max(sigma.norm(), 1e-300);
    const Eigen::MatrixXd& knock = model.knockoffs;
    Eigen::MatrixXd target = sigma;
    target.diagonal() -= model.s;

    GramResiduals r;
    r.knock_knock = (knock.transpose() * knock - sigma).norm() / norm;
    r.real_knock = (scaled.transpose() * knock - target).norm() / norm;
    r.basis_real = (model.ortho_basis.transpose() * scaled).norm() / norm;
    Eigen::MatrixXd slack = 2.0 * sigma;
    slack.diagonal() -= model.s;
    r.min_eig_slack = min_eigenvalue(slack);
    return r;
}

KnockoffStats knockoff_stats(std::span<const SecondStageShard> shards, Method method) {
    if (shards.empty()) {
        throw Error(ErrorCode::InvalidArgument, "no second-stage shards");
    }
    const Eigen::Index d = shards.front().real.cols();
    std::vector<ShardView> real_views;
    std::vector<ShardView> knock_views;
    real_views.reserve(shards.size());
    knock_views.reserve(shards.size());
    for (std::size_t k = 0; k < shards.size(); ++k) {
        const auto& sh = shards[k];
        if (sh.real.cols() != d || sh.knock.cols() != d || sh.knock.rows() != sh.real.rows()) {
            throw Error(ErrorCode::InvalidArgument,
                        "shard " + std::to_string(k) + " real and knockoff blocks disagree in shape", k);
        }
        real_views.emplace_back(sh.response, sh.conditional, sh.real);
        knock_views.emplace_back(sh.response, sh.conditional, sh.knock);
    }
    const Utilities real = compute_utilities(real_views, method);
    const Utilities knock = compute_utilities(knock_views, method);

    KnockoffStats out;
    out.omega_real = real.omega;
    out.omega_knock = knock.omega;
    out.psi.resize(real.omega.size());
    for (std::size_t j = 0; j < out.psi.size(); ++j) out.psi[j] = real.omega[j] - knock.omega[j];
    return out;
}

KnockoffStats knockoff_stats(const Eigen::VectorXd& response, const Eigen::VectorXd& conditional,
                             const Eigen::MatrixXd& real, const Eigen::MatrixXd& knock,
                             Method method, std::size_t num_shards) {
    const auto n = static_cast<std::size_t>(response.size());
    if (static_cast<std::size_t>(conditional.size()) != n ||
        static_cast<std::size_t>(real.rows()) != n || static_cast<std::size_t>(knock.rows()) != n ||
        real.cols() != knock.cols()) {
        throw Error(ErrorCode::InvalidArgument, "pooled knockoff inputs disagree in shape");
    }
    if (num_shards == 0 || n < 3 * num_shards) {
        throw Error(ErrorCode::TooManyShards, "too many shards for the pooled second-stage rows");
    }
    std::vector<SecondStageShard> shards(num_shards);
    const std::size_t base = n / num_shards;
    const std::size_t extra = n % num_shards;
    std::size_t begin = 0;
    for (std::size_t k = 0; k < num_shards; ++k) {
        const auto count = static_cast<Eigen::Index>(base + (k < extra ? 1 : 0));
        const auto b = static_cast<Eigen::Index>(begin);
        shards[k].response = response.segment(b, count);
        shards[k].conditional = conditional.segment(b, count);
        shards[k].real = real.middleRows(b, count);
        shards[k].knock = knock.middleRows(b, count);
        begin += static_cast<std::size_t>(count);
    }
    return knockoff_stats(shards, method);
}

double fdp_hat(std::span<const double> psi, double t) {
    if (!(t > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "fdp_hat needs t > 0");
    }
    std::size_t negatives = 0;
    std::size_t positives = 0;
    for (double v : psi) {
        if (v <= -t) ++negatives;
        if (v >= t) ++positives;
    }
    if (positives == 0) return std::numeric_limits<double>::infinity();
    return static_cast<double>(negatives) / static_cast<double>(positives);
}

FdrSelection select_threshold(std::span<const double> psi, double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "alpha must lie in [0, 1]");
    }
    FdrSelection out;
    out.alpha = alpha;

    std::vector<double> sorted(psi.begin(), psi.end());
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> candidates;
    candidates.reserve(sorted.size());
    for (double v : sorted) {
        const double a = std::fabs(v);
        if (a > 0.0) candidates.push_back(a);
    }
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

    for (double t : candidates) {
        const auto negatives = static_cast<std::size_t>(
            std::upper_bound(sorted.begin(), sorted.end(), -t) - sorted.begin());
        const auto positives = static_cast<std::size_t>(
            sorted.end() - std::lower_bound(sorted.begin(), sorted.end(), t));
        if (positives == 0) continue;
        const double ratio =
            static_cast<double>(1 + negatives) / static_cast<double>(positives);
        if (ratio <= alpha) {
            out.threshold = t;
            break;
        }
    }
    if (std::isfinite(out.threshold)) {
        for (std::size_t j = 0; j < psi.size(); ++j) {
            if (psi[j] >= out.threshold) out.selected.push_back(j);
        }
        out.fdp_hat_at_threshold = fdp_hat(psi, out.threshold);
    }
    return out;
}

} // namespace shardscreen
