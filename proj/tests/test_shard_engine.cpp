#include "doctest.h"
#include "oracles.hpp"

#include "shardscreen/error.hpp"
#include "shardscreen/shard_engine.hpp"
#include "shardscreen/summary_io.hpp"

#include <cmath>
#include <random>
#include <sstream>

using namespace shardscreen;

namespace {

Dataset random_dataset(std::mt19937_64& rng, std::size_t n, std::size_t p) {
    Dataset d;
    d.response.resize(static_cast<Eigen::Index>(n));
    d.conditional.resize(static_cast<Eigen::Index>(n));
    d.features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
    std::normal_distribution<double> nd;
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(n); ++i) {
        d.conditional(i) = nd(rng);
        double signal = 0.0;
        for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(p); ++j) {
            d.features(i, j) = nd(rng) + 0.4 * d.conditional(i);
            if (j < 3) signal += d.features(i, j);
        }
        d.response(i) = 0.5 * signal + 0.3 * d.conditional(i) + nd(rng);
    }
    for (std::size_t j = 0; j < p; ++j) d.feature_names.push_back("f" + std::to_string(j));
    return d;
}

oracle::Vec to_vec(std::span<const double> s) { return oracle::Vec(s.begin(), s.end()); }

ErrorCode code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an Error");
    return ErrorCode::Io;
}

ShardSummary saps_summary(std::vector<double> local) {
    ShardSummary s;
    s.method = Method::Saps;
    s.shard_size = 10;
    s.status.assign(local.size(), EntryStatus::Ok);
    s.local = std::move(local);
    return s;
}

} // namespace

TEST_CASE("shard_dataset partitions") {
    std::mt19937_64 rng(1);
    SUBCASE("remainder rows go to the first shards") {
        const auto sharded = shard_dataset(random_dataset(rng, 10, 2), 3);
        CHECK(sharded.num_shards() == 3);
        CHECK(sharded.shard_size(0) == 4);
        CHECK(sharded.shard_size(1) == 3);
        CHECK(sharded.shard_size(2) == 3);
    }
    SUBCASE("K = 1 keeps row order without shuffle") {
        const Dataset d = random_dataset(rng, 12, 2);
        const auto sharded = shard_dataset(d, 1);
        const auto view = sharded.shard(0);
        CHECK(to_vec(view.response()) == oracle::Vec(d.response.data(), d.response.data() + 12));
    }
    SUBCASE("shuffle is a deterministic permutation") {
        const Dataset d = random_dataset(rng, 50, 3);
        const auto a = shard_dataset(d, 4, {true, 77});
        const auto b = shard_dataset(d, 4, {true, 77});
        std::vector<std::size_t> seen;
        for (std::size_t k = 0; k < 4; ++k) {
            CHECK(to_vec(a.shard(k).feature(1)) == to_vec(b.shard(k).feature(1)));
            const auto rows = a.source_rows(k);
            for (std::size_t i = 0; i < rows.size(); ++i) {
                CHECK(a.shard(k).response()[i] == d.response(static_cast<Eigen::Index>(rows[i])));
                seen.push_back(rows[i]);
            }
        }
        std::sort(seen.begin(), seen.end());
        for (std::size_t i = 0; i < seen.size(); ++i) CHECK(seen[i] == i);
    }
    SUBCASE("errors") {
        CHECK(code_of([&] { shard_dataset(random_dataset(rng, 8, 2), 3); }) == ErrorCode::TooManyShards);
        CHECK(code_of([&] { shard_dataset(random_dataset(rng, 8, 2), 0); }) == ErrorCode::InvalidArgument);
    }
}

TEST_CASE("summaries agree across methods on one shard") {
    std::mt19937_64 rng(2);
    const auto sharded = shard_dataset(random_dataset(rng, 40, 6), 1);
    const auto view = sharded.shard(0);
    const auto acps = summarize_shard(view, Method::Acps);
    const auto saps = summarize_shard(view, Method::Saps);
    const auto jdps = summarize_shard(view, Method::Jdps);
    for (std::size_t j = 0; j < 6; ++j) {
        CHECK(std::fabs(partial_correlation(acps.moments[j]) - saps.local[j]) < 1e-12);
        CHECK(jdps.local[j] == saps.local[j]);
        const auto [rho, corr] = oracle::loo_jackknife(to_vec(view.response()), to_vec(view.feature(j)),
                                                       to_vec(view.conditional()));
        CHECK(std::fabs(jdps.local[j] - rho) < 1e-12);
        CHECK(std::fabs(jdps.correction[j] - corr) < 1e-10);
    }
}

TEST_CASE("jackknife fast path on shards of size 5 to 50") {
    std::mt19937_64 rng(3);
    for (std::size_t n = 5; n <= 50; n += 5) {
        for (int rep = 0; rep < 4; ++rep) {
            const auto z = oracle::normal_vector(rng, n);
            auto x = oracle::normal_vector(rng, n);
            auto y = oracle::normal_vector(rng, n);
            for (std::size_t i = 0; i < n; ++i) {
                x[i] += 0.5 * z[i] + 3.0;
                y[i] += 0.8 * x[i] - 10.0;
            }
            const auto e = jackknife_feature({y, x, z});
            const auto [rho, corr] = oracle::loo_jackknife(y, x, z);
            CHECK(e.status == EntryStatus::Ok);
            CHECK(std::fabs(e.local - rho) < 1e-10);
            CHECK(std::fabs(e.correction - corr) < 1e-10);
        }
    }
}

TEST_CASE("degenerate feature is isolated") {
    std::mt19937_64 rng(4);
    Dataset d = random_dataset(rng, 30, 4);
    d.features.col(2) = d.conditional;  // collinear with Z
    d.features.col(3).setConstant(1.5);  // no variance
    const auto sharded = shard_dataset(d, 2);
    for (Method m : {Method::Saps, Method::Acps, Method::Jdps}) {
        const auto u = compute_utilities(sharded, m);
        CHECK(u.unreliable[2] == 1);
        CHECK(u.unreliable[3] == 1);
        CHECK(u.omega[2] == 0.0);
        CHECK(u.omega[3] == 0.0);
        CHECK(u.unreliable[0] == 0);
        CHECK(u.omega[0] > 0.0);
    }
    const auto s = summarize_shard(sharded.shard(0), Method::Saps);
    CHECK(s.status[2] == EntryStatus::CollinearWithCondition);
    CHECK(s.status[3] == EntryStatus::DegenerateVariance);
}

TEST_CASE("aggregate_saps arithmetic") {
    SUBCASE("cancellation") {
        const std::vector<ShardSummary> s{saps_summary({0.4}), saps_summary({-0.4})};
        CHECK(aggregate_saps(s).omega[0] == 0.0);
    }
    SUBCASE("mean of three") {
        const std::vector<ShardSummary> s{saps_summary({0.1}), saps_summary({0.2}), saps_summary({0.6})};
        CHECK(aggregate_saps(s).omega[0] == doctest::Approx(0.3).epsilon(1e-15));
    }
    SUBCASE("flagged shard excluded") {
        std::vector<ShardSummary> s{saps_summary({0.1}), saps_summary({0.9}), saps_summary({0.3})};
        s[1].status[0] = EntryStatus::DegenerateVariance;
        CHECK(aggregate_saps(s).omega[0] == doctest::Approx(0.2).epsilon(1e-15));
        CHECK(aggregate_saps(s).unreliable[0] == 0);
    }
    SUBCASE("mixed methods rejected") {
        std::vector<ShardSummary> s{saps_summary({0.1}), saps_summary({0.2})};
        s[1].method = Method::Jdps;
        CHECK(code_of([&] { aggregate_saps(s); }) == ErrorCode::InvalidArgument);
    }
}

TEST_CASE("JDPS with zero corrections equals SAPS") {
    std::vector<ShardSummary> saps{saps_summary({0.1, -0.3}), saps_summary({0.5, 0.2})};
    std::vector<ShardSummary> jdps = saps;
    for (auto& s : jdps) {
        s.method = Method::Jdps;
        s.correction.assign(2, 0.0);
    }
    CHECK(aggregate_jdps(jdps).omega == aggregate_saps(saps).omega);
}

TEST_CASE("ACPS aggregation matches centralized computation") {
    std::mt19937_64 rng(5);
    SUBCASE("unequal shards 7 and 13") {
        const Dataset d = random_dataset(rng, 20, 5);
        const ShardView all(d.response, d.conditional, d.features);
        const std::vector<ShardView> parts{all.slice(0, 7), all.slice(7, 13)};
        const auto sharded = compute_utilities(parts, Method::Acps);
        const std::vector<ShardView> one{all};
        const auto central = compute_utilities(one, Method::Acps);
        for (std::size_t j = 0; j < 5; ++j) {
            CHECK(std::fabs(sharded.omega[j] - central.omega[j]) <= 1e-12 * std::max(1e-3, central.omega[j]));
        }
    }
    SUBCASE("shard order does not matter") {
        const Dataset d = random_dataset(rng, 60, 4);
        const auto sharded = shard_dataset(d, 4);
        auto views = sharded.shards();
        for (Method m : {Method::Saps, Method::Acps, Method::Jdps}) {
            const auto fwd = compute_utilities(views, m);
            std::vector<ShardView> rev(views.rbegin(), views.rend());
            const auto back = compute_utilities(rev, m);
            for (std::size_t j = 0; j < 4; ++j) CHECK(std::fabs(fwd.omega[j] - back.omega[j]) < 1e-13);
        }
    }
}

TEST_CASE("K = 1 identities") {
    std::mt19937_64 rng(6);
    const auto sharded = shard_dataset(random_dataset(rng, 50, 5), 1);
    const auto saps = compute_utilities(sharded, Method::Saps);
    const auto acps = compute_utilities(sharded, Method::Acps);
    const auto jdps = compute_utilities(sharded, Method::Jdps);
    const auto view = sharded.shard(0);
    for (std::size_t j = 0; j < 5; ++j) {
        CHECK(std::fabs(saps.omega[j] - acps.omega[j]) < 1e-12);
        const auto [rho, corr] = oracle::loo_jackknife(to_vec(view.response()), to_vec(view.feature(j)),
                                                       to_vec(view.conditional()));
        CHECK(std::fabs(saps.omega[j] - std::fabs(rho)) < 1e-12);
        CHECK(std::fabs(jdps.omega[j] - std::fabs(rho - corr)) < 1e-10);
    }
}

TEST_CASE("JDPS utility is invariant to negating a feature") {
    std::mt19937_64 rng(7);
    Dataset d = random_dataset(rng, 40, 3);
    const auto before = compute_utilities(shard_dataset(d, 2), Method::Jdps);
    const auto s_before = summarize_shard(shard_dataset(d, 2).shard(0), Method::Jdps);
    d.features.col(1) *= -1.0;
    const auto after = compute_utilities(shard_dataset(d, 2), Method::Jdps);
    const auto s_after = summarize_shard(shard_dataset(d, 2).shard(0), Method::Jdps);
    CHECK(std::fabs(before.omega[1] - after.omega[1]) < 1e-14);
    CHECK(std::fabs(s_before.local[1] + s_after.local[1]) < 1e-14);
    CHECK(std::fabs(s_before.correction[1] + s_after.correction[1]) < 1e-12);
}

TEST_CASE("summaries need enough rows") {
    std::mt19937_64 rng(8);
    const Dataset d = random_dataset(rng, 3, 2);
    const ShardView v(d.response, d.conditional, d.features);
    CHECK_NOTHROW(summarize_shard(v, Method::Saps));
    CHECK(code_of([&] { summarize_shard(v, Method::Jdps); }) == ErrorCode::InsufficientSamples);
}

TEST_CASE("select rules") {
    const std::vector<double> u{0.9, 0.1, 0.5};
    CHECK(select(u, SelectionRule::top_d(2)).selected == std::vector<std::size_t>{0, 2});
    CHECK(select(u, SelectionRule::threshold(0.5)).selected == std::vector<std::size_t>{0, 2});
    const std::vector<double> tied{0.5, 0.5, 0.2};
    CHECK(select(tied, SelectionRule::top_d(1)).selected == std::vector<std::size_t>{0});
    CHECK(select(tied, SelectionRule::top_d(1)).ranking == std::vector<std::size_t>{0, 1, 2});

    const std::vector<double> zeros{0.3, 0.0, 0.0};
    CHECK(select(zeros, SelectionRule::top_d(3)).selected.size() == 1);

    CHECK(code_of([&] { select(u, SelectionRule::top_d(0)); }) == ErrorCode::InvalidRule);
    CHECK(code_of([&] { select(u, SelectionRule::threshold(-1.0)); }) == ErrorCode::InvalidRule);
    const std::vector<double> bad{0.1, NAN};
    CHECK(code_of([&] { select(bad, SelectionRule::top_d(1)); }) == ErrorCode::InvalidArgument);

    CHECK(to_string(parse_rule("topd:12")) == "topd:12");
    CHECK(parse_rule("gamma:0.25").gamma == 0.25);
    CHECK(code_of([&] { parse_rule("top:3"); }) == ErrorCode::InvalidRule);
    CHECK(code_of([&] { parse_rule("topd:0"); }) == ErrorCode::InvalidRule);
    CHECK(parse_method("JdPs") == Method::Jdps);
}

TEST_CASE("shard summary wire format round trip") {
    std::mt19937_64 rng(9);
    Dataset d = random_dataset(rng, 25, 4);
    d.features.col(3) = d.conditional;
    const auto sharded = shard_dataset(d, 1);
    for (Method m : {Method::Saps, Method::Acps, Method::Jdps}) {
        const auto s = summarize_shard(sharded.shard(0), m);
        std::stringstream buf(std::ios::in | std::ios::out | std::ios::binary);
        write_summary(buf, s);
        const std::string bytes = buf.str();
        CHECK(bytes.substr(0, 4) == "SSCR");
        const std::size_t width = m == Method::Acps ? 9 : (m == Method::Saps ? 1 : 2);
        CHECK(bytes.size() == 4 + 2 + 1 + 8 + 8 + 4 * width * 8);
        const auto back = read_summary(buf);
        CHECK(back.method == m);
        CHECK(back.shard_size == 25);
        const std::vector<ShardSummary> a{s}, b{back};
        const auto ua = aggregate(a, m), ub = aggregate(b, m);
        CHECK(ua.omega == ub.omega);
        CHECK(ua.unreliable == ub.unreliable);
    }
    std::stringstream junk("XXXX");
    CHECK(code_of([&] { read_summary(junk); }) == ErrorCode::Parse);
    const auto s = summarize_shard(sharded.shard(0), Method::Saps);
    std::stringstream buf;
    write_summary(buf, s);
    std::stringstream cut(buf.str().substr(0, buf.str().size() - 3));
    CHECK(code_of([&] { read_summary(cut); }) == ErrorCode::Parse);
}
