// Acceptance runner: one PASS/FAIL line per criterion. Pass criterion
// numbers as arguments to run a subset.

#include "oracles.hpp"

#include "shardscreen/algorithm.hpp"
#include "shardscreen/knockoff.hpp"
#include "shardscreen/metrics.hpp"
#include "shardscreen/moments.hpp"
#include "shardscreen/shard_engine.hpp"
#include "shardscreen/simulate.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <set>
#include <string>
#include <vector>

using namespace shardscreen;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

std::string sci(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

Eigen::MatrixXd gaussian(std::mt19937_64& rng, Eigen::Index n, Eigen::Index p) {
    std::normal_distribution<double> nd;
    Eigen::MatrixXd m(n, p);
    for (Eigen::Index j = 0; j < p; ++j)
        for (Eigen::Index i = 0; i < n; ++i) m(i, j) = nd(rng);
    return m;
}

Outcome acps_exactness() {
    std::mt19937_64 rng(101);
    const std::size_t Ks[] = {1, 2, 5, 10};
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const auto n = static_cast<Eigen::Index>(30 + rng() % 1971);
        const auto p = static_cast<Eigen::Index>(1 + rng() % 50);
        Dataset d;
        d.conditional = gaussian(rng, n, 1).col(0);
        d.features = gaussian(rng, n, p);
        d.features.col(0) += 0.7 * d.conditional;
        d.response = 0.5 * d.conditional + d.features.col(0) + gaussian(rng, n, 1).col(0);
        // shift and scale away from the origin so moment cancellation is exercised
        d.features.array() = d.features.array() * 3.0 + 2.0;
        for (Eigen::Index j = 0; j < p; ++j) d.feature_names.push_back("f" + std::to_string(j));
        d.validate();

        const auto central = compute_utilities(shard_dataset(d, 1), Method::Acps).omega;
        const std::size_t K = Ks[trial % 4];
        const auto sharded = compute_utilities(shard_dataset(d, K, {true, static_cast<std::uint64_t>(trial)}),
                                               Method::Acps)
                                 .omega;
        for (Eigen::Index j = 0; j < p; ++j) {
            const double c = central[static_cast<std::size_t>(j)];
            const double s = sharded[static_cast<std::size_t>(j)];
            worst = std::max(worst, std::fabs(s - c) / std::fabs(c));
        }
    }
    return {worst <= 1e-12, "max relative deviation " + sci(worst)};
}

Outcome partial_oracle() {
    std::mt19937_64 rng(202);
    std::uniform_real_distribution<double> unif(-0.9, 0.9);
    double worst = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 4 + rng() % 500;
        const auto z = oracle::normal_vector(rng, n);
        auto x = oracle::normal_vector(rng, n);
        auto y = oracle::normal_vector(rng, n);
        const double a = unif(rng), b = unif(rng), c = unif(rng);
        for (std::size_t i = 0; i < n; ++i) {
            x[i] = 5.0 + a * z[i] + x[i];
            y[i] = -1.0 + b * z[i] + c * x[i] + y[i];
        }
        const double fast = partial_correlation(accumulate_moments({y, x, z}));
        worst = std::max(worst, std::fabs(fast - oracle::residual_partial(y, x, z)));
    }
    return {worst <= 1e-9, "max abs deviation " + sci(worst)};
}

Outcome jackknife_oracle() {
    std::mt19937_64 rng(303);
    double worst = 0.0;
    std::size_t cases = 0;
    for (std::size_t n = 5; n <= 50; ++n) {
        for (int rep = 0; rep < 4; ++rep) {
            const auto z = oracle::normal_vector(rng, n);
            auto x = oracle::normal_vector(rng, n);
            auto y = oracle::normal_vector(rng, n);
            for (std::size_t i = 0; i < n; ++i) {
                x[i] += 0.4 * z[i];
                y[i] += 0.6 * x[i] - 0.3 * z[i];
            }
            const auto fast = jackknife_feature({y, x, z});
            if (fast.status != EntryStatus::Ok) return {false, "unexpected status at n=" + std::to_string(n)};
            const auto [rho, corr] = oracle::loo_jackknife(y, x, z);
            worst = std::max({worst, std::fabs(fast.local - rho), std::fabs(fast.correction - corr)});
            ++cases;
        }
    }
    return {worst <= 1e-10, std::to_string(cases) + " shards, max abs deviation " + sci(worst)};
}

double rel_frob(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double scale) {
    return (a - b).norm() / scale;
}

Outcome gram_identities() {
    std::mt19937_64 rng(404);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const auto d = static_cast<Eigen::Index>(1 + rng() % 40);
        const auto n = 2 * d + 1 + static_cast<Eigen::Index>(rng() % 200);
        // AR(1)-correlated columns
        const double r = 0.2 + 0.7 * static_cast<double>(trial % 4) / 3.0;
        Eigen::MatrixXd x = gaussian(rng, n, d);
        for (Eigen::Index j = 1; j < d; ++j) x.col(j) = r * x.col(j - 1) + std::sqrt(1 - r * r) * x.col(j);

        const auto sb = scale_block(x);
        Eigen::MatrixXd gram = sb.gram;
        if (min_eigenvalue(gram) <= KnockoffTolerances::eig_floor) gram = ridge_gram(gram);
        const Eigen::VectorXd s = trial % 2 ? knockoff_s_sdp(gram).s : knockoff_s_equi(gram);
        const auto m = generate_knockoffs(sb.scaled, gram, s, static_cast<std::uint64_t>(trial));

        const double scale = gram.norm();
        const Eigen::MatrixXd both = [&] {
            Eigen::MatrixXd c(n, 2 * d);
            c << sb.scaled, m.knockoffs;
            return oracle::naive_gram(c);
        }();
        const Eigen::MatrixXd sigma_minus = gram - Eigen::MatrixXd(s.asDiagonal());
        Eigen::MatrixXd ux(d, d);
        for (Eigen::Index i = 0; i < d; ++i)
            for (Eigen::Index j = 0; j < d; ++j) {
                long double acc = 0;
                for (Eigen::Index k = 0; k < n; ++k)
                    acc += static_cast<long double>(m.ortho_basis(k, i)) * sb.scaled(k, j);
                ux(i, j) = static_cast<double>(acc);
            }
        worst = std::max({worst, rel_frob(both.bottomRightCorner(d, d), gram, scale),
                          rel_frob(both.topRightCorner(d, d), sigma_minus, scale), ux.norm() / scale});
    }
    return {worst <= 1e-8, "max relative Frobenius residual " + sci(worst)};
}

Outcome threshold_oracle() {
    std::mt19937_64 rng(505);
    std::uniform_real_distribution<double> unif(-0.5, 1.0);
    std::size_t mismatches = 0;
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t p = 1 + rng() % 100;
        std::vector<double> psi(p);
        const bool coarse = trial % 2 == 0;
        for (double& v : psi) v = coarse ? std::round(unif(rng) * 20.0) / 20.0 : unif(rng);
        const double alpha = 0.05 * static_cast<double>(1 + rng() % 20);
        const auto sel = select_threshold(psi, alpha);
        const double t = oracle::brute_threshold(psi, alpha);
        std::vector<std::size_t> expected;
        for (std::size_t j = 0; j < p; ++j)
            if (psi[j] >= t) expected.push_back(j);
        if (sel.threshold != t || sel.selected != expected) ++mismatches;
    }
    return {mismatches == 0, std::to_string(mismatches) + " mismatches in 500 vectors"};
}

SimConfig accuracy_config() {
    SimConfig cfg;
    cfg.N = 10000;
    cfg.p = 3000;
    cfg.c = 0.02;
    cfg.model = Model::A;
    cfg.conditional_index = 1;
    cfg.K = 20;
    cfg.reps = 50;
    cfg.seed = 2024;
    cfg.methods = {Method::Acps};
    cfg.timing = false;
    return cfg;
}

const ExperimentReport& accuracy_report() {
    static const ExperimentReport report = run_replications(accuracy_config());
    return report;
}

Outcome screening_accuracy() {
    const auto& s = accuracy_report().summary.at(0);
    const bool ok = s.auc >= 0.995 && std::fabs(s.auc - 0.9987) <= 0.005 && s.ssr == 1.0 && s.psr == 1.0;
    return {ok, "AUC " + fmt(s.auc) + ", SSR " + fmt(s.ssr) + ", PSR " + fmt(s.psr) + ", MS quantiles " +
                    fmt(s.ms_q05) + "/" + fmt(s.ms_q50) + "/" + fmt(s.ms_q95)};
}

Outcome fdr_control() {
    SimConfig cfg;
    cfg.N = 10000;
    cfg.p = 5000;
    cfg.c = 0.725;
    cfg.model = Model::A;
    cfg.conditional_index = 1;
    cfg.K = 20;
    cfg.reps = 50;
    cfg.seed = 3033;
    cfg.methods = {Method::Saps, Method::Acps, Method::Jdps};
    cfg.pipeline = Pipeline::Knockoff;
    cfg.alphas = {0.2, 0.1};
    cfg.timing = false;
    const auto report = run_replications(cfg);
    bool ok = true;
    std::string detail;
    for (const auto& row : report.summary) {
        const bool row_ok = row.alpha == 0.2 ? (row.fdr <= 0.25 && row.ssr >= 0.95)
                                             : (row.ssr <= 0.5 && row.fdr <= 0.15);
        ok = ok && row_ok;
        detail += std::string(to_string(row.method)) + "@" + fmt(row.alpha) + " FDR " + fmt(row.fdr) +
                  " SSR " + fmt(row.ssr) + (row_ok ? "" : " (!)") + "; ";
    }
    detail.resize(detail.size() - 2);
    return {ok, detail};
}

Outcome null_sign_balance() {
    // c = 0: the response is pure noise, so every first-stage feature is null.
    SimConfig cfg;
    cfg.N = 2000;
    cfg.p = 200;
    cfg.c = 0.0;
    cfg.K = 5;
    cfg.seed = 808;
    std::size_t positive = 0, nonzero = 0;
    for (std::size_t rep = 0; rep < 200; ++rep) {
        Replication r = make_replication(cfg, rep);
        const auto data = shard_dataset(std::move(r.data), cfg.K);
        KnockoffConfig kc;
        kc.method = Method::Saps;
        kc.seed = rep;
        const auto run = run_knockoff_screen(data, kc);
        for (double v : run.stats.psi) {
            if (v == 0.0) continue;
            ++nonzero;
            if (v > 0.0) ++positive;
        }
    }
    const double frac = static_cast<double>(positive) / static_cast<double>(nonzero);
    return {frac >= 0.4 && frac <= 0.6,
            "positive fraction " + fmt(frac) + " over " + std::to_string(nonzero) + " null statistics"};
}

Outcome ranking_consistency() {
    const auto& report = accuracy_report();
    std::size_t separated = 0;
    for (const auto& r : report.records) separated += r.separated ? 1 : 0;
    const double frac = static_cast<double>(separated) / static_cast<double>(report.records.size());
    return {frac >= 0.9, "separated in " + std::to_string(separated) + "/" +
                             std::to_string(report.records.size()) + " replications"};
}

Outcome auc_oracle() {
    std::mt19937_64 rng(1010);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    double worst = 0.0;
    for (int trial = 0; trial < 2000; ++trial) {
        const std::size_t p = 2 + rng() % 199;
        std::vector<double> u(p);
        const double grid = trial % 3 == 0 ? 10.0 : 1e9;  // some trials force ties
        for (double& v : u) v = std::round(unif(rng) * grid) / grid;
        std::vector<std::size_t> imp;
        for (std::size_t j = 0; j < p; ++j)
            if (unif(rng) < 0.2) imp.push_back(j);
        if (imp.empty()) imp.push_back(rng() % p);
        if (imp.size() == p) imp.pop_back();
        worst = std::max(worst, std::fabs(auc(imp, u) - oracle::double_sum_auc(imp, u)));
    }
    return {worst <= 1e-12, "2000 inputs, max abs deviation " + sci(worst)};
}

struct Criterion {
    int id;
    const char* name;
    double time_limit;  // seconds, 0 when unbounded
    std::function<Outcome()> run;
};

} // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> criteria{
        {1, "ACPS exactness", 10.0, acps_exactness},
        {2, "partial-correlation oracle", 5.0, partial_oracle},
        {3, "jackknife oracle", 10.0, jackknife_oracle},
        {4, "knockoff Gram identities", 30.0, gram_identities},
        {5, "threshold oracle", 5.0, threshold_oracle},
        {6, "screening accuracy", 0.0, screening_accuracy},
        {7, "knockoff FDR control", 0.0, fdr_control},
        {8, "null-sign balance", 0.0, null_sign_balance},
        {9, "ranking consistency", 0.0, ranking_consistency},
        {10, "AUC oracle", 0.0, auc_oracle},
    };
    std::set<int> wanted;
    for (int i = 1; i < argc; ++i) wanted.insert(std::stoi(argv[i]));

    int failures = 0;
    for (const auto& c : criteria) {
        if (!wanted.empty() && !wanted.count(c.id)) continue;
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (c.time_limit > 0.0 && secs >= c.time_limit) {
            o.pass = false;
            o.detail += "; over the " + fmt(c.time_limit) + " s budget";
        }
        std::printf("criterion %2d %-30s %s  %s  [%.1f s]\n", c.id, c.name, o.pass ? "PASS" : "FAIL",
                    o.detail.c_str(), secs);
        std::fflush(stdout);
        failures += o.pass ? 0 : 1;
    }
    return failures == 0 ? 0 : 1;
}
