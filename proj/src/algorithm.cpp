#include "shardscreen/algorithm.hpp"
#include "shardscreen/error.hpp"
#include "shardscreen/parallel.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace shardscreen {

namespace {

struct ShardStage {
    SecondStageShard data;
    ShardKnockoffAudit audit;
};

ShardStage build_shard_stage(const ShardView& view, const std::vector<std::size_t>& columns,
                             SConstruction s_method, std::uint64_t seed) {
    const auto rows = static_cast<Eigen::Index>(view.rows());
    const auto d = static_cast<Eigen::Index>(columns.size());
    Eigen::MatrixXd block(rows, d);
    for (Eigen::Index c = 0; c < d; ++c) {
        const auto col = view.feature(columns[static_cast<std::size_t>(c)]);
        block.col(c) = Eigen::Map<const Eigen::VectorXd>(col.data(), rows);
    }

    ShardStage out;
    ScaledBlock scaled;
    try {
        scaled = scale_block(block);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::ConstantColumn && e.index()) {
            const std::size_t feature = columns[*e.index()];
            throw Error(e.code(), "feature " + std::to_string(feature) + " is constant", feature);
        }
        throw;
    }
    Eigen::MatrixXd gram = scaled.gram;
    if (min_eigenvalue(gram) <= KnockoffTolerances::eig_floor) {
        gram = ridge_gram(gram);
        out.audit.ridged = true;
    }

    Eigen::VectorXd s;
    if (s_method == SConstruction::Sdp) {
        SdpSolution sol = knockoff_s_sdp(gram);
        s = std::move(sol.s);
        out.audit.sdp_fell_back = sol.fell_back;
    } else {
        s = knockoff_s_equi(gram);
    }
    if (d > 0) {
        out.audit.s_min = s.minCoeff();
        out.audit.s_mean = s.mean();
        out.audit.s_max = s.maxCoeff();
    }

    KnockoffModel model = generate_knockoffs(scaled.scaled, gram, s, seed);
    const auto y = view.response();
    const auto z = view.conditional();
    out.data.response = Eigen::Map<const Eigen::VectorXd>(y.data(), rows);
    out.data.conditional = Eigen::Map<const Eigen::VectorXd>(z.data(), rows);
    out.data.real = std::move(scaled.scaled);
    out.data.knock = std::move(model.knockoffs);
    return out;
}

nlohmann::json number_or_null(double v) {
    if (std::isfinite(v)) return v;
    return nullptr;
}

} // namespace

Split resolve_split(std::size_t shard_rows, std::size_t d, std::size_t n1, std::size_t n2) {
    const std::size_t n = shard_rows;
    Split split;
    split.d = d;
    if (split.d == 0 && n > 1) {
        split.d = static_cast<std::size_t>(std::floor(static_cast<double>(n) /
                                                      std::log(static_cast<double>(n))));
    }
    if (n2 != 0) {
        split.n2 = n2;
    } else if (n > 3) {
        split.n2 = std::min(n - 3, std::max(2 * split.d + 10, (2 * n) / 3));
    }
    if (d == 0 && split.n2 > 0 && 2 * split.d >= split.n2) split.d = (split.n2 - 1) / 2;
    if (n1 != 0) {
        split.n1 = n1;
    } else {
        split.n1 = n > split.n2 ? n - split.n2 : 0;
    }
    return split;
}

KnockoffRun run_knockoff_screen(const ShardedDataset& data, const KnockoffConfig& config) {
    if (!(config.alpha >= 0.0 && config.alpha <= 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "alpha must lie in [0, 1]");
    }
    const std::size_t K = data.num_shards();
    std::size_t min_rows = std::numeric_limits<std::size_t>::max();
    for (std::size_t k = 0; k < K; ++k) min_rows = std::min(min_rows, data.shard_size(k));

    KnockoffRun run;
    run.config = config;
    run.num_shards = K;
    run.split = resolve_split(min_rows, config.d, config.n1, config.n2);
    const Split& split = run.split;
    if (split.d == 0) {
        throw Error(ErrorCode::InvalidArgument, "first-stage size d must be positive");
    }
    if (split.n2 <= 2 * split.d) {
        throw Error(ErrorCode::SplitTooSmall, "second-stage rows n2 = " + std::to_string(split.n2) +
                                                  " must exceed 2d = " + std::to_string(2 * split.d));
    }
    if (split.n1 == 0 || split.n1 + split.n2 > min_rows) {
        throw Error(ErrorCode::InvalidArgument,
                    "split n1 = " + std::to_string(split.n1) + ", n2 = " + std::to_string(split.n2) +
                        " does not fit shards of " + std::to_string(min_rows) + " rows");
    }

    std::vector<ShardView> first;
    std::vector<ShardView> second;
    first.reserve(K);
    second.reserve(K);
    for (std::size_t k = 0; k < K; ++k) {
        const ShardView view = data.shard(k);
        first.push_back(view.slice(0, split.n1));
        second.push_back(view.slice(split.n1, split.n2));
    }

    run.first_stage_utilities = compute_utilities(first, config.method);
    run.first_stage = select(run.first_stage_utilities, SelectionRule::top_d(split.d)).selected;

    std::vector<ShardStage> stages(K);
    parallel_for(K, [&](std::size_t k) {
        try {
            stages[k] = build_shard_stage(second[k], run.first_stage, config.s_method,
                                          mix_seed(config.seed, k));
        } catch (const Error& e) {
            throw Error(e.code(), "shard " + std::to_string(k) + ": " + e.what(), e.index());
        }
    });

    std::vector<SecondStageShard> shards;
    shards.reserve(K);
    run.shards.reserve(K);
    for (auto& st : stages) {
        shards.push_back(std::move(st.data));
        run.shards.push_back(st.audit);
    }
    if (!run.first_stage.empty()) run.stats = knockoff_stats(shards, config.method);
    return with_alpha(run, config.alpha);
}

KnockoffRun with_alpha(const KnockoffRun& run, double alpha) {
    KnockoffRun out = run;
    out.config.alpha = alpha;
    out.selection = select_threshold(out.stats.psi, alpha);
    out.selected.clear();
    for (std::size_t pos : out.selection.selected) out.selected.push_back(out.first_stage[pos]);
    return out;
}

void write_audit_json(const KnockoffRun& run, const std::vector<std::string>& feature_names,
                      std::ostream& out) {
    auto name_of = [&](std::size_t j) {
        return j < feature_names.size() ? feature_names[j] : std::to_string(j);
    };
    nlohmann::json doc;
    doc["method"] = std::string(to_string(run.config.method));
    doc["s_construction"] =
        run.config.s_method == SConstruction::Sdp ? "sdp" : "equicorrelated";
    doc["shards"] = run.num_shards;
    doc["n1"] = run.split.n1;
    doc["n2"] = run.split.n2;
    doc["d"] = run.split.d;
    doc["alpha"] = run.config.alpha;
    doc["seed"] = run.config.seed;

    nlohmann::json first = nlohmann::json::array();
    for (std::size_t i = 0; i < run.first_stage.size(); ++i) {
        const std::size_t j = run.first_stage[i];
        nlohmann::json entry{{"index", j},
                             {"name", name_of(j)},
                             {"utility", run.first_stage_utilities.omega[j]}};
        if (i < run.stats.psi.size()) {
            entry["psi"] = run.stats.psi[i];
            entry["omega_real"] = run.stats.omega_real[i];
            entry["omega_knock"] = run.stats.omega_knock[i];
        }
        first.push_back(std::move(entry));
    }
    doc["first_stage"] = std::move(first);

    nlohmann::json shards = nlohmann::json::array();
    for (std::size_t k = 0; k < run.shards.size(); ++k) {
        const auto& a = run.shards[k];
        shards.push_back({{"shard", k},
                          {"s_min", a.s_min},
                          {"s_mean", a.s_mean},
                          {"s_max", a.s_max},
                          {"ridged", a.ridged},
                          {"sdp_fell_back", a.sdp_fell_back}});
    }
    doc["shard_s"] = std::move(shards);

    doc["threshold"] = number_or_null(run.selection.threshold);
    doc["fdp_hat"] = number_or_null(run.selection.fdp_hat_at_threshold);
    nlohmann::json selected = nlohmann::json::array();
    for (std::size_t j : run.selected) selected.push_back({{"index", j}, {"name", name_of(j)}});
    doc["selected"] = std::move(selected);
    out << doc.dump(2) << '\n';
}

} // namespace shardscreen
