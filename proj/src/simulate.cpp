#include "shardscreen/simulate.hpp"
#include "shardscreen/error.hpp"
#include "shardscreen/metrics.hpp"
#include "shardscreen/parallel.hpp"
#include "shardscreen/text.hpp"

#include <boost/random/mersenne_twister.hpp>
#include <boost/random/normal_distribution.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

namespace shardscreen {

namespace {

constexpr std::size_t kRowBlock = 1024;

// Sub-stream tags under a replication seed.
constexpr std::uint64_t kFeatureStream = 0;
constexpr std::uint64_t kNoiseStream = 1;
constexpr std::uint64_t kKnockoffStream = 2;

std::size_t as_size(const nlohmann::json& v, const char* key) {
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
        throw Error(ErrorCode::Parse, std::string("config key '") + key + "' must be a nonnegative integer");
    }
    return v.get<std::size_t>();
}

Model parse_model(const std::string& text) {
    if (text == "a" || text == "A") return Model::A;
    if (text == "b" || text == "B") return Model::B;
    throw Error(ErrorCode::Parse, "model must be 'a' or 'b', got '" + text + "'");
}

struct Timer {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double millis() const {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
            .count();
    }
};

bool separated(const std::vector<std::size_t>& important, std::span<const double> utilities) {
    std::vector<std::uint8_t> mask(utilities.size(), 0);
    for (std::size_t j : important) mask[j] = 1;
    double min_important = std::numeric_limits<double>::infinity();
    double max_other = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < utilities.size(); ++j) {
        if (mask[j]) {
            min_important = std::min(min_important, utilities[j]);
        } else {
            max_other = std::max(max_other, utilities[j]);
        }
    }
    return min_important > max_other;
}

RepRecord score(std::size_t rep, Method method, double alpha, const TruthSet& truth,
                const SimConfig& config, std::span<const double> utilities,
                std::span<const std::size_t> selected) {
    RepRecord r;
    r.rep = rep;
    r.method = method;
    r.alpha = alpha;
    r.ssr = ssr_indicator(truth.important, selected);
    r.psr = psr(truth.important, selected);
    r.fdr = fdr_realized(truth.important, selected);
    r.auc = auc(truth.important, utilities);
    r.ms = minimum_model_size(truth.important, utilities);
    if (config.size_convention == SizeConvention::CountConditional && truth.conditional_important) {
        r.ms += 1;
    }
    r.separated = separated(truth.important, utilities);
    r.num_selected = selected.size();
    return r;
}

} // namespace

void SimConfig::validate() const {
    if (K == 0 || N < 3 * K) {
        throw Error(ErrorCode::InvalidArgument, "N must be at least 3K");
    }
    if (p < 10) throw Error(ErrorCode::InvalidArgument, "p must be at least 10");
    if (reps == 0) throw Error(ErrorCode::InvalidArgument, "reps must be positive");
    if (conditional_index < 1 || conditional_index > p) {
        throw Error(ErrorCode::InvalidArgument, "conditional index must lie in 1..p");
    }
    if (methods.empty()) throw Error(ErrorCode::InvalidArgument, "no screening method given");
    if (pipeline == Pipeline::Knockoff) {
        if (alphas.empty()) throw Error(ErrorCode::InvalidArgument, "no alpha level given");
        for (double a : alphas) {
            if (!(a >= 0.0 && a <= 1.0)) {
                throw Error(ErrorCode::InvalidArgument, "alpha must lie in [0, 1]");
            }
        }
    }
}

SimConfig parse_sim_config(const std::string& json_text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Parse, std::string("config: ") + e.what());
    }
    if (!doc.is_object()) throw Error(ErrorCode::Parse, "config must be a JSON object");

    SimConfig cfg;
    try {
        for (const auto& [key, v] : doc.items()) {
            if (key == "N") {
                cfg.N = as_size(v, "N");
            } else if (key == "p") {
                cfg.p = as_size(v, "p");
            } else if (key == "c") {
                cfg.c = v.get<double>();
            } else if (key == "model") {
                cfg.model = parse_model(v.get<std::string>());
            } else if (key == "conditional") {
                cfg.conditional_index = as_size(v, "conditional");
            } else if (key == "K") {
                cfg.K = as_size(v, "K");
            } else if (key == "reps") {
                cfg.reps = as_size(v, "reps");
            } else if (key == "seed") {
                cfg.seed = v.get<std::uint64_t>();
            } else if (key == "method") {
                cfg.methods = {parse_method(v.get<std::string>())};
            } else if (key == "methods") {
                cfg.methods.clear();
                for (const auto& m : v) cfg.methods.push_back(parse_method(m.get<std::string>()));
            } else if (key == "pipeline") {
                const auto text = v.get<std::string>();
                if (text == "screen") {
                    cfg.pipeline = Pipeline::Screen;
                } else if (text == "knockoff") {
                    cfg.pipeline = Pipeline::Knockoff;
                } else {
                    throw Error(ErrorCode::Parse, "pipeline must be 'screen' or 'knockoff'");
                }
            } else if (key == "rule") {
                cfg.rule = parse_rule(v.get<std::string>());
            } else if (key == "alpha") {
                cfg.alphas = {v.get<double>()};
            } else if (key == "alphas") {
                cfg.alphas = v.get<std::vector<double>>();
            } else if (key == "d") {
                cfg.d = as_size(v, "d");
            } else if (key == "n1") {
                cfg.n1 = as_size(v, "n1");
            } else if (key == "n2") {
                cfg.n2 = as_size(v, "n2");
            } else if (key == "s_construction") {
                const auto text = v.get<std::string>();
                if (text == "equicorrelated") {
                    cfg.s_method = SConstruction::Equicorrelated;
                } else if (text == "sdp") {
                    cfg.s_method = SConstruction::Sdp;
                } else {
                    throw Error(ErrorCode::Parse, "s_construction must be 'equicorrelated' or 'sdp'");
                }
            } else if (key == "ms_convention") {
                const auto text = v.get<std::string>();
                if (text == "exclude") {
                    cfg.size_convention = SizeConvention::ExcludeConditional;
                } else if (text == "count") {
                    cfg.size_convention = SizeConvention::CountConditional;
                } else {
                    throw Error(ErrorCode::Parse, "ms_convention must be 'exclude' or 'count'");
                }
            } else if (key == "timing") {
                cfg.timing = v.get<bool>();
            } else {
                throw Error(ErrorCode::Parse, "unknown config key '" + key + "'");
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Parse, std::string("config: ") + e.what());
    } catch (const Error& e) {
        if (e.code() == ErrorCode::InvalidArgument || e.code() == ErrorCode::InvalidRule) {
            throw Error(ErrorCode::Parse, std::string("config: ") + e.what());
        }
        throw;
    }
    cfg.validate();
    return cfg;
}

SimConfig read_sim_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open config '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_sim_config(buf.str());
}

Eigen::MatrixXd sample_ar1_features(std::size_t N, std::size_t p, std::uint64_t seed) {
    Eigen::MatrixXd x(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(p));
    const double innovation = std::sqrt(0.75);
    const std::size_t blocks = (N + kRowBlock - 1) / kRowBlock;
    parallel_for(blocks, [&](std::size_t b) {
        boost::random::mt19937_64 rng(mix_seed(seed, b));
        boost::random::normal_distribution<double> normal;
        const auto begin = static_cast<Eigen::Index>(b * kRowBlock);
        const auto rows = static_cast<Eigen::Index>(std::min(kRowBlock, N - b * kRowBlock));
        for (Eigen::Index i = begin; i < begin + rows; ++i) x(i, 0) = normal(rng);
        for (Eigen::Index j = 1; j < static_cast<Eigen::Index>(p); ++j) {
            const double* prev = x.col(j - 1).data();
            double* cur = x.col(j).data();
            for (Eigen::Index i = begin; i < begin + rows; ++i) {
                cur[i] = 0.5 * prev[i] + innovation * normal(rng);
            }
        }
    });
    return x;
}

std::vector<std::size_t> important_features(Model model) {
    if (model == Model::A) return {0, 2, 3, 4, 5, 6, 7, 8};
    return {0, 1, 2, 3, 4};
}

Eigen::VectorXd generate_response(const Eigen::MatrixXd& features, Model model, double c,
                                  const Eigen::VectorXd& noise) {
    const Eigen::Index needed = model == Model::A ? 9 : 5;
    if (features.cols() < needed) {
        throw Error(ErrorCode::ModelRequiresMoreFeatures,
                    std::string("model ") + (model == Model::A ? "a" : "b") + " needs at least " +
                        std::to_string(needed) + " features, got " + std::to_string(features.cols()));
    }
    if (noise.size() != features.rows()) {
        throw Error(ErrorCode::InvalidArgument, "noise length does not match the feature rows");
    }
    Eigen::VectorXd y(features.rows());
    if (model == Model::A) {
        y = features.col(0);
        for (Eigen::Index j = 2; j <= 8; ++j) y += features.col(j);
    } else {
        const double two_pi = 2.0 * std::numbers::pi;
        y = 2.0 * features.col(0) + 3.0 * features.col(1) + 1.5 * features.col(2) +
            2.0 * features.col(3) +
            2.0 * features.col(4).unaryExpr([two_pi](double v) { return std::sin(two_pi * v); });
    }
    return c * y + noise;
}

Eigen::VectorXd generate_response(const Eigen::MatrixXd& features, Model model, double c,
                                  std::uint64_t seed) {
    boost::random::mt19937_64 rng(seed);
    boost::random::normal_distribution<double> normal;
    Eigen::VectorXd noise(features.rows());
    for (Eigen::Index i = 0; i < noise.size(); ++i) noise(i) = normal(rng);
    return generate_response(features, model, c, noise);
}

TruthSet screened_truth(Model model, std::size_t p, std::size_t conditional_index) {
    if (conditional_index < 1 || conditional_index > p) {
        throw Error(ErrorCode::InvalidArgument, "conditional index must lie in 1..p");
    }
    TruthSet truth;
    truth.conditional = conditional_index - 1;
    for (std::size_t j : important_features(model)) {
        if (j >= p) continue;
        if (j == truth.conditional) {
            truth.conditional_important = true;
            continue;
        }
        truth.important.push_back(j > truth.conditional ? j - 1 : j);
    }
    if (truth.important.empty() || truth.important.size() + 1 >= p) {
        throw Error(ErrorCode::DegenerateTruth, "screened truth set is empty or covers every feature");
    }
    return truth;
}

Replication make_replication(const SimConfig& config, std::size_t rep) {
    const std::uint64_t rep_seed = mix_seed(config.seed, rep);
    Replication out;
    out.truth = screened_truth(config.model, config.p, config.conditional_index);

    Eigen::MatrixXd x = sample_ar1_features(config.N, config.p, mix_seed(rep_seed, kFeatureStream));
    out.data.response = generate_response(x, config.model, config.c, mix_seed(rep_seed, kNoiseStream));

    const auto zc = static_cast<Eigen::Index>(out.truth.conditional);
    const auto p = static_cast<Eigen::Index>(config.p);
    out.data.conditional = x.col(zc);
    // Shift the remaining columns left in place; avoids a second N x p copy.
    for (Eigen::Index j = zc; j + 1 < p; ++j) x.col(j) = x.col(j + 1);
    x.conservativeResize(Eigen::NoChange, p - 1);
    out.data.features = std::move(x);

    out.data.feature_names.reserve(config.p - 1);
    for (std::size_t j = 0; j < config.p; ++j) {
        if (j != out.truth.conditional) out.data.feature_names.push_back("X" + std::to_string(j + 1));
    }
    out.data.conditional_name = "X" + std::to_string(config.conditional_index);
    return out;
}

ExperimentReport run_replications(const SimConfig& config,
                                  const std::function<void(std::size_t)>& on_rep_done) {
    config.validate();
    ExperimentReport report;
    report.config = config;
    const SelectionRule rule = config.rule.value_or(SelectionRule::top_d(static_cast<std::size_t>(
        std::floor(static_cast<double>(config.N) / std::log(static_cast<double>(config.N))))));

    for (std::size_t rep = 0; rep < config.reps; ++rep) {
        try {
            Replication r = make_replication(config, rep);
            const TruthSet truth = r.truth;
            const ShardedDataset sharded = shard_dataset(std::move(r.data), config.K);
            for (Method method : config.methods) {
                const Timer timer;
                if (config.pipeline == Pipeline::Screen) {
                    const ScreeningResult res = select(compute_utilities(sharded, method), rule);
                    RepRecord rec = score(rep, method, 0.0, truth, config, res.utilities, res.selected);
                    rec.wall_millis = config.timing ? timer.millis() : 0.0;
                    report.records.push_back(rec);
                    continue;
                }
                KnockoffConfig kc;
                kc.alpha = config.alphas.front();
                kc.d = config.d;
                kc.n1 = config.n1;
                kc.n2 = config.n2;
                kc.method = method;
                kc.s_method = config.s_method;
                kc.seed = mix_seed(mix_seed(config.seed, rep), kKnockoffStream);
                const KnockoffRun run = run_knockoff_screen(sharded, kc);
                const double millis = config.timing ? timer.millis() : 0.0;
                for (double alpha : config.alphas) {
                    const KnockoffRun at = with_alpha(run, alpha);
                    RepRecord rec = score(rep, method, alpha, truth, config,
                                          at.first_stage_utilities.omega, at.selected);
                    rec.wall_millis = millis;
                    report.records.push_back(rec);
                }
            }
        } catch (const Error& e) {
            throw Error(e.code(), "replication " + std::to_string(rep) + ": " + e.what(), rep);
        }
        if (on_rep_done) on_rep_done(rep);
    }

    const std::size_t per_rep = config.methods.size() *
                                (config.pipeline == Pipeline::Knockoff ? config.alphas.size() : 1);
    for (std::size_t slot = 0; slot < per_rep; ++slot) {
        SummaryRow row;
        std::vector<double> sizes;
        for (std::size_t rep = 0; rep < config.reps; ++rep) {
            const RepRecord& rec = report.records[rep * per_rep + slot];
            row.method = rec.method;
            row.alpha = rec.alpha;
            row.auc += rec.auc;
            row.ssr += rec.ssr;
            row.psr += rec.psr;
            row.fdr += rec.fdr;
            row.separation += rec.separated ? 1.0 : 0.0;
            row.seconds += rec.wall_millis / 1000.0;
            sizes.push_back(static_cast<double>(rec.ms));
        }
        const auto reps = static_cast<double>(config.reps);
        row.auc /= reps;
        row.ssr /= reps;
        row.psr /= reps;
        row.fdr /= reps;
        row.separation /= reps;
        row.seconds /= reps;
        row.ms_q05 = quantile(sizes, 0.05);
        row.ms_q50 = quantile(sizes, 0.50);
        row.ms_q95 = quantile(sizes, 0.95);
        report.summary.push_back(row);
    }
    return report;
}

void write_replications_csv(const ExperimentReport& report, std::ostream& out) {
    const bool knockoff = report.config.pipeline == Pipeline::Knockoff;
    out << "rep,method," << (knockoff ? "alpha," : "") << "SSR,PSR,FDR,AUC,MS,wallMillis\n";
    for (const auto& r : report.records) {
        out << r.rep << ',' << to_string(r.method) << ',';
        if (knockoff) out << format_double(r.alpha) << ',';
        out << r.ssr << ',' << format_double(r.psr) << ',' << format_double(r.fdr) << ','
            << format_double(r.auc) << ',' << r.ms << ',' << format_double(r.wall_millis) << '\n';
    }
}

void write_summary_csv(const ExperimentReport& report, std::ostream& out) {
    const auto& cfg = report.config;
    const bool knockoff = cfg.pipeline == Pipeline::Knockoff;
    out << "Z,N,p,K,method," << (knockoff ? "alpha," : "")
        << "5%,50%,95%,AUC,SSR,PSR,FDR,Time\n";
    for (const auto& row : report.summary) {
        out << 'X' << cfg.conditional_index << ',' << cfg.N << ',' << cfg.p << ',' << cfg.K << ','
            << to_string(row.method) << (knockoff ? "-Kn," : ",");
        if (knockoff) out << format_double(row.alpha) << ',';
        out << format_double(row.ms_q05) << ',' << format_double(row.ms_q50) << ','
            << format_double(row.ms_q95) << ',' << format_double(row.auc) << ','
            << format_double(row.ssr) << ',' << format_double(row.psr) << ','
            << format_double(row.fdr) << ',' << format_double(row.seconds) << '\n';
    }
}

} // namespace shardscreen
