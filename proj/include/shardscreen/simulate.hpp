#pragma once

#include "shardscreen/algorithm.hpp"
#include "shardscreen/dataset.hpp"
#include "shardscreen/shard_engine.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace shardscreen {

/// (a): Y = c (X1 + X3 + ... + X9) + e
/// (b): Y = c (2 X1 + 3 X2 + 1.5 X3 + 2 X4 + 2 sin(2 pi X5)) + e
enum class Model { A, B };

/// Whether the conditional feature counts toward the minimum model size when
/// it is itself important. Exclude: MS covers only the screened important
/// features. Count: one more, as if Z sat at rank 1.
enum class SizeConvention { ExcludeConditional, CountConditional };

enum class Pipeline { Screen, Knockoff };

struct SimConfig {
    std::size_t N = 10000;
    std::size_t p = 3000;
    double c = 0.02;
    Model model = Model::A;
    std::size_t conditional_index = 1;  // 1-based feature that plays Z
    std::size_t K = 20;
    std::size_t reps = 50;
    std::uint64_t seed = 1;
    std::vector<Method> methods{Method::Acps};
    Pipeline pipeline = Pipeline::Screen;
    std::optional<SelectionRule> rule;  // default topd:floor(N / ln N)
    std::vector<double> alphas{0.2};    // knockoff pipeline only
    std::size_t d = 0;                  // knockoff split; 0 = default
    std::size_t n1 = 0;
    std::size_t n2 = 0;
    SConstruction s_method = SConstruction::Equicorrelated;
    SizeConvention size_convention = SizeConvention::ExcludeConditional;
    bool timing = true;  // false writes wallMillis as 0 for byte-stable output

    /// Throws InvalidArgument for N < 3K, p < 10, reps = 0, an out-of-range
    /// conditional index or an empty method / alpha list.
    void validate() const;
};

SimConfig read_sim_config(const std::string& path);
SimConfig parse_sim_config(const std::string& json_text);

/// N x p rows iid N(0, Sigma), Sigma_ij = 0.5^|i-j|, via the Markov recursion
/// X1 ~ N(0,1), X_{j+1} = 0.5 X_j + sqrt(0.75) e. Rows are generated in fixed
/// blocks with per-block seeds, so the result does not depend on threads.
Eigen::MatrixXd sample_ar1_features(std::size_t N, std::size_t p, std::uint64_t seed);

/// Throws ModelRequiresMoreFeatures when p < 9 (A) or p < 5 (B).
Eigen::VectorXd generate_response(const Eigen::MatrixXd& features, Model model, double c,
                                  std::uint64_t seed);
Eigen::VectorXd generate_response(const Eigen::MatrixXd& features, Model model, double c,
                                  const Eigen::VectorXd& noise);

/// 0-based important features of the full design: A {0, 2..8}, B {0..4}.
std::vector<std::size_t> important_features(Model model);

struct TruthSet {
    std::vector<std::size_t> important;  // screened-feature indices
    std::size_t conditional = 0;         // 0-based column of the full design
    bool conditional_important = false;
};

/// Drops the conditional column from the important set and shifts the rest
/// into screened-feature indexing. Throws DegenerateTruth if nothing remains.
TruthSet screened_truth(Model model, std::size_t p, std::size_t conditional_index);

struct Replication {
    Dataset data;
    TruthSet truth;
};

/// Data of replication `rep` under the config's root seed.
Replication make_replication(const SimConfig& config, std::size_t rep);

struct RepRecord {
    std::size_t rep = 0;
    Method method = Method::Acps;
    double alpha = 0.0;  // knockoff pipeline only
    int ssr = 0;
    double psr = 0.0;
    double fdr = 0.0;
    double auc = 0.0;
    std::size_t ms = 0;
    bool separated = false;  // min important utility > max unimportant
    std::size_t num_selected = 0;
    double wall_millis = 0.0;
};

struct SummaryRow {
    Method method = Method::Acps;
    double alpha = 0.0;
    double ms_q05 = 0.0;
    double ms_q50 = 0.0;
    double ms_q95 = 0.0;
    double auc = 0.0;
    double ssr = 0.0;
    double psr = 0.0;
    double fdr = 0.0;
    double separation = 0.0;
    double seconds = 0.0;  // mean wall time per replication
};

struct ExperimentReport {
    SimConfig config;
    std::vector<RepRecord> records;  // ordered by (rep, method, alpha)
    std::vector<SummaryRow> summary; // ordered by (method, alpha)
};

/// Runs config.reps replications, each on fresh data seeded from
/// (config.seed, rep). Errors carry the replication index.
ExperimentReport run_replications(const SimConfig& config,
                                  const std::function<void(std::size_t)>& on_rep_done = {});

void write_replications_csv(const ExperimentReport& report, std::ostream& out);
void write_summary_csv(const ExperimentReport& report, std::ostream& out);

} // namespace shardscreen
