#pragma once

#include "shardscreen/dataset.hpp"
#include "shardscreen/moments.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace shardscreen {

/// Distributed estimators of the partial-correlation utility.
///  - Saps: absolute mean of per-shard partial correlations.
///  - Acps: partial correlation of the count-weighted mean of shard moments.
///  - Jdps: absolute mean of jackknife-debiased per-shard estimates.
enum class Method : std::uint8_t { Saps = 0, Acps = 1, Jdps = 2 };

std::string_view to_string(Method method);
Method parse_method(std::string_view text);

/// Per-shard payload. Which vectors are filled depends on `method`:
/// Acps fills `moments`; Saps fills `local` and `status`; Jdps fills
/// `local`, `correction` and `status`. A non-Ok status marks the feature
/// as unusable on this shard; its local/correction entries are then 0.
struct ShardSummary {
    Method method = Method::Saps;
    std::uint64_t shard_size = 0;
    std::vector<MomentVector> moments;
    std::vector<double> local;
    std::vector<double> correction;
    std::vector<EntryStatus> status;

    std::size_t num_features() const;
};

/// Utility per feature plus a flag for features with no usable shard.
struct Utilities {
    std::vector<double> omega;
    std::vector<std::uint8_t> unreliable;
};

ShardSummary summarize_shard(const ShardView& shard, Method method);

/// Jackknife correction of one feature on one shard via O(1) downdates per
/// removed row. Returns the full-shard estimate and the correction
/// ((n-1)/n) * sum_i rho_{-i} - (n-1) * rho.
struct JackknifeEntry {
    double local = 0.0;
    double correction = 0.0;
    EntryStatus status = EntryStatus::Ok;
};
JackknifeEntry jackknife_feature(const TripleSample& sample);

Utilities aggregate_saps(std::span<const ShardSummary> summaries);
Utilities aggregate_acps(std::span<const ShardSummary> summaries);
Utilities aggregate_jdps(std::span<const ShardSummary> summaries);
Utilities aggregate(std::span<const ShardSummary> summaries, Method method);

/// Summarizes every shard (in parallel) and aggregates in shard order.
Utilities compute_utilities(std::span<const ShardView> shards, Method method);
Utilities compute_utilities(const ShardedDataset& data, Method method);

struct SelectionRule {
    enum class Kind { Threshold, TopD };
    Kind kind = Kind::TopD;
    double gamma = 0.0;
    std::size_t d = 0;

    static SelectionRule threshold(double gamma) { return {Kind::Threshold, gamma, 0}; }
    static SelectionRule top_d(std::size_t d) { return {Kind::TopD, 0.0, d}; }
};

/// Parses "topd:<d>" or "gamma:<value>".
SelectionRule parse_rule(std::string_view text);
std::string to_string(const SelectionRule& rule);

/// Features are 0-based indices into the screened feature list.
struct ScreeningResult {
    std::vector<double> utilities;
    std::vector<std::uint8_t> unreliable;
    std::vector<std::size_t> ranking;   // descending utility, ties by index
    std::vector<std::size_t> selected;  // ascending index
    SelectionRule rule;
};

/// Order of features by descending utility, ties broken by ascending index.
std::vector<std::size_t> rank_features(std::span<const double> utilities);

ScreeningResult select(std::span<const double> utilities, const SelectionRule& rule);
ScreeningResult select(const Utilities& utilities, const SelectionRule& rule);

} // namespace shardscreen
