#pragma once

#include "shardscreen/dataset.hpp"
#include "shardscreen/knockoff.hpp"
#include "shardscreen/shard_engine.hpp"

#include <cstddef>
#include <cstdint>
#include <ostream>
#include <vector>

namespace shardscreen {

/// Two-stage knockoff screening. Each shard's first n1 rows feed the
/// first-stage top-d screen; rows [n1, n1 + n2) carry the knockoff stage.
/// Zero sizes mean "use the default".
struct KnockoffConfig {
    double alpha = 0.2;
    std::size_t d = 0;
    std::size_t n1 = 0;
    std::size_t n2 = 0;
    Method method = Method::Saps;
    SConstruction s_method = SConstruction::Equicorrelated;
    std::uint64_t seed = 0;
};

struct Split {
    std::size_t n1 = 0;
    std::size_t n2 = 0;
    std::size_t d = 0;
};

/// Resolves zero fields of (d, n1, n2) for shards of `shard_rows` rows:
///   d  = floor(n / ln n), reduced until 2d < n2
///   n2 = min(n - 3, max(2d + 10, floor(2n / 3))),  n1 = n - n2
/// Explicit values are kept as given and validated by run_knockoff_screen.
Split resolve_split(std::size_t shard_rows, std::size_t d, std::size_t n1, std::size_t n2);

struct ShardKnockoffAudit {
    double s_min = 0.0;
    double s_mean = 0.0;
    double s_max = 0.0;
    bool ridged = false;
    bool sdp_fell_back = false;
};

struct KnockoffRun {
    KnockoffConfig config;
    Split split;
    std::size_t num_shards = 0;
    std::vector<std::size_t> first_stage;  // ascending feature indices, |first_stage| <= d
    Utilities first_stage_utilities;       // all p features
    KnockoffStats stats;                   // aligned with first_stage
    FdrSelection selection;                // positions into first_stage
    std::vector<std::size_t> selected;     // feature indices, ascending
    std::vector<ShardKnockoffAudit> shards;
};

/// Throws SplitTooSmall when n2 <= 2d and InvalidArgument when n1 + n2
/// exceeds the smallest shard. Numerical errors name the shard.
KnockoffRun run_knockoff_screen(const ShardedDataset& data, const KnockoffConfig& config);

/// Re-thresholds an existing run at another level (psi is reused).
KnockoffRun with_alpha(const KnockoffRun& run, double alpha);

void write_audit_json(const KnockoffRun& run, const std::vector<std::string>& feature_names,
                      std::ostream& out);

} // namespace shardscreen
