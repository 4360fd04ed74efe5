#pragma once

#include "shardscreen/shard_engine.hpp"

#include <cstdint>
#include <iosfwd>

namespace shardscreen {

/// Versioned little-endian record for shipping a ShardSummary between
/// machines:
///
///   "SSCR" | version u16 | method u8 | p u64 | n u64 | payload
///
/// The payload is a p x w block of float64 in feature-major order, with
/// w = 9 (ACPS raw moments, XY XZ YZ X Y Z XX YY ZZ), 1 (SAPS local
/// estimate) or 2 (JDPS local estimate, jackknife correction). Entries of a
/// feature flagged on this shard are written as quiet NaN.
inline constexpr std::uint16_t kSummaryFormatVersion = 1;

void write_summary(std::ostream& out, const ShardSummary& summary);
ShardSummary read_summary(std::istream& in);

} // namespace shardscreen
