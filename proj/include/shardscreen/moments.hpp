#pragma once

#include <cstdint>
#include <span>
#include <string_view>

namespace shardscreen {

/// Numerical floors that turn the non-degeneracy assumptions into checks.
struct Tolerances {
    /// A variance at or below this multiple of the matching raw second
    /// moment counts as degenerate.
    static constexpr double variance_floor = 1e-12;
    /// Smallest admissible sqrt((1 - r_xz^2)(1 - r_yz^2)).
    static constexpr double denom_floor = 1e-8;
    /// Correlations are clamped to [-1 + eps, 1 - eps].
    static constexpr double clamp_eps = 1e-12;
};

/// Raw first and second moments of a (response, feature, conditional)
/// triple. Every field is a sample mean over `count` observations; this is
/// the sufficient statistic for the partial correlation.
struct MomentVector {
    double mean_xy = 0.0;
    double mean_xz = 0.0;
    double mean_yz = 0.0;
    double mean_x = 0.0;
    double mean_y = 0.0;
    double mean_z = 0.0;
    double mean_xx = 0.0;
    double mean_yy = 0.0;
    double mean_zz = 0.0;
    std::uint64_t count = 0;

    double var_x() const { return mean_xx - mean_x * mean_x; }
    double var_y() const { return mean_yy - mean_y * mean_y; }
    double var_z() const { return mean_zz - mean_z * mean_z; }
};

/// Non-owning view of one observation triple. All three spans share length.
struct TripleSample {
    std::span<const double> y;
    std::span<const double> x;
    std::span<const double> z;
};

enum class Pair { XY, XZ, YZ };

/// Outcome of the non-throwing partial-correlation path used in hot loops.
enum class EntryStatus : std::uint8_t {
    Ok = 0,
    DegenerateVariance = 1,
    CollinearWithCondition = 2,
};

std::string_view to_string(EntryStatus status);

struct PartialResult {
    double value = 0.0;
    EntryStatus status = EntryStatus::Ok;
};

/// Compensated single pass over the sample. Throws InsufficientSamples for
/// n < 3 and NonFiniteInput for NaN/Inf entries.
MomentVector accumulate_moments(const TripleSample& sample);

/// Count-weighted combination; equals the moments of the concatenated data.
MomentVector merge_moments(const MomentVector& a, const MomentVector& b);

/// Compensated count-weighted combination of many moment vectors at once.
MomentVector merge_all(std::span<const MomentVector> parts);

/// Pearson correlation of the chosen pair, clamped to +-(1 - clamp_eps).
double pearson_from_moments(const MomentVector& m, Pair pair);

/// Partial correlation of Y and X given Z. Throws DegenerateVariance or
/// CollinearWithCondition.
double partial_correlation(const MomentVector& m);

/// Same formula as partial_correlation, reporting failures as a status.
PartialResult try_partial_correlation(const MomentVector& m) noexcept;

namespace detail {

/// The five moments that involve only Y and Z. Shards compute them once and
/// reuse them for every feature; accumulate_moments goes through the same
/// two kernels so both paths round identically.
struct ConditioningMoments {
    double mean_y = 0.0;
    double mean_z = 0.0;
    double mean_yy = 0.0;
    double mean_zz = 0.0;
    double mean_yz = 0.0;
    std::uint64_t count = 0;
};

ConditioningMoments accumulate_conditioning(std::span<const double> y, std::span<const double> z);

MomentVector accumulate_feature(const ConditioningMoments& shared, std::span<const double> y,
                                std::span<const double> x, std::span<const double> z);

} // namespace detail

} // namespace shardscreen
