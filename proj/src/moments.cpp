#include "shardscreen/moments.hpp"
#include "shardscreen/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>

namespace shardscreen {

namespace {

// Neumaier's variant of Kahan summation.
struct CompensatedSum {
    double sum = 0.0;
    double carry = 0.0;

    void add(double v) {
        const double t = sum + v;
        if (std::fabs(sum) >= std::fabs(v)) {
            carry += (sum - t) + v;
        } else {
            carry += (v - t) + sum;
        }
        sum = t;
    }
    double value() const { return sum + carry; }
};

bool degenerate(double variance, double second_moment) {
    // also catches NaN and the all-zero column (0 > 0 is false)
    return !(variance > Tolerances::variance_floor * second_moment);
}

double clamp_corr(double r) {
    constexpr double hi = 1.0 - Tolerances::clamp_eps;
    return std::clamp(r, -hi, hi);
}

double raw_corr(double cov, double var_a, double var_b) {
    return cov / std::sqrt(var_a * var_b);
}

} // namespace

std::string_view to_string(EntryStatus status) {
    switch (status) {
    case EntryStatus::Ok: return "Ok";
    case EntryStatus::DegenerateVariance: return "DegenerateVariance";
    case EntryStatus::CollinearWithCondition: return "CollinearWithCondition";
    }
    return "Unknown";
}

namespace detail {

ConditioningMoments accumulate_conditioning(std::span<const double> y, std::span<const double> z) {
    const std::size_t n = y.size();
    if (z.size() != n) {
        throw Error(ErrorCode::InvalidArgument, "response and conditional differ in length");
    }
    if (n < 3) {
        throw Error(ErrorCode::InsufficientSamples,
                    "need at least 3 observations, got " + std::to_string(n));
    }
    std::array<CompensatedSum, 5> acc{};
    for (std::size_t i = 0; i < n; ++i) {
        const double yi = y[i];
        const double zi = z[i];
        if (!std::isfinite(yi) || !std::isfinite(zi)) {
            throw Error(ErrorCode::NonFiniteInput, "non-finite entry at row " + std::to_string(i), i);
        }
        acc[0].add(yi);
        acc[1].add(zi);
        acc[2].add(yi * yi);
        acc[3].add(zi * zi);
        acc[4].add(yi * zi);
    }
    const double inv = 1.0 / static_cast<double>(n);
    ConditioningMoments c;
    c.mean_y = acc[0].value() * inv;
    c.mean_z = acc[1].value() * inv;
    c.mean_yy = acc[2].value() * inv;
    c.mean_zz = acc[3].value() * inv;
    c.mean_yz = acc[4].value() * inv;
    c.count = n;
    return c;
}

MomentVector accumulate_feature(const ConditioningMoments& shared, std::span<const double> y,
                                std::span<const double> x, std::span<const double> z) {
    const std::size_t n = x.size();
    if (y.size() != n || z.size() != n || shared.count != n) {
        throw Error(ErrorCode::InvalidArgument, "triple sample vectors differ in length");
    }
    std::array<CompensatedSum, 4> acc{};
    for (std::size_t i = 0; i < n; ++i) {
        const double xi = x[i];
        if (!std::isfinite(xi)) {
            throw Error(ErrorCode::NonFiniteInput, "non-finite entry at row " + std::to_string(i), i);
        }
        acc[0].add(xi * y[i]);
        acc[1].add(xi * z[i]);
        acc[2].add(xi);
        acc[3].add(xi * xi);
    }
    const double inv = 1.0 / static_cast<double>(n);
    MomentVector m;
    m.mean_xy = acc[0].value() * inv;
    m.mean_xz = acc[1].value() * inv;
    m.mean_yz = shared.mean_yz;
    m.mean_x = acc[2].value() * inv;
    m.mean_y = shared.mean_y;
    m.mean_z = shared.mean_z;
    m.mean_xx = acc[3].value() * inv;
    m.mean_yy = shared.mean_yy;
    m.mean_zz = shared.mean_zz;
    m.count = n;
    return m;
}

} // namespace detail

MomentVector accumulate_moments(const TripleSample& sample) {
    if (sample.x.size() != sample.y.size() || sample.z.size() != sample.y.size()) {
        throw Error(ErrorCode::InvalidArgument, "triple sample vectors differ in length");
    }
    const auto shared = detail::accumulate_conditioning(sample.y, sample.z);
    return detail::accumulate_feature(shared, sample.y, sample.x, sample.z);
}

MomentVector merge_moments(const MomentVector& a, const MomentVector& b) {
    if (a.count == 0 || b.count == 0) {
        throw Error(ErrorCode::InvalidArgument, "cannot merge moment vector with zero count");
    }
    if (a.count > std::numeric_limits<std::uint64_t>::max() - b.count) {
        throw Error(ErrorCode::CountOverflow, "merged sample count overflows 64 bits");
    }
    const std::uint64_t total = a.count + b.count;
    const double wa = static_cast<double>(a.count) / static_cast<double>(total);
    const double wb = static_cast<double>(b.count) / static_cast<double>(total);
    auto mix = [&](double va, double vb) { return wa * va + wb * vb; };

    MomentVector m;
    m.mean_xy = mix(a.mean_xy, b.mean_xy);
    m.mean_xz = mix(a.mean_xz, b.mean_xz);
    m.mean_yz = mix(a.mean_yz, b.mean_yz);
    m.mean_x = mix(a.mean_x, b.mean_x);
    m.mean_y = mix(a.mean_y, b.mean_y);
    m.mean_z = mix(a.mean_z, b.mean_z);
    m.mean_xx = mix(a.mean_xx, b.mean_xx);
    m.mean_yy = mix(a.mean_yy, b.mean_yy);
    m.mean_zz = mix(a.mean_zz, b.mean_zz);
    m.count = total;
    return m;
}

MomentVector merge_all(std::span<const MomentVector> parts) {
    if (parts.empty()) {
        throw Error(ErrorCode::InvalidArgument, "no moment vectors to merge");
    }
    std::uint64_t total = 0;
    for (const auto& part : parts) {
        if (part.count == 0) {
            throw Error(ErrorCode::InvalidArgument, "cannot merge moment vector with zero count");
        }
        if (total > std::numeric_limits<std::uint64_t>::max() - part.count) {
            throw Error(ErrorCode::CountOverflow, "merged sample count overflows 64 bits");
        }
        total += part.count;
    }
    if (parts.size() == 1) return parts.front();

    std::array<CompensatedSum, 9> acc{};
    for (const auto& part : parts) {
        const double w = static_cast<double>(part.count);
        acc[0].add(w * part.mean_xy);
        acc[1].add(w * part.mean_xz);
        acc[2].add(w * part.mean_yz);
        acc[3].add(w * part.mean_x);
        acc[4].add(w * part.mean_y);
        acc[5].add(w * part.mean_z);
        acc[6].add(w * part.mean_xx);
        acc[7].add(w * part.mean_yy);
        acc[8].add(w * part.mean_zz);
    }
    const double inv = 1.0 / static_cast<double>(total);
    MomentVector m;
    m.mean_xy = acc[0].value() * inv;
    m.mean_xz = acc[1].value() * inv;
    m.mean_yz = acc[2].value() * inv;
    m.mean_x = acc[3].value() * inv;
    m.mean_y = acc[4].value() * inv;
    m.mean_z = acc[5].value() * inv;
    m.mean_xx = acc[6].value() * inv;
    m.mean_yy = acc[7].value() * inv;
    m.mean_zz = acc[8].value() * inv;
    m.count = total;
    return m;
}

double pearson_from_moments(const MomentVector& m, Pair pair) {
    double cov = 0.0, var_a = 0.0, var_b = 0.0, sq_a = 0.0, sq_b = 0.0;
    const char* names = "";
    switch (pair) {
    case Pair::XY:
        cov = m.mean_xy - m.mean_x * m.mean_y;
        var_a = m.var_x(), sq_a = m.mean_xx;
        var_b = m.var_y(), sq_b = m.mean_yy;
        names = "XY";
        break;
    case Pair::XZ:
        cov = m.mean_xz - m.mean_x * m.mean_z;
        var_a = m.var_x(), sq_a = m.mean_xx;
        var_b = m.var_z(), sq_b = m.mean_zz;
        names = "XZ";
        break;
    case Pair::YZ:
        cov = m.mean_yz - m.mean_y * m.mean_z;
        var_a = m.var_y(), sq_a = m.mean_yy;
        var_b = m.var_z(), sq_b = m.mean_zz;
        names = "YZ";
        break;
    }
    if (degenerate(var_a, sq_a)) {
        throw Error(ErrorCode::DegenerateVariance,
                    std::string("degenerate variance in ") + names[0]);
    }
    if (degenerate(var_b, sq_b)) {
        throw Error(ErrorCode::DegenerateVariance,
                    std::string("degenerate variance in ") + names[1]);
    }
    return clamp_corr(raw_corr(cov, var_a, var_b));
}

PartialResult try_partial_correlation(const MomentVector& m) noexcept {
    const double vx = m.var_x();
    const double vy = m.var_y();
    const double vz = m.var_z();
    if (degenerate(vx, m.mean_xx) || degenerate(vy, m.mean_yy) || degenerate(vz, m.mean_zz)) {
        return {0.0, EntryStatus::DegenerateVariance};
    }
    const double r_xy = raw_corr(m.mean_xy - m.mean_x * m.mean_y, vx, vy);
    const double r_xz = raw_corr(m.mean_xz - m.mean_x * m.mean_z, vx, vz);
    const double r_yz = raw_corr(m.mean_yz - m.mean_y * m.mean_z, vy, vz);

    constexpr double hi = 1.0 - Tolerances::clamp_eps;
    if (!(std::fabs(r_xz) < hi) || !(std::fabs(r_yz) < hi)) {
        return {0.0, EntryStatus::CollinearWithCondition};
    }
    const double denom = std::sqrt((1.0 - r_xz * r_xz) * (1.0 - r_yz * r_yz));
    if (!(denom >= Tolerances::denom_floor)) {
        return {0.0, EntryStatus::CollinearWithCondition};
    }
    return {clamp_corr((clamp_corr(r_xy) - r_xz * r_yz) / denom), EntryStatus::Ok};
}

double partial_correlation(const MomentVector& m) {
    const PartialResult r = try_partial_correlation(m);
    switch (r.status) {
    case EntryStatus::Ok:
        return r.value;
    case EntryStatus::DegenerateVariance: {
        const char* which = degenerate(m.var_x(), m.mean_xx)   ? "X"
                            : degenerate(m.var_y(), m.mean_yy) ? "Y"
                                                               : "Z";
        throw Error(ErrorCode::DegenerateVariance, std::string("degenerate variance in ") + which);
    }
    case EntryStatus::CollinearWithCondition:
        throw Error(ErrorCode::CollinearWithCondition,
                    "feature or response is collinear with the conditional variable");
    }
    return r.value;
}

} // namespace shardscreen
