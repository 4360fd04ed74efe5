#include "shardscreen/shard_engine.hpp"
#include "shardscreen/error.hpp"
#include "shardscreen/parallel.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <string>

namespace shardscreen {

namespace {

struct CenteredConditioning {
    std::vector<double> y;
    std::vector<double> z;
    double sum_y = 0.0, sum_z = 0.0, sum_yy = 0.0, sum_zz = 0.0, sum_yz = 0.0;
};

CenteredConditioning center_conditioning(const detail::ConditioningMoments& shared,
                                         std::span<const double> y, std::span<const double> z) {
    CenteredConditioning c;
    const std::size_t n = y.size();
    c.y.resize(n);
    c.z.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double yi = y[i] - shared.mean_y;
        const double zi = z[i] - shared.mean_z;
        c.y[i] = yi;
        c.z[i] = zi;
        c.sum_y += yi;
        c.sum_z += zi;
        c.sum_yy += yi * yi;
        c.sum_zz += zi * zi;
        c.sum_yz += yi * zi;
    }
    return c;
}

// Leave-one-out estimates from centered sums. Correlations are shift
// invariant, so downdating centered sums gives the same rho_{-i} as the raw
// moments of the reduced sample while avoiding cancellation.
JackknifeEntry jackknife_with_shared(const detail::ConditioningMoments& shared,
                                     const CenteredConditioning& centered,
                                     std::span<const double> y, std::span<const double> x,
                                     std::span<const double> z) {
    const std::size_t n = x.size();
    const MomentVector full = detail::accumulate_feature(shared, y, x, z);
    const PartialResult base = try_partial_correlation(full);
    if (base.status != EntryStatus::Ok) return {0.0, 0.0, base.status};

    double sx = 0.0, sxx = 0.0, sxy = 0.0, sxz = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double xi = x[i] - full.mean_x;
        sx += xi;
        sxx += xi * xi;
        sxy += xi * centered.y[i];
        sxz += xi * centered.z[i];
    }

    const double inv = 1.0 / static_cast<double>(n - 1);
    double loo_sum = 0.0;
    double loo_carry = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double xi = x[i] - full.mean_x;
        const double yi = centered.y[i];
        const double zi = centered.z[i];
        MomentVector m;
        m.mean_xy = (sxy - xi * yi) * inv;
        m.mean_xz = (sxz - xi * zi) * inv;
        m.mean_yz = (centered.sum_yz - yi * zi) * inv;
        m.mean_x = (sx - xi) * inv;
        m.mean_y = (centered.sum_y - yi) * inv;
        m.mean_z = (centered.sum_z - zi) * inv;
        m.mean_xx = (sxx - xi * xi) * inv;
        m.mean_yy = (centered.sum_yy - yi * yi) * inv;
        m.mean_zz = (centered.sum_zz - zi * zi) * inv;
        m.count = n - 1;
        const PartialResult r = try_partial_correlation(m);
        if (r.status != EntryStatus::Ok) return {0.0, 0.0, r.status};
        const double t = loo_sum + r.value;
        loo_carry += std::fabs(loo_sum) >= std::fabs(r.value) ? (loo_sum - t) + r.value
                                                               : (r.value - t) + loo_sum;
        loo_sum = t;
    }
    const double nn = static_cast<double>(n);
    const double correction = (nn - 1.0) / nn * (loo_sum + loo_carry) - (nn - 1.0) * base.value;
    return {base.value, correction, EntryStatus::Ok};
}

void check_uniform(std::span<const ShardSummary> summaries, Method method) {
    if (summaries.empty()) {
        throw Error(ErrorCode::InvalidArgument, "no shard summaries to aggregate");
    }
    const std::size_t p = summaries.front().num_features();
    for (std::size_t k = 0; k < summaries.size(); ++k) {
        if (summaries[k].method != method) {
            throw Error(ErrorCode::InvalidArgument,
                        "shard " + std::to_string(k) + " summary has method " +
                            std::string(to_string(summaries[k].method)) + ", expected " +
                            std::string(to_string(method)),
                        k);
        }
        if (summaries[k].num_features() != p) {
            throw Error(ErrorCode::InvalidArgument,
                        "shard " + std::to_string(k) + " summary has a different feature count", k);
        }
    }
}

template <class Estimate>
Utilities average_local(std::span<const ShardSummary> summaries, Estimate estimate) {
    const std::size_t p = summaries.front().num_features();
    Utilities out;
    out.omega.assign(p, 0.0);
    out.unreliable.assign(p, 0);
    for (std::size_t j = 0; j < p; ++j) {
        double sum = 0.0;
        std::size_t used = 0;
        for (const auto& s : summaries) {
            if (s.status[j] != EntryStatus::Ok) continue;
            sum += estimate(s, j);
            ++used;
        }
        if (used == 0) {
            out.unreliable[j] = 1;
        } else {
            out.omega[j] = std::fabs(sum / static_cast<double>(used));
        }
    }
    return out;
}

} // namespace

std::string_view to_string(Method method) {
    switch (method) {
    case Method::Saps: return "SAPS";
    case Method::Acps: return "ACPS";
    case Method::Jdps: return "JDPS";
    }
    return "UNKNOWN";
}

Method parse_method(std::string_view text) {
    std::string lower(text);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (lower == "saps") return Method::Saps;
    if (lower == "acps") return Method::Acps;
    if (lower == "jdps") return Method::Jdps;
    throw Error(ErrorCode::InvalidArgument, "unknown method '" + std::string(text) + "'");
}

std::size_t ShardSummary::num_features() const {
    return method == Method::Acps ? moments.size() : local.size();
}

JackknifeEntry jackknife_feature(const TripleSample& sample) {
    if (sample.y.size() < 4) {
        throw Error(ErrorCode::InsufficientSamples, "jackknife needs at least 4 rows");
    }
    const auto shared = detail::accumulate_conditioning(sample.y, sample.z);
    const auto centered = center_conditioning(shared, sample.y, sample.z);
    return jackknife_with_shared(shared, centered, sample.y, sample.x, sample.z);
}

ShardSummary summarize_shard(const ShardView& shard, Method method) {
    const std::size_t n = shard.rows();
    const std::size_t p = shard.num_features();
    const std::size_t min_rows = method == Method::Jdps ? 4 : 3;
    if (n < min_rows) {
        throw Error(ErrorCode::InsufficientSamples,
                    std::string(to_string(method)) + " shard needs at least " +
                        std::to_string(min_rows) + " rows, got " + std::to_string(n));
    }

    ShardSummary out;
    out.method = method;
    out.shard_size = n;
    const auto y = shard.response();
    const auto z = shard.conditional();
    const auto shared = detail::accumulate_conditioning(y, z);

    switch (method) {
    case Method::Acps:
        out.moments.resize(p);
        for (std::size_t j = 0; j < p; ++j) {
            out.moments[j] = detail::accumulate_feature(shared, y, shard.feature(j), z);
        }
        break;
    case Method::Saps:
        out.local.resize(p);
        out.status.resize(p);
        for (std::size_t j = 0; j < p; ++j) {
            const auto r = try_partial_correlation(detail::accumulate_feature(shared, y, shard.feature(j), z));
            out.local[j] = r.value;
            out.status[j] = r.status;
        }
        break;
    case Method::Jdps: {
        const auto centered = center_conditioning(shared, y, z);
        out.local.resize(p);
        out.correction.resize(p);
        out.status.resize(p);
        for (std::size_t j = 0; j < p; ++j) {
            const auto e = jackknife_with_shared(shared, centered, y, shard.feature(j), z);
            out.local[j] = e.local;
            out.correction[j] = e.correction;
            out.status[j] = e.status;
        }
        break;
    }
    }
    return out;
}

Utilities aggregate_saps(std::span<const ShardSummary> summaries) {
    check_uniform(summaries, Method::Saps);
    return average_local(summaries, [](const ShardSummary& s, std::size_t j) { return s.local[j]; });
}

Utilities aggregate_jdps(std::span<const ShardSummary> summaries) {
    check_uniform(summaries, Method::Jdps);
    return average_local(summaries, [](const ShardSummary& s, std::size_t j) {
        return s.local[j] - s.correction[j];
    });
}

Utilities aggregate_acps(std::span<const ShardSummary> summaries) {
    check_uniform(summaries, Method::Acps);
    const std::size_t p = summaries.front().num_features();
    Utilities out;
    out.omega.assign(p, 0.0);
    out.unreliable.assign(p, 0);
    std::vector<MomentVector> column(summaries.size());
    for (std::size_t j = 0; j < p; ++j) {
        for (std::size_t k = 0; k < summaries.size(); ++k) column[k] = summaries[k].moments[j];
        const auto r = try_partial_correlation(merge_all(column));
        if (r.status == EntryStatus::Ok) {
            out.omega[j] = std::fabs(r.value);
        } else {
            out.unreliable[j] = 1;
        }
    }
    return out;
}

Utilities aggregate(std::span<const ShardSummary> summaries, Method method) {
    switch (method) {
    case Method::Saps: return aggregate_saps(summaries);
    case Method::Acps: return aggregate_acps(summaries);
    case Method::Jdps: return aggregate_jdps(summaries);
    }
    throw Error(ErrorCode::InvalidArgument, "unknown method");
}

Utilities compute_utilities(std::span<const ShardView> shards, Method method) {
    std::vector<ShardSummary> summaries(shards.size());
    parallel_for(shards.size(), [&](std::size_t k) {
        try {
            summaries[k] = summarize_shard(shards[k], method);
        } catch (const Error& e) {
            throw Error(e.code(), "shard " + std::to_string(k) + ": " + e.what(), k);
        }
    });
    return aggregate(summaries, method);
}

Utilities compute_utilities(const ShardedDataset& data, Method method) {
    const auto views = data.shards();
    return compute_utilities(views, method);
}

SelectionRule parse_rule(std::string_view text) {
    const auto colon = text.find(':');
    if (colon == std::string_view::npos) {
        throw Error(ErrorCode::InvalidRule, "rule must be topd:<d> or gamma:<value>");
    }
    const auto kind = text.substr(0, colon);
    const std::string value(text.substr(colon + 1));
    if (kind == "topd") {
        long long d = 0;
        const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), d);
        if (ec != std::errc() || ptr != value.data() + value.size() || d <= 0) {
            throw Error(ErrorCode::InvalidRule, "topd needs a positive integer, got '" + value + "'");
        }
        return SelectionRule::top_d(static_cast<std::size_t>(d));
    }
    if (kind == "gamma") {
        double g = 0.0;
        const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), g);
        if (ec != std::errc() || ptr != value.data() + value.size() || !(g >= 0.0)) {
            throw Error(ErrorCode::InvalidRule, "gamma needs a nonnegative number, got '" + value + "'");
        }
        return SelectionRule::threshold(g);
    }
    throw Error(ErrorCode::InvalidRule, "unknown rule kind '" + std::string(kind) + "'");
}

std::string to_string(const SelectionRule& rule) {
    if (rule.kind == SelectionRule::Kind::TopD) return "topd:" + std::to_string(rule.d);
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), rule.gamma);
    return "gamma:" + std::string(buf, res.ptr);
}

std::vector<std::size_t> rank_features(std::span<const double> utilities) {
    std::vector<std::size_t> order(utilities.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (utilities[a] != utilities[b]) return utilities[a] > utilities[b];
        return a < b;
    });
    return order;
}

ScreeningResult select(std::span<const double> utilities, const SelectionRule& rule) {
    for (std::size_t j = 0; j < utilities.size(); ++j) {
        if (!std::isfinite(utilities[j]) || utilities[j] < 0.0) {
            throw Error(ErrorCode::InvalidArgument,
                        "utility " + std::to_string(j) + " is not finite and nonnegative", j);
        }
    }
    if (rule.kind == SelectionRule::Kind::TopD && rule.d == 0) {
        throw Error(ErrorCode::InvalidRule, "top-d rule needs d >= 1");
    }
    if (rule.kind == SelectionRule::Kind::Threshold && !(rule.gamma >= 0.0)) {
        throw Error(ErrorCode::InvalidRule, "threshold rule needs gamma >= 0");
    }

    ScreeningResult out;
    out.utilities.assign(utilities.begin(), utilities.end());
    out.unreliable.assign(utilities.size(), 0);
    out.ranking = rank_features(utilities);
    out.rule = rule;
    if (rule.kind == SelectionRule::Kind::TopD) {
        for (std::size_t r = 0; r < out.ranking.size() && out.selected.size() < rule.d; ++r) {
            const std::size_t j = out.ranking[r];
            if (!(utilities[j] > 0.0)) break;
            out.selected.push_back(j);
        }
        std::sort(out.selected.begin(), out.selected.end());
    } else {
        for (std::size_t j = 0; j < utilities.size(); ++j) {
            if (utilities[j] >= rule.gamma) out.selected.push_back(j);
        }
    }
    return out;
}

ScreeningResult select(const Utilities& utilities, const SelectionRule& rule) {
    ScreeningResult out = select(std::span<const double>(utilities.omega), rule);
    out.unreliable = utilities.unreliable;
    return out;
}

} // namespace shardscreen
