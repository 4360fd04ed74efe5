#include "shardscreen/metrics.hpp"
#include "shardscreen/error.hpp"
#include "shardscreen/shard_engine.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace shardscreen {

namespace {

std::vector<std::uint8_t> membership(std::span<const std::size_t> indices, std::size_t p) {
    std::vector<std::uint8_t> mask(p, 0);
    for (std::size_t j : indices) {
        if (j >= p) {
            throw Error(ErrorCode::InvalidArgument,
                        "index " + std::to_string(j) + " outside " + std::to_string(p) + " features", j);
        }
        mask[j] = 1;
    }
    return mask;
}

std::size_t universe(std::span<const std::size_t> a, std::span<const std::size_t> b) {
    std::size_t p = 0;
    for (std::size_t j : a) p = std::max(p, j + 1);
    for (std::size_t j : b) p = std::max(p, j + 1);
    return p;
}

std::size_t overlap(std::span<const std::size_t> important, std::span<const std::size_t> selected) {
    const auto mask = membership(selected, universe(important, selected));
    std::vector<std::uint8_t> seen(mask.size(), 0);
    std::size_t hits = 0;
    for (std::size_t j : important) {
        if (mask[j] && !seen[j]) ++hits;
        seen[j] = 1;
    }
    return hits;
}

std::size_t distinct(std::span<const std::size_t> indices) {
    std::vector<std::size_t> v(indices.begin(), indices.end());
    std::sort(v.begin(), v.end());
    return static_cast<std::size_t>(std::unique(v.begin(), v.end()) - v.begin());
}

} // namespace

int ssr_indicator(std::span<const std::size_t> important, std::span<const std::size_t> selected) {
    return overlap(important, selected) == distinct(important) ? 1 : 0;
}

double psr(std::span<const std::size_t> important, std::span<const std::size_t> selected) {
    if (important.empty()) {
        throw Error(ErrorCode::DegenerateTruth, "PSR needs a nonempty important set");
    }
    return static_cast<double>(overlap(important, selected)) /
           static_cast<double>(distinct(important));
}

double fdr_realized(std::span<const std::size_t> important, std::span<const std::size_t> selected) {
    const std::size_t chosen = distinct(selected);
    if (chosen == 0) return 0.0;
    const std::size_t true_hits = overlap(important, selected);
    return static_cast<double>(chosen - true_hits) / static_cast<double>(chosen);
}

double auc(std::span<const std::size_t> important, std::span<const double> utilities) {
    const std::size_t p = utilities.size();
    const auto mask = membership(important, p);
    const auto m = static_cast<std::size_t>(std::count(mask.begin(), mask.end(), 1));
    if (m == 0 || m == p) {
        throw Error(ErrorCode::DegenerateTruth, "AUC needs both important and unimportant features");
    }

    std::vector<std::size_t> order(p);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return utilities[a] < utilities[b]; });

    // Sum of (1-based, tie-averaged) ranks of the important class, kept as
    // twice the rank so every term is an integer.
    std::size_t twice_rank_sum = 0;
    for (std::size_t i = 0; i < p;) {
        std::size_t e = i + 1;
        while (e < p && utilities[order[e]] == utilities[order[i]]) ++e;
        const std::size_t twice_avg = (i + 1) + e;  // 2 * mean of ranks i+1..e
        for (std::size_t t = i; t < e; ++t) {
            if (mask[order[t]]) twice_rank_sum += twice_avg;
        }
        i = e;
    }
    const std::size_t n = p - m;
    const double u = (static_cast<double>(twice_rank_sum) - static_cast<double>(m * (m + 1))) / 2.0;
    return u / (static_cast<double>(m) * static_cast<double>(n));
}

std::size_t minimum_model_size(std::span<const std::size_t> important,
                               std::span<const double> utilities) {
    if (important.empty()) {
        throw Error(ErrorCode::DegenerateTruth, "model size needs a nonempty important set");
    }
    const auto mask = membership(important, utilities.size());
    const auto ranking = rank_features(utilities);
    std::size_t remaining = static_cast<std::size_t>(std::count(mask.begin(), mask.end(), 1));
    for (std::size_t r = 0; r < ranking.size(); ++r) {
        if (mask[ranking[r]] && --remaining == 0) return r + 1;
    }
    return ranking.size();
}

double quantile(std::vector<double> values, double q) {
    if (values.empty()) {
        throw Error(ErrorCode::InvalidArgument, "quantile of an empty sample");
    }
    if (!(q >= 0.0 && q <= 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "quantile level must lie in [0, 1]");
    }
    std::sort(values.begin(), values.end());
    const double h = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

} // namespace shardscreen
