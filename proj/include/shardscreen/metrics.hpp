#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace shardscreen {

// Index sets are 0-based positions into the screened feature list and need
// not be sorted.

/// 1 when every important feature was selected.
int ssr_indicator(std::span<const std::size_t> important, std::span<const std::size_t> selected);

/// |important and selected| / |important|. Throws DegenerateTruth when
/// `important` is empty.
double psr(std::span<const std::size_t> important, std::span<const std::size_t> selected);

/// |selected minus important| / |selected|, with 0 for an empty selection.
double fdr_realized(std::span<const std::size_t> important, std::span<const std::size_t> selected);

/// Probability that an important feature outranks an unimportant one, ties
/// counting one half. Computed from average ranks in O(p log p). Throws
/// DegenerateTruth when either class is empty.
double auc(std::span<const std::size_t> important, std::span<const double> utilities);

/// Smallest r such that the top r features (descending utility, ties by
/// index) contain every important feature.
std::size_t minimum_model_size(std::span<const std::size_t> important,
                               std::span<const double> utilities);

/// Linear-interpolation sample quantile (type 7), q in [0, 1].
double quantile(std::vector<double> values, double q);

} // namespace shardscreen
