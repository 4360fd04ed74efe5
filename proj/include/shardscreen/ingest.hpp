#pragma once

#include "shardscreen/dataset.hpp"

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>

namespace shardscreen {

struct IngestOptions {
    std::string response;
    /// Column name, "AUTO" for the screened feature most correlated with the
    /// response, or empty for none (data.conditional is then left empty).
    std::string conditional = "AUTO";
    bool standardize = false;
    bool interactions = false;
    /// Drop rows with any main feature more than this many training standard
    /// deviations from the training mean.
    std::optional<double> outlier_sd;
    /// Rows of the file (0-based, header excluded) before this index form the
    /// training split; every statistic is taken from the training split.
    std::optional<std::size_t> split_row;
};

struct IngestReport {
    std::size_t rows_read = 0;
    std::size_t dropped_nonfinite = 0;
    std::size_t dropped_outliers = 0;
    std::size_t train_rows = 0;  // leading rows of `data` that are training rows
    std::string conditional;
};

struct IngestedData {
    Dataset data;
    IngestReport report;
};

/// Comma-separated with a mandatory header. Features are every column other
/// than the response and a named conditional. With interactions the m main
/// features are followed by the m(m-1)/2 products a*b (a before b in file
/// order), built from the standardized mains when standardize is set.
/// Throws ColumnNotFound, InsufficientSamples (< 3 clean rows), Parse, Io.
IngestedData ingest_csv(const std::string& path, const IngestOptions& options);
IngestedData ingest_csv(std::istream& in, const IngestOptions& options);

} // namespace shardscreen
