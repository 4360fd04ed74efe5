#include "shardscreen/ingest.hpp"
#include "shardscreen/error.hpp"
#include "shardscreen/text.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <string>
#include <vector>

namespace shardscreen {

namespace {

struct ColumnStats {
    double mean = 0.0;
    double sd = 0.0;
};

ColumnStats column_stats(const Eigen::Ref<const Eigen::VectorXd>& col) {
    ColumnStats s;
    if (col.size() == 0) return s;
    s.mean = col.mean();
    s.sd = std::sqrt((col.array() - s.mean).square().mean());
    return s;
}

double abs_pearson(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b) {
    const Eigen::VectorXd ca = a.array() - a.mean();
    const Eigen::VectorXd cb = b.array() - b.mean();
    const double denom = ca.norm() * cb.norm();
    if (!(denom > 0.0)) return 0.0;
    return std::fabs(ca.dot(cb) / denom);
}

std::size_t find_column(const std::vector<std::string>& header, const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
        throw Error(ErrorCode::ColumnNotFound, "column '" + name + "' not found in header");
    }
    return static_cast<std::size_t>(it - header.begin());
}

} // namespace

IngestedData ingest_csv(std::istream& in, const IngestOptions& options) {
    std::string line;
    if (!std::getline(in, line)) throw Error(ErrorCode::Parse, "empty CSV: header row missing");
    const auto header = split_csv_line(line);
    const std::size_t width = header.size();

    const std::size_t ycol = find_column(header, options.response);
    const bool named_conditional = !options.conditional.empty() && options.conditional != "AUTO";
    const std::size_t zcol = named_conditional ? find_column(header, options.conditional) : width;
    std::vector<std::size_t> feature_cols;
    for (std::size_t c = 0; c < width; ++c) {
        if (c != ycol && c != zcol) feature_cols.push_back(c);
    }

    // Row-major staging of clean rows, plus their original row indices.
    std::vector<double> values;
    std::vector<std::size_t> origin;
    IngestedData out;
    std::size_t row = 0;
    std::vector<double> parsed(width);
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != width) {
            throw Error(ErrorCode::Parse, "row " + std::to_string(row) + " has " +
                                              std::to_string(fields.size()) + " fields, header has " +
                                              std::to_string(width));
        }
        bool finite = true;
        for (std::size_t c = 0; c < width; ++c) {
            try {
                parsed[c] = parse_double(fields[c]);
            } catch (const Error&) {
                throw Error(ErrorCode::Parse, "row " + std::to_string(row) + ", column '" +
                                                  header[c] + "': not a number '" + fields[c] + "'");
            }
            finite = finite && std::isfinite(parsed[c]);
        }
        ++out.report.rows_read;
        if (finite) {
            values.insert(values.end(), parsed.begin(), parsed.end());
            origin.push_back(row);
        } else {
            ++out.report.dropped_nonfinite;
        }
        ++row;
    }

    auto n = origin.size();
    const auto count_train = [&] {
        if (!options.split_row) return origin.size();
        return static_cast<std::size_t>(
            std::lower_bound(origin.begin(), origin.end(), *options.split_row) - origin.begin());
    };
    auto at = [&](std::size_t i, std::size_t c) { return values[i * width + c]; };

    if (options.outlier_sd) {
        const double q = *options.outlier_sd;
        const std::size_t train = count_train();
        std::vector<ColumnStats> stats;
        for (std::size_t c : feature_cols) {
            Eigen::VectorXd col(static_cast<Eigen::Index>(train));
            for (std::size_t i = 0; i < train; ++i) col(static_cast<Eigen::Index>(i)) = at(i, c);
            stats.push_back(column_stats(col));
        }
        std::vector<double> kept_values;
        std::vector<std::size_t> kept_origin;
        for (std::size_t i = 0; i < n; ++i) {
            bool keep = true;
            for (std::size_t f = 0; f < feature_cols.size() && keep; ++f) {
                if (stats[f].sd > 0.0 &&
                    std::fabs(at(i, feature_cols[f]) - stats[f].mean) > q * stats[f].sd) {
                    keep = false;
                }
            }
            if (keep) {
                kept_values.insert(kept_values.end(), values.begin() + static_cast<std::ptrdiff_t>(i * width),
                                   values.begin() + static_cast<std::ptrdiff_t>((i + 1) * width));
                kept_origin.push_back(origin[i]);
            } else {
                ++out.report.dropped_outliers;
            }
        }
        values = std::move(kept_values);
        origin = std::move(kept_origin);
        n = origin.size();
    }

    if (n < 3) {
        throw Error(ErrorCode::InsufficientSamples,
                    "need at least 3 clean rows, have " + std::to_string(n));
    }
    const std::size_t train = count_train();
    out.report.train_rows = train;
    if (train < 2 && (options.standardize || options.conditional == "AUTO")) {
        throw Error(ErrorCode::InsufficientSamples, "training split has fewer than 2 rows");
    }

    const auto rows = static_cast<Eigen::Index>(n);
    Dataset& data = out.data;
    data.response.resize(rows);
    for (std::size_t i = 0; i < n; ++i) data.response(static_cast<Eigen::Index>(i)) = at(i, ycol);
    data.response_name = header[ycol];

    const std::size_t m = feature_cols.size();
    const std::size_t total = options.interactions ? m + m * (m - 1) / 2 : m;
    data.features.resize(rows, static_cast<Eigen::Index>(total));
    for (std::size_t f = 0; f < m; ++f) {
        for (std::size_t i = 0; i < n; ++i) {
            data.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(f)) = at(i, feature_cols[f]);
        }
        data.feature_names.push_back(header[feature_cols[f]]);
    }
    Eigen::VectorXd conditional;
    if (named_conditional) {
        conditional.resize(rows);
        for (std::size_t i = 0; i < n; ++i) conditional(static_cast<Eigen::Index>(i)) = at(i, zcol);
    }
    values.clear();
    values.shrink_to_fit();

    const auto standardize = [&](auto col) {
        const ColumnStats s = column_stats(col.head(static_cast<Eigen::Index>(train)));
        col.array() -= s.mean;
        // A constant training column is only centered.
        if (s.sd > 0.0) col /= s.sd;
    };
    if (options.standardize) {
        for (std::size_t f = 0; f < m; ++f) standardize(data.features.col(static_cast<Eigen::Index>(f)));
        if (named_conditional) standardize(Eigen::Ref<Eigen::VectorXd>(conditional));
    }
    if (options.interactions) {
        auto next = static_cast<Eigen::Index>(m);
        for (std::size_t a = 0; a < m; ++a) {
            for (std::size_t b = a + 1; b < m; ++b, ++next) {
                data.features.col(next) = data.features.col(static_cast<Eigen::Index>(a))
                                              .cwiseProduct(data.features.col(static_cast<Eigen::Index>(b)));
                data.feature_names.push_back(data.feature_names[a] + "*" + data.feature_names[b]);
            }
        }
    }

    if (named_conditional) {
        data.conditional = std::move(conditional);
        data.conditional_name = options.conditional;
    } else if (options.conditional == "AUTO") {
        if (total < 2) {
            throw Error(ErrorCode::InsufficientSamples, "AUTO conditional needs at least two features");
        }
        const auto head = static_cast<Eigen::Index>(train);
        std::size_t best = 0;
        double best_r = -1.0;
        for (std::size_t f = 0; f < total; ++f) {
            const double r = abs_pearson(data.features.col(static_cast<Eigen::Index>(f)).head(head),
                                         data.response.head(head));
            if (r > best_r) {
                best_r = r;
                best = f;
            }
        }
        const auto bc = static_cast<Eigen::Index>(best);
        data.conditional = data.features.col(bc);
        data.conditional_name = data.feature_names[best];
        for (Eigen::Index j = bc; j + 1 < static_cast<Eigen::Index>(total); ++j) {
            data.features.col(j) = data.features.col(j + 1);
        }
        data.features.conservativeResize(Eigen::NoChange, static_cast<Eigen::Index>(total) - 1);
        data.feature_names.erase(data.feature_names.begin() + static_cast<std::ptrdiff_t>(best));
    } else {
        data.conditional_name.clear();
    }
    out.report.conditional = data.conditional_name;
    return out;
}

IngestedData ingest_csv(const std::string& path, const IngestOptions& options) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open '" + path + "'");
    return ingest_csv(in, options);
}

} // namespace shardscreen
