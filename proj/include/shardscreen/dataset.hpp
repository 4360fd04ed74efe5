#pragma once

#include "shardscreen/moments.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace shardscreen {

/// In-memory screening data: one response, one conditional variable and a
/// column-major block of candidate features (rows are observations).
struct Dataset {
    Eigen::VectorXd response;
    Eigen::VectorXd conditional;
    Eigen::MatrixXd features;
    std::vector<std::string> feature_names;
    std::string response_name = "Y";
    std::string conditional_name = "Z";

    std::size_t rows() const { return static_cast<std::size_t>(response.size()); }
    std::size_t num_features() const { return static_cast<std::size_t>(features.cols()); }

    /// Throws InvalidArgument when the pieces disagree in shape.
    void validate() const;
};

/// Non-owning row range of a (response, conditional, features) triple of
/// column-major arrays. The viewed storage must outlive the view.
class ShardView {
public:
    ShardView(const Eigen::VectorXd& response, const Eigen::VectorXd& conditional,
              const Eigen::MatrixXd& features);
    ShardView(const Eigen::VectorXd& response, const Eigen::VectorXd& conditional,
              const Eigen::MatrixXd& features, std::size_t begin, std::size_t count);

    std::size_t rows() const { return rows_; }
    std::size_t num_features() const { return cols_; }

    std::span<const double> response() const { return {y_, rows_}; }
    std::span<const double> conditional() const { return {z_, rows_}; }
    std::span<const double> feature(std::size_t j) const { return {x_ + j * ld_, rows_}; }
    TripleSample triple(std::size_t j) const { return {response(), feature(j), conditional()}; }

    /// Rows [begin, begin + count) of this view.
    ShardView slice(std::size_t begin, std::size_t count) const;

private:
    ShardView() = default;

    const double* y_ = nullptr;
    const double* z_ = nullptr;
    const double* x_ = nullptr;
    std::size_t ld_ = 0;
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
};

struct ShardOptions {
    bool shuffle = false;
    std::uint64_t seed = 0;
};

/// K contiguous row blocks over a (possibly row-permuted) dataset.
class ShardedDataset {
public:
    ShardedDataset(std::shared_ptr<const Dataset> data, std::vector<std::size_t> offsets,
                   std::vector<std::size_t> source_rows);

    std::size_t num_shards() const { return offsets_.size() - 1; }
    std::size_t shard_size(std::size_t k) const { return offsets_[k + 1] - offsets_[k]; }
    ShardView shard(std::size_t k) const;
    std::vector<ShardView> shards() const;

    const Dataset& data() const { return *data_; }
    const std::vector<std::string>& feature_names() const { return data_->feature_names; }
    std::size_t num_features() const { return data_->num_features(); }

    /// Original row index of each row in shard k.
    std::span<const std::size_t> source_rows(std::size_t k) const;

private:
    std::shared_ptr<const Dataset> data_;
    std::vector<std::size_t> offsets_;
    std::vector<std::size_t> source_rows_;
};

/// Splits N rows into K shards of size N/K, the N mod K remainder rows going
/// one each to the first shards. Throws TooManyShards when N < 3K.
ShardedDataset shard_dataset(Dataset data, std::size_t num_shards, const ShardOptions& options = {});

} // namespace shardscreen
