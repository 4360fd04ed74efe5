#include "shardscreen/dataset.hpp"
#include "shardscreen/error.hpp"

#include <boost/random/mersenne_twister.hpp>
#include <boost/random/uniform_int_distribution.hpp>

#include <numeric>
#include <utility>

namespace shardscreen {

void Dataset::validate() const {
    const auto n = response.size();
    if (conditional.size() != n || features.rows() != n) {
        throw Error(ErrorCode::InvalidArgument, "response, conditional and feature rows disagree");
    }
    if (feature_names.size() != static_cast<std::size_t>(features.cols())) {
        throw Error(ErrorCode::InvalidArgument, "feature name count does not match feature columns");
    }
}

ShardView::ShardView(const Eigen::VectorXd& response, const Eigen::VectorXd& conditional,
                     const Eigen::MatrixXd& features)
    : ShardView(response, conditional, features, 0, static_cast<std::size_t>(response.size())) {}

ShardView::ShardView(const Eigen::VectorXd& response, const Eigen::VectorXd& conditional,
                     const Eigen::MatrixXd& features, std::size_t begin, std::size_t count) {
    const auto n = static_cast<std::size_t>(response.size());
    if (static_cast<std::size_t>(conditional.size()) != n ||
        static_cast<std::size_t>(features.rows()) != n) {
        throw Error(ErrorCode::InvalidArgument, "response, conditional and feature rows disagree");
    }
    if (begin + count > n) {
        throw Error(ErrorCode::InvalidArgument, "shard row range exceeds data");
    }
    y_ = response.data() + begin;
    z_ = conditional.data() + begin;
    x_ = features.data() + begin;
    ld_ = static_cast<std::size_t>(features.outerStride());
    rows_ = count;
    cols_ = static_cast<std::size_t>(features.cols());
}

ShardView ShardView::slice(std::size_t begin, std::size_t count) const {
    if (begin + count > rows_) {
        throw Error(ErrorCode::InvalidArgument, "slice exceeds shard rows");
    }
    ShardView out;
    out.y_ = y_ + begin;
    out.z_ = z_ + begin;
    out.x_ = x_ + begin;
    out.ld_ = ld_;
    out.rows_ = count;
    out.cols_ = cols_;
    return out;
}

ShardedDataset::ShardedDataset(std::shared_ptr<const Dataset> data, std::vector<std::size_t> offsets,
                               std::vector<std::size_t> source_rows)
    : data_(std::move(data)), offsets_(std::move(offsets)), source_rows_(std::move(source_rows)) {}

ShardView ShardedDataset::shard(std::size_t k) const {
    return ShardView(data_->response, data_->conditional, data_->features, offsets_[k], shard_size(k));
}

std::vector<ShardView> ShardedDataset::shards() const {
    std::vector<ShardView> out;
    out.reserve(num_shards());
    for (std::size_t k = 0; k < num_shards(); ++k) out.push_back(shard(k));
    return out;
}

std::span<const std::size_t> ShardedDataset::source_rows(std::size_t k) const {
    return std::span<const std::size_t>(source_rows_).subspan(offsets_[k], shard_size(k));
}

ShardedDataset shard_dataset(Dataset data, std::size_t num_shards, const ShardOptions& options) {
    data.validate();
    const std::size_t n = data.rows();
    if (num_shards == 0) {
        throw Error(ErrorCode::InvalidArgument, "shard count must be positive");
    }
    if (n < 3 * num_shards) {
        throw Error(ErrorCode::TooManyShards,
                    std::to_string(num_shards) + " shards need at least " +
                        std::to_string(3 * num_shards) + " rows, have " + std::to_string(n));
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (options.shuffle) {
        // Fisher-Yates with boost distributions so the permutation does not
        // depend on the standard library implementation.
        boost::random::mt19937_64 rng(options.seed);
        for (std::size_t i = n - 1; i > 0; --i) {
            boost::random::uniform_int_distribution<std::size_t> pick(0, i);
            std::swap(order[i], order[pick(rng)]);
        }
        Dataset permuted;
        permuted.response.resize(static_cast<Eigen::Index>(n));
        permuted.conditional.resize(static_cast<Eigen::Index>(n));
        permuted.features.resize(static_cast<Eigen::Index>(n), data.features.cols());
        for (std::size_t i = 0; i < n; ++i) {
            const auto src = static_cast<Eigen::Index>(order[i]);
            const auto dst = static_cast<Eigen::Index>(i);
            permuted.response(dst) = data.response(src);
            permuted.conditional(dst) = data.conditional(src);
        }
        for (Eigen::Index j = 0; j < data.features.cols(); ++j) {
            for (std::size_t i = 0; i < n; ++i) {
                permuted.features(static_cast<Eigen::Index>(i), j) =
                    data.features(static_cast<Eigen::Index>(order[i]), j);
            }
        }
        permuted.feature_names = std::move(data.feature_names);
        permuted.response_name = std::move(data.response_name);
        permuted.conditional_name = std::move(data.conditional_name);
        data = std::move(permuted);
    }

    const std::size_t base = n / num_shards;
    const std::size_t extra = n % num_shards;
    std::vector<std::size_t> offsets(num_shards + 1, 0);
    for (std::size_t k = 0; k < num_shards; ++k) {
        offsets[k + 1] = offsets[k] + base + (k < extra ? 1 : 0);
    }
    return ShardedDataset(std::make_shared<const Dataset>(std::move(data)), std::move(offsets),
                          std::move(order));
}

} // namespace shardscreen
