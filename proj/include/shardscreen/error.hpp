#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace shardscreen {

enum class ErrorCode {
    InsufficientSamples,
    NonFiniteInput,
    CountOverflow,
    DegenerateVariance,
    CollinearWithCondition,
    TooManyShards,
    InvalidRule,
    ConstantColumn,
    InsufficientRows,
    NearSingularGram,
    SplitTooSmall,
    ModelRequiresMoreFeatures,
    DegenerateTruth,
    ColumnNotFound,
    InvalidArgument,
    Io,
    Parse,
};

std::string_view to_string(ErrorCode code);

/// Domain error carried through every module. `index` names the offending
/// column / feature / shard when one is known.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message,
          std::optional<std::size_t> index = std::nullopt)
        : std::runtime_error(message), code_(code), index_(index) {}

    ErrorCode code() const noexcept { return code_; }
    std::optional<std::size_t> index() const noexcept { return index_; }

private:
    ErrorCode code_;
    std::optional<std::size_t> index_;
};

} // namespace shardscreen
