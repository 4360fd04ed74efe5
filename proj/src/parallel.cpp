#include "shardscreen/parallel.hpp"
#include "shardscreen/error.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace shardscreen {

std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::InsufficientSamples: return "InsufficientSamples";
    case ErrorCode::NonFiniteInput: return "NonFiniteInput";
    case ErrorCode::CountOverflow: return "CountOverflow";
    case ErrorCode::DegenerateVariance: return "DegenerateVariance";
    case ErrorCode::CollinearWithCondition: return "CollinearWithCondition";
    case ErrorCode::TooManyShards: return "TooManyShards";
    case ErrorCode::InvalidRule: return "InvalidRule";
    case ErrorCode::ConstantColumn: return "ConstantColumn";
    case ErrorCode::InsufficientRows: return "InsufficientRows";
    case ErrorCode::NearSingularGram: return "NearSingularGram";
    case ErrorCode::SplitTooSmall: return "SplitTooSmall";
    case ErrorCode::ModelRequiresMoreFeatures: return "ModelRequiresMoreFeatures";
    case ErrorCode::DegenerateTruth: return "DegenerateTruth";
    case ErrorCode::ColumnNotFound: return "ColumnNotFound";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Io: return "Io";
    case ErrorCode::Parse: return "Parse";
    }
    return "Unknown";
}

std::size_t worker_count() {
    if (const char* env = std::getenv("SHARDSCREEN_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
    }
    return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
    if (n == 0) return;
    const std::size_t workers = std::min(worker_count(), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }

    // Small chunks keep load balanced when per-item cost varies.
    const std::size_t chunk = std::max<std::size_t>(1, n / (workers * 8));
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;

    auto run = [&] {
        for (;;) {
            const std::size_t begin = next.fetch_add(chunk);
            if (begin >= n) return;
            const std::size_t end = std::min(n, begin + chunk);
            try {
                for (std::size_t i = begin; i < end; ++i) body(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next.store(n);
                return;
            }
        }
    };

    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(run);
    run();
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

std::uint64_t mix_seed(std::uint64_t root, std::uint64_t stream) {
    // splitmix64 finalizer over the combined words
    std::uint64_t z = root + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

} // namespace shardscreen
