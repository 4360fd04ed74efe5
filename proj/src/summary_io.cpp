#include "shardscreen/summary_io.hpp"
#include "shardscreen/error.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <string>

namespace shardscreen {

namespace {

constexpr std::array<char, 4> kMagic{'S', 'S', 'C', 'R'};

template <class UInt>
void put_le(std::ostream& out, UInt value) {
    std::array<char, sizeof(UInt)> bytes{};
    for (std::size_t i = 0; i < sizeof(UInt); ++i) {
        bytes[i] = static_cast<char>((value >> (8 * i)) & 0xFF);
    }
    out.write(bytes.data(), bytes.size());
}

void put_f64(std::ostream& out, double v) { put_le(out, std::bit_cast<std::uint64_t>(v)); }

template <class UInt>
UInt get_le(std::istream& in) {
    std::array<unsigned char, sizeof(UInt)> bytes{};
    in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
    if (!in) throw Error(ErrorCode::Parse, "truncated shard summary record");
    UInt v = 0;
    for (std::size_t i = 0; i < sizeof(UInt); ++i) v |= static_cast<UInt>(bytes[i]) << (8 * i);
    return v;
}

double get_f64(std::istream& in) { return std::bit_cast<double>(get_le<std::uint64_t>(in)); }

constexpr double kFlagged = std::numeric_limits<double>::quiet_NaN();

} // namespace

void write_summary(std::ostream& out, const ShardSummary& summary) {
    const std::size_t p = summary.num_features();
    out.write(kMagic.data(), kMagic.size());
    put_le<std::uint16_t>(out, kSummaryFormatVersion);
    put_le<std::uint8_t>(out, static_cast<std::uint8_t>(summary.method));
    put_le<std::uint64_t>(out, p);
    put_le<std::uint64_t>(out, summary.shard_size);
    for (std::size_t j = 0; j < p; ++j) {
        switch (summary.method) {
        case Method::Acps: {
            const auto& m = summary.moments[j];
            for (double v : {m.mean_xy, m.mean_xz, m.mean_yz, m.mean_x, m.mean_y, m.mean_z,
                             m.mean_xx, m.mean_yy, m.mean_zz}) {
                put_f64(out, v);
            }
            break;
        }
        case Method::Saps:
            put_f64(out, summary.status[j] == EntryStatus::Ok ? summary.local[j] : kFlagged);
            break;
        case Method::Jdps: {
            const bool ok = summary.status[j] == EntryStatus::Ok;
            put_f64(out, ok ? summary.local[j] : kFlagged);
            put_f64(out, ok ? summary.correction[j] : kFlagged);
            break;
        }
        }
    }
    if (!out) throw Error(ErrorCode::Io, "failed writing shard summary");
}

ShardSummary read_summary(std::istream& in) {
    std::array<char, 4> magic{};
    in.read(magic.data(), magic.size());
    if (!in || magic != kMagic) throw Error(ErrorCode::Parse, "not a shard summary record (bad magic)");
    const auto version = get_le<std::uint16_t>(in);
    if (version != kSummaryFormatVersion) {
        throw Error(ErrorCode::Parse, "unsupported shard summary version " + std::to_string(version));
    }
    const auto method_byte = get_le<std::uint8_t>(in);
    if (method_byte > static_cast<std::uint8_t>(Method::Jdps)) {
        throw Error(ErrorCode::Parse, "unknown method tag " + std::to_string(method_byte));
    }
    ShardSummary s;
    s.method = static_cast<Method>(method_byte);
    const auto p = get_le<std::uint64_t>(in);
    s.shard_size = get_le<std::uint64_t>(in);

    switch (s.method) {
    case Method::Acps:
        s.moments.resize(p);
        for (auto& m : s.moments) {
            m.mean_xy = get_f64(in);
            m.mean_xz = get_f64(in);
            m.mean_yz = get_f64(in);
            m.mean_x = get_f64(in);
            m.mean_y = get_f64(in);
            m.mean_z = get_f64(in);
            m.mean_xx = get_f64(in);
            m.mean_yy = get_f64(in);
            m.mean_zz = get_f64(in);
            m.count = s.shard_size;
        }
        break;
    case Method::Saps:
    case Method::Jdps:
        s.local.resize(p);
        s.status.resize(p);
        if (s.method == Method::Jdps) s.correction.resize(p);
        for (std::size_t j = 0; j < p; ++j) {
            const double local = get_f64(in);
            const double corr = s.method == Method::Jdps ? get_f64(in) : 0.0;
            if (std::isnan(local)) {
                s.status[j] = EntryStatus::DegenerateVariance;
                continue;
            }
            s.local[j] = local;
            if (s.method == Method::Jdps) s.correction[j] = corr;
        }
        break;
    }
    return s;
}

} // namespace shardscreen
