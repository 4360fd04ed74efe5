#include "shardscreen/text.hpp"
#include "shardscreen/error.hpp"

#include <charconv>
#include <cmath>

namespace shardscreen {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

} // namespace

std::string format_double(double value) {
    if (std::isnan(value)) return "nan";
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, ptr);
}

double parse_double(std::string_view text) {
    const auto field = trim(text);
    if (field == "nan" || field == "NaN" || field == "NA") return std::nan("");
    if (field == "inf" || field == "Inf") return HUGE_VAL;
    if (field == "-inf" || field == "-Inf") return -HUGE_VAL;
    // from_chars rejects a leading '+'
    const auto body = !field.empty() && field.front() == '+' ? field.substr(1) : field;
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(body.data(), body.data() + body.size(), v);
    if (body.empty() || ec != std::errc() || ptr != body.data() + body.size()) {
        throw Error(ErrorCode::Parse, "not a number: '" + std::string(field) + "'");
    }
    return v;
}

std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        const auto comma = line.find(',', start);
        const auto end = comma == std::string_view::npos ? line.size() : comma;
        out.emplace_back(trim(line.substr(start, end - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

} // namespace shardscreen
