#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace shardscreen {

/// Shortest decimal text that reads back to the same double. Non-finite
/// values print as nan, inf, -inf.
std::string format_double(double value);

/// Strict decimal parse of the whole field; throws Parse on failure.
double parse_double(std::string_view text);

/// Splits one comma-separated line. Surrounding whitespace and a trailing
/// carriage return are trimmed from each field; quotes are not interpreted.
std::vector<std::string> split_csv_line(std::string_view line);

} // namespace shardscreen
