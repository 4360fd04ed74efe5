#pragma once

#include "shardscreen/shard_engine.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace shardscreen {

/// Entry point behind the `shardscreen` executable. Returns the process exit
/// code: 0 success, 1 domain error, 2 usage error. Domain errors print one
/// line `error: code=<Code> [index=<i>] message=<text>` on `err`, and any
/// output files written by the failing command are removed.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// utilities.csv: rank,index,name,utility,unreliable sorted by rank.
void write_utilities_csv(const ScreeningResult& result, const std::vector<std::string>& names,
                         std::ostream& out);

struct UtilitiesTable {
    std::vector<std::string> names;  // by feature index
    std::vector<double> utilities;
    std::vector<std::uint8_t> unreliable;
    std::vector<std::size_t> ranking;
};
UtilitiesTable read_utilities_csv(const std::string& path);

/// One feature name per line.
std::vector<std::string> read_name_list(const std::string& path);

} // namespace shardscreen
