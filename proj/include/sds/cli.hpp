#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace sds::cli {

/// Flat `key = value` file; `#` starts a comment. Keys are namespaced, e.g.
/// `train.margin`, `sds.k`, `mmd.bandwidth`, `experiment.repetitions`.
std::map<std::string, std::string> read_config_file(const std::filesystem::path& path);

/// Entry point shared by the executable and the tests. `args` excludes the
/// program name. Returns the process exit status.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sds::cli
