// cli.hpp
//
// Command-line front end. Kept in a library so tests can drive commands
// in-process and inspect exit codes and outputs.

#ifndef TTFS_TOOLS_CLI_HPP
#define TTFS_TOOLS_CLI_HPP

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace ttfs::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

/// Environment variable that overrides the dataset cache directory.
inline constexpr const char* kCacheEnv = "TTFS_CACHE_DIR";

/// Runs one command line (argv[0] is the program name). Results go to
/// files under --out-dir; `out` gets a short summary, `err` progress and
/// diagnostics.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// "none" or a number.
std::optional<double> parse_optional_number(const std::string& text);

/// Layer flag spec for a network with `layers` layers: "all", "none", or
/// names joined with '+': input, hidden, output, layerN.
std::vector<bool> parse_layer_flags(const std::string& spec, std::size_t layers);

}  // namespace ttfs::cli

#endif  // TTFS_TOOLS_CLI_HPP
