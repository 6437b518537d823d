// Subcommand dispatch for the qkdlab executable, kept in a library so tests
// can drive it in-process.
#pragma once

#include <iosfwd>
#include <string>

#include <json.hpp>

namespace qkdlab::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInvariant = 1;
inline constexpr int kExitUsage = 2;

/// Parses argv, runs one subcommand and writes its report to `out` (or to
/// --out atomically). Diagnostics go to `err`. Returns the exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// RFC 4180 field quoting.
std::string csv_field(const std::string& s);

/// Two-column path,value CSV of every scalar in `j`, keys in sorted order.
std::string flatten_csv(const nlohmann::json& j);

/// Writes `content` to `path` through a temporary file in the same directory
/// and a rename.
void write_atomically(const std::string& path, const std::string& content);

}  // namespace qkdlab::cli
