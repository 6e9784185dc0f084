#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace screenlab::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitUsage = 2;

/// Runs one command line (without the program name). Diagnostics and usage
/// go to `err`, short progress notes to `out`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int run(int argc, char** argv);

/// FNV-1a 64-bit digest of a file's bytes, as 16 hex digits.
std::string file_digest(const std::string& path);

/// Fixed-format number used in every CSV: up to 10 significant digits,
/// empty for NaN.
std::string format_number(double v);

/// Flat key=value config file: '#' starts a comment, blank lines are skipped,
/// whitespace around keys and values is trimmed. Throws on malformed lines.
std::vector<std::pair<std::string, std::string>> read_config(const std::string& path);

}  // namespace screenlab::cli
