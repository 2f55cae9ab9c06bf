#pragma once

#include <string>

namespace dcilp {

// Shortest round-trip decimal for a double (std::to_chars); integers print
// without a decimal point. Keeps text artifacts byte-stable.
std::string fmt_double(double v);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);
void ensure_dir(const std::string& path);

}  // namespace dcilp
