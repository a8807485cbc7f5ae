#pragma once

#include <filesystem>
#include <string>

namespace geoflow {

// Shortest decimal form that parses back to the same double.
std::string format_double(double v);

// Strict double parse; ParseError on leftovers or empty input.
double parse_double(const std::string& s, const std::string& context);
long long parse_int(const std::string& s, const std::string& context);

std::string read_file(const std::filesystem::path& p);
void write_file(const std::filesystem::path& p, const std::string& content);

}  // namespace geoflow
