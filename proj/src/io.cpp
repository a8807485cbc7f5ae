#include "geoflow/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "geoflow/error.hpp"

namespace geoflow {

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s, const std::string& context) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto res = std::from_chars(first, last, v);
  require(res.ec == std::errc() && res.ptr == last, ErrKind::ParseError,
          context + ": bad float '" + s + "'");
  return v;
}

long long parse_int(const std::string& s, const std::string& context) {
  long long v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  require(res.ec == std::errc() && res.ptr == s.data() + s.size(), ErrKind::ParseError,
          context + ": bad integer '" + s + "'");
  return v;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  require(in.good(), ErrKind::IoFailure, "cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  require(out.good(), ErrKind::IoFailure, "cannot write " + p.string());
  out << content;
  require(out.good(), ErrKind::IoFailure, "write failed for " + p.string());
}

}  // namespace geoflow
