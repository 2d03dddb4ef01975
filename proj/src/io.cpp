#include "ftp/io.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

#include "ftp/errors.hpp"

namespace ftp::io {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::ofstream open_output(const std::filesystem::path& path, bool append) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream os(path, append ? std::ios::app : std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  return os;
}

void write_csv_header(std::ostream& os, const std::vector<std::string>& columns,
                      const std::string& config_hash) {
  if (!config_hash.empty()) os << "# config_hash=" << config_hash << '\n';
  for (std::size_t i = 0; i < columns.size(); ++i) os << (i ? "," : "") << columns[i];
  os << '\n';
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace ftp::io
