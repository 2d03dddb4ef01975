#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace ftp::io {

/// Shortest decimal text that round-trips a double.
std::string format_double(double v);

/// Opens for writing (creating parent directories); throws IoError.
std::ofstream open_output(const std::filesystem::path& path, bool append = false);

/// "# config_hash=<hash>" (skipped when the hash is empty) then the
/// comma-separated column names.
void write_csv_header(std::ostream& os, const std::vector<std::string>& columns,
                      const std::string& config_hash);

/// Reads a whole text file; throws IoError.
std::string read_text(const std::filesystem::path& path);

}  // namespace ftp::io
