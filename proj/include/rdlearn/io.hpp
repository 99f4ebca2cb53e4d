#pragma once

// Output helpers for the command-line tools: CSV tables with round-trip-safe
// numbers, atomic file writes and a SHA-256 manifest of everything written.

#include <string>
#include <string_view>
#include <vector>

namespace rdlearn::io {

/// Writes `content` to a temporary file next to `path` and renames it into
/// place, so readers never observe a partial file.
void write_atomic(const std::string& path, std::string_view content);

/// Hex SHA-256 of a byte string.
std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::string& path);

/// Formats a real with 17 significant digits ('.' decimal separator).
std::string format_real(double value);

/// Row-oriented CSV builder with a fixed header.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header);

  CsvTable& row(const std::vector<double>& values);
  /// Mixed rows: cells already formatted.
  CsvTable& row_text(const std::vector<std::string>& cells);

  std::size_t rows() const { return rows_; }
  std::string str() const { return text_; }

 private:
  std::size_t columns_;
  std::size_t rows_ = 0;
  std::string text_;
};

/// Collects output files of one run and writes `manifest.txt` (one
/// "<sha256>  <name>" line per file, in the order written).
class OutputDirectory {
 public:
  explicit OutputDirectory(std::string dir);

  const std::string& path() const { return dir_; }
  std::string file(const std::string& name) const;
  /// Atomic write of dir/name, recorded for the manifest.
  void write(const std::string& name, std::string_view content);
  void write_manifest();

 private:
  std::string dir_;
  std::vector<std::pair<std::string, std::string>> entries_;  // name, hash
};

}  // namespace rdlearn::io
