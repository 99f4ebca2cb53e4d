#include "rdlearn/io.hpp"

#include <openssl/evp.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>

#include <fmt/format.h>

#include "rdlearn/error.hpp"

namespace rdlearn::io {

namespace fs = std::filesystem;

void write_atomic(const std::string& path, std::string_view content) {
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path temp = target.string() + ".tmp";
  {
    std::ofstream out(temp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open '" + temp.string() + "' for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw Error("write to '" + temp.string() + "' failed");
  }
  std::error_code ec;
  fs::rename(temp, target, ec);
  if (ec) {
    fs::remove(temp);
    throw Error("cannot move '" + temp.string() + "' into place: " + ec.message());
  }
}

std::string sha256_hex(std::string_view bytes) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest, &length) != 1)
    throw Error("SHA-256 computation failed");
  std::string hex;
  for (unsigned int i = 0; i < length; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return sha256_hex(buffer.str());
}

std::string format_real(double value) { return fmt::format("{:.17g}", value); }

CsvTable::CsvTable(std::vector<std::string> header) : columns_(header.size()) {
  if (header.empty()) throw InvalidParameter("CSV header must not be empty");
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i > 0) text_ += ',';
    text_ += header[i];
  }
  text_ += '\n';
}

CsvTable& CsvTable::row(const std::vector<double>& values) {
  std::vector<std::string> cells;
  cells.reserve(values.size());
  for (double v : values) cells.push_back(format_real(v));
  return row_text(cells);
}

CsvTable& CsvTable::row_text(const std::vector<std::string>& cells) {
  if (cells.size() != columns_) throw DimensionMismatch(columns_, cells.size());
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i > 0) text_ += ',';
    text_ += cells[i];
  }
  text_ += '\n';
  ++rows_;
  return *this;
}

OutputDirectory::OutputDirectory(std::string dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

std::string OutputDirectory::file(const std::string& name) const { return (fs::path(dir_) / name).string(); }

void OutputDirectory::write(const std::string& name, std::string_view content) {
  write_atomic(file(name), content);
  entries_.emplace_back(name, sha256_hex(content));
}

void OutputDirectory::write_manifest() {
  std::string text;
  for (const auto& [name, hash] : entries_) text += hash + "  " + name + "\n";
  write_atomic(file("manifest.txt"), text);
}

}  // namespace rdlearn::io
