#include "aoisched/csv.hpp"

#include <array>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <system_error>

namespace aoisched {

std::string format_double(double value) {
  std::array<char, 64> buf;
  const std::to_chars_result r = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  if (r.ec != std::errc()) throw std::runtime_error("format_double failed");
  return std::string(buf.data(), r.ptr);
}

std::string format_fixed(double value, int decimals) {
  std::array<char, 64> buf;
  const int len = std::snprintf(buf.data(), buf.size(), "%.*f", decimals, value);
  if (len < 0 || len >= static_cast<int>(buf.size())) {
    throw std::runtime_error("format_fixed failed");
  }
  return std::string(buf.data(), static_cast<std::size_t>(len));
}

void write_file_atomic(const std::string& path, const std::string& content) {
  const std::filesystem::path target(path);
  if (target.has_parent_path()) {
    std::filesystem::create_directories(target.parent_path());
  }
  const std::filesystem::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw std::runtime_error("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, target);
}

namespace {

std::string timestamp_line() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm_utc{};
  gmtime_r(&now, &tm_utc);
  char buf[40];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return std::string("# generated_at=") + buf + "\n";
}

}  // namespace

CsvWriter::CsvWriter(std::string path, std::vector<std::string> header, bool timestamp)
    : path_(std::move(path)), columns_(header.size()) {
  if (timestamp) body_ += timestamp_line();
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i) body_ += ',';
    body_ += header[i];
  }
  body_ += '\n';
}

void CsvWriter::row(std::vector<std::string> cells) {
  if (cells.size() != columns_) {
    throw std::invalid_argument("CsvWriter: row width does not match the header");
  }
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) body_ += ',';
    body_ += cells[i];
  }
  body_ += '\n';
}

void CsvWriter::write() const { write_file_atomic(path_, body_); }

}  // namespace aoisched
