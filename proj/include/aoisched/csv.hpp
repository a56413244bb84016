#pragma once

#include <string>
#include <vector>

namespace aoisched {

// Shortest round-trip decimal form ('.' decimal point, no locale).
std::string format_double(double value);
// Fixed number of decimals, for table outputs.
std::string format_fixed(double value, int decimals);

// Writes the file in one shot via a temp-and-rename, so readers never see a
// partial file.
void write_file_atomic(const std::string& path, const std::string& content);

// Comma-separated table with a mandatory header row and LF line endings.
// When timestamped, a single '# generated_at=...' comment line precedes the
// header; suppress it for byte-identical reruns.
class CsvWriter {
 public:
  CsvWriter(std::string path, std::vector<std::string> header, bool timestamp);
  void row(std::vector<std::string> cells);
  void write() const;
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::size_t columns_ = 0;
  std::string body_;
};

}  // namespace aoisched
