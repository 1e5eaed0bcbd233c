#pragma once

#include <string>
#include <vector>

#include "json.hpp"

namespace mwq {

/// Shortest decimal string that round-trips to the same double
/// ("nan"/"inf" for non-finite values).
std::string format_double(double v);

/// Minimal CSV builder: fixed header, rows appended as preformatted cells.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header)
      : header_(std::move(header)) {}

  std::vector<std::string>& new_row();
  void add(const std::string& cell);
  void add(double v) { add(format_double(v)); }
  void add(long v) { add(std::to_string(v)); }
  void add(int v) { add(std::to_string(v)); }
  void add(unsigned long long v) { add(std::to_string(v)); }

  std::string to_string() const;
  std::size_t rows() const { return rows_.size(); }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

/// Writes content to path, creating parent directories. I/O failures are
/// reported with the path.
void write_file(const std::string& path, const std::string& content);

std::string read_file(const std::string& path);

/// Canonical JSON text: sorted keys, 2-space indent, trailing newline.
std::string canonical_json(const nlohmann::json& j);

}  // namespace mwq
