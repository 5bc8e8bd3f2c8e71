#pragma once

#include <charconv>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "mfpm/errors.hpp"

namespace mfpm {

/// Shortest round-trip decimal representation; locale independent.
inline std::string format_double(double x)
{
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s)
{
  double out = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw DimensionError("cannot parse number '" + std::string(s) + "'");
  return out;
}

/// Minimal RFC-4180 writer: comma separated, CRLF-free ("\n") rows, quoting
/// only fields that need it.
class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& os) : os_(os) {}

  void header(const std::vector<std::string>& names)
  {
    for (const auto& n : names) field(n);
    end_row();
  }
  void field(const std::string& s)
  {
    sep();
    if (s.find_first_of(",\"\n\r") == std::string::npos) {
      os_ << s;
      return;
    }
    os_ << '"';
    for (char c : s) {
      if (c == '"') os_ << '"';
      os_ << c;
    }
    os_ << '"';
  }
  void field(const char* s) { field(std::string(s)); }
  void field(double x)
  {
    sep();
    os_ << format_double(x);
  }
  void field(std::int64_t x)
  {
    sep();
    os_ << x;
  }
  void field(std::size_t x)
  {
    sep();
    os_ << x;
  }
  void field(int x) { field(static_cast<std::int64_t>(x)); }
  void end_row()
  {
    os_ << '\n';
    first_ = true;
  }

 private:
  void sep()
  {
    if (!first_) os_ << ',';
    first_ = false;
  }
  std::ostream& os_;
  bool first_ = true;
};

inline std::vector<std::vector<std::string>> read_csv(std::istream& is)
{
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string cell;
  bool quoted = false;
  bool any = false;
  char c;
  while (is.get(c)) {
    any = true;
    if (quoted) {
      if (c == '"') {
        if (is.peek() == '"') {
          is.get(c);
          cell.push_back('"');
        } else {
          quoted = false;
        }
      } else {
        cell.push_back(c);
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      row.push_back(std::move(cell));
      cell.clear();
    } else if (c == '\n') {
      row.push_back(std::move(cell));
      cell.clear();
      rows.push_back(std::move(row));
      row.clear();
      any = false;
    } else if (c != '\r') {
      cell.push_back(c);
    }
  }
  if (any) {
    row.push_back(std::move(cell));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace mfpm
