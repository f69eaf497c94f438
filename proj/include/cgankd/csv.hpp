#pragma once

// Minimal RFC 4180 CSV: comma separated, fields quoted only when they contain
// a comma, quote or newline, "\n" line endings.

#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cgankd/common.hpp"

namespace cgankd {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw FormatError("CSV column '" + name + "' not found");
  }
  bool has_column(const std::string& name) const {
    for (const auto& h : header)
      if (h == name) return true;
    return false;
  }
};

inline std::string csv_escape(const std::string& f) {
  if (f.find_first_of(",\"\n\r") == std::string::npos) return f;
  std::string out = "\"";
  for (char c : f) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

inline void write_csv_row(std::ostream& os, const std::vector<std::string>& row) {
  for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << csv_escape(row[i]);
  os << '\n';
}

inline void write_csv(const CsvTable& t, std::ostream& os) {
  write_csv_row(os, t.header);
  for (const auto& r : t.rows) {
    if (r.size() != t.header.size()) throw FormatError("CSV row width differs from header");
    write_csv_row(os, r);
  }
}

inline std::string to_csv(const CsvTable& t) {
  std::ostringstream os;
  write_csv(t, os);
  return os.str();
}

/// Reads one record; returns nullopt at end of input.
inline std::optional<std::vector<std::string>> read_csv_record(std::istream& is) {
  if (is.peek() == std::char_traits<char>::eof()) return std::nullopt;
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (;;) {
    const int ch = is.get();
    if (ch == std::char_traits<char>::eof()) {
      if (quoted) throw FormatError("CSV: unterminated quoted field");
      return fields;
    }
    const char c = static_cast<char>(ch);
    if (quoted) {
      if (c == '"') {
        if (is.peek() == '"') {
          fields.back() += '"';
          is.get();
        } else {
          quoted = false;
        }
      } else {
        fields.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else if (c == '\r') {
      continue;
    } else if (c == '\n') {
      return fields;
    } else {
      fields.back() += c;
    }
  }
}

/// An empty stream yields an empty table; rows must match the header width.
inline CsvTable read_csv(std::istream& is) {
  CsvTable t;
  auto h = read_csv_record(is);
  if (!h) return t;
  t.header = std::move(*h);
  std::size_t line = 1;
  while (auto r = read_csv_record(is)) {
    ++line;
    if (r->size() == 1 && r->front().empty()) continue;
    if (r->size() != t.header.size())
      throw FormatError("CSV line " + std::to_string(line) + ": expected " + std::to_string(t.header.size()) +
                        " fields, got " + std::to_string(r->size()));
    t.rows.push_back(std::move(*r));
  }
  return t;
}

inline CsvTable parse_csv(const std::string& text) {
  std::istringstream is(text);
  return read_csv(is);
}

}  // namespace cgankd
