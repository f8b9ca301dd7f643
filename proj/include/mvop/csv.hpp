#pragma once

// Minimal CSV reading/writing: comma separated, optional double-quoted
// fields with "" escapes, first row is the header.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "mvop/error.hpp"
#include "mvop/model.hpp"
#include "mvop/table.hpp"

namespace mvop {

struct CsvDocument {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column_index(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    return header.size();
  }
};

namespace detail {

inline std::vector<std::string> split_csv_line(std::string_view line, std::size_t line_no) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  if (quoted) throw DataError("line " + std::to_string(line_no) + ": unterminated quoted field");
  fields.push_back(std::move(cur));
  return fields;
}

inline std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t')) --e;
  return std::string(s.substr(b, e - b));
}

}  // namespace detail

inline CsvDocument parse_csv(std::istream& in) {
  CsvDocument doc;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    if (!have_header) {
      if (line.empty()) continue;
      for (auto& f : detail::split_csv_line(line, line_no)) doc.header.push_back(detail::trim(f));
      have_header = true;
      continue;
    }
    if (line.empty()) continue;
    auto fields = detail::split_csv_line(line, line_no);
    if (fields.size() != doc.header.size()) {
      throw DataError("line " + std::to_string(line_no) + ": expected " + std::to_string(doc.header.size()) +
                      " fields, found " + std::to_string(fields.size()));
    }
    for (auto& f : fields) f = detail::trim(f);
    doc.rows.push_back(std::move(fields));
  }
  if (!have_header) throw DataError("CSV input has no header row");
  return doc;
}

inline CsvDocument read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return parse_csv(in);
}

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

// Shortest representation that reads back to the same double.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (v == 0.0) return "0";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline bool is_missing(const std::string& s) { return s.empty() || s == "NA" || s == "NaN" || s == "nan"; }

inline bool parse_double(const std::string& s, double& out) {
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  const auto res = std::from_chars(first, last, out);
  return res.ec == std::errc() && res.ptr == last && std::isfinite(out);
}

struct LoadedTable {
  ObservationTable table;
  std::size_t dropped = 0;
};

// Reads the columns a model uses. Rows with a blank in any used column are
// dropped (complete cases); anything else that does not parse is an error
// naming the row and column.
inline LoadedTable load_table(const CsvDocument& doc, const ModelSpec& spec) {
  std::vector<std::string> used;
  std::set<std::string> seen;
  for (const auto& eq : spec.equations) {
    for (const auto& c : eq.covariates) {
      if (seen.insert(c).second) used.push_back(c);
    }
  }
  for (const auto& eq : spec.equations) {
    if (seen.insert(eq.outcome).second) used.push_back(eq.outcome);
  }
  std::vector<std::size_t> idx;
  for (const auto& name : used) {
    const std::size_t i = doc.column_index(name);
    if (i == doc.header.size()) throw DataError("input lacks required column '" + name + "'");
    idx.push_back(i);
  }
  if (doc.rows.empty()) throw DataError("input has a header but no data rows");

  std::vector<std::vector<double>> cols(used.size());
  LoadedTable out;
  for (std::size_t r = 0; r < doc.rows.size(); ++r) {
    const auto& row = doc.rows[r];
    bool missing = false;
    for (std::size_t c = 0; c < used.size(); ++c) missing = missing || is_missing(row[idx[c]]);
    if (missing) {
      ++out.dropped;
      continue;
    }
    for (std::size_t c = 0; c < used.size(); ++c) {
      double v = 0.0;
      if (!parse_double(row[idx[c]], v)) {
        throw DataError("row " + std::to_string(r + 1) + ", column '" + used[c] + "': cannot parse '" +
                        row[idx[c]] + "' as a number");
      }
      cols[c].push_back(v);
    }
  }
  for (const auto& eq : spec.equations) {
    const std::size_t c = static_cast<std::size_t>(std::find(used.begin(), used.end(), eq.outcome) - used.begin());
    // Report against the original row numbering.
    std::size_t kept = 0;
    for (std::size_t r = 0; r < doc.rows.size(); ++r) {
      bool missing = false;
      for (std::size_t k = 0; k < used.size(); ++k) missing = missing || is_missing(doc.rows[r][idx[k]]);
      if (missing) continue;
      const double v = cols[c][kept++];
      if (!(v >= 0.0 && v <= eq.n_stages - 1 && v == std::floor(v))) {
        throw DataError("row " + std::to_string(r + 1) + ", column '" + eq.outcome + "': outcome " +
                        format_double(v) + " is not a stage in 0.." + std::to_string(eq.n_stages - 1));
      }
    }
  }
  if (cols.front().empty()) throw DataError("no complete rows left after dropping rows with blanks");
  for (std::size_t c = 0; c < used.size(); ++c) out.table.add_column(used[c], std::move(cols[c]));
  return out;
}

inline LoadedTable load_table(const std::string& path, const ModelSpec& spec) {
  return load_table(read_csv_file(path), spec);
}

inline void write_table_csv(std::ostream& out, const ObservationTable& t) {
  const auto& names = t.names();
  for (std::size_t c = 0; c < names.size(); ++c) out << (c ? "," : "") << csv_escape(names[c]);
  out << '\n';
  for (std::size_t i = 0; i < t.n_rows(); ++i) {
    for (std::size_t c = 0; c < names.size(); ++c) out << (c ? "," : "") << format_double(t.column(c)[i]);
    out << '\n';
  }
}

inline void write_csv(std::ostream& out, const CsvDocument& doc) {
  for (std::size_t c = 0; c < doc.header.size(); ++c) out << (c ? "," : "") << csv_escape(doc.header[c]);
  out << '\n';
  for (const auto& row : doc.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "," : "") << csv_escape(row[c]);
    out << '\n';
  }
}

}  // namespace mvop
