#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "mvop/error.hpp"

namespace mvop {

// Column-oriented numeric table. Outcome columns hold 0-based stage indices
// stored as doubles, exactly like covariates; the model spec decides which
// column plays which role.
class ObservationTable {
 public:
  ObservationTable() = default;

  std::size_t n_rows() const { return n_rows_; }
  std::size_t n_columns() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }

  bool has_column(const std::string& name) const { return find(name) != npos; }

  const std::vector<double>& column(const std::string& name) const {
    const std::size_t i = find(name);
    if (i == npos) throw DataError("missing column '" + name + "'");
    return columns_[i];
  }
  const std::vector<double>& column(std::size_t i) const { return columns_.at(i); }

  void add_column(const std::string& name, std::vector<double> values) {
    if (has_column(name)) throw DataError("duplicate column '" + name + "'");
    if (!names_.empty() && values.size() != n_rows_) {
      throw ShapeError("column '" + name + "' has " + std::to_string(values.size()) + " rows, table has " +
                       std::to_string(n_rows_));
    }
    if (names_.empty()) n_rows_ = values.size();
    names_.push_back(name);
    columns_.push_back(std::move(values));
  }

  // Table with every row repeated `times` times, in order (rows 0..n-1, then again).
  ObservationTable repeated(std::size_t times) const {
    ObservationTable out;
    for (std::size_t c = 0; c < names_.size(); ++c) {
      std::vector<double> v;
      v.reserve(n_rows_ * times);
      for (std::size_t t = 0; t < times; ++t) v.insert(v.end(), columns_[c].begin(), columns_[c].end());
      out.add_column(names_[c], std::move(v));
    }
    return out;
  }

  friend bool operator==(const ObservationTable&, const ObservationTable&) = default;

 private:
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  std::size_t find(const std::string& name) const {
    for (std::size_t i = 0; i < names_.size(); ++i) {
      if (names_[i] == name) return i;
    }
    return npos;
  }

  std::vector<std::string> names_;
  std::vector<std::vector<double>> columns_;
  std::size_t n_rows_ = 0;
};

}  // namespace mvop
