#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include "pdpfi/errors.hpp"
#include "pdpfi/matrix.hpp"
#include "pdpfi/serialize.hpp"

namespace pdpfi {

/// Immutable numeric table: n x p feature matrix, unique feature names and a
/// target column. All values are finite doubles; invariants are enforced at
/// construction so downstream estimators never re-validate.
class Dataset {
 public:
  Dataset(Matrix features, std::vector<std::string> feature_names,
          std::vector<double> target, std::string target_name)
      : features_(std::move(features)),
        feature_names_(std::move(feature_names)),
        target_(std::move(target)),
        target_name_(std::move(target_name)) {
    if (features_.rows() == 0)
      throw Error(ErrorKind::InvalidArgument, "dataset needs at least one row");
    if (features_.cols() == 0)
      throw Error(ErrorKind::InvalidArgument,
                  "dataset needs at least one feature");
    if (feature_names_.size() != features_.cols())
      throw Error(ErrorKind::LengthMismatch,
                  "feature_names size must match feature count");
    if (target_.size() != features_.rows())
      throw Error(ErrorKind::LengthMismatch,
                  "target length must match row count");
    for (std::size_t i = 0; i < feature_names_.size(); ++i) {
      if (feature_names_[i] == target_name_)
        throw Error(ErrorKind::InvalidArgument,
                    "feature name equals target name: " + feature_names_[i]);
      for (std::size_t j = i + 1; j < feature_names_.size(); ++j)
        if (feature_names_[i] == feature_names_[j])
          throw Error(ErrorKind::InvalidArgument,
                      "duplicate feature name: " + feature_names_[i]);
    }
    for (double v : features_.data())
      if (!std::isfinite(v))
        throw Error(ErrorKind::NonFiniteValue, "non-finite feature value");
    for (double v : target_)
      if (!std::isfinite(v))
        throw Error(ErrorKind::NonFiniteValue, "non-finite target value");
  }

  std::size_t n_rows() const { return features_.rows(); }
  std::size_t n_features() const { return features_.cols(); }

  const Matrix& features() const { return features_; }
  const std::vector<double>& target() const { return target_; }
  const std::vector<std::string>& feature_names() const {
    return feature_names_;
  }
  const std::string& target_name() const { return target_name_; }

  /// Index of a named feature; InvalidArgument if absent.
  std::size_t feature_index(std::string_view name) const {
    for (std::size_t i = 0; i < feature_names_.size(); ++i)
      if (feature_names_[i] == name) return i;
    throw Error(ErrorKind::InvalidArgument,
                "unknown feature: " + std::string(name));
  }

 private:
  Matrix features_;
  std::vector<std::string> feature_names_;
  std::vector<double> target_;
  std::string target_name_;
};

/// Row-selection view over a Dataset. Indices may repeat (bootstrap training
/// sets do); materialization preserves order and multiplicity.
struct IndexView {
  const Dataset* base = nullptr;
  std::vector<std::size_t> rows;

  std::size_t size() const { return rows.size(); }
  bool empty() const { return rows.empty(); }

  Matrix gather_features() const {
    Matrix out(rows.size(), base->n_features());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      auto src = base->features().row(rows[i]);
      std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    return out;
  }

  std::vector<double> gather_target() const {
    std::vector<double> out(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i)
      out[i] = base->target()[rows[i]];
    return out;
  }
};

inline IndexView view(const Dataset& data, std::vector<std::size_t> indices) {
  for (std::size_t idx : indices)
    if (idx >= data.n_rows())
      throw Error(ErrorKind::IndexOutOfBounds,
                  "row index " + std::to_string(idx) + " >= n = " +
                      std::to_string(data.n_rows()));
  return IndexView{&data, std::move(indices)};
}

inline IndexView full_view(const Dataset& data) {
  std::vector<std::size_t> idx(data.n_rows());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return IndexView{&data, std::move(idx)};
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      cells.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  cells.push_back(cur);
  return cells;
}

inline double parse_cell(const std::string& cell, std::size_t row,
                         std::size_t col) {
  std::string_view sv(cell);
  // Trim ASCII whitespace; the payload must be a bare decimal number.
  while (!sv.empty() && (sv.front() == ' ' || sv.front() == '\t'))
    sv.remove_prefix(1);
  while (!sv.empty() && (sv.back() == ' ' || sv.back() == '\t'))
    sv.remove_suffix(1);
  double value = 0.0;
  const auto* first = sv.data();
  const auto* last = sv.data() + sv.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last || sv.empty())
    throw Error(ErrorKind::ParseError, "cannot parse '" + cell + "'", row, col);
  if (!std::isfinite(value))
    throw Error(ErrorKind::NonFiniteValue, "non-finite value '" + cell + "'",
                row, col);
  return value;
}

}  // namespace detail

/// Loads a comma-separated, headered, all-numeric CSV. The column named
/// `target_name` becomes the target; remaining columns keep header order.
/// Positions in errors are 0-based: row 0 is the first data line, col is the
/// file column index.
inline Dataset load_csv(const std::string& path,
                        const std::string& target_name) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path);

  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::EmptyFile, path);
  const std::vector<std::string> header = detail::split_csv_line(line);

  std::size_t target_col = header.size();
  for (std::size_t c = 0; c < header.size(); ++c)
    if (header[c] == target_name) {
      target_col = c;
      break;
    }
  if (target_col == header.size())
    throw Error(ErrorKind::MissingTarget,
                "no column named '" + target_name + "' in " + path);
  if (header.size() < 2)
    throw Error(ErrorKind::InvalidArgument,
                "need at least one feature column besides the target");

  std::vector<std::string> names;
  names.reserve(header.size() - 1);
  for (std::size_t c = 0; c < header.size(); ++c)
    if (c != target_col) names.push_back(header[c]);

  std::vector<double> values;  // row-major features
  std::vector<double> target;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty() && in.eof()) break;  // trailing newline
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size())
      throw Error(ErrorKind::ParseError,
                  "expected " + std::to_string(header.size()) + " cells, got " +
                      std::to_string(cells.size()),
                  row, cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const double v = detail::parse_cell(cells[c], row, c);
      if (c == target_col)
        target.push_back(v);
      else
        values.push_back(v);
    }
    ++row;
  }
  if (row == 0) throw Error(ErrorKind::EmptyFile, "no data rows in " + path);

  Matrix features(row, header.size() - 1);
  features.data() = std::move(values);
  return Dataset(std::move(features), std::move(names), std::move(target),
                 target_name);
}

/// Writes `data` as CSV with shortest round-trip decimals, so a reload is
/// bit-identical.
inline void save_csv(const Dataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::IoError, "cannot open " + path);
  for (std::size_t c = 0; c < data.n_features(); ++c)
    out << data.feature_names()[c] << ',';
  out << data.target_name() << '\n';
  for (std::size_t r = 0; r < data.n_rows(); ++r) {
    for (std::size_t c = 0; c < data.n_features(); ++c)
      out << format_double(data.features()(r, c)) << ',';
    out << format_double(data.target()[r]) << '\n';
  }
}

}  // namespace pdpfi
