#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "json.hpp"

#include "camlpad/datamodel.hpp"
#include "camlpad/error.hpp"
#include "camlpad/matrix.hpp"

namespace camlpad {

// NaN marks a missing cell; finite numbers never collide with it.
inline constexpr double kMissingCell = std::numeric_limits<double>::quiet_NaN();

inline bool is_missing_cell(double v) { return std::isnan(v); }

enum class ColumnKind { Numeric, Encoded };

// Per-field category → code maps. Codes are 0..n-1 in first-seen order.
class EncodingDictionary {
 public:
  std::optional<int> code(const std::string& field, const std::string& category) const {
    auto f = index_.find(field);
    if (f == index_.end()) return std::nullopt;
    auto c = f->second.find(category);
    if (c == f->second.end()) return std::nullopt;
    return c->second;
  }

  // Returns the code, assigning the next one when the category is new.
  int code_or_extend(const std::string& field, const std::string& category, bool* added = nullptr) {
    auto& lookup = index_[field];
    auto& cats = categories_for(field);
    auto [it, inserted] = lookup.emplace(category, static_cast<int>(cats.size()));
    if (inserted) cats.push_back(category);
    if (added) *added = inserted;
    return it->second;
  }

  bool has_field(const std::string& field) const { return index_.contains(field); }

  const std::vector<std::string>& fields() const { return field_order_; }

  const std::vector<std::string>& categories(const std::string& field) const {
    static const std::vector<std::string> kEmpty;
    for (std::size_t i = 0; i < field_order_.size(); ++i) {
      if (field_order_[i] == field) return categories_[i];
    }
    return kEmpty;
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json doc = nlohmann::ordered_json::object();
    for (std::size_t i = 0; i < field_order_.size(); ++i) {
      nlohmann::ordered_json codes = nlohmann::ordered_json::object();
      for (std::size_t c = 0; c < categories_[i].size(); ++c) {
        codes[categories_[i][c]] = static_cast<int>(c);
      }
      doc[field_order_[i]] = std::move(codes);
    }
    return doc;
  }

  static EncodingDictionary from_json(const nlohmann::ordered_json& doc) {
    if (!doc.is_object()) throw Error(ErrorCode::InvalidArgument, "dictionary must be an object");
    EncodingDictionary dict;
    for (auto f = doc.begin(); f != doc.end(); ++f) {
      if (!f.value().is_object()) {
        throw Error(ErrorCode::InvalidArgument, "dictionary field '" + f.key() + "' malformed");
      }
      std::vector<std::pair<int, std::string>> entries;
      for (auto c = f.value().begin(); c != f.value().end(); ++c) {
        entries.emplace_back(c.value().get<int>(), c.key());
      }
      std::sort(entries.begin(), entries.end());
      for (std::size_t i = 0; i < entries.size(); ++i) {
        if (entries[i].first != static_cast<int>(i)) {
          throw Error(ErrorCode::InvalidArgument,
                      "codes for '" + f.key() + "' are not contiguous from 0");
        }
      }
      dict.categories_for(f.key());
      for (auto& [code, cat] : entries) dict.code_or_extend(f.key(), cat);
    }
    return dict;
  }

  friend bool operator==(const EncodingDictionary& a, const EncodingDictionary& b) {
    return a.field_order_ == b.field_order_ && a.categories_ == b.categories_;
  }

 private:
  std::vector<std::string>& categories_for(const std::string& field) {
    for (std::size_t i = 0; i < field_order_.size(); ++i) {
      if (field_order_[i] == field) return categories_[i];
    }
    field_order_.push_back(field);
    categories_.emplace_back();
    index_.try_emplace(field);
    return categories_.back();
  }

  std::vector<std::string> field_order_;
  std::vector<std::vector<std::string>> categories_;
  std::unordered_map<std::string, std::unordered_map<std::string, int>> index_;
};

struct ColumnLayout {
  std::vector<std::string> names;
  std::vector<ColumnKind> kinds;
};

struct FeatureMatrix {
  Matrix values;
  std::vector<std::string> column_names;
  std::vector<ColumnKind> column_kinds;
  std::vector<std::string> row_ids;

  std::size_t rows() const { return values.rows(); }
  std::size_t cols() const { return values.cols(); }

  ColumnLayout layout() const { return {column_names, column_kinds}; }

  std::size_t missing_count() const {
    std::size_t n = 0;
    for (double v : values.data()) n += is_missing_cell(v) ? 1 : 0;
    return n;
  }
};

struct EncodeResult {
  FeatureMatrix matrix;
  EncodingDictionary dictionary;
  // "field=category" for each category first seen in this call while
  // extending a supplied dictionary (scoring-time drift).
  std::vector<std::string> new_categories;
};

// One column per schema field (or per layout column when scoring against a
// fitted layout). Categories map through the dictionary, which is extended in
// first-seen order for unseen values.
inline EncodeResult encode(const RecordBatch& batch,
                           std::optional<EncodingDictionary> dict = std::nullopt,
                           const std::optional<ColumnLayout>& layout = std::nullopt) {
  const bool scoring = dict.has_value();
  EncodeResult out;
  out.dictionary = dict ? std::move(*dict) : EncodingDictionary{};

  ColumnLayout cols;
  if (layout) {
    cols = *layout;
  } else {
    cols.names = batch.schema;
    cols.kinds.assign(cols.names.size(), ColumnKind::Numeric);
    std::unordered_map<std::string, std::size_t> pos;
    for (std::size_t i = 0; i < cols.names.size(); ++i) {
      pos[cols.names[i]] = i;
      if (out.dictionary.has_field(cols.names[i])) cols.kinds[i] = ColumnKind::Encoded;
    }
    for (const auto& r : batch.records) {
      for (const auto& [name, value] : r.fields) {
        if (std::holds_alternative<std::string>(value)) cols.kinds[pos[name]] = ColumnKind::Encoded;
      }
    }
  }

  FeatureMatrix& m = out.matrix;
  m.values = Matrix(batch.size(), cols.names.size(), kMissingCell);
  m.column_names = cols.names;
  m.column_kinds = cols.kinds;
  m.row_ids.reserve(batch.size());

  std::unordered_map<std::string_view, std::size_t> col_of;
  for (std::size_t c = 0; c < cols.names.size(); ++c) col_of[cols.names[c]] = c;

  for (std::size_t r = 0; r < batch.size(); ++r) {
    const auto& rec = batch.records[r];
    m.row_ids.push_back(rec.record_id);
    for (const auto& [name, value] : rec.fields) {
      auto it = col_of.find(name);
      if (it == col_of.end() || is_missing(value)) continue;
      const std::size_t c = it->second;
      if (cols.kinds[c] == ColumnKind::Numeric) {
        if (const double* d = std::get_if<double>(&value)) m.values(r, c) = *d;
        continue;
      }
      const std::string text = std::holds_alternative<double>(value)
                                   ? format_number(std::get<double>(value))
                                   : std::get<std::string>(value);
      bool added = false;
      m.values(r, c) = out.dictionary.code_or_extend(name, text, &added);
      if (added && scoring) out.new_categories.push_back(name + "=" + text);
    }
  }
  return out;
}

// Least-squares line over (row index, observed value); missing cells take the
// fitted value at their index.
inline std::vector<double> impute_numeric(std::vector<double> column) {
  double sum_i = 0, sum_y = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < column.size(); ++i) {
    if (is_missing_cell(column[i])) continue;
    sum_i += static_cast<double>(i);
    sum_y += column[i];
    ++n;
  }
  if (n == column.size()) return column;
  double intercept = 0.0, slope = 0.0;
  if (n == 1) {
    intercept = sum_y;
  } else if (n > 1) {
    const double mean_i = sum_i / n, mean_y = sum_y / n;
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < column.size(); ++i) {
      if (is_missing_cell(column[i])) continue;
      const double di = static_cast<double>(i) - mean_i;
      sxx += di * di;
      sxy += di * (column[i] - mean_y);
    }
    slope = sxy / sxx;
    intercept = mean_y - slope * mean_i;
  }
  for (std::size_t i = 0; i < column.size(); ++i) {
    if (is_missing_cell(column[i])) column[i] = intercept + slope * static_cast<double>(i);
  }
  return column;
}

// Next observed code; trailing gaps take the last observed code.
inline std::vector<double> impute_categorical_backfill(std::vector<double> column) {
  std::optional<double> next;
  std::optional<double> last;
  for (double v : column) {
    if (!is_missing_cell(v)) last = v;
  }
  for (std::size_t i = column.size(); i-- > 0;) {
    if (!is_missing_cell(column[i])) {
      next = column[i];
    } else {
      column[i] = next ? *next : (last ? *last : 0.0);
    }
  }
  return column;
}

inline FeatureMatrix impute(FeatureMatrix m) {
  for (std::size_t c = 0; c < m.cols(); ++c) {
    auto col = m.values.column(c);
    m.values.set_column(c, m.column_kinds[c] == ColumnKind::Numeric
                               ? impute_numeric(std::move(col))
                               : impute_categorical_backfill(std::move(col)));
  }
  return m;
}

struct ColumnStats {
  double mean = 0.0;
  double stddev = 0.0;  // population

  friend bool operator==(const ColumnStats&, const ColumnStats&) = default;
};

inline std::vector<ColumnStats> column_stats(const Matrix& m) {
  std::vector<ColumnStats> stats(m.cols());
  if (m.rows() == 0) return stats;
  for (std::size_t c = 0; c < m.cols(); ++c) {
    double sum = 0;
    for (std::size_t r = 0; r < m.rows(); ++r) sum += m(r, c);
    const double mean = sum / m.rows();
    double ss = 0;
    for (std::size_t r = 0; r < m.rows(); ++r) ss += (m(r, c) - mean) * (m(r, c) - mean);
    stats[c] = {mean, std::sqrt(ss / m.rows())};
  }
  return stats;
}

struct StandardizeResult {
  FeatureMatrix matrix;
  std::vector<ColumnStats> stats;
};

inline StandardizeResult standardize(FeatureMatrix m,
                                     std::optional<std::vector<ColumnStats>> stats = std::nullopt) {
  if (m.missing_count() != 0) {
    throw Error(ErrorCode::InvalidArgument, "standardize requires an imputed matrix");
  }
  std::vector<ColumnStats> used = stats ? std::move(*stats) : column_stats(m.values);
  if (used.size() != m.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "stats length " + std::to_string(used.size()) +
                                                  " vs " + std::to_string(m.cols()) + " columns");
  }
  for (std::size_t c = 0; c < m.cols(); ++c) {
    const auto [mean, sd] = used[c];
    for (std::size_t r = 0; r < m.rows(); ++r) {
      m.values(r, c) = sd > 0.0 ? (m.values(r, c) - mean) / sd : 0.0;
    }
  }
  return {std::move(m), std::move(used)};
}

inline FeatureMatrix unstandardize(FeatureMatrix m, const std::vector<ColumnStats>& stats) {
  if (stats.size() != m.cols()) throw Error(ErrorCode::DimensionMismatch, "stats length");
  for (std::size_t c = 0; c < m.cols(); ++c) {
    for (std::size_t r = 0; r < m.rows(); ++r) {
      m.values(r, c) = m.values(r, c) * stats[c].stddev + stats[c].mean;
    }
  }
  return m;
}

}  // namespace camlpad
