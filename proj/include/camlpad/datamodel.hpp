#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <variant>
#include <vector>

#include "camlpad/error.hpp"
#include "camlpad/random.hpp"

namespace camlpad {

// Epoch milliseconds, UTC.
using TimestampMs = std::int64_t;

inline constexpr TimestampMs kMillisPerDay = 86'400'000;

enum class DataSourceKind { BroDns, BroConn, Yaf, Snort, Meraki };

inline constexpr std::array<DataSourceKind, 5> kAllSources = {
    DataSourceKind::BroDns, DataSourceKind::BroConn, DataSourceKind::Yaf,
    DataSourceKind::Snort, DataSourceKind::Meraki};

constexpr std::string_view to_string(DataSourceKind kind) {
  switch (kind) {
    case DataSourceKind::BroDns: return "bro_dns";
    case DataSourceKind::BroConn: return "bro_conn";
    case DataSourceKind::Yaf: return "yaf";
    case DataSourceKind::Snort: return "snort";
    case DataSourceKind::Meraki: return "meraki";
  }
  return "unknown";
}

inline std::optional<DataSourceKind> parse_source_kind(std::string_view name) {
  for (auto kind : kAllSources) {
    if (to_string(kind) == name) return kind;
  }
  return std::nullopt;
}

constexpr std::size_t source_index(DataSourceKind kind) {
  return static_cast<std::size_t>(kind);
}

struct Missing {
  friend bool operator==(Missing, Missing) = default;
};

// Missing | Number | Category. Use the factory helpers; they enforce the
// finite-number and non-empty-category invariants.
using FieldValue = std::variant<Missing, double, std::string>;

inline FieldValue make_number(double v) {
  if (!std::isfinite(v)) {
    throw Error(ErrorCode::InvalidArgument, "non-finite number in field value");
  }
  return FieldValue{v};
}

inline FieldValue make_category(std::string text) {
  if (text.empty()) {
    throw Error(ErrorCode::InvalidArgument, "empty category text");
  }
  return FieldValue{std::move(text)};
}

inline bool is_missing(const FieldValue& v) {
  return std::holds_alternative<Missing>(v);
}

using FieldList = std::vector<std::pair<std::string, FieldValue>>;

struct SensorRecord {
  DataSourceKind source = DataSourceKind::Yaf;
  TimestampMs timestamp = 0;
  FieldList fields;  // first-seen order
  std::string record_id;

  const FieldValue* find(std::string_view name) const {
    for (const auto& [key, value] : fields) {
      if (key == name) return &value;
    }
    return nullptr;
  }

  friend bool operator==(const SensorRecord&, const SensorRecord&) = default;
};

struct RecordBatch {
  DataSourceKind source = DataSourceKind::Yaf;
  std::vector<SensorRecord> records;
  std::vector<std::string> schema;  // union of field names, first-seen order

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }

  friend bool operator==(const RecordBatch&, const RecordBatch&) = default;
};

inline std::vector<std::string> union_schema(const std::vector<SensorRecord>& records) {
  std::vector<std::string> schema;
  std::unordered_set<std::string> seen;
  for (const auto& r : records) {
    for (const auto& [name, _] : r.fields) {
      if (seen.insert(name).second) schema.push_back(name);
    }
  }
  return schema;
}

inline RecordBatch make_batch(DataSourceKind source, std::vector<SensorRecord> records) {
  RecordBatch batch;
  batch.source = source;
  batch.schema = union_schema(records);
  batch.records = std::move(records);
  return batch;
}

// Canonical batch order: ascending (timestamp, record_id).
inline void sort_canonical(std::vector<SensorRecord>& records) {
  std::stable_sort(records.begin(), records.end(), [](const auto& a, const auto& b) {
    if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
    return a.record_id < b.record_id;
  });
}

inline std::string format_number(double v) {
  std::array<char, 64> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), end);
}

// Stable text form of the field list; feeds record-id hashing.
inline std::string serialize_fields(const FieldList& fields) {
  std::string out;
  for (const auto& [name, value] : fields) {
    out += name;
    out += '=';
    if (std::holds_alternative<double>(value)) {
      out += 'n';
      out += format_number(std::get<double>(value));
    } else if (std::holds_alternative<std::string>(value)) {
      out += 's';
      out += std::get<std::string>(value);
    } else {
      out += '-';
    }
    out += '\x1f';
  }
  return out;
}

inline std::string derive_record_id(DataSourceKind source, TimestampMs ts,
                                    const FieldList& fields) {
  std::uint64_t h = fnv1a64(to_string(source));
  h = fnv1a64(std::to_string(ts), h ^ 0x2f);
  h = fnv1a64(serialize_fields(fields), h ^ 0x3d);
  std::array<char, 17> buf{};
  std::snprintf(buf.data(), buf.size(), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf.data(), 16);
}

struct Violation {
  std::string record_id;
  std::string reason;
};

inline std::vector<Violation> validate_batch(const RecordBatch& batch) {
  std::vector<Violation> out;
  std::unordered_set<std::string> schema(batch.schema.begin(), batch.schema.end());
  std::unordered_map<std::string, std::size_t> ids;
  for (const auto& r : batch.records) {
    if (r.record_id.empty()) out.push_back({r.record_id, "empty record_id"});
    if (++ids[r.record_id] == 2) out.push_back({r.record_id, "duplicate record_id"});
    if (r.source != batch.source) {
      out.push_back({r.record_id, "source " + std::string(to_string(r.source)) +
                                      " differs from batch source " +
                                      std::string(to_string(batch.source))});
    }
    if (r.timestamp < 0) out.push_back({r.record_id, "negative timestamp"});
    std::unordered_set<std::string_view> names;
    for (const auto& [name, value] : r.fields) {
      if (!names.insert(name).second) {
        out.push_back({r.record_id, "duplicate field '" + name + "'"});
      }
      if (!schema.contains(name)) {
        out.push_back({r.record_id, "field '" + name + "' missing from schema"});
      }
      if (const double* d = std::get_if<double>(&value); d && !std::isfinite(*d)) {
        out.push_back({r.record_id, "non-finite number in '" + name + "'"});
      }
      if (const auto* s = std::get_if<std::string>(&value); s && s->empty()) {
        out.push_back({r.record_id, "empty category in '" + name + "'"});
      }
    }
  }
  return out;
}

// History strictly before the boundary, current at or after it.
class WindowSplit {
 public:
  static WindowSplit make(RecordBatch history, RecordBatch current, TimestampMs boundary) {
    if (history.source != current.source) {
      throw Error(ErrorCode::InvalidArgument, "history and current source kinds differ");
    }
    for (const auto& r : history.records) {
      if (r.timestamp >= boundary) {
        throw Error(ErrorCode::InvalidArgument,
                    "history record " + r.record_id + " not before boundary");
      }
    }
    for (const auto& r : current.records) {
      if (r.timestamp < boundary) {
        throw Error(ErrorCode::InvalidArgument,
                    "current record " + r.record_id + " before boundary");
      }
    }
    return WindowSplit(std::move(history), std::move(current), boundary);
  }

  const RecordBatch& history() const { return history_; }
  const RecordBatch& current() const { return current_; }
  TimestampMs boundary() const { return boundary_; }

 private:
  WindowSplit(RecordBatch h, RecordBatch c, TimestampMs b)
      : history_(std::move(h)), current_(std::move(c)), boundary_(b) {}

  RecordBatch history_;
  RecordBatch current_;
  TimestampMs boundary_;
};

// --- time helpers -----------------------------------------------------------

inline TimestampMs day_start(TimestampMs t) {
  return t >= 0 ? t - t % kMillisPerDay : t - ((t % kMillisPerDay) + kMillisPerDay) % kMillisPerDay;
}

inline std::string iso_date(TimestampMs t) {
  using namespace std::chrono;
  const sys_days d = floor<days>(sys_time<milliseconds>(milliseconds(t)));
  const year_month_day ymd{d};
  std::array<char, 16> buf{};
  std::snprintf(buf.data(), buf.size(), "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf.data();
}

namespace detail {
inline bool read_int(std::string_view s, std::size_t pos, std::size_t len, int& out) {
  if (pos + len > s.size()) return false;
  auto [p, ec] = std::from_chars(s.data() + pos, s.data() + pos + len, out);
  return ec == std::errc{} && p == s.data() + pos + len;
}
}  // namespace detail

// Accepts "YYYY-MM-DD" and "YYYY-MM-DDTHH:MM:SS[.fff][Z]" (UTC only).
inline std::optional<TimestampMs> parse_iso8601(std::string_view s) {
  using namespace std::chrono;
  int y, mo, d;
  if (s.size() < 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
  if (!detail::read_int(s, 0, 4, y) || !detail::read_int(s, 5, 2, mo) ||
      !detail::read_int(s, 8, 2, d)) {
    return std::nullopt;
  }
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)},
                           day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) return std::nullopt;
  TimestampMs ms = duration_cast<milliseconds>(sys_days{ymd}.time_since_epoch()).count();
  if (s.size() == 10) return ms;
  if (s[10] != 'T' && s[10] != ' ') return std::nullopt;
  int hh, mm, ss;
  if (s.size() < 19 || s[13] != ':' || s[16] != ':' || !detail::read_int(s, 11, 2, hh) ||
      !detail::read_int(s, 14, 2, mm) || !detail::read_int(s, 17, 2, ss) || hh > 23 ||
      mm > 59 || ss > 60) {
    return std::nullopt;
  }
  ms += (hh * 3600LL + mm * 60LL + ss) * 1000LL;
  std::size_t pos = 19;
  if (pos < s.size() && s[pos] == '.') {
    ++pos;
    int frac_ms = 0;
    int digits = 0;
    while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') {
      if (digits < 3) frac_ms = frac_ms * 10 + (s[pos] - '0');
      ++digits;
      ++pos;
    }
    if (digits == 0) return std::nullopt;
    for (int i = digits; i < 3; ++i) frac_ms *= 10;
    ms += frac_ms;
  }
  if (pos < s.size() && s[pos] == 'Z') ++pos;
  if (pos != s.size()) return std::nullopt;
  return ms;
}

}  // namespace camlpad
