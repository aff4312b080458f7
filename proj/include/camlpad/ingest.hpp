#pragma once

#include <cctype>
#include <charconv>
#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "camlpad/datamodel.hpp"
#include "camlpad/error.hpp"

namespace camlpad {

using ordered_json = nlohmann::ordered_json;

inline constexpr std::string_view kIdKey = "_id";

// --- JSON record form -------------------------------------------------------
//
// {"_id": <record_id>, "<time_field>": <epoch ms>, <field>: number|string|null, ...}

inline ordered_json record_to_json(const SensorRecord& record,
                                   std::string_view time_field = "timestamp") {
  ordered_json doc = ordered_json::object();
  doc[std::string(kIdKey)] = record.record_id;
  doc[std::string(time_field)] = record.timestamp;
  for (const auto& [name, value] : record.fields) {
    if (const double* d = std::get_if<double>(&value)) {
      doc[name] = *d;
    } else if (const auto* s = std::get_if<std::string>(&value)) {
      doc[name] = *s;
    } else {
      doc[name] = nullptr;
    }
  }
  return doc;
}

namespace detail {

inline TimestampMs timestamp_from_json(const ordered_json& v, std::size_t line) {
  if (v.is_number()) {
    const double d = v.get<double>();
    if (!std::isfinite(d) || d < 0) {
      throw Error(ErrorCode::MalformedLine, "invalid timestamp", line);
    }
    return v.is_number_integer() ? v.get<TimestampMs>()
                                 : static_cast<TimestampMs>(std::floor(d));
  }
  if (v.is_string()) {
    if (auto t = parse_iso8601(v.get<std::string>()); t && *t >= 0) return *t;
  }
  throw Error(ErrorCode::MalformedLine, "unparseable timestamp", line);
}

inline FieldValue field_from_json(const ordered_json& v) {
  switch (v.type()) {
    case ordered_json::value_t::null:
      return Missing{};
    case ordered_json::value_t::boolean:
      return v.get<bool>() ? 1.0 : 0.0;
    case ordered_json::value_t::number_integer:
    case ordered_json::value_t::number_unsigned:
    case ordered_json::value_t::number_float:
      return make_number(v.get<double>());
    case ordered_json::value_t::string: {
      auto s = v.get<std::string>();
      if (s.empty()) return Missing{};
      return FieldValue{std::move(s)};
    }
    default:
      return FieldValue{v.dump()};
  }
}

}  // namespace detail

// `id_override` carries a store-assigned id that lives outside the document
// (search hits keep it next to `_source`).
inline SensorRecord record_from_json(const ordered_json& doc, DataSourceKind source,
                                     std::string_view time_field, std::size_t line = 0,
                                     const std::string* id_override = nullptr) {
  if (!doc.is_object()) {
    throw Error(ErrorCode::MalformedLine, "line is not a JSON object", line);
  }
  SensorRecord record;
  record.source = source;
  bool have_time = false;
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    const std::string& key = it.key();
    if (key == time_field) {
      if (it.value().is_null()) continue;
      record.timestamp = detail::timestamp_from_json(it.value(), line);
      have_time = true;
    } else if (key == kIdKey) {
      record.record_id = it.value().is_string() ? it.value().get<std::string>()
                                                : it.value().dump();
    } else {
      record.fields.emplace_back(key, detail::field_from_json(it.value()));
    }
  }
  if (!have_time) {
    throw Error(ErrorCode::MissingTimestamp,
                "time field '" + std::string(time_field) + "' absent", line);
  }
  if (id_override != nullptr && !id_override->empty()) record.record_id = *id_override;
  if (record.record_id.empty()) {
    record.record_id = derive_record_id(source, record.timestamp, record.fields);
  }
  return record;
}

inline RecordBatch parse_jsonl(std::string_view bytes, DataSourceKind source,
                               std::string_view time_field = "timestamp") {
  std::vector<SensorRecord> records;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= bytes.size()) {
    std::size_t end = bytes.find('\n', start);
    if (end == std::string_view::npos) end = bytes.size();
    ++line_no;
    std::string_view line = bytes.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") != std::string_view::npos) {
      ordered_json doc = ordered_json::parse(line, nullptr, /*allow_exceptions=*/false);
      if (doc.is_discarded()) {
        throw Error(ErrorCode::MalformedLine, "invalid JSON", line_no);
      }
      records.push_back(record_from_json(doc, source, time_field, line_no));
    }
    if (end == bytes.size()) break;
    start = end + 1;
  }
  return make_batch(source, std::move(records));
}

inline std::string to_jsonl(const RecordBatch& batch, std::string_view time_field = "timestamp") {
  std::string out;
  for (const auto& r : batch.records) {
    out += record_to_json(r, time_field).dump();
    out += '\n';
  }
  return out;
}

// --- CSV --------------------------------------------------------------------

// RFC-4180 tokenizer: quoted fields, doubled quotes, CRLF or LF row ends.
inline std::vector<std::vector<std::string>> parse_csv_rows(std::string_view bytes) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string cell;
  bool in_quotes = false;
  bool row_has_content = false;
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    const char c = bytes[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < bytes.size() && bytes[i + 1] == '"') {
          cell += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        cell += c;
      }
      continue;
    }
    switch (c) {
      case '"':
        in_quotes = true;
        row_has_content = true;
        break;
      case ',':
        row.push_back(std::move(cell));
        cell.clear();
        row_has_content = true;
        break;
      case '\r':
        break;
      case '\n':
        if (row_has_content || !cell.empty()) {
          row.push_back(std::move(cell));
          rows.push_back(std::move(row));
        }
        row.clear();
        cell.clear();
        row_has_content = false;
        break;
      default:
        cell += c;
        row_has_content = true;
    }
  }
  if (row_has_content || !cell.empty()) {
    row.push_back(std::move(cell));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::optional<double> parse_finite(std::string_view text) {
  double v = 0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (first != last && *first == '+') ++first;
  auto [p, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || p != last || first == last || !std::isfinite(v)) {
    return std::nullopt;
  }
  return v;
}

inline RecordBatch parse_csv(std::string_view bytes, DataSourceKind source,
                             std::string_view time_column) {
  const auto rows = parse_csv_rows(bytes);
  if (rows.empty()) throw Error(ErrorCode::HeaderMissing, "no header row");
  const auto& header = rows.front();
  std::optional<std::size_t> time_idx;
  std::optional<std::size_t> id_idx;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == time_column) time_idx = i;
    if (header[i] == kIdKey) id_idx = i;
  }
  if (!time_idx) {
    throw Error(ErrorCode::HeaderMissing,
                "header lacks time column '" + std::string(time_column) + "'");
  }

  std::vector<SensorRecord> records;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    const std::size_t row_no = r + 1;
    if (*time_idx >= row.size() || row[*time_idx].empty()) {
      throw Error(ErrorCode::MissingTimestamp, "empty time cell", row_no);
    }
    SensorRecord rec;
    rec.source = source;
    const std::string& ts = row[*time_idx];
    if (auto n = parse_finite(ts); n && *n >= 0) {
      rec.timestamp = static_cast<TimestampMs>(std::floor(*n));
    } else if (auto iso = parse_iso8601(ts); iso && *iso >= 0) {
      rec.timestamp = *iso;
    } else {
      throw Error(ErrorCode::MalformedLine, "unparseable timestamp '" + ts + "'", row_no);
    }
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (c == *time_idx) continue;
      const std::string cell = c < row.size() ? row[c] : std::string{};
      if (id_idx && c == *id_idx) {
        rec.record_id = cell;
        continue;
      }
      if (cell.empty()) {
        rec.fields.emplace_back(header[c], Missing{});
      } else if (auto n = parse_finite(cell)) {
        rec.fields.emplace_back(header[c], *n);
      } else {
        rec.fields.emplace_back(header[c], cell);
      }
    }
    if (rec.record_id.empty()) {
      rec.record_id = derive_record_id(source, rec.timestamp, rec.fields);
    }
    records.push_back(std::move(rec));
  }
  return make_batch(source, std::move(records));
}

// --- BRO protocol split -----------------------------------------------------

struct BroSplit {
  RecordBatch dns;
  RecordBatch conn;
  std::size_t dropped = 0;
};

// The input batch's own source tag is ignored; every kept record is re-tagged
// and loses the discriminator field, which is constant within each output.
inline BroSplit split_bro_by_protocol(const RecordBatch& batch,
                                      std::string_view discriminator = "log_type") {
  if (!batch.empty() &&
      std::find(batch.schema.begin(), batch.schema.end(), discriminator) == batch.schema.end()) {
    throw Error(ErrorCode::DiscriminatorMissing,
                "field '" + std::string(discriminator) + "' not in schema");
  }
  std::vector<SensorRecord> dns;
  std::vector<SensorRecord> conn;
  std::size_t dropped = 0;
  for (const auto& r : batch.records) {
    const FieldValue* v = r.find(discriminator);
    const auto* tag = v ? std::get_if<std::string>(v) : nullptr;
    std::vector<SensorRecord>* target = nullptr;
    DataSourceKind kind{};
    if (tag && *tag == "dns") {
      target = &dns;
      kind = DataSourceKind::BroDns;
    } else if (tag && *tag == "conn") {
      target = &conn;
      kind = DataSourceKind::BroConn;
    } else {
      ++dropped;
      continue;
    }
    SensorRecord copy = r;
    copy.source = kind;
    std::erase_if(copy.fields, [&](const auto& f) { return f.first == discriminator; });
    target->push_back(std::move(copy));
  }
  return {make_batch(DataSourceKind::BroDns, std::move(dns)),
          make_batch(DataSourceKind::BroConn, std::move(conn)), dropped};
}

// --- windowing --------------------------------------------------------------

inline constexpr std::size_t kDefaultMinHistory = 50;

inline WindowSplit window_split(const RecordBatch& batch, TimestampMs boundary,
                                std::size_t min_history = kDefaultMinHistory) {
  std::vector<SensorRecord> history;
  std::vector<SensorRecord> current;
  for (const auto& r : batch.records) {
    (r.timestamp < boundary ? history : current).push_back(r);
  }
  if (history.size() < min_history) {
    throw Error(ErrorCode::EmptyHistory, std::to_string(history.size()) +
                                             " history records, need " +
                                             std::to_string(min_history));
  }
  if (current.empty()) {
    throw Error(ErrorCode::EmptyCurrent, "no records at or after the boundary");
  }
  return WindowSplit::make(make_batch(batch.source, std::move(history)),
                           make_batch(batch.source, std::move(current)), boundary);
}

}  // namespace camlpad
