#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "httplib.h"
#include "json.hpp"

#include "camlpad/datamodel.hpp"
#include "camlpad/error.hpp"
#include "camlpad/ingest.hpp"

namespace camlpad {

struct StoreQuery {
  std::string index;
  TimestampMs time_from = 0;  // inclusive
  TimestampMs time_to = 0;    // exclusive
  std::size_t page_size = 1000;
  std::size_t max_records = 1'000'000;
  std::string time_field = "timestamp";

  void validate() const {
    if (index.empty()) throw Error(ErrorCode::InvalidArgument, "empty index name");
    if (time_from >= time_to) {
      throw Error(ErrorCode::InvalidArgument, "time_from must be < time_to");
    }
    if (page_size == 0 || max_records == 0 || page_size > max_records) {
      throw Error(ErrorCode::InvalidArgument, "need 0 < page_size <= max_records");
    }
  }
};

struct DirectoryStore {
  std::filesystem::path root;
};

struct HttpStore {
  std::string base_url;
  std::optional<std::string> token;
};

using StoreLocator = std::variant<DirectoryStore, HttpStore>;

inline std::string describe(const StoreLocator& locator) {
  if (const auto* d = std::get_if<DirectoryStore>(&locator)) return d->root.string();
  return std::get<HttpStore>(locator).base_url;
}

namespace detail {

struct UrlParts {
  std::string scheme_host_port;  // "http://host:port"
  std::string path_prefix;       // "" or "/prefix" without trailing slash
};

inline UrlParts split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorCode::InvalidArgument, "URL lacks scheme: " + url);
  }
  const auto path_start = url.find('/', scheme_end + 3);
  UrlParts parts;
  if (path_start == std::string::npos) {
    parts.scheme_host_port = url;
  } else {
    parts.scheme_host_port = url.substr(0, path_start);
    parts.path_prefix = url.substr(path_start);
    while (!parts.path_prefix.empty() && parts.path_prefix.back() == '/') {
      parts.path_prefix.pop_back();
    }
  }
  return parts;
}

inline httplib::Headers auth_headers(const std::optional<std::string>& token) {
  httplib::Headers headers;
  if (token && !token->empty()) headers.emplace("Authorization", "Bearer " + *token);
  return headers;
}

inline httplib::Result post_json(const std::string& url, const std::string& path,
                                 const std::string& body,
                                 const std::optional<std::string>& token,
                                 std::chrono::milliseconds timeout = std::chrono::seconds(10)) {
  const auto parts = split_url(url);
  httplib::Client client(parts.scheme_host_port);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);
  std::string full = parts.path_prefix + path;
  if (full.empty()) full = "/";
  return client.Post(full, auth_headers(token), body, "application/json");
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline RecordBatch query_directory(const DirectoryStore& store, const StoreQuery& q,
                                   DataSourceKind source) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (!fs::is_directory(store.root, ec)) {
    throw Error(ErrorCode::StoreUnreachable, "store root not found: " + store.root.string());
  }
  const fs::path dir = store.root / q.index;
  if (!fs::is_directory(dir, ec)) {
    throw Error(ErrorCode::IndexNotFound, "index '" + q.index + "' not found under " +
                                              store.root.string());
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".jsonl") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());

  std::vector<SensorRecord> records;
  for (const auto& file : files) {
    RecordBatch part;
    try {
      part = parse_jsonl(read_file(file), source, q.time_field);
    } catch (const Error& e) {
      throw Error(e.code(), file.string() + ": " + e.message(), e.position());
    }
    for (auto& r : part.records) {
      if (r.timestamp >= q.time_from && r.timestamp < q.time_to) {
        records.push_back(std::move(r));
      }
    }
  }
  sort_canonical(records);
  if (records.size() > q.max_records) records.resize(q.max_records);
  return make_batch(source, std::move(records));
}

inline RecordBatch query_http(const HttpStore& store, const StoreQuery& q,
                              DataSourceKind source) {
  std::vector<SensorRecord> records;
  std::size_t from = 0;
  while (records.size() < q.max_records) {
    const std::size_t size = std::min(q.page_size, q.max_records - records.size());
    nlohmann::json body = {
        {"range", {{q.time_field, {{"gte", q.time_from}, {"lt", q.time_to}}}}},
        {"from", from},
        {"size", size}};
    auto res = post_json(store.base_url, "/" + q.index + "/_search", body.dump(), store.token);
    if (!res) {
      if (records.empty()) {
        throw Error(ErrorCode::StoreUnreachable,
                    store.base_url + ": " + httplib::to_string(res.error()));
      }
      throw Error(ErrorCode::PageFailure,
                  "connection lost after " + std::to_string(records.size()) + " records",
                  records.size());
    }
    if (res->status == 404) {
      throw Error(ErrorCode::IndexNotFound, "index '" + q.index + "' not found at " +
                                                store.base_url);
    }
    if (res->status < 200 || res->status >= 300) {
      throw Error(ErrorCode::PageFailure,
                  "HTTP " + std::to_string(res->status) + " after " +
                      std::to_string(records.size()) + " records",
                  records.size());
    }
    ordered_json doc = ordered_json::parse(res->body, nullptr, false);
    if (doc.is_discarded() || !doc.contains("hits") || !doc["hits"].is_array()) {
      throw Error(ErrorCode::PageFailure,
                  "malformed search response after " + std::to_string(records.size()) +
                      " records",
                  records.size());
    }
    const auto& hits = doc["hits"];
    for (const auto& hit : hits) {
      std::string id;
      if (hit.contains("_id")) {
        id = hit["_id"].is_string() ? hit["_id"].get<std::string>() : hit["_id"].dump();
      }
      if (!hit.contains("_source")) {
        throw Error(ErrorCode::PageFailure, "hit without _source", records.size());
      }
      auto rec = record_from_json(hit["_source"], source, q.time_field, 0, &id);
      if (rec.timestamp >= q.time_from && rec.timestamp < q.time_to) {
        records.push_back(std::move(rec));
      }
      if (records.size() >= q.max_records) break;
    }
    if (hits.size() < size) break;
    from += hits.size();
  }
  sort_canonical(records);
  return make_batch(source, std::move(records));
}

}  // namespace detail

// Records with time_from <= t < time_to in canonical order, at most
// max_records. Never returns a partial page sequence: failures throw.
inline RecordBatch query_store(const StoreLocator& locator, const StoreQuery& q,
                               DataSourceKind source) {
  q.validate();
  if (const auto* d = std::get_if<DirectoryStore>(&locator)) {
    return detail::query_directory(*d, q, source);
  }
  return detail::query_http(std::get<HttpStore>(locator), q, source);
}

// Reachability probe used by dry runs: the index must exist.
inline void check_index(const StoreLocator& locator, const std::string& index,
                        const std::string& time_field) {
  StoreQuery q;
  q.index = index;
  q.time_from = 0;
  q.time_to = 1;
  q.page_size = 1;
  q.max_records = 1;
  q.time_field = time_field;
  if (const auto* d = std::get_if<DirectoryStore>(&locator)) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(d->root)) {
      throw Error(ErrorCode::StoreUnreachable, "store root not found: " + d->root.string());
    }
    if (!fs::is_directory(d->root / index)) {
      throw Error(ErrorCode::IndexNotFound, "index '" + index + "' not found under " +
                                                d->root.string());
    }
    return;
  }
  query_store(locator, q, DataSourceKind::Yaf);
}

}  // namespace camlpad
