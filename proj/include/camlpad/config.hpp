#pragma once

#include <charconv>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "camlpad/datamodel.hpp"
#include "camlpad/detectors.hpp"
#include "camlpad/error.hpp"
#include "camlpad/gauge.hpp"
#include "camlpad/ingest.hpp"
#include "camlpad/store.hpp"

namespace camlpad {

struct SourceSettings {
  std::string index;
  // BRO sources only; empty disables the protocol split.
  std::string discriminator;
};

struct PipelineConfig {
  StoreLocator store = DirectoryStore{"."};
  std::string time_field = "timestamp";
  std::optional<TimestampMs> boundary;  // nullopt means start of today (UTC)
  std::size_t history_days = 7;
  std::size_t min_history = kDefaultMinHistory;
  std::size_t page_size = 1000;
  std::size_t max_records = 1'000'000;
  std::vector<DataSourceKind> sources{kAllSources.begin(), kAllSources.end()};
  std::map<DataSourceKind, SourceSettings> source_settings;

  IsolationForestParams iforest;
  HbosParams hbos;
  CblofParams cblof;

  double contamination = 0.1;
  TimestampMs bucket_width = 60'000;
  bool tie_breaks_anomalous = true;
  double threshold_percentile = kDefaultAlertPercentile;

  std::filesystem::path output_dir = "camlpad-out";
  std::optional<std::filesystem::path> alert_file;  // default <output_dir>/alerts.jsonl
  std::optional<std::string> webhook_url;
  RetryPolicy retry;
  bool reindex = true;
  std::optional<std::filesystem::path> truth_dir;

  const SourceSettings& settings(DataSourceKind kind) const { return source_settings.at(kind); }

  void validate() const;
};

inline void PipelineConfig::validate() const {
  auto bad = [](const std::string& what) { throw Error(ErrorCode::InvalidConfig, what); };
  if (const auto* h = std::get_if<HttpStore>(&store)) {
    if (h->base_url.rfind("http://", 0) != 0 && h->base_url.rfind("https://", 0) != 0) {
      bad("store.url must start with http:// or https://");
    }
  } else if (std::get<DirectoryStore>(store).root.empty()) {
    bad("store.root is empty");
  }
  if (time_field.empty()) bad("time_field is empty");
  if (history_days == 0) bad("history_days must be positive");
  if (page_size == 0 || page_size > max_records) bad("need 0 < page_size <= max_records");
  if (sources.empty()) bad("no sources selected");
  for (auto s : sources) {
    if (!source_settings.count(s) || source_settings.at(s).index.empty()) {
      bad("source '" + std::string(to_string(s)) + "' has no index");
    }
  }
  if (iforest.trees == 0) bad("detectors.iforest.trees must be positive");
  if (iforest.subsample < 2) bad("detectors.iforest.subsample must be >= 2");
  if (hbos.bins == 0) bad("detectors.hbos.bins must be positive");
  if (cblof.k == 0) bad("detectors.cblof.k must be positive");
  if (!(cblof.alpha > 0.0 && cblof.alpha < 1.0)) bad("detectors.cblof.alpha must be in (0, 1)");
  if (!(cblof.beta > 1.0)) bad("detectors.cblof.beta must be > 1");
  if (!(contamination > 0.0 && contamination < 1.0)) bad("ensemble.contamination must be in (0, 1)");
  if (bucket_width <= 0 || bucket_width > kMillisPerDay) bad("ensemble.bucket_width must be in (0, 1 day]");
  if (!(threshold_percentile >= 0.0 && threshold_percentile <= 100.0)) {
    bad("gauge.threshold_percentile must be in [0, 100]");
  }
  if (output_dir.empty()) bad("output.dir is empty");
  if (webhook_url && webhook_url->rfind("http://", 0) != 0 && webhook_url->rfind("https://", 0) != 0) {
    bad("alerts.webhook must be an http(s) URL");
  }
  if (retry.retries < 0 || retry.base_delay.count() < 0) bad("alerts retry settings must be non-negative");
}

inline PipelineConfig default_config() {
  PipelineConfig cfg;
  for (auto s : kAllSources) {
    SourceSettings st{std::string(to_string(s)), ""};
    if (s == DataSourceKind::BroDns || s == DataSourceKind::BroConn) st.discriminator = "log_type";
    cfg.source_settings[s] = st;
  }
  return cfg;
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_config_number(std::string_view key, std::string_view text) {
  T v{};
  const auto* end = text.data() + text.size();
  auto [p, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || p != end) {
    throw Error(ErrorCode::InvalidConfig, std::string(key) + ": not a number: '" + std::string(text) + "'");
  }
  return v;
}

inline bool parse_config_bool(std::string_view key, std::string_view text) {
  if (text == "true" || text == "yes" || text == "1") return true;
  if (text == "false" || text == "no" || text == "0") return false;
  throw Error(ErrorCode::InvalidConfig, std::string(key) + ": not a boolean: '" + std::string(text) + "'");
}

inline TimestampMs parse_boundary(std::string_view text) {
  auto t = parse_iso8601(text);
  if (!t) throw Error(ErrorCode::InvalidConfig, "boundary: not an ISO-8601 date: '" + std::string(text) + "'");
  return *t;
}

}  // namespace detail

// Flat "key = value" lines; '#' starts a comment line. Later keys win.
inline PipelineConfig parse_config(std::string_view text, const std::filesystem::path& base_dir = {}) {
  using detail::parse_config_number;
  PipelineConfig cfg = default_config();
  auto resolve = [&](std::string_view p) {
    std::filesystem::path path{std::string(p)};
    return path.is_relative() && !base_dir.empty() ? base_dir / path : path;
  };
  std::optional<std::string> token;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    line = detail::trim(line);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorCode::InvalidConfig, "line " + std::to_string(line_no) + ": expected key = value", line_no);
    }
    const std::string key{detail::trim(line.substr(0, eq))};
    const std::string_view value = detail::trim(line.substr(eq + 1));

    if (key == "store.root") {
      cfg.store = DirectoryStore{resolve(value)};
    } else if (key == "store.url") {
      cfg.store = HttpStore{std::string(value), std::nullopt};
    } else if (key == "store.token") {
      token = std::string(value);
    } else if (key == "time_field") {
      cfg.time_field = value;
    } else if (key == "boundary") {
      if (value == "today") {
        cfg.boundary.reset();
      } else {
        cfg.boundary = detail::parse_boundary(value);
      }
    } else if (key == "history_days") {
      cfg.history_days = parse_config_number<std::size_t>(key, value);
    } else if (key == "min_history") {
      cfg.min_history = parse_config_number<std::size_t>(key, value);
    } else if (key == "page_size") {
      cfg.page_size = parse_config_number<std::size_t>(key, value);
    } else if (key == "max_records") {
      cfg.max_records = parse_config_number<std::size_t>(key, value);
    } else if (key == "sources") {
      cfg.sources.clear();
      std::string_view rest = value;
      while (!rest.empty()) {
        const auto comma = rest.find(',');
        const auto name = detail::trim(rest.substr(0, comma));
        rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
        if (name.empty()) continue;
        auto kind = parse_source_kind(name);
        if (!kind) throw Error(ErrorCode::InvalidConfig, "sources: unknown source '" + std::string(name) + "'");
        cfg.sources.push_back(*kind);
      }
    } else if (key.rfind("source.", 0) == 0) {
      const auto dot = key.find('.', 7);
      const auto kind = dot == std::string::npos ? std::nullopt : parse_source_kind(key.substr(7, dot - 7));
      const std::string field = dot == std::string::npos ? "" : key.substr(dot + 1);
      if (!kind || (field != "index" && field != "discriminator")) {
        throw Error(ErrorCode::InvalidConfig, "unknown key '" + key + "'", line_no);
      }
      (field == "index" ? cfg.source_settings[*kind].index : cfg.source_settings[*kind].discriminator) = value;
    } else if (key == "detectors.iforest.trees") {
      cfg.iforest.trees = parse_config_number<std::size_t>(key, value);
    } else if (key == "detectors.iforest.subsample") {
      cfg.iforest.subsample = parse_config_number<std::size_t>(key, value);
    } else if (key == "detectors.iforest.seed") {
      cfg.iforest.seed = parse_config_number<std::uint64_t>(key, value);
    } else if (key == "detectors.hbos.bins") {
      cfg.hbos.bins = parse_config_number<std::size_t>(key, value);
    } else if (key == "detectors.cblof.k") {
      cfg.cblof.k = parse_config_number<std::size_t>(key, value);
    } else if (key == "detectors.cblof.alpha") {
      cfg.cblof.alpha = parse_config_number<double>(key, value);
    } else if (key == "detectors.cblof.beta") {
      cfg.cblof.beta = parse_config_number<double>(key, value);
    } else if (key == "detectors.cblof.seed") {
      cfg.cblof.seed = parse_config_number<std::uint64_t>(key, value);
    } else if (key == "detectors.cblof.weighted") {
      cfg.cblof.weighted = detail::parse_config_bool(key, value);
    } else if (key == "ensemble.contamination") {
      cfg.contamination = parse_config_number<double>(key, value);
    } else if (key == "ensemble.bucket_width") {
      cfg.bucket_width = parse_config_number<TimestampMs>(key, value);
    } else if (key == "ensemble.tie_breaks_anomalous") {
      cfg.tie_breaks_anomalous = detail::parse_config_bool(key, value);
    } else if (key == "gauge.threshold_percentile") {
      cfg.threshold_percentile = parse_config_number<double>(key, value);
    } else if (key == "gauge.reindex") {
      cfg.reindex = detail::parse_config_bool(key, value);
    } else if (key == "output.dir") {
      cfg.output_dir = resolve(value);
    } else if (key == "alerts.file") {
      cfg.alert_file = resolve(value);
    } else if (key == "alerts.webhook") {
      if (!value.empty()) cfg.webhook_url = std::string(value);
    } else if (key == "alerts.retries") {
      cfg.retry.retries = parse_config_number<int>(key, value);
    } else if (key == "alerts.base_delay_ms") {
      cfg.retry.base_delay = std::chrono::milliseconds(parse_config_number<long>(key, value));
    } else if (key == "evaluation.truth_dir") {
      cfg.truth_dir = resolve(value);
    } else {
      throw Error(ErrorCode::InvalidConfig, "unknown key '" + key + "'", line_no);
    }
  }
  if (token) {
    auto* http = std::get_if<HttpStore>(&cfg.store);
    if (!http) throw Error(ErrorCode::InvalidConfig, "store.token requires store.url");
    http->token = token;
  }
  cfg.validate();
  return cfg;
}

// Relative paths inside the file resolve against the file's directory.
inline PipelineConfig load_config(const std::filesystem::path& path) {
  const std::string text = detail::read_file(path);
  return parse_config(text, path.parent_path());
}

}  // namespace camlpad
