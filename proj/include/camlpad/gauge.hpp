#pragma once

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "json.hpp"

#include "camlpad/datamodel.hpp"
#include "camlpad/error.hpp"
#include "camlpad/store.hpp"

namespace camlpad {

inline constexpr double kDefaultAlertPercentile = 75.0;

// nullopt scope means the cross-source combined gauge.
using GaugeScope = std::optional<DataSourceKind>;

inline std::string scope_name(const GaugeScope& scope) {
  return scope ? std::string(to_string(*scope)) : std::string("combined");
}

inline GaugeScope parse_scope(std::string_view name) {
  if (name == "combined") return std::nullopt;
  if (auto kind = parse_source_kind(name)) return kind;
  throw Error(ErrorCode::InvalidArgument, "unknown gauge scope '" + std::string(name) + "'");
}

struct GaugeReading {
  GaugeScope scope;
  std::string window_id;
  double score = 0.0;                       // [0, 1]
  std::optional<double> history_percentile;  // absent during warm-up

  friend bool operator==(const GaugeReading&, const GaugeReading&) = default;
};

struct SinkOutcome {
  std::string sink;  // "file:<path>" or "webhook:<url>"
  bool ok = false;
  int attempts = 0;
  std::string detail;
};

struct AlertEvent {
  TimestampMs fired_at = 0;
  GaugeReading reading;
  double threshold_percentile = kDefaultAlertPercentile;
  std::string message;
  std::vector<SinkOutcome> delivery;
};

inline double window_score(std::span<const double> ensemble_scores) {
  if (ensemble_scores.empty()) throw Error(ErrorCode::EmptyWindow, "window has no scored rows");
  double sum = 0.0;
  for (double s : ensemble_scores) sum += s;
  return sum / static_cast<double>(ensemble_scores.size());
}

// Share of history strictly below `current`, in percent.
inline std::optional<double> percentile_rank(double current, std::span<const double> history) {
  if (history.empty()) return std::nullopt;
  std::size_t below = 0;
  for (double h : history) below += h < current ? 1 : 0;
  return 100.0 * static_cast<double>(below) / static_cast<double>(history.size());
}

inline bool alert_decision(const GaugeReading& reading, double threshold = kDefaultAlertPercentile) {
  return reading.history_percentile.has_value() && *reading.history_percentile > threshold;
}

enum class Comparison { MoreAnomalous, LessAnomalous, Equal };

constexpr std::string_view to_string(Comparison c) {
  switch (c) {
    case Comparison::MoreAnomalous: return "more_anomalous";
    case Comparison::LessAnomalous: return "less_anomalous";
    case Comparison::Equal: return "equal";
  }
  return "unknown";
}

inline Comparison compare_recent_previous(double recent, double previous) {
  if (recent > previous) return Comparison::MoreAnomalous;
  if (recent < previous) return Comparison::LessAnomalous;
  return Comparison::Equal;
}

inline double round6(double v) { return std::round(v * 1e6) / 1e6; }

// {"scope","window_id","score","history_percentile","threshold","fired_at"},
// in that order, numbers rounded to 6 decimals.
inline nlohmann::ordered_json gauge_to_json(const GaugeReading& r, double threshold, TimestampMs fired_at) {
  nlohmann::ordered_json doc;
  doc["scope"] = scope_name(r.scope);
  doc["window_id"] = r.window_id;
  doc["score"] = round6(r.score);
  doc["history_percentile"] =
      r.history_percentile ? nlohmann::ordered_json(round6(*r.history_percentile)) : nlohmann::ordered_json(nullptr);
  doc["threshold"] = round6(threshold);
  doc["fired_at"] = fired_at;
  return doc;
}

inline GaugeReading gauge_from_json(const nlohmann::ordered_json& doc) {
  try {
    GaugeReading r;
    r.scope = parse_scope(doc.at("scope").get<std::string>());
    r.window_id = doc.at("window_id").get<std::string>();
    r.score = doc.at("score").get<double>();
    if (!doc.at("history_percentile").is_null()) r.history_percentile = doc["history_percentile"].get<double>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("malformed gauge document: ") + e.what());
  }
}

inline nlohmann::ordered_json alert_to_json(const AlertEvent& e) {
  return gauge_to_json(e.reading, e.threshold_percentile, e.fired_at);
}

// --- alert delivery ---------------------------------------------------------

struct RetryPolicy {
  int retries = 3;
  std::chrono::milliseconds base_delay{1000};  // doubles per retry: 1s, 2s, 4s
};

struct AlertSinks {
  std::optional<std::filesystem::path> file;
  std::optional<std::string> webhook_url;
  RetryPolicy retry;
};

// The environment variable wins over configuration.
inline std::optional<std::string> resolve_webhook_url(std::optional<std::string> configured) {
  if (const char* env = std::getenv("CAMLPAD_WEBHOOK_URL"); env != nullptr && *env != '\0') {
    return std::string(env);
  }
  return configured;
}

namespace detail {

inline std::mutex& delivery_mutex() {
  static std::mutex m;
  return m;
}

inline SinkOutcome append_line(const std::filesystem::path& path, const std::string& line) {
  SinkOutcome out{"file:" + path.string(), false, 1, {}};
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream f(path, std::ios::app | std::ios::binary);
  if (!f) {
    out.detail = "cannot open for append";
    return out;
  }
  f.write(line.data(), static_cast<std::streamsize>(line.size()));
  f.flush();
  out.ok = static_cast<bool>(f);
  if (!out.ok) out.detail = "write failed";
  return out;
}

inline SinkOutcome post_webhook(const std::string& url, const std::string& body, const RetryPolicy& retry) {
  SinkOutcome out{"webhook:" + url, false, 0, {}};
  auto delay = retry.base_delay;
  for (int attempt = 0; attempt <= retry.retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(delay);
      delay *= 2;
    }
    ++out.attempts;
    try {
      auto res = post_json(url, "", body, std::nullopt, std::chrono::seconds(5));
      if (!res) {
        out.detail = httplib::to_string(res.error());
      } else if (res->status >= 200 && res->status < 300) {
        out.ok = true;
        out.detail = "HTTP " + std::to_string(res->status);
        return out;
      } else {
        out.detail = "HTTP " + std::to_string(res->status);
      }
    } catch (const Error& e) {
      out.detail = e.what();
      return out;  // malformed URL: retrying cannot help
    }
  }
  return out;
}

}  // namespace detail

// Delivers to every configured sink independently. Calls are serialized so
// concurrent windows never interleave partial lines.
inline std::vector<SinkOutcome> emit_alert(const AlertEvent& event, const AlertSinks& sinks) {
  std::lock_guard lock(detail::delivery_mutex());
  const std::string body = alert_to_json(event).dump();
  std::vector<SinkOutcome> outcomes;
  if (sinks.file) outcomes.push_back(detail::append_line(*sinks.file, body + "\n"));
  if (sinks.webhook_url) outcomes.push_back(detail::post_webhook(*sinks.webhook_url, body, sinks.retry));
  const bool any_ok = std::any_of(outcomes.begin(), outcomes.end(), [](const auto& o) { return o.ok; });
  if (!any_ok) {
    std::string why = outcomes.empty() ? "no sinks configured" : "";
    for (const auto& o : outcomes) why += (why.empty() ? "" : "; ") + o.sink + ": " + o.detail;
    throw Error(ErrorCode::AllSinksFailed, why);
  }
  return outcomes;
}

// --- gauge re-indexing ------------------------------------------------------

inline std::string safe_file_stem(std::string_view s) {
  std::string out;
  for (char c : s) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' ||
                    c == '_' || c == '.';
    out += ok ? c : '_';
  }
  return out.empty() ? std::string("_") : out;
}

// Appends the gauge document to the "gauges" index and returns its id. The
// store is append-only: a repeated window_id adds another document.
inline std::string reindex_gauge(const StoreLocator& locator, const GaugeReading& reading,
                                 double threshold = kDefaultAlertPercentile, TimestampMs fired_at = 0) {
  const auto doc = gauge_to_json(reading, threshold, fired_at);
  if (const auto* dir = std::get_if<DirectoryStore>(&locator)) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir->root)) {
      throw Error(ErrorCode::StoreUnreachable, "store root not found: " + dir->root.string());
    }
    std::lock_guard lock(detail::delivery_mutex());
    const fs::path index = dir->root / "gauges";
    fs::create_directories(index);
    const fs::path file = index / (safe_file_stem(reading.window_id) + ".jsonl");
    std::size_t existing = 0;
    if (std::ifstream in(file); in) {
      std::string line;
      while (std::getline(in, line)) existing += line.empty() ? 0 : 1;
    }
    std::ofstream out(file, std::ios::app | std::ios::binary);
    out << doc.dump() << '\n';
    if (!out) throw Error(ErrorCode::StoreUnreachable, "cannot append to " + file.string());
    return safe_file_stem(reading.window_id) + "-" + std::to_string(existing);
  }
  const auto& http = std::get<HttpStore>(locator);
  auto res = detail::post_json(http.base_url, "/gauges/_doc", doc.dump(), http.token);
  if (!res) throw Error(ErrorCode::StoreUnreachable, http.base_url + ": " + httplib::to_string(res.error()));
  if (res->status < 200 || res->status >= 300) {
    throw Error(ErrorCode::StoreUnreachable, "gauge index returned HTTP " + std::to_string(res->status));
  }
  const auto body = nlohmann::json::parse(res->body, nullptr, false);
  if (body.is_discarded() || !body.contains("_id")) {
    throw Error(ErrorCode::StoreUnreachable, "gauge index response lacks _id");
  }
  return body["_id"].is_string() ? body["_id"].get<std::string>() : body["_id"].dump();
}

}  // namespace camlpad
