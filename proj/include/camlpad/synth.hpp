#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "camlpad/datamodel.hpp"
#include "camlpad/ensemble.hpp"
#include "camlpad/error.hpp"
#include "camlpad/ingest.hpp"
#include "camlpad/random.hpp"

namespace camlpad {

enum class AnomalyStyle { Shift, Scatter };

inline constexpr TimestampMs kSynthEpoch = 1'577'836'800'000;  // 2020-01-01T00:00:00Z

struct SynthConfig {
  std::uint64_t seed = 1;
  std::size_t days_history = 7;
  std::size_t records_per_source_per_day = 500;
  double contamination = 0.05;
  // Planted fraction for the final (current) day; defaults to `contamination`.
  std::optional<double> current_contamination;
  std::vector<DataSourceKind> sources{kAllSources.begin(), kAllSources.end()};
  AnomalyStyle anomaly_style = AnomalyStyle::Shift;
  double missing_rate = 0.01;
  TimestampMs start = kSynthEpoch;
  TimestampMs bucket_width = 60'000;

  std::size_t days_total() const { return days_history + 1; }
  TimestampMs boundary() const { return start + static_cast<TimestampMs>(days_history) * kMillisPerDay; }

  void validate() const {
    if (!(contamination >= 0.0 && contamination < 0.5)) {
      throw Error(ErrorCode::InvalidArgument, "contamination must be in [0, 0.5)");
    }
    if (current_contamination && !(*current_contamination >= 0.0 && *current_contamination <= 1.0)) {
      throw Error(ErrorCode::InvalidArgument, "current contamination must be in [0, 1]");
    }
    if (!(missing_rate >= 0.0 && missing_rate < 1.0)) {
      throw Error(ErrorCode::InvalidArgument, "missing_rate must be in [0, 1)");
    }
    if (sources.empty()) throw Error(ErrorCode::InvalidArgument, "no sources selected");
    if (records_per_source_per_day == 0) throw Error(ErrorCode::InvalidArgument, "records per day must be positive");
    if (days_history == 0) throw Error(ErrorCode::InvalidArgument, "need at least one history day");
  }
};

struct NumericFeature {
  std::string name;
  double mean;
  double sd;
};

struct CategoricalFeature {
  std::string name;
  std::vector<std::pair<std::string, double>> common;  // value, weight
  std::vector<std::string> rare;
};

struct SourceProfile {
  std::optional<std::string> log_type;  // BRO discriminator value
  std::vector<NumericFeature> numeric;
  std::vector<CategoricalFeature> categorical;
};

inline SourceProfile source_profile(DataSourceKind kind) {
  switch (kind) {
    case DataSourceKind::BroDns:
      return {"dns",
              {{"query_length", 24, 6}, {"ttl", 3600, 600}, {"answers", 2, 0.7}, {"rtt_ms", 40, 10}},
              {{"qtype", {{"A", 0.6}, {"AAAA", 0.25}, {"MX", 0.1}, {"TXT", 0.05}}, {"ANY", "AXFR", "NULL"}},
               {"rcode", {{"NOERROR", 0.9}, {"NXDOMAIN", 0.1}}, {"REFUSED", "SERVFAIL"}},
               {"proto", {{"udp", 0.95}, {"tcp", 0.05}}, {"icmp"}}}};
    case DataSourceKind::BroConn:
      return {"conn",
              {{"duration", 30, 8}, {"orig_bytes", 1500, 300}, {"resp_bytes", 8000, 1500}, {"orig_pkts", 20, 5}},
              {{"proto", {{"tcp", 0.8}, {"udp", 0.2}}, {"icmp"}},
               {"service", {{"http", 0.5}, {"ssl", 0.4}, {"dns", 0.1}}, {"irc", "telnet"}},
               {"conn_state", {{"SF", 0.85}, {"S0", 0.1}, {"REJ", 0.05}}, {"OTH", "RSTOS0"}}}};
    case DataSourceKind::Yaf:
      return {std::nullopt,
              {{"packets", 40, 10}, {"octets", 30000, 6000}, {"flow_duration", 12, 3}, {"port_entropy", 3, 0.5}},
              {{"protocol", {{"tcp", 0.75}, {"udp", 0.25}}, {"icmp"}},
               {"app_label", {{"http", 0.4}, {"https", 0.45}, {"dns", 0.15}}, {"unknown", "smb"}}}};
    case DataSourceKind::Snort:
      return {std::nullopt,
              {{"priority", 2, 0.5}, {"packet_len", 600, 120}, {"ttl", 64, 6}, {"hits", 3, 1}},
              {{"classification",
                {{"attempted-recon", 0.5}, {"policy-violation", 0.3}, {"misc-activity", 0.2}},
                {"trojan-activity", "shellcode-detect"}},
               {"protocol", {{"TCP", 0.7}, {"UDP", 0.3}}, {"ICMP"}}}};
    case DataSourceKind::Meraki:
      return {std::nullopt,
              {{"client_count", 35, 6}, {"rssi", -55, 5}, {"bandwidth_kbps", 2000, 400}, {"associations", 12, 3}},
              {{"event_type", {{"association", 0.5}, {"disassociation", 0.3}, {"wpa_auth", 0.2}}, {"rogue_ap", "ids_alert"}},
               {"band", {{"2.4GHz", 0.4}, {"5GHz", 0.6}}, {"6GHz"}}}};
  }
  return {};
}

struct SynthSource {
  DataSourceKind source;
  RecordBatch batch;  // all days, canonical order
  LabelVector truth;  // aligned with batch.records
};

struct SynthOutput {
  std::vector<SynthSource> sources;
  std::vector<BucketVerdict> bucket_truth;
  TimestampMs boundary = 0;
};

namespace detail {

inline const std::string& pick_weighted(const std::vector<std::pair<std::string, double>>& options, Rng& rng) {
  double total = 0.0;
  for (const auto& [_, w] : options) total += w;
  double target = rng.uniform() * total;
  for (const auto& [value, w] : options) {
    target -= w;
    if (target < 0.0) return value;
  }
  return options.back().first;
}

inline SynthSource generate_source(const SynthConfig& cfg, DataSourceKind kind) {
  const auto profile = source_profile(kind);
  Rng rng(derive_seed(cfg.seed, to_string(kind)));
  const std::size_t n = cfg.records_per_source_per_day;

  std::vector<std::pair<SensorRecord, int>> all;
  for (std::size_t day = 0; day < cfg.days_total(); ++day) {
    const bool current_day = day == cfg.days_history;
    const double c = current_day && cfg.current_contamination ? *cfg.current_contamination : cfg.contamination;
    const std::size_t anomalies = c > 0.0 ? std::min(outlier_quota(c, n), n) : 0;

    std::vector<int> labels(n, 0);
    std::fill(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(anomalies), 1);
    for (std::size_t i = n; i > 1; --i) std::swap(labels[i - 1], labels[rng.below(i)]);

    const TimestampMs day_start = cfg.start + static_cast<TimestampMs>(day) * kMillisPerDay;
    std::vector<std::pair<SensorRecord, int>> today;
    today.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      SensorRecord r;
      r.source = kind;
      r.timestamp = day_start + static_cast<TimestampMs>(rng.below(kMillisPerDay));
      if (profile.log_type) r.fields.emplace_back("log_type", *profile.log_type);
      const bool anomalous = labels[i] == 1;
      for (const auto& f : profile.numeric) {
        double v;
        if (!anomalous) {
          v = rng.normal(f.mean, f.sd);
        } else if (cfg.anomaly_style == AnomalyStyle::Shift) {
          v = rng.normal(f.mean + 6.0 * f.sd, f.sd);
        } else {
          v = rng.uniform(f.mean - 6.0 * f.sd, f.mean + 6.0 * f.sd);
        }
        const bool drop = rng.uniform() < cfg.missing_rate;
        r.fields.emplace_back(f.name, drop ? FieldValue{Missing{}} : FieldValue{v});
      }
      for (const auto& f : profile.categorical) {
        const std::string& v = anomalous ? f.rare[rng.below(f.rare.size())] : pick_weighted(f.common, rng);
        const bool drop = rng.uniform() < cfg.missing_rate;
        r.fields.emplace_back(f.name, drop ? FieldValue{Missing{}} : FieldValue{v});
      }
      today.emplace_back(std::move(r), labels[i]);
    }
    std::stable_sort(today.begin(), today.end(),
                     [](const auto& a, const auto& b) { return a.first.timestamp < b.first.timestamp; });
    const std::string date = iso_date(day_start);
    for (std::size_t i = 0; i < today.size(); ++i) {
      char seq[24];
      std::snprintf(seq, sizeof seq, "%05zu", i);
      today[i].first.record_id = std::string(to_string(kind)) + "-" + date + "-" + seq;
      all.push_back(std::move(today[i]));
    }
  }

  SynthSource out;
  out.source = kind;
  std::vector<SensorRecord> records;
  records.reserve(all.size());
  for (auto& [rec, label] : all) {
    out.truth.row_ids.push_back(rec.record_id);
    out.truth.labels.push_back(label);
    records.push_back(std::move(rec));
  }
  out.batch = make_batch(kind, std::move(records));
  return out;
}

}  // namespace detail

// Deterministic multi-source logs with planted anomalies. Every source draws
// from its own sub-seed, so selecting fewer sources does not change the rest.
inline SynthOutput generate(const SynthConfig& cfg) {
  cfg.validate();
  SynthOutput out;
  out.boundary = cfg.boundary();
  std::vector<SourceLabels> for_vote;
  for (auto kind : cfg.sources) {
    out.sources.push_back(detail::generate_source(cfg, kind));
    const auto& s = out.sources.back();
    SourceLabels sl{kind, {}, s.truth.labels};
    for (const auto& r : s.batch.records) sl.timestamps.push_back(r.timestamp);
    for_vote.push_back(std::move(sl));
  }
  CrossSourceParams vp;
  vp.bucket_width = cfg.bucket_width;
  vp.contamination = cfg.contamination;
  out.bucket_truth = cross_source_vote(for_vote, vp);
  return out;
}

// <root>/<source>/<date>.jsonl, <root>/truth/<source>.jsonl and
// <root>/truth/buckets.jsonl.
inline void write_store(const SynthOutput& data, const std::filesystem::path& root,
                        const std::string& time_field = "timestamp") {
  namespace fs = std::filesystem;
  auto write = [](const fs::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    f << text;
    if (!f) throw Error(ErrorCode::Io, "cannot write " + path.string());
  };
  fs::create_directories(root / "truth");
  for (const auto& s : data.sources) {
    const fs::path dir = root / std::string(to_string(s.source));
    fs::create_directories(dir);
    std::map<std::string, std::string> by_day;
    std::string truth;
    for (std::size_t i = 0; i < s.batch.records.size(); ++i) {
      const auto& r = s.batch.records[i];
      by_day[iso_date(r.timestamp)] += record_to_json(r, time_field).dump() + "\n";
      nlohmann::ordered_json t = {{"row_id", r.record_id}, {"label", s.truth.labels[i]}, {"timestamp", r.timestamp}};
      truth += t.dump() + "\n";
    }
    for (const auto& [day, text] : by_day) write(dir / (day + ".jsonl"), text);
    write(root / "truth" / (std::string(to_string(s.source)) + ".jsonl"), truth);
  }
  write(root / "truth" / "buckets.jsonl", buckets_to_jsonl(data.bucket_truth));
}

}  // namespace camlpad
