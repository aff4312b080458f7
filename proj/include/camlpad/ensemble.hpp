#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "camlpad/datamodel.hpp"
#include "camlpad/error.hpp"

namespace camlpad {

enum class Detector { IsolationForest, Hbos, Cblof };

inline constexpr std::array<Detector, 3> kAllDetectors = {Detector::IsolationForest, Detector::Hbos,
                                                          Detector::Cblof};

constexpr std::string_view to_string(Detector d) {
  switch (d) {
    case Detector::IsolationForest: return "iforest";
    case Detector::Hbos: return "hbos";
    case Detector::Cblof: return "cblof";
  }
  return "unknown";
}

struct ScoreSet {
  std::vector<std::string> row_ids;
  std::vector<double> iforest;
  std::vector<double> hbos;
  std::vector<double> cblof;

  const std::vector<double>& of(Detector d) const {
    switch (d) {
      case Detector::IsolationForest: return iforest;
      case Detector::Hbos: return hbos;
      case Detector::Cblof: return cblof;
    }
    return iforest;
  }

  void validate() const {
    for (auto d : kAllDetectors) {
      const auto& v = of(d);
      if (v.size() != row_ids.size()) {
        throw Error(ErrorCode::MisalignedRows,
                    std::string(to_string(d)) + " scores not aligned with row ids");
      }
      for (double x : v) {
        if (!std::isfinite(x)) {
          throw Error(ErrorCode::InvalidArgument, std::string(to_string(d)) + " score not finite");
        }
      }
    }
  }
};

struct LabelVector {
  std::vector<std::string> row_ids;
  std::vector<int> labels;  // 0 inlier, 1 outlier

  std::size_t size() const { return labels.size(); }
  std::size_t outliers() const {
    return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  }

  friend bool operator==(const LabelVector&, const LabelVector&) = default;
};

// Min-max to [0, 1]; a constant vector maps to 0.5 everywhere.
inline std::vector<double> normalize_scores(std::span<const double> scores) {
  if (scores.empty()) throw Error(ErrorCode::InvalidArgument, "normalize_scores on empty input");
  const auto [lo_it, hi_it] = std::minmax_element(scores.begin(), scores.end());
  const double lo = *lo_it, hi = *hi_it;
  std::vector<double> out(scores.size(), 0.5);
  if (hi > lo) {
    for (std::size_t i = 0; i < scores.size(); ++i) out[i] = (scores[i] - lo) / (hi - lo);
  }
  return out;
}

// ceil(c*n), robust to c*n landing a hair above an integer.
inline std::size_t outlier_quota(double contamination, std::size_t n) {
  return static_cast<std::size_t>(std::ceil(contamination * static_cast<double>(n) - 1e-9));
}

// Top ceil(c*n) scores become outliers; equal scores favour the lower index.
inline std::vector<int> binarize(std::span<const double> scores, double contamination = 0.1) {
  if (!(contamination > 0.0 && contamination < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "contamination must be in (0, 1)");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<int> labels(scores.size(), 0);
  const std::size_t m = std::min(outlier_quota(contamination, scores.size()), scores.size());
  for (std::size_t i = 0; i < m; ++i) labels[order[i]] = 1;
  return labels;
}

inline LabelVector binarize(const std::vector<std::string>& row_ids, std::span<const double> scores,
                            double contamination = 0.1) {
  if (row_ids.size() != scores.size()) {
    throw Error(ErrorCode::MisalignedRows, "row ids and scores differ in length");
  }
  return {row_ids, binarize(scores, contamination)};
}

// Democratic vote: outlier iff at least two of the three detectors say so.
inline LabelVector vote(const LabelVector& iforest, const LabelVector& hbos, const LabelVector& cblof) {
  if (iforest.row_ids != hbos.row_ids || iforest.row_ids != cblof.row_ids ||
      iforest.labels.size() != iforest.row_ids.size() || hbos.labels.size() != hbos.row_ids.size() ||
      cblof.labels.size() != cblof.row_ids.size()) {
    throw Error(ErrorCode::MisalignedRows, "label vectors do not share row ids");
  }
  LabelVector out{iforest.row_ids, std::vector<int>(iforest.size(), 0)};
  for (std::size_t i = 0; i < out.labels.size(); ++i) {
    out.labels[i] = (iforest.labels[i] + hbos.labels[i] + cblof.labels[i]) >= 2 ? 1 : 0;
  }
  return out;
}

// Mean of the three per-detector normalized score vectors.
inline std::vector<double> ensemble_score(const ScoreSet& set) {
  set.validate();
  if (set.row_ids.empty()) throw Error(ErrorCode::InvalidArgument, "ensemble_score on empty set");
  std::vector<double> out(set.row_ids.size(), 0.0);
  for (auto d : kAllDetectors) {
    const auto norm = normalize_scores(set.of(d));
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += norm[i];
  }
  for (double& v : out) v /= 3.0;
  return out;
}

struct SourceLabels {
  DataSourceKind source;
  std::vector<TimestampMs> timestamps;
  std::vector<int> labels;
};

struct CrossSourceParams {
  TimestampMs bucket_width = 60'000;
  double contamination = 0.1;
  bool tie_breaks_anomalous = true;
};

struct BucketVerdict {
  TimestampMs bucket_start = 0;
  std::array<std::optional<int>, kAllSources.size()> votes{};  // by source_index
  int final = 0;

  std::size_t present() const {
    return static_cast<std::size_t>(std::count_if(votes.begin(), votes.end(),
                                                  [](const auto& v) { return v.has_value(); }));
  }

  friend bool operator==(const BucketVerdict&, const BucketVerdict&) = default;
};

inline TimestampMs bucket_of(TimestampMs t, TimestampMs width) {
  const TimestampMs q = t / width;
  return (t % width != 0 && t < 0 ? q - 1 : q) * width;
}

// Groups every labeled record into fixed-width time buckets. A source votes
// anomalous in a bucket when its outlier fraction there exceeds the
// contamination; the bucket verdict is the majority over sources present.
inline std::vector<BucketVerdict> cross_source_vote(std::span<const SourceLabels> sources,
                                                    const CrossSourceParams& params = {}) {
  if (sources.empty()) throw Error(ErrorCode::InvalidArgument, "cross_source_vote needs >= 1 source");
  if (params.bucket_width <= 0) throw Error(ErrorCode::InvalidArgument, "bucket_width must be > 0");
  struct Tally {
    std::size_t total = 0;
    std::size_t outliers = 0;
  };
  std::map<TimestampMs, std::array<Tally, kAllSources.size()>> buckets;
  for (const auto& s : sources) {
    if (s.timestamps.size() != s.labels.size()) {
      throw Error(ErrorCode::MisalignedRows,
                  std::string(to_string(s.source)) + " timestamps and labels differ in length");
    }
    for (std::size_t i = 0; i < s.labels.size(); ++i) {
      auto& t = buckets[bucket_of(s.timestamps[i], params.bucket_width)][source_index(s.source)];
      ++t.total;
      t.outliers += s.labels[i] == 1 ? 1 : 0;
    }
  }
  std::vector<BucketVerdict> out;
  out.reserve(buckets.size());
  for (const auto& [start, tallies] : buckets) {
    BucketVerdict v;
    v.bucket_start = start;
    std::size_t yes = 0, present = 0;
    for (std::size_t s = 0; s < tallies.size(); ++s) {
      if (tallies[s].total == 0) continue;
      const double frac = static_cast<double>(tallies[s].outliers) / static_cast<double>(tallies[s].total);
      v.votes[s] = frac > params.contamination ? 1 : 0;
      yes += static_cast<std::size_t>(*v.votes[s]);
      ++present;
    }
    if (2 * yes > present) {
      v.final = 1;
    } else if (2 * yes == present) {
      v.final = params.tie_breaks_anomalous ? 1 : 0;
    }
    out.push_back(v);
  }
  return out;
}

// --- JSONL export -----------------------------------------------------------

inline std::string labels_to_jsonl(const LabelVector& labels, std::span<const double> scores = {}) {
  std::string out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    nlohmann::ordered_json line = {{"row_id", labels.row_ids[i]}, {"label", labels.labels[i]}};
    if (!scores.empty()) line["score"] = scores[i];
    out += line.dump();
    out += '\n';
  }
  return out;
}

inline std::string ensemble_labels_to_jsonl(const LabelVector& final, const LabelVector& iforest,
                                            const LabelVector& hbos, const LabelVector& cblof,
                                            std::span<const double> scores = {}) {
  std::string out;
  for (std::size_t i = 0; i < final.size(); ++i) {
    nlohmann::ordered_json line = {
        {"row_id", final.row_ids[i]},
        {"label", final.labels[i]},
        {"votes", {{"iforest", iforest.labels[i]}, {"hbos", hbos.labels[i]}, {"cblof", cblof.labels[i]}}}};
    if (!scores.empty()) line["score"] = scores[i];
    out += line.dump();
    out += '\n';
  }
  return out;
}

inline std::string buckets_to_jsonl(std::span<const BucketVerdict> verdicts) {
  std::string out;
  for (const auto& v : verdicts) {
    nlohmann::ordered_json votes = nlohmann::ordered_json::object();
    for (auto kind : kAllSources) {
      if (const auto& vote = v.votes[source_index(kind)]) votes[std::string(to_string(kind))] = *vote;
    }
    nlohmann::ordered_json line = {{"bucket_start", v.bucket_start}, {"final", v.final}, {"votes", votes}};
    out += line.dump();
    out += '\n';
  }
  return out;
}

// Reads {"row_id": ..., "label": 0|1} lines (extra keys ignored).
inline LabelVector labels_from_jsonl(std::string_view text) {
  LabelVector out;
  std::size_t line_no = 0, start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    ++line_no;
    const auto line = text.substr(start, end - start);
    start = end + 1;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    const auto doc = nlohmann::json::parse(line, nullptr, false);
    if (doc.is_discarded() || !doc.is_object() || !doc.contains("row_id") || !doc.contains("label") ||
        !doc["row_id"].is_string() || !doc["label"].is_number_integer()) {
      throw Error(ErrorCode::MalformedLine, "bad label line", line_no);
    }
    const int label = doc["label"].get<int>();
    if (label != 0 && label != 1) throw Error(ErrorCode::MalformedLine, "label must be 0 or 1", line_no);
    out.row_ids.push_back(doc["row_id"].get<std::string>());
    out.labels.push_back(label);
  }
  return out;
}

}  // namespace camlpad
