#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "camlpad/ensemble.hpp"
#include "camlpad/error.hpp"

namespace camlpad {

// Label ids are arbitrary; only the induced partition matters.
using Clustering = std::vector<int>;

namespace detail {

inline void check_pair(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::LengthMismatch,
                std::to_string(a.size()) + " vs " + std::to_string(b.size()) + " items");
  }
  if (a.size() < 2) throw Error(ErrorCode::TooFewItems, "need >= 2 items");
}

inline std::int64_t choose2(std::int64_t n) { return n * (n - 1) / 2; }

struct PairSums {
  std::int64_t joint = 0;  // sum over contingency cells of C(n_ij, 2)
  std::int64_t rows = 0;   // sum over a's clusters of C(a_i, 2)
  std::int64_t cols = 0;   // sum over b's clusters of C(b_j, 2)
  std::int64_t total = 0;  // C(n, 2)
};

inline PairSums pair_sums(std::span<const int> a, std::span<const int> b) {
  std::map<std::pair<int, int>, std::int64_t> cells;
  std::map<int, std::int64_t> ra, cb;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ++cells[{a[i], b[i]}];
    ++ra[a[i]];
    ++cb[b[i]];
  }
  PairSums s;
  for (const auto& [_, n] : cells) s.joint += choose2(n);
  for (const auto& [_, n] : ra) s.rows += choose2(n);
  for (const auto& [_, n] : cb) s.cols += choose2(n);
  s.total = choose2(static_cast<std::int64_t>(a.size()));
  return s;
}

}  // namespace detail

inline double rand_index(std::span<const int> a, std::span<const int> b) {
  detail::check_pair(a, b);
  const auto s = detail::pair_sums(a, b);
  // together-in-both + apart-in-both
  const std::int64_t agree = s.joint + (s.total - s.rows - s.cols + s.joint);
  return static_cast<double>(agree) / static_cast<double>(s.total);
}

// Chance-corrected Rand index. When both the numerator and the denominator
// vanish (identical trivial partitions) the result is 1.
inline double adjusted_rand_index(std::span<const int> a, std::span<const int> b) {
  detail::check_pair(a, b);
  const auto s = detail::pair_sums(a, b);
  // Scaled by C(n,2) to stay in integers until the final division.
  const long double total = static_cast<long double>(s.total);
  const long double prod = static_cast<long double>(s.rows) * static_cast<long double>(s.cols);
  const long double numerator = total * static_cast<long double>(s.joint) - prod;
  const long double denominator = total * 0.5L * static_cast<long double>(s.rows + s.cols) - prod;
  if (denominator == 0.0L) return 1.0;
  return static_cast<double>(numerator / denominator);
}

inline double mean_pairwise_ari(std::span<const LabelVector> vectors) {
  if (vectors.size() < 2) throw Error(ErrorCode::TooFewItems, "need >= 2 label vectors");
  double sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    for (std::size_t j = i + 1; j < vectors.size(); ++j) {
      sum += adjusted_rand_index(vectors[i].labels, vectors[j].labels);
      ++pairs;
    }
  }
  return sum / static_cast<double>(pairs);
}

// Reorders `labels` to follow `ids`; ids missing from `labels` are an error.
inline LabelVector align_labels(const LabelVector& labels, const std::vector<std::string>& ids) {
  std::map<std::string, int> by_id;
  for (std::size_t i = 0; i < labels.size(); ++i) by_id[labels.row_ids[i]] = labels.labels[i];
  LabelVector out;
  out.row_ids = ids;
  out.labels.reserve(ids.size());
  for (const auto& id : ids) {
    auto it = by_id.find(id);
    if (it == by_id.end()) throw Error(ErrorCode::LengthMismatch, "row '" + id + "' has no label");
    out.labels.push_back(it->second);
  }
  return out;
}

struct SourceEvaluation {
  std::string source;
  std::map<std::string, LabelVector> detectors;  // iforest, hbos, cblof
  LabelVector ensemble;
  std::optional<LabelVector> truth;
};

// Per source: the 3x3 pairwise detector ARI matrix and its off-diagonal mean,
// plus ARI against ground truth for each detector and the ensemble when truth
// is supplied. The top-level "mean_pairwise_ari" averages every detector pair
// across sources.
inline nlohmann::ordered_json evaluation_report(const std::vector<SourceEvaluation>& sources) {
  nlohmann::ordered_json report;
  nlohmann::ordered_json per_source = nlohmann::ordered_json::object();
  double pair_sum = 0.0;
  std::size_t pair_count = 0;
  double truth_sum = 0.0;
  std::size_t truth_count = 0;
  for (const auto& s : sources) {
    nlohmann::ordered_json entry;
    std::vector<std::string> names;
    for (auto d : kAllDetectors) names.emplace_back(to_string(d));
    nlohmann::ordered_json matrix = nlohmann::ordered_json::object();
    nlohmann::ordered_json pairs = nlohmann::ordered_json::object();
    std::vector<LabelVector> vecs;
    for (const auto& name : names) vecs.push_back(s.detectors.at(name));
    for (std::size_t i = 0; i < names.size(); ++i) {
      nlohmann::ordered_json row = nlohmann::ordered_json::object();
      for (std::size_t j = 0; j < names.size(); ++j) {
        row[names[j]] = adjusted_rand_index(vecs[i].labels, vecs[j].labels);
      }
      matrix[names[i]] = std::move(row);
    }
    for (std::size_t i = 0; i < names.size(); ++i) {
      for (std::size_t j = i + 1; j < names.size(); ++j) {
        const double v = adjusted_rand_index(vecs[i].labels, vecs[j].labels);
        pairs[names[i] + "-" + names[j]] = v;
        pair_sum += v;
        ++pair_count;
      }
    }
    entry["pairwise_ari"] = std::move(pairs);
    entry["ari_matrix"] = std::move(matrix);
    entry["mean_pairwise_ari"] = mean_pairwise_ari(vecs);
    entry["rand_index_mean"] = [&] {
      double sum = 0.0;
      for (std::size_t i = 0; i < vecs.size(); ++i)
        for (std::size_t j = i + 1; j < vecs.size(); ++j) sum += rand_index(vecs[i].labels, vecs[j].labels);
      return sum / 3.0;
    }();
    if (s.truth) {
      const auto truth = align_labels(*s.truth, s.ensemble.row_ids);
      nlohmann::ordered_json vs = nlohmann::ordered_json::object();
      for (std::size_t i = 0; i < names.size(); ++i) {
        vs[names[i]] = adjusted_rand_index(align_labels(vecs[i], s.ensemble.row_ids).labels, truth.labels);
      }
      const double ens = adjusted_rand_index(s.ensemble.labels, truth.labels);
      vs["ensemble"] = ens;
      truth_sum += ens;
      ++truth_count;
      entry["ari_vs_truth"] = std::move(vs);
    }
    per_source[s.source] = std::move(entry);
  }
  report["sources"] = std::move(per_source);
  report["mean_pairwise_ari"] = pair_count ? pair_sum / static_cast<double>(pair_count) : 0.0;
  if (truth_count) report["mean_ensemble_ari_vs_truth"] = truth_sum / static_cast<double>(truth_count);
  return report;
}

}  // namespace camlpad
