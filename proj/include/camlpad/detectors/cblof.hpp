#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "json.hpp"

#include "camlpad/detectors/common.hpp"
#include "camlpad/detectors/kmeans.hpp"
#include "camlpad/error.hpp"
#include "camlpad/matrix.hpp"

namespace camlpad {

struct CblofParams {
  std::size_t k = 8;
  double alpha = 0.9;
  double beta = 5.0;
  std::uint64_t seed = 0;
  bool weighted = false;  // multiply scores by the assigned cluster's size
  std::size_t max_iterations = 100;

  friend bool operator==(const CblofParams&, const CblofParams&) = default;
};

struct CblofModel {
  CblofParams params;
  KMeansModel kmeans;
  std::vector<std::size_t> cluster_sizes;
  std::vector<bool> large;  // per centroid index

  friend bool operator==(const CblofModel&, const CblofModel&) = default;
};

// Sort clusters by size (descending, index breaks ties) and cut at the first
// position b where the cumulative size reaches alpha*n or the size ratio to
// the next cluster reaches beta. Clusters at positions 0..b are large.
inline std::vector<bool> classify_large_clusters(const std::vector<std::size_t>& sizes,
                                                 double alpha, double beta) {
  std::vector<std::size_t> order(sizes.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return sizes[a] > sizes[b]; });
  const double n = static_cast<double>(std::accumulate(sizes.begin(), sizes.end(), std::size_t{0}));
  std::vector<bool> large(sizes.size(), false);
  double cumulative = 0.0;
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    large[order[pos]] = true;
    cumulative += static_cast<double>(sizes[order[pos]]);
    const bool mass = cumulative >= alpha * n;
    const bool gap = pos + 1 < order.size() && sizes[order[pos + 1]] > 0 &&
                     static_cast<double>(sizes[order[pos]]) / static_cast<double>(sizes[order[pos + 1]]) >= beta;
    if (mass || gap) break;
  }
  return large;
}

inline CblofModel fit_cblof(const Matrix& data, const CblofParams& params = {}) {
  if (data.rows() < params.k) {
    throw Error(ErrorCode::TooFewRows, std::to_string(data.rows()) + " rows for k=" +
                                           std::to_string(params.k));
  }
  CblofModel model;
  model.params = params;
  KMeansParams kp;
  kp.k = params.k;
  kp.seed = params.seed;
  kp.max_iterations = params.max_iterations;
  model.kmeans = fit_kmeans(data, kp);
  model.cluster_sizes = model.kmeans.cluster_sizes;
  model.large = classify_large_clusters(model.cluster_sizes, params.alpha, params.beta);
  return model;
}

inline double score_cblof(const CblofModel& model, std::span<const double> row) {
  check_dims(row, model.kmeans.dims());
  const auto& centroids = model.kmeans.centroids;
  double d2 = 0.0;
  const std::size_t c = nearest_centroid(centroids, row, &d2);
  double dist = std::sqrt(d2);
  if (!model.large[c]) {
    dist = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < centroids.rows(); ++j) {
      if (model.large[j]) dist = std::min(dist, std::sqrt(squared_distance(row, centroids.row(j))));
    }
  }
  return model.params.weighted ? dist * static_cast<double>(model.cluster_sizes[c]) : dist;
}

inline nlohmann::ordered_json to_json(const CblofModel& m) {
  std::vector<int> large(m.large.begin(), m.large.end());
  return {{"model_version", kModelVersion},
          {"type", "cblof"},
          {"params",
           {{"k", m.params.k},
            {"alpha", m.params.alpha},
            {"beta", m.params.beta},
            {"seed", m.params.seed},
            {"weighted", m.params.weighted},
            {"max_iterations", m.params.max_iterations}}},
          {"kmeans", to_json(m.kmeans)},
          {"cluster_sizes", m.cluster_sizes},
          {"large", large}};
}

inline CblofModel cblof_from_json(const nlohmann::ordered_json& doc) {
  if (doc.value("type", "") != "cblof" || doc.value("model_version", 0) != kModelVersion) {
    throw Error(ErrorCode::InvalidArgument, "not a cblof model v1");
  }
  CblofModel m;
  const auto& p = doc["params"];
  m.params.k = p["k"].get<std::size_t>();
  m.params.alpha = p["alpha"].get<double>();
  m.params.beta = p["beta"].get<double>();
  m.params.seed = p["seed"].get<std::uint64_t>();
  m.params.weighted = p["weighted"].get<bool>();
  m.params.max_iterations = p["max_iterations"].get<std::size_t>();
  m.kmeans = kmeans_from_json(doc["kmeans"]);
  m.cluster_sizes = doc["cluster_sizes"].get<std::vector<std::size_t>>();
  for (int v : doc["large"].get<std::vector<int>>()) m.large.push_back(v != 0);
  return m;
}

}  // namespace camlpad
