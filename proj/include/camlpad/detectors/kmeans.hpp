#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "json.hpp"

#include "camlpad/detectors/common.hpp"
#include "camlpad/error.hpp"
#include "camlpad/matrix.hpp"
#include "camlpad/random.hpp"

namespace camlpad {

struct KMeansParams {
  std::size_t k = 8;
  std::size_t max_iterations = 100;
  double tolerance = 1e-6;  // max centroid shift (Euclidean) at convergence
  std::uint64_t seed = 0;

  friend bool operator==(const KMeansParams&, const KMeansParams&) = default;
};

struct KMeansModel {
  KMeansParams params;
  Matrix centroids;                        // k x d
  std::vector<std::size_t> cluster_sizes;  // training members per centroid
  double inertia = 0.0;
  std::size_t iterations = 0;
  std::vector<double> inertia_trace;  // after each assignment step

  std::size_t k() const { return centroids.rows(); }
  std::size_t dims() const { return centroids.cols(); }

  friend bool operator==(const KMeansModel&, const KMeansModel&) = default;
};

// Nearest centroid; ties go to the lower index.
inline std::size_t nearest_centroid(const Matrix& centroids, std::span<const double> row,
                                    double* dist2 = nullptr) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.rows(); ++c) {
    const double d = squared_distance(row, centroids.row(c));
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  if (dist2) *dist2 = best_d;
  return best;
}

inline std::size_t count_distinct_rows(const Matrix& data) {
  std::vector<std::size_t> idx(data.rows());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  auto less = [&](std::size_t a, std::size_t b) {
    auto ra = data.row(a), rb = data.row(b);
    return std::lexicographical_compare(ra.begin(), ra.end(), rb.begin(), rb.end());
  };
  std::sort(idx.begin(), idx.end(), less);
  std::size_t distinct = idx.empty() ? 0 : 1;
  for (std::size_t i = 1; i < idx.size(); ++i) distinct += less(idx[i - 1], idx[i]) ? 1 : 0;
  return distinct;
}

namespace detail {

// k-means++ style seeding: each further centre is drawn with probability
// proportional to squared distance from the nearest chosen centre.
inline Matrix seed_centroids(const Matrix& data, std::size_t k, Rng& rng) {
  const std::size_t n = data.rows();
  Matrix centroids(k, data.cols());
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  std::vector<bool> chosen(n, false);
  std::size_t pick = rng.below(n);
  for (std::size_t c = 0; c < k; ++c) {
    if (c > 0) {
      double total = 0.0;
      for (double v : d2) total += v;
      if (total > 0.0) {
        double target = rng.uniform() * total;
        pick = n - 1;
        for (std::size_t i = 0; i < n; ++i) {
          target -= d2[i];
          if (target < 0.0 && d2[i] > 0.0) {
            pick = i;
            break;
          }
        }
        while (d2[pick] == 0.0 && pick > 0) --pick;
      } else {
        pick = static_cast<std::size_t>(std::find(chosen.begin(), chosen.end(), false) - chosen.begin());
      }
    }
    chosen[pick] = true;
    std::copy(data.row(pick).begin(), data.row(pick).end(), centroids.row(c).begin());
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], squared_distance(data.row(i), centroids.row(c)));
    }
  }
  return centroids;
}

struct Assignment {
  std::vector<std::size_t> labels;
  std::vector<double> dist2;
  std::vector<std::size_t> sizes;
  double inertia = 0.0;
};

inline Assignment assign_all(const Matrix& data, const Matrix& centroids) {
  Assignment a;
  a.labels.resize(data.rows());
  a.dist2.resize(data.rows());
  a.sizes.assign(centroids.rows(), 0);
  for (std::size_t i = 0; i < data.rows(); ++i) {
    a.labels[i] = nearest_centroid(centroids, data.row(i), &a.dist2[i]);
    ++a.sizes[a.labels[i]];
    a.inertia += a.dist2[i];
  }
  return a;
}

// Moves each empty centroid onto the point farthest from its own centroid.
// Returns true if anything moved.
inline bool reseed_empty(const Matrix& data, Matrix& centroids, Assignment& a) {
  bool moved = false;
  for (std::size_t c = 0; c < centroids.rows(); ++c) {
    if (a.sizes[c] != 0) continue;
    const auto far = static_cast<std::size_t>(
        std::max_element(a.dist2.begin(), a.dist2.end()) - a.dist2.begin());
    if (a.dist2[far] <= 0.0) break;
    std::copy(data.row(far).begin(), data.row(far).end(), centroids.row(c).begin());
    --a.sizes[a.labels[far]];
    a.labels[far] = c;
    a.sizes[c] = 1;
    a.dist2[far] = 0.0;
    moved = true;
  }
  return moved;
}

}  // namespace detail

inline KMeansModel fit_kmeans(const Matrix& data, const KMeansParams& params = {}) {
  if (params.k == 0) throw Error(ErrorCode::InvalidArgument, "k must be >= 1");
  if (data.rows() < params.k) {
    throw Error(ErrorCode::TooFewRows, std::to_string(data.rows()) + " rows for k=" +
                                           std::to_string(params.k));
  }
  if (count_distinct_rows(data) < params.k) {
    throw Error(ErrorCode::TooFewRows, "fewer distinct rows than k=" + std::to_string(params.k));
  }
  Rng rng(params.seed);
  KMeansModel model;
  model.params = params;
  model.centroids = detail::seed_centroids(data, params.k, rng);

  const std::size_t d = data.cols();
  for (std::size_t iter = 0; iter < params.max_iterations; ++iter) {
    auto a = detail::assign_all(data, model.centroids);
    model.inertia_trace.push_back(a.inertia);
    model.iterations = iter + 1;
    if (detail::reseed_empty(data, model.centroids, a)) continue;

    Matrix next(params.k, d, 0.0);
    for (std::size_t i = 0; i < data.rows(); ++i) {
      auto dst = next.row(a.labels[i]);
      auto src = data.row(i);
      for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
    }
    double max_shift = 0.0;
    for (std::size_t c = 0; c < params.k; ++c) {
      for (std::size_t j = 0; j < d; ++j) next(c, j) /= static_cast<double>(a.sizes[c]);
      max_shift = std::max(max_shift, std::sqrt(squared_distance(next.row(c), model.centroids.row(c))));
    }
    model.centroids = std::move(next);
    if (max_shift <= params.tolerance) break;
  }

  auto a = detail::assign_all(data, model.centroids);
  for (std::size_t guard = 0; guard < params.k && detail::reseed_empty(data, model.centroids, a); ++guard) {
    a = detail::assign_all(data, model.centroids);
  }
  model.cluster_sizes = a.sizes;
  model.inertia = a.inertia;
  return model;
}

inline nlohmann::ordered_json to_json(const KMeansModel& m) {
  nlohmann::ordered_json centroids = nlohmann::ordered_json::array();
  for (std::size_t c = 0; c < m.k(); ++c) {
    centroids.push_back(std::vector<double>(m.centroids.row(c).begin(), m.centroids.row(c).end()));
  }
  return {{"model_version", kModelVersion},
          {"type", "kmeans"},
          {"params",
           {{"k", m.params.k},
            {"max_iterations", m.params.max_iterations},
            {"tolerance", m.params.tolerance},
            {"seed", m.params.seed}}},
          {"centroids", std::move(centroids)},
          {"cluster_sizes", m.cluster_sizes},
          {"inertia", m.inertia},
          {"iterations", m.iterations}};
}

inline KMeansModel kmeans_from_json(const nlohmann::ordered_json& doc) {
  if (doc.value("type", "") != "kmeans" || doc.value("model_version", 0) != kModelVersion) {
    throw Error(ErrorCode::InvalidArgument, "not a kmeans model v1");
  }
  KMeansModel m;
  const auto& p = doc["params"];
  m.params = {p["k"].get<std::size_t>(), p["max_iterations"].get<std::size_t>(),
              p["tolerance"].get<double>(), p["seed"].get<std::uint64_t>()};
  m.centroids = Matrix::from_rows(doc["centroids"].get<std::vector<std::vector<double>>>());
  m.cluster_sizes = doc["cluster_sizes"].get<std::vector<std::size_t>>();
  m.inertia = doc["inertia"].get<double>();
  m.iterations = doc["iterations"].get<std::size_t>();
  return m;
}

}  // namespace camlpad
