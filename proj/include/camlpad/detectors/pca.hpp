#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include "json.hpp"

#include "camlpad/detectors/common.hpp"
#include "camlpad/error.hpp"
#include "camlpad/matrix.hpp"

namespace camlpad {

struct PcaModel {
  std::vector<double> mean;                     // d
  Matrix components;                            // 2 x d
  std::array<double, 2> explained_variance{};  // non-increasing

  std::size_t dims() const { return mean.size(); }

  friend bool operator==(const PcaModel&, const PcaModel&) = default;
};

struct EigenDecomposition {
  std::vector<double> values;  // descending
  Matrix vectors;              // row i is the eigenvector for values[i]
};

// Cyclic Jacobi rotations on a symmetric matrix.
inline EigenDecomposition symmetric_eigen(Matrix a) {
  const std::size_t n = a.rows();
  Matrix v(n, n, 0.0);
  for (std::size_t i = 0; i < n; ++i) v(i, i) = 1.0;

  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      scale += a(i, i) * a(i, i);
      for (std::size_t j = i + 1; j < n; ++j) off += a(i, j) * a(i, j);
    }
    if (off <= 1e-30 * std::max(scale, 1e-300)) break;

    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (a(p, q) == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return a(x, x) > a(y, y); });
  EigenDecomposition out;
  out.vectors = Matrix(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    out.values.push_back(a(order[i], order[i]));
    for (std::size_t k = 0; k < n; ++k) out.vectors(i, k) = v(k, order[i]);
  }
  return out;
}

// Flip so the largest-magnitude coordinate (first one on ties) is positive.
inline void canonical_sign(std::span<double> axis) {
  std::size_t arg = 0;
  for (std::size_t i = 1; i < axis.size(); ++i) {
    if (std::abs(axis[i]) > std::abs(axis[arg]) + 1e-12) arg = i;
  }
  if (axis[arg] < 0) {
    for (double& x : axis) x = -x;
  }
}

inline PcaModel fit_pca(const Matrix& data) {
  if (data.rows() < 2) throw Error(ErrorCode::TooFewRows, "PCA needs >= 2 rows");
  if (data.cols() < 1) throw Error(ErrorCode::InvalidArgument, "PCA needs >= 1 column");
  const std::size_t n = data.rows(), d = data.cols();
  PcaModel model;
  model.mean.assign(d, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t j = 0; j < d; ++j) model.mean[j] += data(r, j);
  }
  for (double& m : model.mean) m /= static_cast<double>(n);

  Matrix cov(d, d, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t i = 0; i < d; ++i) {
      const double di = data(r, i) - model.mean[i];
      for (std::size_t j = i; j < d; ++j) cov(i, j) += di * (data(r, j) - model.mean[j]);
    }
  }
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i; j < d; ++j) {
      cov(i, j) /= static_cast<double>(n);
      cov(j, i) = cov(i, j);
    }
  }

  const auto eig = symmetric_eigen(std::move(cov));
  model.components = Matrix(2, d, 0.0);
  // With one feature the second axis is a zero-variance placeholder.
  for (std::size_t c = 0; c < std::min<std::size_t>(2, d); ++c) {
    for (std::size_t j = 0; j < d; ++j) model.components(c, j) = eig.vectors(c, j);
    canonical_sign(model.components.row(c));
    model.explained_variance[c] = std::max(0.0, eig.values[c]);
  }
  return model;
}

inline std::pair<double, double> project_pca(const PcaModel& model, std::span<const double> row) {
  check_dims(row, model.dims());
  double x = 0.0, y = 0.0;
  for (std::size_t j = 0; j < row.size(); ++j) {
    const double centered = row[j] - model.mean[j];
    x += model.components(0, j) * centered;
    y += model.components(1, j) * centered;
  }
  return {x, y};
}

inline nlohmann::ordered_json to_json(const PcaModel& m) {
  auto row = [&](std::size_t r) {
    return std::vector<double>(m.components.row(r).begin(), m.components.row(r).end());
  };
  return {{"model_version", kModelVersion},
          {"type", "pca"},
          {"mean", m.mean},
          {"components", {row(0), row(1)}},
          {"explained_variance", {m.explained_variance[0], m.explained_variance[1]}}};
}

inline PcaModel pca_from_json(const nlohmann::ordered_json& doc) {
  if (doc.value("type", "") != "pca" || doc.value("model_version", 0) != kModelVersion) {
    throw Error(ErrorCode::InvalidArgument, "not a pca model v1");
  }
  PcaModel m;
  m.mean = doc["mean"].get<std::vector<double>>();
  m.components = Matrix::from_rows(doc["components"].get<std::vector<std::vector<double>>>());
  m.explained_variance = {doc["explained_variance"][0].get<double>(),
                          doc["explained_variance"][1].get<double>()};
  return m;
}

}  // namespace camlpad
