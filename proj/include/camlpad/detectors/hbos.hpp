#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "json.hpp"

#include "camlpad/detectors/common.hpp"
#include "camlpad/error.hpp"
#include "camlpad/matrix.hpp"

namespace camlpad {

struct HbosParams {
  std::size_t bins = 10;
  double epsilon = 1e-9;

  friend bool operator==(const HbosParams&, const HbosParams&) = default;
};

// Equal-width histogram over the training range of one feature. A constant
// feature keeps a single bin with edges {v, v}.
struct HbosHistogram {
  std::vector<double> edges;
  std::vector<std::size_t> counts;

  bool degenerate() const { return counts.size() == 1; }

  // Bins are [e_i, e_{i+1}) except the last, which is closed. Values outside
  // the training range clamp to the nearest edge bin.
  std::size_t bin_of(double x) const {
    if (degenerate() || x <= edges.front()) return 0;
    const std::size_t last = counts.size() - 1;
    if (x >= edges.back()) return last;
    const auto it = std::upper_bound(edges.begin(), edges.end(), x);
    return std::min(static_cast<std::size_t>(it - edges.begin()) - 1, last);
  }

  friend bool operator==(const HbosHistogram&, const HbosHistogram&) = default;
};

struct HbosModel {
  HbosParams params;
  std::size_t n = 0;
  std::vector<HbosHistogram> features;

  friend bool operator==(const HbosModel&, const HbosModel&) = default;
};

inline HbosModel fit_hbos(const Matrix& data, const HbosParams& params = {}) {
  if (data.rows() < 1) throw Error(ErrorCode::TooFewRows, "HBOS needs >= 1 row");
  if (data.cols() < 1) throw Error(ErrorCode::InvalidArgument, "HBOS needs >= 1 feature");
  if (params.bins < 1) throw Error(ErrorCode::InvalidArgument, "HBOS needs >= 1 bin");
  HbosModel model;
  model.params = params;
  model.n = data.rows();
  model.features.reserve(data.cols());
  for (std::size_t f = 0; f < data.cols(); ++f) {
    double lo = data(0, f), hi = lo;
    for (std::size_t r = 1; r < data.rows(); ++r) {
      lo = std::min(lo, data(r, f));
      hi = std::max(hi, data(r, f));
    }
    HbosHistogram h;
    const double width = (hi - lo) / static_cast<double>(params.bins);
    bool increasing = lo < hi;
    if (increasing) {
      h.edges.resize(params.bins + 1);
      for (std::size_t b = 0; b < params.bins; ++b) h.edges[b] = lo + width * static_cast<double>(b);
      h.edges.back() = hi;
      for (std::size_t b = 1; b < h.edges.size(); ++b) increasing &= h.edges[b] > h.edges[b - 1];
    }
    if (!increasing) {
      h.edges = {lo, hi};
      h.counts = {data.rows()};
    } else {
      h.counts.assign(params.bins, 0);
      for (std::size_t r = 0; r < data.rows(); ++r) ++h.counts[h.bin_of(data(r, f))];
    }
    model.features.push_back(std::move(h));
  }
  return model;
}

inline double score_hbos(const HbosModel& model, std::span<const double> row) {
  check_dims(row, model.features.size());
  double score = 0.0;
  const double n = static_cast<double>(model.n);
  for (std::size_t f = 0; f < row.size(); ++f) {
    const auto& h = model.features[f];
    score -= std::log(static_cast<double>(h.counts[h.bin_of(row[f])]) / n + model.params.epsilon);
  }
  return score;
}

inline nlohmann::ordered_json to_json(const HbosModel& m) {
  nlohmann::ordered_json features = nlohmann::ordered_json::array();
  for (const auto& h : m.features) features.push_back({{"edges", h.edges}, {"counts", h.counts}});
  return {{"model_version", kModelVersion},
          {"type", "hbos"},
          {"params", {{"bins", m.params.bins}, {"epsilon", m.params.epsilon}}},
          {"n", m.n},
          {"features", std::move(features)}};
}

inline HbosModel hbos_from_json(const nlohmann::ordered_json& doc) {
  if (doc.value("type", "") != "hbos" || doc.value("model_version", 0) != kModelVersion) {
    throw Error(ErrorCode::InvalidArgument, "not an hbos model v1");
  }
  HbosModel m;
  m.params.bins = doc["params"]["bins"].get<std::size_t>();
  m.params.epsilon = doc["params"]["epsilon"].get<double>();
  m.n = doc["n"].get<std::size_t>();
  for (const auto& jf : doc["features"]) {
    m.features.push_back({jf["edges"].get<std::vector<double>>(),
                          jf["counts"].get<std::vector<std::size_t>>()});
  }
  return m;
}

}  // namespace camlpad
