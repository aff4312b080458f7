#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "camlpad/detectors/common.hpp"
#include "camlpad/error.hpp"
#include "camlpad/matrix.hpp"
#include "camlpad/random.hpp"

namespace camlpad {

inline constexpr double kEulerGamma = 0.5772156649;

// Average path length of an unsuccessful BST search over n points; the
// normaliser for isolation depths.
inline double average_path_length(std::size_t n) {
  if (n <= 1) return 0.0;
  if (n == 2) return 1.0;
  const double m = static_cast<double>(n);
  return 2.0 * (std::log(m - 1.0) + kEulerGamma) - 2.0 * (m - 1.0) / m;
}

struct IsolationForestParams {
  std::size_t trees = 100;
  std::size_t subsample = 256;
  std::uint64_t seed = 0;

  friend bool operator==(const IsolationForestParams&, const IsolationForestParams&) = default;
};

struct IsolationNode {
  // Leaves have feature == -1 and carry `size`; internal nodes route
  // x[feature] < split to `left`, everything else to `right`.
  std::int32_t feature = -1;
  double split = 0.0;
  std::int32_t left = -1;
  std::int32_t right = -1;
  std::size_t size = 0;

  bool is_leaf() const { return feature < 0; }
  friend bool operator==(const IsolationNode&, const IsolationNode&) = default;
};

struct IsolationTree {
  std::vector<IsolationNode> nodes;  // root at index 0

  std::size_t depth() const {
    std::size_t best = 0;
    std::vector<std::pair<std::int32_t, std::size_t>> stack{{0, 0}};
    while (!stack.empty()) {
      auto [id, d] = stack.back();
      stack.pop_back();
      best = std::max(best, d);
      const auto& n = nodes[id];
      if (!n.is_leaf()) {
        stack.push_back({n.left, d + 1});
        stack.push_back({n.right, d + 1});
      }
    }
    return best;
  }

  friend bool operator==(const IsolationTree&, const IsolationTree&) = default;
};

struct IsolationForestModel {
  IsolationForestParams params;
  std::size_t dims = 0;
  std::size_t sample_size = 0;  // min(subsample, training rows)
  std::size_t max_depth = 0;    // ceil(log2(sample_size))
  std::vector<IsolationTree> trees;

  friend bool operator==(const IsolationForestModel&, const IsolationForestModel&) = default;
};

namespace detail {

class IsolationTreeBuilder {
 public:
  IsolationTreeBuilder(const Matrix& data, std::size_t max_depth, Rng& rng)
      : data_(data), max_depth_(max_depth), rng_(rng) {}

  IsolationTree build(std::vector<std::size_t> rows) {
    tree_.nodes.clear();
    grow(rows, 0);
    return std::move(tree_);
  }

 private:
  std::int32_t grow(std::span<std::size_t> rows, std::size_t depth) {
    const auto id = static_cast<std::int32_t>(tree_.nodes.size());
    tree_.nodes.push_back({.size = rows.size()});
    if (depth >= max_depth_ || rows.size() <= 1) return id;

    // Only features that vary inside this node can split it.
    candidates_.clear();
    for (std::size_t f = 0; f < data_.cols(); ++f) {
      double lo = data_(rows[0], f), hi = lo;
      for (std::size_t r : rows) {
        lo = std::min(lo, data_(r, f));
        hi = std::max(hi, data_(r, f));
      }
      if (lo < hi) candidates_.push_back({f, lo, hi});
    }
    if (candidates_.empty()) return id;

    const auto [feature, lo, hi] = candidates_[rng_.below(candidates_.size())];
    double split;
    do {
      split = rng_.uniform(lo, hi);
    } while (!(split > lo && split < hi));

    auto mid = std::partition(rows.begin(), rows.end(),
                              [&](std::size_t r) { return data_(r, feature) < split; });
    const auto n_left = static_cast<std::size_t>(mid - rows.begin());

    tree_.nodes[id].feature = static_cast<std::int32_t>(feature);
    tree_.nodes[id].split = split;
    const auto left = grow(rows.first(n_left), depth + 1);
    const auto right = grow(rows.subspan(n_left), depth + 1);
    tree_.nodes[id].left = left;
    tree_.nodes[id].right = right;
    return id;
  }

  struct Candidate {
    std::size_t feature;
    double lo, hi;
  };

  const Matrix& data_;
  std::size_t max_depth_;
  Rng& rng_;
  IsolationTree tree_;
  std::vector<Candidate> candidates_;
};

}  // namespace detail

inline IsolationForestModel fit_iforest(const Matrix& data, const IsolationForestParams& params = {}) {
  if (data.rows() < 2) throw Error(ErrorCode::TooFewRows, "isolation forest needs >= 2 rows");
  if (params.trees == 0 || params.subsample < 2) {
    throw Error(ErrorCode::InvalidArgument, "need trees >= 1 and subsample >= 2");
  }
  IsolationForestModel model;
  model.params = params;
  model.dims = data.cols();
  model.sample_size = std::min(params.subsample, data.rows());
  model.max_depth = static_cast<std::size_t>(std::ceil(std::log2(static_cast<double>(model.sample_size))));

  Rng rng(params.seed);
  detail::IsolationTreeBuilder builder(data, model.max_depth, rng);
  std::vector<std::size_t> all(data.rows());
  model.trees.reserve(params.trees);
  for (std::size_t t = 0; t < params.trees; ++t) {
    std::iota(all.begin(), all.end(), std::size_t{0});
    // Partial Fisher-Yates: the first sample_size slots become the subsample.
    for (std::size_t i = 0; i < model.sample_size; ++i) {
      std::swap(all[i], all[i + rng.below(all.size() - i)]);
    }
    model.trees.push_back(builder.build({all.begin(), all.begin() + model.sample_size}));
  }
  return model;
}

// Depth at which `row` terminates plus the c(size) correction for unresolved
// leaves.
inline double path_length(const IsolationTree& tree, std::span<const double> row) {
  std::int32_t id = 0;
  std::size_t depth = 0;
  while (!tree.nodes[id].is_leaf()) {
    const auto& n = tree.nodes[id];
    id = row[n.feature] < n.split ? n.left : n.right;
    ++depth;
  }
  return static_cast<double>(depth) + average_path_length(tree.nodes[id].size);
}

inline double mean_path_length(const IsolationForestModel& model, std::span<const double> row) {
  check_dims(row, model.dims);
  double total = 0.0;
  for (const auto& tree : model.trees) total += path_length(tree, row);
  return total / static_cast<double>(model.trees.size());
}

inline double score_iforest(const IsolationForestModel& model, std::span<const double> row) {
  const double eh = mean_path_length(model, row);
  return std::exp2(-eh / average_path_length(model.sample_size));
}

inline nlohmann::ordered_json to_json(const IsolationForestModel& m) {
  nlohmann::ordered_json trees = nlohmann::ordered_json::array();
  for (const auto& t : m.trees) {
    nlohmann::ordered_json nodes = nlohmann::ordered_json::array();
    for (const auto& n : t.nodes) {
      if (n.is_leaf()) {
        nodes.push_back({{"size", n.size}});
      } else {
        nodes.push_back({{"feature", n.feature}, {"split", n.split}, {"left", n.left},
                         {"right", n.right}, {"size", n.size}});
      }
    }
    trees.push_back(std::move(nodes));
  }
  return {{"model_version", kModelVersion},
          {"type", "isolation_forest"},
          {"params", {{"trees", m.params.trees}, {"subsample", m.params.subsample}, {"seed", m.params.seed}}},
          {"dims", m.dims},
          {"sample_size", m.sample_size},
          {"max_depth", m.max_depth},
          {"trees", std::move(trees)}};
}

inline IsolationForestModel iforest_from_json(const nlohmann::ordered_json& doc) {
  if (doc.value("type", "") != "isolation_forest" || doc.value("model_version", 0) != kModelVersion) {
    throw Error(ErrorCode::InvalidArgument, "not an isolation_forest model v1");
  }
  IsolationForestModel m;
  m.params.trees = doc["params"]["trees"].get<std::size_t>();
  m.params.subsample = doc["params"]["subsample"].get<std::size_t>();
  m.params.seed = doc["params"]["seed"].get<std::uint64_t>();
  m.dims = doc["dims"].get<std::size_t>();
  m.sample_size = doc["sample_size"].get<std::size_t>();
  m.max_depth = doc["max_depth"].get<std::size_t>();
  for (const auto& jt : doc["trees"]) {
    IsolationTree t;
    for (const auto& jn : jt) {
      IsolationNode n;
      n.size = jn["size"].get<std::size_t>();
      if (jn.contains("feature")) {
        n.feature = jn["feature"].get<std::int32_t>();
        n.split = jn["split"].get<double>();
        n.left = jn["left"].get<std::int32_t>();
        n.right = jn["right"].get<std::int32_t>();
      }
      t.nodes.push_back(n);
    }
    m.trees.push_back(std::move(t));
  }
  return m;
}

}  // namespace camlpad
