#include <gtest/gtest.h>

#include <cmath>

#include "camlpad/detectors/hbos.hpp"
#include "camlpad/random.hpp"

using namespace camlpad;

namespace {

// Linear scan: the last edge at or below x, clamped to the bin range.
std::size_t scan_bin(const HbosHistogram& h, double x) {
  std::size_t bin = 0;
  for (std::size_t i = 0; i < h.counts.size(); ++i) {
    if (x >= h.edges[i]) bin = i;
  }
  return bin;
}

double oracle_score(const HbosModel& m, std::span<const double> row) {
  double s = 0.0;
  for (std::size_t f = 0; f < row.size(); ++f) {
    const auto& h = m.features[f];
    s += -std::log(static_cast<double>(h.counts[scan_bin(h, row[f])]) / static_cast<double>(m.n) + 1e-9);
  }
  return s;
}

}  // namespace

TEST(Hbos, HandBinning) {
  const Matrix data{{1}, {1}, {1}, {9}};
  const auto m = fit_hbos(data, {2, 1e-9});
  ASSERT_EQ(m.features.size(), 1u);
  EXPECT_EQ(m.features[0].edges, (std::vector<double>{1, 5, 9}));
  EXPECT_EQ(m.features[0].counts, (std::vector<std::size_t>{3, 1}));
}

TEST(Hbos, HandScores) {
  const auto m = fit_hbos(Matrix{{1}, {1}, {1}, {9}}, {2, 1e-9});
  std::vector<double> one = {1}, nine = {9}, fifty = {50}, below = {-3};
  EXPECT_NEAR(score_hbos(m, one), 0.2877, 1e-3);
  EXPECT_NEAR(score_hbos(m, nine), 1.3863, 1e-3);
  EXPECT_NEAR(score_hbos(m, one), -std::log(0.75 + 1e-9), 1e-12);
  EXPECT_NEAR(score_hbos(m, fifty), score_hbos(m, nine), 1e-12);
  EXPECT_NEAR(score_hbos(m, below), score_hbos(m, one), 1e-12);
}

TEST(Hbos, ConstantFeatureIsDegenerate) {
  const auto m = fit_hbos(Matrix{{4, 1}, {4, 2}, {4, 3}});
  EXPECT_TRUE(m.features[0].degenerate());
  EXPECT_EQ(m.features[0].counts, (std::vector<std::size_t>{3}));
  EXPECT_FALSE(m.features[1].degenerate());
  EXPECT_EQ(m.features[1].counts.size(), 10u);
}

TEST(Hbos, CountsSumToN) {
  Rng rng(3);
  Matrix data(257, 5);
  for (std::size_t r = 0; r < data.rows(); ++r)
    for (std::size_t c = 0; c < data.cols(); ++c) data(r, c) = rng.normal(c, 1.0 + c);
  const auto m = fit_hbos(data);
  for (const auto& h : m.features) {
    std::size_t total = 0;
    for (auto c : h.counts) total += c;
    EXPECT_EQ(total, 257u);
    for (std::size_t i = 1; i < h.edges.size(); ++i) EXPECT_GT(h.edges[i], h.edges[i - 1]);
  }
}

TEST(Hbos, MatchesLinearScanOracle) {
  Rng rng(12);
  Matrix data(400, 4);
  for (std::size_t r = 0; r < data.rows(); ++r)
    for (std::size_t c = 0; c < data.cols(); ++c) data(r, c) = c == 3 ? 2.0 : rng.normal(0.0, 1.0);
  const auto m = fit_hbos(data);
  for (int i = 0; i < 1000; ++i) {
    std::vector<double> row(4);
    for (auto& v : row) v = rng.uniform(-5.0, 5.0);
    if (i % 10 == 0) row[0] = m.features[0].edges[rng.below(11)];  // exact edges
    EXPECT_NEAR(score_hbos(m, row), oracle_score(m, row), 1e-9);
  }
}

TEST(Hbos, ErrorsAndSerialization) {
  EXPECT_THROW(fit_hbos(Matrix(0, 2)), Error);
  const auto m = fit_hbos(Matrix{{1, 2}, {3, 4}});
  std::vector<double> wrong = {1};
  EXPECT_THROW(score_hbos(m, wrong), Error);
  EXPECT_EQ(hbos_from_json(to_json(m)), m);
}
