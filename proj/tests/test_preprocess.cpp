#include <gtest/gtest.h>

#include <cmath>

#include "camlpad/preprocess.hpp"
#include "camlpad/random.hpp"

using namespace camlpad;

namespace {

const double M = kMissingCell;

RecordBatch column_batch(const std::string& field, const std::vector<FieldValue>& values) {
  std::vector<SensorRecord> rs;
  for (std::size_t i = 0; i < values.size(); ++i) {
    SensorRecord r;
    r.timestamp = static_cast<TimestampMs>(i);
    r.record_id = "r" + std::to_string(i);
    r.fields = {{field, values[i]}};
    rs.push_back(r);
  }
  return make_batch(DataSourceKind::Yaf, rs);
}

void expect_column(const std::vector<double>& got, const std::vector<double>& want, double tol = 1e-9) {
  ASSERT_EQ(got.size(), want.size());
  for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], tol) << "index " << i;
}

}  // namespace

TEST(Encode, FirstSeenOrder) {
  auto b = column_batch("proto", {std::string("udp"), std::string("tcp"), std::string("udp")});
  auto e = encode(b);
  expect_column(e.matrix.values.column(0), {0, 1, 0});
  EXPECT_EQ(e.dictionary.code("proto", "udp"), 0);
  EXPECT_EQ(e.dictionary.code("proto", "tcp"), 1);
  EXPECT_EQ(e.matrix.column_kinds[0], ColumnKind::Encoded);
  EXPECT_TRUE(e.new_categories.empty());
}

TEST(Encode, ReencodingIsFixedPoint) {
  auto b = column_batch("proto", {std::string("udp"), std::string("tcp"), std::string("udp")});
  auto e1 = encode(b);
  auto e2 = encode(b, e1.dictionary);
  EXPECT_EQ(e1.matrix.values, e2.matrix.values);
  EXPECT_EQ(e1.dictionary, e2.dictionary);
}

TEST(Encode, ScoringExtendsDictionary) {
  auto fit = encode(column_batch("proto", {std::string("udp"), std::string("tcp")}));
  auto scored = encode(column_batch("proto", {std::string("icmp")}), fit.dictionary, fit.matrix.layout());
  expect_column(scored.matrix.values.column(0), {2});
  EXPECT_EQ(scored.dictionary.code("proto", "icmp"), 2);
  EXPECT_EQ(scored.new_categories, (std::vector<std::string>{"proto=icmp"}));
}

TEST(Encode, LayoutFixesColumns) {
  auto fit = encode(column_batch("bytes", {1.0, 2.0}));
  auto scored = encode(column_batch("other", {std::string("x")}), fit.dictionary, fit.matrix.layout());
  EXPECT_EQ(scored.matrix.column_names, (std::vector<std::string>{"bytes"}));
  EXPECT_TRUE(is_missing_cell(scored.matrix.values(0, 0)));
}

TEST(Encode, MissingStaysMissing) {
  auto e = encode(column_batch("x", {1.0, Missing{}, 3.0}));
  EXPECT_EQ(e.matrix.column_kinds[0], ColumnKind::Numeric);
  EXPECT_TRUE(is_missing_cell(e.matrix.values(1, 0)));
  EXPECT_EQ(e.matrix.missing_count(), 1u);
}

TEST(Dictionary, JsonRoundTripAndValidation) {
  auto e = encode(column_batch("proto", {std::string("udp"), std::string("tcp")}));
  const auto doc = e.dictionary.to_json();
  EXPECT_EQ(doc.dump(), R"({"proto":{"udp":0,"tcp":1}})");
  EXPECT_EQ(EncodingDictionary::from_json(doc), e.dictionary);
  EXPECT_THROW(EncodingDictionary::from_json(nlohmann::ordered_json::parse(R"({"p":{"a":0,"b":2}})")), Error);
}

TEST(ImputeNumeric, Examples) {
  expect_column(impute_numeric({0, M, 2, M, 4}), {0, 1, 2, 3, 4});
  expect_column(impute_numeric({3, 1, 4}), {3, 1, 4});
  expect_column(impute_numeric({M, 5, M}), {5, 5, 5});
  expect_column(impute_numeric({M, M}), {0, 0});
}

TEST(ImputeNumeric, MatchesNormalEquationsOracle) {
  Rng rng(21);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> col(12);
    std::vector<std::pair<double, double>> obs;
    for (std::size_t i = 0; i < col.size(); ++i) {
      if (rng.uniform() < 0.3) {
        col[i] = M;
      } else {
        col[i] = rng.normal(3.0, 2.0);
        obs.emplace_back(static_cast<double>(i), col[i]);
      }
    }
    if (obs.size() < 2) continue;
    // Closed form via the 2x2 normal equations solved by Cramer's rule.
    double s1 = 0, sx = 0, sxx = 0, sy = 0, sxy = 0;
    for (auto [x, y] : obs) {
      s1 += 1;
      sx += x;
      sxx += x * x;
      sy += y;
      sxy += x * y;
    }
    const double det = s1 * sxx - sx * sx;
    const double a = (sy * sxx - sx * sxy) / det;
    const double b = (s1 * sxy - sx * sy) / det;
    const auto out = impute_numeric(col);
    for (std::size_t i = 0; i < col.size(); ++i) {
      const double want = is_missing_cell(col[i]) ? a + b * static_cast<double>(i) : col[i];
      EXPECT_NEAR(out[i], want, 1e-9);
    }
  }
}

TEST(ImputeBackfill, Examples) {
  expect_column(impute_categorical_backfill({M, 0, M, 1}), {0, 0, 1, 1});
  expect_column(impute_categorical_backfill({1, M, M}), {1, 1, 1});
  expect_column(impute_categorical_backfill({M, M}), {0, 0});
}

TEST(Standardize, Examples) {
  FeatureMatrix m;
  m.values = Matrix{{1, 5}, {2, 5}, {3, 5}};
  m.column_names = {"a", "b"};
  m.column_kinds = {ColumnKind::Numeric, ColumnKind::Numeric};
  m.row_ids = {"x", "y", "z"};
  auto s = standardize(m);
  expect_column(s.matrix.values.column(0), {-1.224744871391589, 0, 1.224744871391589});
  expect_column(s.matrix.values.column(1), {0, 0, 0});
  EXPECT_NEAR(s.stats[0].stddev, 0.816496580927726, 1e-12);

  FeatureMatrix one;
  one.values = Matrix{{4}};
  one.column_names = {"a"};
  one.column_kinds = {ColumnKind::Numeric};
  one.row_ids = {"q"};
  auto scored = standardize(one, std::vector<ColumnStats>{{2.0, 1.0}});
  EXPECT_DOUBLE_EQ(scored.matrix.values(0, 0), 2.0);
}

TEST(Standardize, RejectsMissingAndBadStats) {
  FeatureMatrix m;
  m.values = Matrix{{M}};
  m.column_names = {"a"};
  m.column_kinds = {ColumnKind::Numeric};
  EXPECT_THROW(standardize(m), Error);
  m.values = Matrix{{1}};
  EXPECT_THROW(standardize(m, std::vector<ColumnStats>{}), Error);
}

TEST(Standardize, InverseRecoversInput) {
  Rng rng(8);
  FeatureMatrix m;
  m.values = Matrix(50, 4);
  for (std::size_t r = 0; r < 50; ++r)
    for (std::size_t c = 0; c < 4; ++c) m.values(r, c) = rng.normal(100.0 * c, 1.0 + c);
  m.column_names = {"a", "b", "c", "d"};
  m.column_kinds.assign(4, ColumnKind::Numeric);
  auto s = standardize(m);
  auto back = unstandardize(s.matrix, s.stats);
  for (std::size_t i = 0; i < m.values.data().size(); ++i) {
    EXPECT_NEAR(back.values.data()[i], m.values.data()[i], 1e-9);
  }
}

TEST(Chain, NoMissingCellsAfterImpute) {
  Rng rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<SensorRecord> rs;
    const std::size_t n = 1 + rng.below(40);
    for (std::size_t i = 0; i < n; ++i) {
      SensorRecord r;
      r.timestamp = static_cast<TimestampMs>(i);
      r.record_id = std::to_string(i);
      for (int f = 0; f < 4; ++f) {
        const std::string name = "f" + std::to_string(f);
        if (rng.uniform() < 0.3) {
          r.fields.emplace_back(name, Missing{});
        } else if (f % 2 == 0) {
          r.fields.emplace_back(name, rng.normal(0, 1));
        } else {
          r.fields.emplace_back(name, "c" + std::to_string(rng.below(5)));
        }
      }
      rs.push_back(r);
    }
    auto m = impute(encode(make_batch(DataSourceKind::Yaf, rs)).matrix);
    EXPECT_EQ(m.missing_count(), 0u);
    for (double v : m.values.data()) EXPECT_TRUE(std::isfinite(v));
  }
}
