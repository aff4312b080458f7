#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "camlpad/ensemble.hpp"
#include "camlpad/random.hpp"

using namespace camlpad;

namespace {

LabelVector lv(std::vector<int> labels) {
  LabelVector v;
  for (std::size_t i = 0; i < labels.size(); ++i) v.row_ids.push_back("r" + std::to_string(i));
  v.labels = std::move(labels);
  return v;
}

}  // namespace

TEST(Normalize, Examples) {
  EXPECT_EQ(normalize_scores(std::vector<double>{1, 3, 5}), (std::vector<double>{0, 0.5, 1}));
  EXPECT_EQ(normalize_scores(std::vector<double>{7, 7}), (std::vector<double>{0.5, 0.5}));
}

TEST(Normalize, PreservesOrder) {
  Rng rng(1);
  std::vector<double> s(50);
  for (auto& v : s) v = rng.normal(0, 10);
  const auto n = normalize_scores(s);
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j)
      if (s[i] < s[j]) {
        EXPECT_LT(n[i], n[j]);
      }
}

TEST(Binarize, Examples) {
  EXPECT_EQ(binarize(std::vector<double>{0.1, 0.9, 0.2, 0.8, 0.3}, 0.4), (std::vector<int>{0, 1, 0, 1, 0}));
  std::vector<double> flat(10, 0.5);
  auto labels = binarize(flat, 0.1);
  EXPECT_EQ(labels[0], 1);
  EXPECT_EQ(std::accumulate(labels.begin(), labels.end(), 0), 1);
  EXPECT_EQ(binarize(std::vector<double>{3.0}, 0.1), (std::vector<int>{1}));
}

TEST(Binarize, ExactQuotaProperty) {
  Rng rng(2);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 1 + rng.below(300);
    // Rational contamination p/q keeps the expected ceiling exact in integers.
    const std::uint64_t q = 2 + rng.below(99);
    const std::uint64_t p = 1 + rng.below(q - 1);
    const double c = static_cast<double>(p) / static_cast<double>(q);
    const std::size_t expected = static_cast<std::size_t>((p * n + q - 1) / q);
    std::vector<double> s(n);
    for (auto& v : s) v = rng.below(4) == 0 ? 1.0 : rng.normal(0, 1);  // plenty of ties
    const auto labels = binarize(s, c);
    EXPECT_EQ(static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1)), expected)
        << "n=" << n << " c=" << p << "/" << q;
    // Every labelled row scores at least as high as every unlabelled one.
    double lo = INFINITY, hi = -INFINITY;
    for (std::size_t i = 0; i < n; ++i) {
      if (labels[i]) lo = std::min(lo, s[i]);
      else hi = std::max(hi, s[i]);
    }
    EXPECT_GE(lo, hi);
  }
}

TEST(Binarize, TiesGoToLowerIndex) {
  EXPECT_EQ(binarize(std::vector<double>{1, 2, 2, 2, 0}, 0.4), (std::vector<int>{0, 1, 1, 0, 0}));
}

TEST(Vote, TruthTable) {
  for (int mask = 0; mask < 8; ++mask) {
    const int a = mask & 1, b = (mask >> 1) & 1, c = (mask >> 2) & 1;
    const int majority = (a + b + c) >= 2 ? 1 : 0;
    EXPECT_EQ(vote(lv({a}), lv({b}), lv({c})).labels[0], majority) << mask;
  }
}

TEST(Vote, PermutationInvariantAndMonotone) {
  for (int mask = 0; mask < 8; ++mask) {
    std::array<int, 3> in = {mask & 1, (mask >> 1) & 1, (mask >> 2) & 1};
    const int base = vote(lv({in[0]}), lv({in[1]}), lv({in[2]})).labels[0];
    std::array<int, 3> perm = {0, 1, 2};
    do {
      EXPECT_EQ(vote(lv({in[perm[0]]}), lv({in[perm[1]]}), lv({in[perm[2]]})).labels[0], base);
    } while (std::next_permutation(perm.begin(), perm.end()));
    for (int k = 0; k < 3; ++k) {
      if (in[k] == 1) continue;
      auto up = in;
      up[k] = 1;
      EXPECT_GE(vote(lv({up[0]}), lv({up[1]}), lv({up[2]})).labels[0], base);
    }
  }
}

TEST(Vote, Misaligned) {
  auto a = lv({1, 0});
  auto b = lv({1, 0});
  b.row_ids[1] = "other";
  try {
    vote(a, b, a);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MisalignedRows);
  }
  EXPECT_THROW(vote(a, lv({1}), a), Error);
}

TEST(EnsembleScore, Examples) {
  ScoreSet s{{"a", "b", "c"}, {0, 1, 0.5}, {0, 1, 0.5}, {0, 1, 0.5}};
  EXPECT_EQ(ensemble_score(s), (std::vector<double>{0, 1, 0.5}));
  ScoreSet t{{"a", "b", "c"}, {0, 0.2, 1}, {0, 0.4, 1}, {0, 0.6, 1}};
  EXPECT_NEAR(ensemble_score(t)[1], 0.4, 1e-12);
}

TEST(EnsembleScore, RowMaximalEverywhereStaysMaximal) {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    ScoreSet s;
    const std::size_t n = 2 + rng.below(30);
    for (std::size_t i = 0; i < n; ++i) {
      s.row_ids.push_back(std::to_string(i));
      s.iforest.push_back(rng.uniform());
      s.hbos.push_back(rng.normal(5, 2));
      s.cblof.push_back(rng.uniform(0, 100));
    }
    const std::size_t top = rng.below(n);
    s.iforest[top] = 2;
    s.hbos[top] = 20;
    s.cblof[top] = 200;
    const auto e = ensemble_score(s);
    EXPECT_EQ(static_cast<std::size_t>(std::max_element(e.begin(), e.end()) - e.begin()), top);
  }
}

namespace {

SourceLabels src(DataSourceKind k, std::vector<TimestampMs> ts, std::vector<int> labels) {
  return {k, std::move(ts), std::move(labels)};
}

}  // namespace

TEST(CrossSource, Examples) {
  CrossSourceParams p;
  p.contamination = 0.1;
  // one source: final equals its vote
  std::vector<SourceLabels> one = {src(DataSourceKind::Yaf, {0, 1, 60000, 60001}, {1, 0, 0, 0})};
  auto v = cross_source_vote(one, p);
  ASSERT_EQ(v.size(), 2u);
  EXPECT_EQ(v[0].final, 1);
  EXPECT_EQ(v[1].final, 0);

  std::vector<SourceLabels> three = {src(DataSourceKind::Yaf, {5}, {1}), src(DataSourceKind::Snort, {6}, {1}),
                                     src(DataSourceKind::Meraki, {7}, {0})};
  EXPECT_EQ(cross_source_vote(three, p)[0].final, 1);

  std::vector<SourceLabels> tie = {src(DataSourceKind::Yaf, {5}, {1}), src(DataSourceKind::Snort, {6}, {0})};
  EXPECT_EQ(cross_source_vote(tie, p)[0].final, 1);
  p.tie_breaks_anomalous = false;
  EXPECT_EQ(cross_source_vote(tie, p)[0].final, 0);
}

TEST(CrossSource, CoversEveryRecordOnce) {
  Rng rng(4);
  std::vector<SourceLabels> sources;
  std::size_t total = 0;
  for (auto k : kAllSources) {
    SourceLabels s{k, {}, {}};
    const auto n = rng.below(200);
    for (std::size_t i = 0; i < n; ++i) {
      s.timestamps.push_back(static_cast<TimestampMs>(rng.below(3'600'000)));
      s.labels.push_back(rng.below(10) == 0);
    }
    total += n;
    sources.push_back(s);
  }
  const auto buckets = cross_source_vote(sources, {});
  std::set<TimestampMs> starts;
  for (const auto& b : buckets) {
    EXPECT_EQ(b.bucket_start % 60000, 0);
    EXPECT_GE(b.present(), 1u);
    EXPECT_TRUE(starts.insert(b.bucket_start).second);
  }
  std::size_t covered = 0;
  for (const auto& s : sources)
    for (auto t : s.timestamps) covered += starts.count(bucket_of(t, 60000));
  EXPECT_EQ(covered, total);
}

TEST(LabelsJsonl, RoundTripAndErrors) {
  const auto v = lv({0, 1, 1});
  EXPECT_EQ(labels_from_jsonl(labels_to_jsonl(v, std::vector<double>{0.1, 0.2, 0.3})), v);
  EXPECT_EQ(labels_to_jsonl(lv({1})), "{\"row_id\":\"r0\",\"label\":1}\n");
  try {
    labels_from_jsonl("{\"row_id\":\"a\",\"label\":0}\n{\"row_id\":\"b\",\"label\":7}\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MalformedLine);
    EXPECT_EQ(e.position(), 2u);
  }
}

TEST(BucketsJsonl, Shape) {
  BucketVerdict b;
  b.bucket_start = 60000;
  b.votes[source_index(DataSourceKind::Snort)] = 1;
  b.final = 1;
  std::vector<BucketVerdict> v = {b};
  EXPECT_EQ(buckets_to_jsonl(v), "{\"bucket_start\":60000,\"final\":1,\"votes\":{\"snort\":1}}\n");
}
