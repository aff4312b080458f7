#include <gtest/gtest.h>

#include <numeric>

#include "camlpad/ingest.hpp"
#include "camlpad/synth.hpp"
#include "support.hpp"

using namespace camlpad;

namespace {

SynthConfig small(std::size_t records = 100) {
  SynthConfig c;
  c.records_per_source_per_day = records;
  return c;
}

}  // namespace

TEST(Synth, ZeroContaminationHasNoAnomalies) {
  auto cfg = small();
  cfg.contamination = 0.0;
  for (const auto& s : generate(cfg).sources) {
    EXPECT_EQ(std::accumulate(s.truth.labels.begin(), s.truth.labels.end(), 0), 0);
  }
}

TEST(Synth, Deterministic) {
  const auto a = generate(small());
  const auto b = generate(small());
  ASSERT_EQ(a.sources.size(), b.sources.size());
  for (std::size_t i = 0; i < a.sources.size(); ++i) {
    EXPECT_EQ(a.sources[i].batch, b.sources[i].batch);
    EXPECT_EQ(a.sources[i].truth, b.sources[i].truth);
  }
  auto other = small();
  other.seed = 2;
  EXPECT_FALSE(generate(other).sources[0].batch == a.sources[0].batch);
}

TEST(Synth, SubsetLeavesOtherSourcesUnchanged) {
  auto only = small();
  only.sources = {DataSourceKind::Snort};
  const auto all = generate(small());
  const auto one = generate(only);
  for (const auto& s : all.sources)
    if (s.source == DataSourceKind::Snort) {
      EXPECT_EQ(s.batch, one.sources[0].batch);
    }
}

TEST(Synth, DefaultCountsPerSourceDay) {
  const SynthConfig cfg;
  const auto out = generate(cfg);
  ASSERT_EQ(out.sources.size(), 5u);
  EXPECT_EQ(out.boundary, kSynthEpoch + 7 * kMillisPerDay);
  for (const auto& s : out.sources) {
    ASSERT_EQ(s.batch.size(), 8u * 500u);
    std::map<TimestampMs, int> per_day, rows;
    for (std::size_t i = 0; i < s.batch.size(); ++i) {
      per_day[day_start(s.batch.records[i].timestamp)] += s.truth.labels[i];
      rows[day_start(s.batch.records[i].timestamp)] += 1;
    }
    EXPECT_EQ(per_day.size(), 8u);
    for (const auto& [day, n] : per_day) {
      EXPECT_EQ(n, 25) << to_string(s.source) << " " << iso_date(day);
      EXPECT_EQ(rows[day], 500);
    }
    EXPECT_TRUE(validate_batch(s.batch).empty());
  }
}

TEST(Synth, CurrentContamination) {
  auto cfg = small(200);
  cfg.current_contamination = 0.5;
  const auto out = generate(cfg);
  for (const auto& s : out.sources) {
    int current = 0;
    for (std::size_t i = 0; i < s.batch.size(); ++i)
      if (s.batch.records[i].timestamp >= out.boundary) current += s.truth.labels[i];
    EXPECT_EQ(current, 100);
  }
}

TEST(Synth, ShiftedAnomaliesAreFar) {
  const auto out = generate(small(400));
  const auto& s = out.sources[0];
  const auto profile = source_profile(s.source);
  const auto& f = profile.numeric[0];
  for (std::size_t i = 0; i < s.batch.size(); ++i) {
    const auto* v = s.batch.records[i].find(f.name);
    ASSERT_NE(v, nullptr);
    if (!std::holds_alternative<double>(*v)) continue;
    const double z = (std::get<double>(*v) - f.mean) / f.sd;
    if (s.truth.labels[i]) {
      EXPECT_GT(z, 1.0);
    }
  }
}

TEST(Synth, ValidateRejectsBadConfig) {
  auto cfg = small();
  cfg.contamination = 0.5;
  EXPECT_THROW(generate(cfg), Error);
  cfg = small();
  cfg.records_per_source_per_day = 0;
  EXPECT_THROW(generate(cfg), Error);
}

TEST(Synth, WriteStoreLayout) {
  testing_support::TempDir dir;
  auto cfg = small(50);
  const auto out = generate(cfg);
  write_store(out, dir.path());
  namespace fs = std::filesystem;
  std::size_t files = 0;
  for (auto k : kAllSources) {
    const fs::path sdir = dir.path() / std::string(to_string(k));
    for (const auto& e : fs::directory_iterator(sdir)) {
      ++files;
      const auto batch = parse_jsonl(testing_support::slurp(e.path()), k);
      EXPECT_EQ(batch.size(), 50u);
    }
    EXPECT_TRUE(fs::exists(dir.path() / "truth" / (std::string(to_string(k)) + ".jsonl")));
  }
  EXPECT_EQ(files, 5u * 8u);
  EXPECT_TRUE(fs::exists(dir.path() / "truth" / "buckets.jsonl"));
  EXPECT_TRUE(fs::exists(dir.path() / "yaf" / "2020-01-01.jsonl"));
  EXPECT_TRUE(fs::exists(dir.path() / "yaf" / "2020-01-08.jsonl"));
}
