#include <gtest/gtest.h>

#include <algorithm>
#include <atomic>
#include <set>

#include "camlpad/random.hpp"
#include "camlpad/store.hpp"
#include "support.hpp"

using namespace camlpad;
using testing_support::StubServer;
using testing_support::TempDir;
using testing_support::write_file;

namespace {

std::string line(const std::string& id, TimestampMs t) {
  return R"({"_id":")" + id + R"(","timestamp":)" + std::to_string(t) + R"(,"x":1})" + "\n";
}

StoreQuery range(const std::string& index, TimestampMs from, TimestampMs to) {
  StoreQuery q;
  q.index = index;
  q.time_from = from;
  q.time_to = to;
  return q;
}

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::InvalidArgument;
}

}  // namespace

TEST(DirectoryStore, FiltersAndOrders) {
  TempDir dir;
  write_file(dir.path() / "yaf" / "b.jsonl", line("e", 50) + line("c", 30));
  write_file(dir.path() / "yaf" / "a.jsonl", line("a", 10) + line("b", 20) + line("d", 40));
  write_file(dir.path() / "yaf" / "ignored.txt", "not json");
  auto b = query_store(DirectoryStore{dir.path()}, range("yaf", 20, 40), DataSourceKind::Yaf);
  ASSERT_EQ(b.size(), 2u);
  EXPECT_EQ(b.records[0].record_id, "b");
  EXPECT_EQ(b.records[1].record_id, "c");
}

TEST(DirectoryStore, Errors) {
  TempDir dir;
  EXPECT_EQ(code_of([&] { query_store(DirectoryStore{dir.path()}, range("yaf", 5, 5), DataSourceKind::Yaf); }),
            ErrorCode::InvalidArgument);
  EXPECT_EQ(code_of([&] { query_store(DirectoryStore{dir.path() / "nope"}, range("yaf", 0, 5), DataSourceKind::Yaf); }),
            ErrorCode::StoreUnreachable);
  EXPECT_EQ(code_of([&] { query_store(DirectoryStore{dir.path()}, range("yaf", 0, 5), DataSourceKind::Yaf); }),
            ErrorCode::IndexNotFound);
  write_file(dir.path() / "yaf" / "a.jsonl", line("a", 1) + "{broken\n");
  try {
    query_store(DirectoryStore{dir.path()}, range("yaf", 0, 5), DataSourceKind::Yaf);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MalformedLine);
    EXPECT_EQ(e.position(), 2u);
    EXPECT_NE(std::string(e.what()).find("a.jsonl"), std::string::npos);
  }
}

TEST(DirectoryStore, MatchesLinearScanOracle) {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    TempDir dir;
    std::multiset<std::pair<TimestampMs, std::string>> all;
    for (int f = 0; f < 3; ++f) {
      std::string text;
      for (int i = 0; i < 30; ++i) {
        const auto t = static_cast<TimestampMs>(rng.below(100));
        const std::string id = std::to_string(f) + "-" + std::to_string(i);
        all.insert({t, id});
        text += line(id, t);
      }
      write_file(dir.path() / "snort" / (std::to_string(f) + ".jsonl"), text);
    }
    const auto from = static_cast<TimestampMs>(rng.below(50));
    const auto to = from + 1 + static_cast<TimestampMs>(rng.below(50));
    std::vector<std::pair<TimestampMs, std::string>> expected;
    for (const auto& e : all) {
      if (e.first >= from && e.first < to) expected.push_back(e);
    }
    auto b = query_store(DirectoryStore{dir.path()}, range("snort", from, to), DataSourceKind::Snort);
    std::vector<std::pair<TimestampMs, std::string>> got;
    for (const auto& r : b.records) got.emplace_back(r.timestamp, r.record_id);
    EXPECT_EQ(got, expected);
  }
}

TEST(DirectoryStore, MaxRecordsTruncates) {
  TempDir dir;
  write_file(dir.path() / "yaf" / "a.jsonl", line("a", 1) + line("b", 2) + line("c", 3));
  auto q = range("yaf", 0, 10);
  q.page_size = 2;
  q.max_records = 2;
  auto b = query_store(DirectoryStore{dir.path()}, q, DataSourceKind::Yaf);
  ASSERT_EQ(b.size(), 2u);
  EXPECT_EQ(b.records[1].record_id, "b");
}

namespace {

// Serves `total` documents with timestamps 0..total-1 under index "yaf".
void install_search(httplib::Server& s, int total, std::atomic<int>& calls, std::string* auth = nullptr) {
  s.Post(R"(/([^/]+)/_search)", [c = &calls, total, auth](const httplib::Request& req, httplib::Response& res) {
    ++*c;
    if (auth) *auth = req.get_header_value("Authorization");
    if (req.matches[1] != "yaf") {
      res.status = 404;
      return;
    }
    auto body = nlohmann::json::parse(req.body);
    const int from = body["from"].get<int>();
    const int size = body["size"].get<int>();
    nlohmann::json hits = nlohmann::json::array();
    for (int i = from; i < std::min(total, from + size); ++i) {
      hits.push_back({{"_id", "doc" + std::to_string(1000 + i)}, {"_source", {{"timestamp", i}, {"x", i % 7}}}});
    }
    res.set_content(nlohmann::json{{"hits", hits}}.dump(), "application/json");
  });
}

}  // namespace

TEST(HttpStore, PagesUntilMaxRecords) {
  StubServer stub;
  std::atomic<int> calls{0};
  std::string auth;
  install_search(stub.server(), 300, calls, &auth);
  stub.start();
  auto q = range("yaf", 0, 1'000'000);
  q.page_size = 100;
  q.max_records = 250;
  auto b = query_store(HttpStore{stub.url(), "s3cret"}, q, DataSourceKind::Yaf);
  EXPECT_EQ(b.size(), 250u);
  EXPECT_EQ(calls.load(), 3);
  EXPECT_EQ(auth, "Bearer s3cret");
  EXPECT_EQ(b.records.front().record_id, "doc1000");
  EXPECT_EQ(b.records.back().timestamp, 249);
}

TEST(HttpStore, ExhaustsShortLastPage) {
  StubServer stub;
  std::atomic<int> calls{0};
  install_search(stub.server(), 230, calls);
  stub.start();
  auto q = range("yaf", 0, 1'000'000);
  q.page_size = 100;
  auto b = query_store(HttpStore{stub.url(), std::nullopt}, q, DataSourceKind::Yaf);
  EXPECT_EQ(b.size(), 230u);
  EXPECT_EQ(calls.load(), 3);
}

TEST(HttpStore, Errors) {
  StubServer stub;
  std::atomic<int> calls{0};
  install_search(stub.server(), 10, calls);
  stub.start();
  EXPECT_EQ(code_of([&] { query_store(HttpStore{stub.url(), {}}, range("nope", 0, 10), DataSourceKind::Yaf); }),
            ErrorCode::IndexNotFound);
  EXPECT_EQ(code_of([&] { query_store(HttpStore{"http://127.0.0.1:1", {}}, range("yaf", 0, 10), DataSourceKind::Yaf); }),
            ErrorCode::StoreUnreachable);
}

TEST(HttpStore, FailureAfterFirstPageIsPageFailure) {
  StubServer stub;
  int calls = 0;
  stub.server().Post("/yaf/_search", [&](const httplib::Request& req, httplib::Response& res) {
    if (++calls > 1) {
      res.status = 500;
      return;
    }
    auto body = nlohmann::json::parse(req.body);
    nlohmann::json hits = nlohmann::json::array();
    for (int i = 0; i < body["size"].get<int>(); ++i) hits.push_back({{"_id", std::to_string(i)}, {"_source", {{"timestamp", i}}}});
    res.set_content(nlohmann::json{{"hits", hits}}.dump(), "application/json");
  });
  stub.start();
  auto q = range("yaf", 0, 1000);
  q.page_size = 10;
  try {
    query_store(HttpStore{stub.url(), {}}, q, DataSourceKind::Yaf);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::PageFailure);
    EXPECT_EQ(e.position(), 10u);
  }
}

TEST(HttpStore, MalformedResponse) {
  StubServer stub;
  stub.server().Post("/yaf/_search", [](const httplib::Request&, httplib::Response& res) {
    res.set_content("{\"hits\": 3}", "application/json");
  });
  stub.start();
  EXPECT_EQ(code_of([&] { query_store(HttpStore{stub.url(), {}}, range("yaf", 0, 10), DataSourceKind::Yaf); }),
            ErrorCode::PageFailure);
}
