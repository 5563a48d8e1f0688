//
// Copyright 2026 The Sheetguard Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#include <atomic>
#include <map>
#include <mutex>
#include <set>
#include <thread>

#include "doctest.h"
#include "sheetguard/error.hpp"
#include "sheetguard/repo.hpp"
#include "xlsx_builder.hpp"

using namespace sheetguard;
using namespace sheetguard::repo;

namespace {

struct FakeClock {
  std::shared_ptr<std::atomic<std::int64_t>> secs =
      std::make_shared<std::atomic<std::int64_t>>(1'700'000'000);
  Clock clock() const {
    auto s = secs;
    return [s] { return Timestamp{std::chrono::seconds{s->load()}}; };
  }
  void advance(std::int64_t n) const { *secs += n; }
};

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::IoError;
}

}  // namespace

TEST_CASE("normalize_path") {
  CHECK(normalize_path("/a/b.xlsx") == "a/b.xlsx");
  CHECK(normalize_path("a/b/") == "a/b");
  CHECK(normalize_path("/") == "");
  for (const char* bad : {"a//b", "a/../b", "./a", "a\\b", "x.versions.jsonl"}) {
    CHECK(code_of([&] { normalize_path(bad); }) == ErrorCode::InvalidPath);
  }
}

TEST_CASE("checkin, lock and get") {
  testing::TempDir dir;
  FakeClock fc;
  Store s(dir.path(), fc.clock());

  const auto r1 = s.checkin("/f/m.xlsx", "B1", "alice", "first");
  CHECK(r1.version == 1);
  CHECK(r1.sha256 == sha256_hex("B1"));
  CHECK(s.is_collection("f"));

  const auto t = s.lock("/f/m.xlsx", "alice", 600);
  CHECK(t.token.size() == 32);
  CHECK(code_of([&] { s.checkin("/f/m.xlsx", "B2", "bob", ""); }) == ErrorCode::Locked);
  CHECK(code_of([&] { s.checkin("/f/m.xlsx", "B2", "bob", "", "0000"); }) == ErrorCode::Locked);
  CHECK(code_of([&] { s.lock("/f/m.xlsx", "bob", 60); }) == ErrorCode::Locked);

  const auto r2 = s.checkin("/f/m.xlsx", "B2", "alice", "second", t.token);
  CHECK(r2.version == 2);
  CHECK_FALSE(s.active_lock("/f/m.xlsx"));  // released by the checkin

  CHECK(s.get("/f/m.xlsx", 1) == "B1");
  CHECK(s.get("/f/m.xlsx") == "B2");
  CHECK(code_of([&] { s.get("/f/m.xlsx", 3); }) == ErrorCode::NotFound);
  CHECK(code_of([&] { s.get("/f/other.xlsx"); }) == ErrorCode::NotFound);
  CHECK(code_of([&] { s.history("/nope"); }) == ErrorCode::NotFound);

  const auto h = s.history("f/m.xlsx");
  REQUIRE(h.size() == 2);
  CHECK(h[0] == r1);
  CHECK(h[1] == r2);
}

TEST_CASE("lock expiry and unlock") {
  testing::TempDir dir;
  FakeClock fc;
  Store s(dir.path(), fc.clock());
  s.checkin("a.xlsx", "x", "alice", "");
  const auto t = s.lock("a.xlsx", "alice", 60);
  CHECK(code_of([&] { s.unlock("a.xlsx", "wrong"); }) == ErrorCode::BadToken);
  fc.advance(59);
  CHECK(s.active_lock("a.xlsx"));
  fc.advance(1);
  CHECK_FALSE(s.active_lock("a.xlsx"));
  CHECK(s.checkin("a.xlsx", "y", "bob", "").version == 2);

  const auto t2 = s.lock("a.xlsx", "bob", 60);
  CHECK(t2.token != t.token);
  s.unlock("a.xlsx", t2.token, "bob");
  CHECK(code_of([&] { s.unlock("a.xlsx", t2.token); }) == ErrorCode::BadToken);
  CHECK(code_of([&] { s.lock("a.xlsx", "bob", 0); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("paths and collections") {
  testing::TempDir dir;
  Store s(dir.path());
  s.checkin("r.xlsx", "x", "u", "");
  CHECK(code_of([&] { s.checkin("r.xlsx/inner.xlsx", "x", "u", ""); }) == ErrorCode::InvalidPath);
  CHECK(code_of([&] { s.checkin("/", "x", "u", ""); }) == ErrorCode::InvalidPath);
  s.make_collection("docs", "u");
  CHECK(code_of([&] { s.make_collection("docs"); }) == ErrorCode::InvalidPath);
  CHECK(code_of([&] { s.make_collection("r.xlsx"); }) == ErrorCode::InvalidPath);
  CHECK(code_of([&] { s.make_collection("x/y"); }) == ErrorCode::NotFound);
  CHECK(code_of([&] { s.checkin("docs", "x", "u", ""); }) == ErrorCode::InvalidPath);
  s.checkin("docs/a.xlsx", "abc", "u", "");

  const auto root = s.list("");
  REQUIRE(root.size() == 2);
  CHECK(root[0].path == "docs");
  CHECK(root[0].collection);
  CHECK(root[1].path == "r.xlsx");
  CHECK(root[1].version_count == 1);
  const auto docs = s.list("docs");
  REQUIRE(docs.size() == 1);
  CHECK(docs[0].size_bytes == 3);
  CHECK(docs[0].sha256 == sha256_hex("abc"));
  CHECK(s.all_resources() == std::vector<std::string>{"docs/a.xlsx", "r.xlsx"});
  CHECK_FALSE(s.stat("missing"));
}

TEST_CASE("retention") {
  testing::TempDir dir;
  FakeClock fc;
  Store s(dir.path(), fc.clock());
  for (int i = 1; i <= 5; ++i) {
    s.checkin("a.xlsx", "v" + std::to_string(i), "u", "");
    fc.advance(100);
  }
  s.checkin("b.xlsx", "v1", "u", "");  // shares content with a.xlsx@1

  CHECK(code_of([&] { s.apply_retention(RetentionPolicy::last(0)); }) == ErrorCode::InvalidPolicy);
  const auto purged = s.apply_retention(RetentionPolicy::last(2), "admin");
  CHECK(purged == std::vector<std::pair<std::string, int>>{
                      {"a.xlsx", 1}, {"a.xlsx", 2}, {"a.xlsx", 3}});
  CHECK(code_of([&] { s.get("a.xlsx", 1); }) == ErrorCode::GoneVersion);
  CHECK(s.get("a.xlsx", 4) == "v4");
  CHECK(s.get("b.xlsx") == "v1");  // object still referenced
  CHECK_FALSE(std::filesystem::exists(dir.path() / "objects" / sha256_hex("v2").substr(0, 2) /
                                      sha256_hex("v2")));
  CHECK(s.history("a.xlsx").size() == 5);

  // Newer-than keeps the latest version even when it is old.
  fc.advance(10'000);
  const auto p2 = s.apply_retention(RetentionPolicy::newer(fc.clock()()));
  CHECK(p2 == std::vector<std::pair<std::string, int>>{{"a.xlsx", 4}});
  CHECK(s.get("a.xlsx") == "v5");
  CHECK(s.apply_retention(RetentionPolicy::last(1)).empty());
}

TEST_CASE("audit trail records every mutation") {
  testing::TempDir dir;
  Store s(dir.path());
  s.make_collection("c", "u");
  const auto t = s.lock("c/x.xlsx", "u", 60);
  s.checkin("c/x.xlsx", "1", "u", "", t.token);
  s.checkin("c/x.xlsx", "2", "u", "");
  s.get("c/x.xlsx", 1, "reader");
  const auto t2 = s.lock("c/x.xlsx", "u", 60);
  s.unlock("c/x.xlsx", t2.token, "u");
  s.annotate("c/x.xlsx", 2, "u", "approved");
  s.apply_retention(RetentionPolicy::last(1), "admin");
  // Failed operations leave no trace.
  CHECK_THROWS(s.checkin("c", "x", "u", ""));
  CHECK_THROWS(s.unlock("c/x.xlsx", "bad"));

  std::vector<AuditAction> actions;
  for (const auto& e : s.audit_log()) actions.push_back(e.action);
  using A = AuditAction;
  CHECK(actions == std::vector<A>{A::MakeCollection, A::CheckOut, A::CheckIn, A::CheckIn, A::Read,
                                  A::CheckOut, A::Unlock, A::Annotate, A::Purge});
  const auto log = s.audit_log();
  CHECK(log[4].actor == "reader");
  CHECK(log[4].version == 1);
  CHECK(log.back().seq == 9);
}

TEST_CASE("concurrent writers get contiguous versions") {
  testing::TempDir dir;
  Store s(dir.path());
  constexpr int kWriters = 8, kEach = 25;
  std::vector<std::thread> threads;
  std::mutex mu;
  std::map<int, std::string> content;
  for (int w = 0; w < kWriters; ++w) {
    threads.emplace_back([&, w] {
      Store mine(dir.path());  // separate instance, as another process would have
      for (int i = 0; i < kEach; ++i) {
        const auto body = "w" + std::to_string(w) + "-" + std::to_string(i);
        const auto r = mine.checkin("shared.xlsx", body, "w" + std::to_string(w), "");
        std::lock_guard<std::mutex> lk(mu);
        content[r.version] = body;
      }
    });
  }
  for (auto& t : threads) t.join();
  const auto h = s.history("shared.xlsx");
  REQUIRE(h.size() == kWriters * kEach);
  REQUIRE(content.size() == h.size());
  for (int v = 1; v <= kWriters * kEach; ++v) {
    CHECK(h[v - 1].version == v);
    CHECK(sha256_hex(s.get("shared.xlsx", v)) == h[v - 1].sha256);
    CHECK(content[v] == s.get("shared.xlsx", v));
  }
}

TEST_CASE("lock exclusivity under contention") {
  testing::TempDir dir;
  Store s(dir.path());
  s.checkin("l.xlsx", "x", "u", "");
  std::atomic<int> holders{0}, max_holders{0}, acquired{0};
  std::vector<std::thread> threads;
  for (int w = 0; w < 6; ++w) {
    threads.emplace_back([&, w] {
      Store mine(dir.path());
      for (int i = 0; i < 20; ++i) {
        try {
          const auto t = mine.lock("l.xlsx", "w" + std::to_string(w), 60);
          const int now = ++holders;
          int prev = max_holders.load();
          while (now > prev && !max_holders.compare_exchange_weak(prev, now)) {
          }
          ++acquired;
          std::this_thread::yield();
          --holders;
          mine.unlock("l.xlsx", t.token);
        } catch (const Error& e) {
          CHECK(e.code() == ErrorCode::Locked);
        }
      }
    });
  }
  for (auto& t : threads) t.join();
  CHECK(max_holders.load() == 1);
  CHECK(acquired.load() >= 1);
}
