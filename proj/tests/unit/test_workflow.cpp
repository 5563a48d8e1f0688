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

#include <random>
#include <set>
#include <thread>

#include "doctest.h"
#include "sheetguard/error.hpp"
#include "sheetguard/repo.hpp"
#include "sheetguard/workflow.hpp"
#include "xlsx_builder.hpp"

using namespace sheetguard;
using namespace sheetguard::workflow;

namespace {

Timestamp at(int s) { return Timestamp{std::chrono::seconds{1'792'000'000 + s}}; }

struct Fixture {
  testing::TempDir dir;
  repo::Store store{dir.path() / "store", [] { return at(0); }};
  std::string v1 = "version one", v2 = "version two";

  Fixture() {
    store.checkin("fin/model.xlsx", v1, "alice", "");
    store.checkin("fin/model.xlsx", v2, "alice", "");
  }

  Workflow make(Options o = {false}) {
    auto tick = std::make_shared<int>(0);
    return Workflow(dir.path() / "wf" / "events.jsonl", store, [tick] { return at(++*tick); }, o);
  }

  CreateParams params(std::string id = "") {
    CreateParams p;
    p.id = std::move(id);
    p.resource_path = "fin/model.xlsx";
    p.requester = "alice";
    p.title = "Q3 update";
    p.description = "new rates\nline two";
    p.base_version = 1;
    p.proposed_version = 2;
    return p;
  }

  Signature sig(const std::string& who, Action a) const { return sign(who, v2, a, at(500)); }
};

// The legal table written out independently.
const std::set<std::tuple<State, Action, State>> kTable = {
    {State::Draft, Action::Submit, State::Submitted},
    {State::Submitted, Action::StartReview, State::InReview},
    {State::InReview, Action::Approve, State::Approved},
    {State::InReview, Action::Reject, State::Rejected},
    {State::Rejected, Action::Rework, State::Draft},
    {State::Draft, Action::Withdraw, State::Withdrawn},
    {State::Submitted, Action::Withdraw, State::Withdrawn},
    {State::InReview, Action::Withdraw, State::Withdrawn},
};

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::IoError;
}

}  // namespace

TEST_CASE("state table") {
  for (int s = 0; s < 6; ++s) {
    for (int a = 0; a < 7; ++a) {
      const auto from = static_cast<State>(s);
      const auto act = static_cast<Action>(a);
      std::optional<State> expect;
      for (const auto& [f, x, t] : kTable) {
        if (f == from && x == act) expect = t;
      }
      CHECK(next_state(from, act) == expect);
    }
  }
  CHECK(parse_action("startreview") == Action::StartReview);
  CHECK(parse_state("InReview") == State::InReview);
  CHECK_FALSE(parse_action("Merge"));
}

TEST_CASE("create_request") {
  Fixture fx;
  auto wf = fx.make();
  const auto cr = wf.create_request(fx.params());
  CHECK(cr.id == "CR-1");
  CHECK(cr.state == State::Draft);
  CHECK(wf.events().size() == 1);
  CHECK(wf.events()[0].seq == 1);

  CHECK(code_of([&] { wf.create_request(fx.params("CR-1")); }) == ErrorCode::DuplicateId);
  auto same = fx.params("X");
  same.proposed_version = 1;
  CHECK(code_of([&] { wf.create_request(same); }) == ErrorCode::NoChange);
  auto missing = fx.params("Y");
  missing.proposed_version = 99;
  CHECK(code_of([&] { wf.create_request(missing); }) == ErrorCode::UnknownVersion);
  auto nopath = fx.params("Z");
  nopath.resource_path = "fin/other.xlsx";
  CHECK(code_of([&] { wf.create_request(nopath); }) == ErrorCode::UnknownVersion);
  auto backwards = fx.params("W");
  backwards.base_version = 2;
  backwards.proposed_version = 1;
  CHECK(code_of([&] { wf.create_request(backwards); }) == ErrorCode::InvalidArgument);
  CHECK(wf.create_request(fx.params()).id == "CR-2");
  CHECK(wf.events().size() == 2);  // refused requests leave no trace
}

TEST_CASE("approval path with signatures") {
  Fixture fx;
  auto wf = fx.make();
  wf.create_request(fx.params());
  CHECK(wf.transition("CR-1", Action::Submit, "alice").state == State::Submitted);
  CHECK(code_of([&] { wf.transition("CR-1", Action::Approve, "bob", fx.sig("bob", Action::Approve)); }) ==
        ErrorCode::IllegalTransition);
  CHECK(wf.transition("CR-1", Action::StartReview, "bob").state == State::InReview);

  CHECK(code_of([&] { wf.transition("CR-1", Action::Approve, "alice", fx.sig("alice", Action::Approve)); }) ==
        ErrorCode::SeparationOfDuties);
  CHECK(code_of([&] { wf.transition("CR-1", Action::Approve, "bob"); }) == ErrorCode::MissingSignature);
  CHECK(code_of([&] { wf.transition("CR-1", Action::Approve, "bob", sign("bob", fx.v1, Action::Approve, at(1))); }) ==
        ErrorCode::BadSignature);
  CHECK(code_of([&] { wf.transition("CR-1", Action::Approve, "bob", fx.sig("carol", Action::Approve)); }) ==
        ErrorCode::BadSignature);
  CHECK(code_of([&] { wf.transition("CR-1", Action::Approve, "bob", fx.sig("bob", Action::Reject)); }) ==
        ErrorCode::BadSignature);
  CHECK(code_of([&] { wf.transition("CR-9", Action::Submit, "alice"); }) == ErrorCode::UnknownRequest);

  const auto done = wf.transition("CR-1", Action::Approve, "bob", fx.sig("bob", Action::Approve));
  CHECK(done.state == State::Approved);
  const auto last = wf.events().back();
  CHECK(last.payload.at("content_hash") == sha256_hex(fx.v2));
  CHECK(last.payload.at("statement") == "approved");
  CHECK(last.payload.at("signer") == "bob");

  const auto trail = fx.store.audit_log();
  REQUIRE_FALSE(trail.empty());
  CHECK(trail.back().action == repo::AuditAction::Annotate);
  CHECK(trail.back().actor == "bob");
  CHECK(trail.back().version == 2);

  for (int a = 0; a < 7; ++a) {
    CHECK(code_of([&] { wf.transition("CR-1", static_cast<Action>(a), "alice"); }) ==
          ErrorCode::IllegalTransition);
  }
}

TEST_CASE("rejection, rework and withdrawal") {
  Fixture fx;
  auto wf = fx.make();
  auto p = fx.params();
  p.reviewer = "rita";
  wf.create_request(p);
  CHECK(code_of([&] { wf.transition("CR-1", Action::Submit, "bob"); }) == ErrorCode::IllegalTransition);
  wf.transition("CR-1", Action::Submit, "alice");
  CHECK(code_of([&] { wf.transition("CR-1", Action::StartReview, "bob"); }) == ErrorCode::IllegalTransition);
  wf.transition("CR-1", Action::StartReview, "rita");
  CHECK(code_of([&] { wf.transition("CR-1", Action::Reject, "bob", fx.sig("bob", Action::Reject)); }) ==
        ErrorCode::IllegalTransition);
  CHECK(wf.transition("CR-1", Action::Reject, "rita", fx.sig("rita", Action::Reject)).state == State::Rejected);
  CHECK(code_of([&] { wf.transition("CR-1", Action::Withdraw, "alice"); }) == ErrorCode::IllegalTransition);
  CHECK(wf.transition("CR-1", Action::Rework, "alice").state == State::Draft);
  CHECK(code_of([&] { wf.transition("CR-1", Action::Withdraw, "rita"); }) == ErrorCode::IllegalTransition);
  CHECK(wf.transition("CR-1", Action::Withdraw, "alice").state == State::Withdrawn);
  CHECK(code_of([&] { wf.transition("CR-1", Action::Rework, "alice"); }) == ErrorCode::IllegalTransition);
}

TEST_CASE("replay") {
  Fixture fx;
  auto wf = fx.make();
  wf.create_request(fx.params());
  CHECK(current_state(wf.events_for("CR-1")) == State::Draft);
  wf.transition("CR-1", Action::Submit, "alice");
  wf.transition("CR-1", Action::StartReview, "bob");
  wf.transition("CR-1", Action::Approve, "bob", fx.sig("bob", Action::Approve));
  const auto evs = wf.events_for("CR-1");
  CHECK(current_state(evs) == State::Approved);
  CHECK(replay(evs) == wf.get("CR-1"));

  auto skipped = std::vector<TransitionEvent>{evs[0], evs[3]};  // Create, Approve
  CHECK(code_of([&] { current_state(skipped); }) == ErrorCode::CorruptLog);
  CHECK(code_of([&] { current_state({}); }) == ErrorCode::CorruptLog);
  auto unsigned_ = evs;
  unsigned_[3].payload.clear();
  CHECK(code_of([&] { current_state(unsigned_); }) == ErrorCode::CorruptLog);
}

TEST_CASE("canonical encoding is bit-exact") {
  TransitionEvent e;
  e.request_id = "CR-7";
  e.seq = 1;
  e.action = Action::Submit;
  e.actor = "alice";
  e.timestamp = *parse_timestamp("2026-10-15T09:30:00Z");
  e.payload = {{"b", "x\ny"}, {"a", "1\\2"}};
  seal(e, kGenesisHash);
  CHECK(e.payload_hash == sha256_hex("a=1\\\\2\nb=x\\ny"));
  CHECK(e.chain_hash == sha256_hex(std::string(64, '0') +
                                   "request_id=CR-7\nseq=1\naction=Submit\nactor=alice\n"
                                   "timestamp=2026-10-15T09:30:00Z\npayload_hash=" +
                                   e.payload_hash));
  CHECK(decode_event(encode_event(e)) == e);
}

TEST_CASE("verify_log") {
  Fixture fx;
  auto wf = fx.make();
  wf.create_request(fx.params());
  wf.transition("CR-1", Action::Submit, "alice");
  wf.transition("CR-1", Action::StartReview, "bob");
  wf.transition("CR-1", Action::Reject, "bob", fx.sig("bob", Action::Reject));
  wf.transition("CR-1", Action::Rework, "alice");
  const auto evs = wf.events();
  REQUIRE(evs.size() == 5);
  CHECK(verify_log(evs) == LogVerdict{});
  CHECK(verify_log({}) == LogVerdict{});
  CHECK(verify_log_text("") == LogVerdict{});

  auto bad = evs;
  bad[2].actor[0] ^= 1;
  CHECK(verify_log(bad) == LogVerdict{false, 3});

  // Appending a correctly chained event keeps the log valid.
  auto longer = evs;
  TransitionEvent extra;
  extra.request_id = "CR-1";
  extra.seq = 6;
  extra.action = Action::Withdraw;
  extra.actor = "alice";
  seal(extra, evs.back().chain_hash);
  longer.push_back(extra);
  CHECK(verify_log(longer).ok);

  // Every single-byte change anywhere in the file is caught on its line.
  const auto text = read_file(wf.log_path());
  CHECK(verify_log_text(text).ok);
  std::vector<std::size_t> line_of(text.size());
  std::int64_t line = 1;
  for (std::size_t i = 0; i < text.size(); ++i) {
    line_of[i] = static_cast<std::size_t>(line);
    if (text[i] == '\n') ++line;
  }
  std::mt19937 rng(5);
  for (std::size_t i = 0; i < text.size(); ++i) {
    auto t = text;
    t[i] = static_cast<char>(t[i] ^ (1 + rng() % 255));
    const auto v = verify_log_text(t);
    INFO("byte " << i);
    CHECK_FALSE(v.ok);
    // A broken newline merges or splits lines; it is reported at or next to its own line.
    if (text[i] != '\n') CHECK(v.first_bad_seq == static_cast<std::int64_t>(line_of[i]));
    else CHECK(v.first_bad_seq >= static_cast<std::int64_t>(line_of[i]));
  }
}

TEST_CASE("log persistence and tamper detection") {
  Fixture fx;
  {
    auto wf = fx.make();
    wf.create_request(fx.params());
    wf.transition("CR-1", Action::Submit, "alice");
  }
  auto again = fx.make();
  CHECK(again.get("CR-1").state == State::Submitted);
  CHECK(again.transition("CR-1", Action::StartReview, "bob").state == State::InReview);

  auto text = read_file(again.log_path());
  text[text.find("alice")] = 'A';
  write_file_atomic(again.log_path(), text);
  auto fresh = fx.make();
  CHECK(code_of([&] { fresh.get("CR-1"); }) == ErrorCode::CorruptLog);
  CHECK(code_of([&] { again.transition("CR-1", Action::Withdraw, "alice"); }) == ErrorCode::CorruptLog);
}

TEST_CASE("fuzzed transitions follow the table") {
  Fixture fx;
  auto wf = fx.make();
  std::mt19937 rng(99);
  const std::vector<std::string> actors = {"alice", "bob", "rita"};
  std::map<std::string, State> model;
  std::map<std::string, std::string> reviewer;
  int accepted = 0;
  for (int step = 0; step < 3000; ++step) {
    if (model.empty() || rng() % 10 == 0) {
      auto p = fx.params();
      p.requester = actors[rng() % 3];
      if (rng() % 2) p.reviewer = actors[rng() % 3];
      const auto cr = wf.create_request(p);
      model[cr.id] = State::Draft;
      reviewer[cr.id] = p.reviewer;
      continue;
    }
    auto it = model.begin();
    std::advance(it, rng() % model.size());
    const auto& id = it->first;
    const auto cr = wf.get(id);
    const auto action = static_cast<Action>(rng() % 7);
    const auto& actor = actors[rng() % 3];
    std::optional<Signature> sig;
    const bool decide = action == Action::Approve || action == Action::Reject;
    if (rng() % 4) sig = fx.sig(actor, decide && rng() % 5 ? action : Action::Approve);
    if (sig && rng() % 6 == 0) sig->content_hash = sha256_hex(fx.v1);

    std::optional<State> expect;
    for (const auto& [f, x, t] : kTable) {
      if (f == it->second && x == action) expect = t;
    }
    const bool own = action == Action::Submit || action == Action::Rework || action == Action::Withdraw;
    const bool assigned = action == Action::StartReview || decide;
    if (own && actor != cr.requester) expect.reset();
    if (assigned && !reviewer[id].empty() && actor != reviewer[id]) expect.reset();
    if (decide && (actor == cr.requester || !sig || sig->actor != actor ||
                   sig->content_hash != sha256_hex(fx.v2) ||
                   sig->statement != (action == Action::Approve ? "approved" : "rejected"))) {
      expect.reset();
    }
    try {
      const auto got = wf.transition(id, action, actor, sig);
      REQUIRE(expect);
      CHECK(got.state == *expect);
      it->second = got.state;
      ++accepted;
    } catch (const Error& e) {
      INFO(e.what());
      CHECK_FALSE(expect);
      CHECK(wf.get(id).state == it->second);
    }
  }
  CHECK(accepted > 100);
  CHECK(verify_log_text(read_file(wf.log_path())).ok);
  for (const auto& [id, st] : model) CHECK(current_state(wf.events_for(id)) == st);
}

TEST_CASE("concurrent writers share one log") {
  Fixture fx;
  constexpr int kThreads = 4, kEach = 15;
  std::vector<std::thread> threads;
  for (int t = 0; t < kThreads; ++t) {
    threads.emplace_back([&, t] {
      auto wf = fx.make();
      for (int i = 0; i < kEach; ++i) {
        const auto id = "T" + std::to_string(t) + "-" + std::to_string(i);
        wf.create_request(fx.params(id));
        wf.transition(id, Action::Submit, "alice");
      }
    });
  }
  for (auto& th : threads) th.join();
  auto wf = fx.make();
  const auto evs = wf.events();
  CHECK(evs.size() == kThreads * kEach * 2);
  CHECK(verify_log(evs).ok);
  for (const auto& cr : wf.requests()) CHECK(cr.state == State::Submitted);
}
