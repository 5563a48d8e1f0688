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

#include <cstdlib>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "sheetguard/cli.hpp"
#include "sheetguard/error.hpp"
#include "sheetguard/uri.hpp"
#include "sheetguard/util.hpp"
#include "sheetguard/workflow.hpp"
#include "xlsx_builder.hpp"

using namespace sheetguard;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::dispatch(args, out, err);
  return {code, out.str(), err.str()};
}

// Three linked workbooks: a <- b <- c, plus one spreadsheet with an error.
void make_tree(const fs::path& dir) {
  fs::create_directories(dir / "sub");
  testing::BookSpec a;
  a.sheet("Data").number(1, 1, 1).number(2, 1, 2);
  testing::write_xlsx(dir / "a.xlsx", a);
  testing::BookSpec b;
  b.sheet("Calc").formula(1, 1, "[1]Data!A1*2", CellValue::of_number(2));
  b.link_targets = {"a.xlsx"};
  testing::write_xlsx(dir / "b.xlsx", b);
  testing::BookSpec c;
  c.sheet("Report").formula(1, 1, "[1]Calc!A1+1", CellValue::of_number(3));
  c.link_targets = {"../b.xlsx"};
  testing::write_xlsx(dir / "sub" / "c.xlsx", c);
  testing::BookSpec bad;
  bad.sheet("S").error(1, 1, "#DIV/0!", "1/0");
  testing::write_xlsx(dir / "sub" / "bad.xlsx", bad);
}

}  // namespace

TEST_CASE("usage errors exit 2 with the synopsis") {
  const auto none = run({});
  CHECK(none.code == cli::kUsageError);
  CHECK(none.err.find("Usage:") != std::string::npos);
  const auto unknown = run({"frobnicate"});
  CHECK(unknown.code == cli::kUsageError);
  CHECK(unknown.err.find("Usage:") != std::string::npos);
  CHECK(unknown.out.empty());
  CHECK(run({"diff", "only-one.xlsx"}).code == cli::kUsageError);
  CHECK(run({"migrate", "plan", "--base-url", "http://x/", "--layout", "sideways", "."}).code ==
        cli::kUsageError);
  testing::TempDir t;
  make_tree(t.path());
  const auto a = (t.path() / "a.xlsx").string();
  CHECK(run({"diff", a, a, "--format", "yaml"}).code == cli::kUsageError);
}

TEST_CASE("every operation is reachable from the help tree") {
  struct Route {
    std::string operation;
    std::vector<std::string> path;
    std::string flag;  // must appear on the help page when set
  };
  const std::vector<Route> routes = {
      {"parse_a1, format_a1, normalize_formula, compute_stats", {"scan"}, ""},
      {"read_package", {"analyze"}, ""},
      {"list_link_targets", {"graph"}, ""},
      {"rewrite_links", {"migrate", "execute"}, ""},
      {"scan", {"scan"}, ""},
      {"parse_query, matches", {"scan"}, "--query"},
      {"export_inventory", {"scan"}, "--format"},
      {"import_inventory", {"graph"}, "--inventory"},
      {"diagnose, detect_inconsistent, score", {"analyze"}, "--config"},
      {"risk annotation", {"scan"}, "--rate"},
      {"build_graph", {"graph"}, ""},
      {"cycles", {"graph"}, "--cycles"},
      {"emit", {"graph"}, "--format"},
      {"plan_migration", {"migrate", "plan"}, "--layout"},
      {"remap_target, execute", {"migrate", "execute"}, "--dav"},
      {"diff_workbooks, align_rows", {"diff"}, ""},
      {"render_change_report", {"diff"}, "--format"},
      {"notify", {"diff"}, "--notify"},
      {"checkin", {"repo", "checkin"}, "--token"},
      {"get", {"repo", "get"}, "--version"},
      {"lock", {"repo", "lock"}, "--ttl"},
      {"unlock", {"repo", "unlock"}, ""},
      {"history", {"repo", "history"}, ""},
      {"apply_retention", {"repo", "retain"}, "--keep-last"},
      {"make_collection", {"repo", "mkcol"}, ""},
      {"list", {"repo", "ls"}, ""},
      {"audit trail", {"repo", "audit"}, ""},
      {"create_request", {"workflow", "create"}, "--reviewer"},
      {"transition: submit", {"workflow", "submit"}, ""},
      {"transition: start review", {"workflow", "review"}, ""},
      {"transition: approve", {"workflow", "approve"}, ""},
      {"transition: reject", {"workflow", "reject"}, ""},
      {"transition: rework", {"workflow", "rework"}, ""},
      {"transition: withdraw", {"workflow", "withdraw"}, ""},
      {"current_state", {"workflow", "show"}, ""},
      {"current_state (all)", {"workflow", "list"}, ""},
      {"verify_log", {"workflow", "verify"}, ""},
      {"handle_request", {"serve"}, "--bind"},
  };
  REQUIRE(run({"--help"}).code == cli::kOk);
  for (const auto& r : routes) {
    CAPTURE(r.operation);
    // Listed by its parent...
    std::vector<std::string> parent(r.path.begin(), r.path.end() - 1);
    parent.push_back("--help");
    const auto listing = run(parent);
    REQUIRE(listing.code == cli::kOk);
    CHECK(listing.out.find("  " + r.path.back() + " ") != std::string::npos);
    // ...and has its own help page.
    auto self = r.path;
    self.push_back("--help");
    const auto page = run(self);
    CHECK(page.code == cli::kOk);
    CHECK(page.out.find("Usage:") != std::string::npos);
    if (!r.flag.empty()) CHECK(page.out.find(r.flag) != std::string::npos);
  }
}

TEST_CASE("scan, graph and analyze") {
  testing::TempDir t;
  make_tree(t.path());
  const auto root = t.path().string();

  const auto scan = run({"scan", root, "--format", "json"});
  REQUIRE(scan.code == cli::kOk);
  const auto arr = json::parse(scan.out);
  REQUIRE(arr.is_array());
  CHECK(arr.size() == 4);
  CHECK(run({"scan", root, "--format", "json"}).out == scan.out);

  const auto linked = run({"scan", root, "--query", "external_link_count > 0"});
  REQUIRE(linked.code == cli::kOk);
  CHECK(json::parse(linked.out).size() == 2);
  const auto bad_query = run({"scan", root, "--query", "size_bytes >"});
  CHECK(bad_query.code == cli::kOperationalError);
  CHECK(bad_query.out.empty());

  const auto csv = run({"scan", root, "--format", "csv"});
  CHECK(csv.code == cli::kOk);
  CHECK(std::count(csv.out.begin(), csv.out.end(), '\n') == 5);

  const auto dot = run({"graph", root});
  REQUIRE(dot.code == cli::kOk);
  CHECK(dot.out.rfind("digraph", 0) == 0);
  const auto gj = run({"graph", root, "--format", "json"});
  REQUIRE(gj.code == cli::kOk);
  CHECK(json::parse(gj.out)["edges"].size() == 2);
  CHECK(run({"graph", root, "--format", "json"}).out == gj.out);

  CHECK(run({"graph", root, "--cycles"}).out.empty());
  testing::BookSpec y1, y2;
  y1.sheet("S").number(1, 1, 1);
  y1.link_targets = {"y2.xlsx"};
  y2.sheet("S").number(1, 1, 2);
  y2.link_targets = {"y1.xlsx"};
  testing::write_xlsx(t.path() / "loop" / "y1.xlsx", y1);
  testing::write_xlsx(t.path() / "loop" / "y2.xlsx", y2);
  const auto loop = uri::from_path(t.path() / "loop");
  CHECK(run({"graph", (t.path() / "loop").string(), "--cycles"}).out ==
        loop + "/y1.xlsx -> " + loop + "/y2.xlsx -> " + loop + "/y1.xlsx\n");

  const auto inv = t.path() / "inv.json";
  write_file_atomic(inv, scan.out);
  const auto from_inv = run({"graph", "--inventory", inv.string(), "--format", "json"});
  CHECK(from_inv.out == gj.out);

  const auto an = run({"analyze", (t.path() / "sub" / "bad.xlsx").string(), "--format", "json"});
  REQUIRE(an.code == cli::kOk);
  const auto report = json::parse(an.out);
  REQUIRE(report["findings"].size() >= 1);
  CHECK(report["findings"][0]["kind"] == "ErrorCell");
  const auto all = run({"analyze", inv.string(), "--format", "json"});
  REQUIRE(all.code == cli::kOk);
  CHECK(json::parse(all.out).size() == 4);
  CHECK(run({"analyze", (t.path() / "missing.xlsx").string()}).code == cli::kOperationalError);
}

TEST_CASE("diff of files and repository versions") {
  testing::TempDir t;
  make_tree(t.path());
  const auto a = (t.path() / "a.xlsx").string();
  const auto same = run({"diff", a, a});
  CHECK(same.code == cli::kOk);
  CHECK(same.out == "No changes.\n");

  testing::BookSpec a2;
  a2.sheet("Data").number(1, 1, 1).number(2, 1, 5);
  testing::write_xlsx(t.path() / "a2.xlsx", a2);
  const auto store = (t.path() / "store").string();
  REQUIRE(run({"--store", store, "repo", "checkin", "books/a.xlsx", a}).code == cli::kOk);
  REQUIRE(run({"--store", store, "repo", "checkin", "books/a.xlsx", (t.path() / "a2.xlsx").string()})
              .code == cli::kOk);
  const auto d = run({"--store", store, "diff", "books/a.xlsx@1", "books/a.xlsx@2"});
  REQUIRE(d.code == cli::kOk);
  CHECK(d.out.find("A2 value: 2 -> 5") != std::string::npos);
  const auto dj = run({"--store", store, "diff", "books/a.xlsx@1", "books/a.xlsx@2", "--format", "json"});
  CHECK(json::parse(dj.out)["cell_changes"].size() == 1);
  CHECK(run({"--store", store, "diff", "books/a.xlsx@1", "books/a.xlsx@9"}).code ==
        cli::kOperationalError);
}

TEST_CASE("repo subcommands") {
  testing::TempDir t;
  const auto store = (t.path() / "store").string();
  const auto f = t.path() / "f.bin";
  write_file_atomic(f, "hello");
  const auto g = [&](std::vector<std::string> args, const std::string& user = "alice") {
    args.insert(args.begin(), {"--store", store, "--user", user});
    return run(args);
  };
  const auto ci = g({"repo", "checkin", "docs/f.bin", f.string(), "-m", "first"});
  REQUIRE(ci.code == cli::kOk);
  CHECK(json::parse(ci.out)["version"] == 1);
  CHECK(json::parse(ci.out)["sha256"] == sha256_hex("hello"));
  CHECK(g({"repo", "get", "docs/f.bin"}).out == "hello");

  const auto lk = g({"repo", "lock", "docs/f.bin"});
  REQUIRE(lk.code == cli::kOk);
  const std::string token = json::parse(lk.out)["token"];
  const auto blocked = g({"repo", "checkin", "docs/f.bin", f.string()}, "bob");
  CHECK(blocked.code == cli::kOperationalError);
  CHECK(blocked.err.find("Locked") != std::string::npos);
  CHECK(g({"repo", "checkin", "docs/f.bin", f.string(), "--token", token}).code == cli::kOk);
  CHECK(g({"repo", "unlock", "docs/f.bin", token}).code == cli::kOperationalError);  // released by checkin

  const auto hist = g({"repo", "history", "docs/f.bin", "--format", "json"});
  REQUIRE(hist.code == cli::kOk);
  CHECK(json::parse(hist.out).size() == 2);
  CHECK(g({"repo", "retain", "--keep-last", "1"}).out == "docs/f.bin\t1\n");
  CHECK(g({"repo", "get", "docs/f.bin", "--version", "1"}).code == cli::kOperationalError);
  CHECK(g({"repo", "retain"}).code == cli::kUsageError);
  CHECK(g({"repo", "mkcol", "empty"}).code == cli::kOk);
  const auto ls = g({"repo", "ls"});
  CHECK(ls.out.find("docs/\t") != std::string::npos);
  CHECK(ls.out.find("empty/\t") != std::string::npos);
  const auto audit = g({"repo", "audit"});
  CHECK(audit.out.find("Purge") != std::string::npos);
}

TEST_CASE("workflow through the command line") {
  testing::TempDir t;
  const auto store = (t.path() / "store").string();
  const auto f1 = t.path() / "v1.bin";
  const auto f2 = t.path() / "v2.bin";
  write_file_atomic(f1, "one");
  write_file_atomic(f2, "two");
  const auto as = [&](const std::string& user, std::vector<std::string> args) {
    args.insert(args.begin(), {"--store", store, "--user", user, "workflow"});
    return run(args);
  };
  REQUIRE(run({"--store", store, "repo", "checkin", "m.xlsx", f1.string()}).code == cli::kOk);
  REQUIRE(run({"--store", store, "repo", "checkin", "m.xlsx", f2.string()}).code == cli::kOk);

  const auto cr = as("alice", {"create", "m.xlsx", "--base", "1", "--proposed", "2", "--reviewer", "bob"});
  REQUIRE(cr.code == cli::kOk);
  CHECK(json::parse(cr.out)["id"] == "CR-1");
  CHECK(as("alice", {"submit", "CR-1"}).code == cli::kOk);
  CHECK(as("bob", {"review", "CR-1"}).code == cli::kOk);
  const auto self = as("alice", {"approve", "CR-1"});
  CHECK(self.code == cli::kOperationalError);
  CHECK(self.err.find("SeparationOfDuties") != std::string::npos);
  const auto ok = as("bob", {"approve", "CR-1"});
  REQUIRE(ok.code == cli::kOk);
  CHECK(json::parse(ok.out)["state"] == "Approved");
  CHECK(as("bob", {"verify"}).out == "ok\n");
  CHECK(json::parse(as("bob", {"show", "CR-1"}).out)["state"] == "Approved");
  CHECK(as("bob", {"list"}).out == as("bob", {"list"}).out);

  const auto log = fs::path(store) / "workflow.jsonl";
  auto text = read_file(log);
  text[text.find("alice")] = 'A';
  write_file_atomic(log, text);
  const auto tampered = as("bob", {"verify"});
  CHECK(tampered.code == cli::kOperationalError);
  CHECK(tampered.out == "tampered at seq 1\n");
}

TEST_CASE("migrate plan and execute into a local store") {
  testing::TempDir t;
  make_tree(t.path() / "src");
  const auto root = (t.path() / "src").string();
  const auto store = (t.path() / "store").string();
  const auto plan_file = (t.path() / "plan.json").string();
  const auto plan = run({"migrate", "plan", root, "--all", "--base-url", "http://repo.example/books/",
                         "--layout", "tree", "-o", plan_file});
  REQUIRE(plan.code == cli::kOk);
  CHECK(plan.out.empty());
  CHECK(json::parse(read_file(plan_file))["entries"].size() == 4);
  const auto exec = run({"--store", store, "migrate", "execute", plan_file});
  REQUIRE(exec.code == cli::kOk);
  CHECK(std::count(exec.out.begin(), exec.out.end(), '\n') == 4);
  const auto c = run({"--store", store, "analyze", "--format", "json", plan_file});
  CHECK(c.code == cli::kOperationalError);  // a plan is not a workbook
  const auto ls = run({"--store", store, "repo", "ls", "sub"});
  CHECK(ls.out.find("sub/c.xlsx\t1\t") != std::string::npos);
}

TEST_CASE("config file and overrides") {
  testing::TempDir t;
  fs::create_directories(t.path() / "cfg");
  write_file_atomic(t.path() / "cfg" / "risk.json", R"({"complexity_thresholds": {"medium_at": 1, "high_at": 2}})");
  write_file_atomic(t.path() / "cfg" / "sheetguard.json",
                    R"({"store_root": "store", "risk_config": "risk.json", "outbox": "out",
                        "subscriptions": [{"user": "carol", "filter": "values"}]})");
  const auto cfg = cli::load_config(t.path() / "cfg" / "sheetguard.json");
  CHECK(cfg.store_root == t.path() / "cfg" / "store");
  CHECK(cfg.outbox == t.path() / "cfg" / "out");
  REQUIRE(cfg.risk_config);
  CHECK(cfg.subscriptions.size() == 1);

  write_file_atomic(t.path() / "broken.json", R"({"risk_config": "nope.json"})");
  CHECK_THROWS_AS(cli::load_config(t.path() / "broken.json"), sheetguard::Error);
  const auto bad = run({"--config", (t.path() / "broken.json").string(), "repo", "audit"});
  CHECK(bad.code == cli::kOperationalError);
  CHECK(bad.err.find("InvalidConfig") != std::string::npos);

  // The environment variable stands in for --config.
  testing::BookSpec b;
  b.sheet("S").number(1, 1, 1);
  testing::write_xlsx(t.path() / "x.xlsx", b);
  testing::BookSpec b2;
  b2.sheet("S").number(1, 1, 2);
  testing::write_xlsx(t.path() / "y.xlsx", b2);
  ::setenv("SHEETGUARD_CONFIG", (t.path() / "cfg" / "sheetguard.json").string().c_str(), 1);
  const auto d = run({"diff", (t.path() / "x.xlsx").string(), (t.path() / "y.xlsx").string(), "--notify"});
  ::unsetenv("SHEETGUARD_CONFIG");
  REQUIRE(d.code == cli::kOk);
  CHECK(d.err.find("notified:") != std::string::npos);
  CHECK(std::distance(fs::directory_iterator(t.path() / "cfg" / "out"), fs::directory_iterator{}) == 1);

  // Without a store anywhere, store commands fail operationally.
  const auto nostore = run({"repo", "audit"});
  CHECK(nostore.code == cli::kOperationalError);
}
