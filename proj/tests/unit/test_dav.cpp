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

#include <set>
#include <thread>

#include "doctest.h"
#include "sheetguard/dav.hpp"
#include "sheetguard/error.hpp"
#include "sheetguard/xml.hpp"
#include "xlsx_builder.hpp"

using namespace sheetguard;
using namespace sheetguard::dav;

namespace {

struct Fixture {
  testing::TempDir dir;
  repo::Store store{dir.path() / "store"};

  DavResponse req(std::string_view method, std::string_view target, Headers h = {},
                  std::string_view body = {}, std::string_view user = "alice") {
    return handle_request(store, method, target, h, body, user);
  }
};

std::vector<const xml::Element*> responses(const DavResponse& r) {
  const auto root = xml::parse(r.body, "multistatus");
  static std::vector<xml::Element> keep;
  keep.push_back(root);
  return keep.back().children_named("response");
}

std::string prop_text(const xml::Element& response, std::string_view name) {
  for (const auto* ps : response.children_named("propstat")) {
    if (ps->child("status")->text.find("200") == std::string::npos) continue;
    if (const auto* p = ps->child("prop")->child(name)) return p->deep_text();
  }
  return "<absent>";
}

}  // namespace

TEST_CASE("base64 helpers") {
  for (const std::string s : {"", "f", "fo", "foo", "foob", "alice:secret"}) {
    CHECK(base64_decode(base64_encode(s)) == s);
  }
  CHECK(base64_encode("alice:secret") == "YWxpY2U6c2VjcmV0");
  CHECK_FALSE(base64_decode("abc"));
}

TEST_CASE("OPTIONS and unsupported methods") {
  Fixture fx;
  const auto r = fx.req("OPTIONS", "/");
  CHECK(r.status == 200);
  CHECK(r.header("DAV") == "1,2");
  CHECK(r.header("Allow")->find("PROPFIND") != std::string::npos);
  for (const auto* m : {"DELETE", "PROPPATCH", "COPY", "MOVE", "PATCH"}) {
    const auto x = fx.req(m, "/a.xlsx");
    CHECK(x.status == 405);
    CHECK(x.header("Allow"));
  }
}

TEST_CASE("PUT and GET") {
  Fixture fx;
  const std::string v1("PK\x03\x04 first\0bytes", 18), v2 = "second";
  auto r = fx.req("PUT", "/fin/q%203.xlsx", {}, v1);
  CHECK(r.status == 201);
  CHECK(r.header(kVersionHeader) == "1");
  r = fx.req("PUT", "/fin/q%203.xlsx", {}, v2);
  CHECK(r.status == 204);
  CHECK(r.header(kVersionHeader) == "2");
  CHECK(fx.store.history("fin/q 3.xlsx").size() == 2);

  r = fx.req("GET", "/fin/q%203.xlsx");
  CHECK(r.status == 200);
  CHECK(r.body == v2);
  CHECK(r.header("Content-Type") == "application/vnd.openxmlformats-officedocument.spreadsheetml.sheet");
  CHECK(r.header("ETag") == "\"" + sha256_hex(v2) + "\"");
  r = fx.req("GET", "/fin/q%203.xlsx?version=1");
  CHECK(r.status == 200);
  CHECK(r.body == v1);
  CHECK(r.header(kVersionHeader) == "1");
  CHECK(fx.req("GET", "/fin/q%203.xlsx?version=3").status == 404);
  CHECK(fx.req("GET", "/fin/q%203.xlsx?version=x").status == 400);
  CHECK(fx.req("GET", "/fin/none.xlsx").status == 404);
  CHECK(fx.req("GET", "/fin/").status == 405);
  CHECK(fx.req("GET", "/fin/../etc/passwd").status == 400);

  r = fx.req("HEAD", "/fin/q%203.xlsx");
  CHECK(r.status == 200);
  CHECK(r.body.empty());
  CHECK(r.header("Content-Length") == std::to_string(v2.size()));

  CHECK(fx.req("PUT", "/fin", {}, "x").status == 405);
  CHECK(fx.req("PUT", "/fin/q%203.xlsx/inner", {}, "x").status == 409);

  fx.store.apply_retention(repo::RetentionPolicy::last(1));
  CHECK(fx.req("GET", "/fin/q%203.xlsx?version=1").status == 404);
}

TEST_CASE("MKCOL") {
  Fixture fx;
  CHECK(fx.req("MKCOL", "/reports").status == 201);
  CHECK(fx.req("MKCOL", "/reports").status == 405);
  CHECK(fx.req("MKCOL", "/missing/child").status == 409);
  CHECK(fx.req("MKCOL", "/reports/2026", {}, "<x/>").status == 415);
  fx.req("PUT", "/reports/a.xlsx", {}, "a");
  CHECK(fx.req("MKCOL", "/reports/a.xlsx").status == 405);
  CHECK(fx.store.is_collection("reports"));
}

TEST_CASE("PROPFIND") {
  Fixture fx;
  fx.req("PUT", "/dir/a.xlsx", {}, "aaa");
  fx.req("PUT", "/dir/a.xlsx", {}, "aaaa");
  fx.req("PUT", "/dir/b.xlsx", {}, "b");

  auto r = fx.req("PROPFIND", "/dir/a.xlsx", {{"Depth", "0"}});
  CHECK(r.status == 207);
  auto rs = responses(r);
  REQUIRE(rs.size() == 1);
  CHECK(rs[0]->child("href")->text == "/dir/a.xlsx");
  CHECK(prop_text(*rs[0], "displayname") == "a.xlsx");
  CHECK(prop_text(*rs[0], "getcontentlength") == "4");
  CHECK(prop_text(*rs[0], "version-count") == "2");
  CHECK(prop_text(*rs[0], "sha256") == sha256_hex("aaaa"));
  CHECK(prop_text(*rs[0], "getlastmodified").find("GMT") != std::string::npos);
  CHECK(r.body.find("xmlns:S=\"urn:sheetguard:props\"") != std::string::npos);

  r = fx.req("PROPFIND", "/dir/", {{"Depth", "1"}});
  CHECK(r.status == 207);
  rs = responses(r);
  REQUIRE(rs.size() == 3);
  CHECK(rs[0]->child("href")->text == "/dir/");
  CHECK(rs[0]->children_named("propstat")[0]->child("prop")->child("resourcetype")->child("collection"));
  CHECK(rs[1]->child("href")->text == "/dir/a.xlsx");
  CHECK(rs[2]->child("href")->text == "/dir/b.xlsx");

  r = fx.req("PROPFIND", "/", {{"Depth", "1"}});
  CHECK(r.status == 207);
  CHECK(responses(r).size() == 2);

  CHECK(fx.req("PROPFIND", "/dir/", {}).status == 403);
  CHECK(fx.req("PROPFIND", "/dir/", {{"Depth", "infinity"}}).status == 403);
  CHECK(fx.req("PROPFIND", "/nowhere", {{"Depth", "0"}}).status == 404);
  CHECK(fx.req("PROPFIND", "/dir/", {{"Depth", "0"}}, "<not-xml").status == 400);

  const std::string ask =
      "<?xml version=\"1.0\"?><propfind xmlns=\"DAV:\" xmlns:z=\"urn:other\">"
      "<prop><getcontentlength/><z:colour/><version-count xmlns=\"urn:sheetguard:props\"/></prop></propfind>";
  r = fx.req("PROPFIND", "/dir/b.xlsx", {{"Depth", "0"}}, ask);
  CHECK(r.status == 207);
  rs = responses(r);
  REQUIRE(rs.size() == 1);
  const auto stats = rs[0]->children_named("propstat");
  REQUIRE(stats.size() == 2);
  CHECK(stats[0]->child("prop")->children.size() == 2);
  CHECK(stats[1]->child("prop")->child("colour"));
  CHECK(stats[1]->child("status")->text.find("404") != std::string::npos);
  CHECK(r.body.find("displayname") == std::string::npos);

  r = fx.req("PROPFIND", "/dir/b.xlsx", {{"Depth", "0"}},
             "<D:propfind xmlns:D=\"DAV:\"><D:propname/></D:propfind>");
  CHECK(r.status == 207);
  CHECK(r.body.find("<D:getcontentlength/>") != std::string::npos);
}

TEST_CASE("LOCK, PUT and UNLOCK") {
  Fixture fx;
  fx.req("PUT", "/m.xlsx", {}, "v1");
  const std::string info =
      "<?xml version=\"1.0\"?><D:lockinfo xmlns:D=\"DAV:\"><D:lockscope><D:exclusive/></D:lockscope>"
      "<D:locktype><D:write/></D:locktype><D:owner>alice</D:owner></D:lockinfo>";
  auto r = fx.req("LOCK", "/m.xlsx", {{"Timeout", "Second-600"}}, info, "alice");
  CHECK(r.status == 200);
  const auto lt = r.header("Lock-Token");
  REQUIRE(lt);
  CHECK(lt->rfind("<opaquelocktoken:", 0) == 0);
  const auto token = lt->substr(17, lt->size() - 18);
  CHECK(r.body.find("Second-600") != std::string::npos);
  CHECK(fx.store.active_lock("m.xlsx")->token == token);

  CHECK(fx.req("LOCK", "/m.xlsx", {}, info, "bob").status == 423);
  CHECK(fx.req("PUT", "/m.xlsx", {}, "bob's", "bob").status == 423);
  CHECK(fx.req("PUT", "/m.xlsx", {{"If", "(<opaquelocktoken:0000>)"}}, "bad", "bob").status == 423);

  const Headers with_token = {{"If", "</m.xlsx> (<opaquelocktoken:" + token + ">)"}};
  CHECK(fx.req("PUT", "/m.xlsx", with_token, "v2").status == 204);
  CHECK(fx.req("PUT", "/m.xlsx", with_token, "v3").status == 204);  // lock survives saves
  CHECK(fx.store.active_lock("m.xlsx"));
  CHECK(fx.req("GET", "/m.xlsx").body == "v3");

  r = fx.req("PROPFIND", "/m.xlsx", {{"Depth", "0"}});
  CHECK(r.body.find(token) != std::string::npos);

  r = fx.req("LOCK", "/m.xlsx", with_token, "");
  CHECK(r.status == 200);
  CHECK_FALSE(r.header("Lock-Token"));
  CHECK(fx.req("LOCK", "/m.xlsx", {}, "").status == 412);

  CHECK(fx.req("UNLOCK", "/m.xlsx", {{"Lock-Token", "<opaquelocktoken:ffff>"}}).status == 403);
  CHECK(fx.req("UNLOCK", "/m.xlsx", {}).status == 400);
  CHECK(fx.req("UNLOCK", "/m.xlsx", {{"Lock-Token", *lt}}).status == 204);
  CHECK_FALSE(fx.store.active_lock("m.xlsx"));
  CHECK(fx.req("PUT", "/m.xlsx", {}, "bob's", "bob").status == 204);
  CHECK(fx.req("UNLOCK", "/m.xlsx", {{"Lock-Token", *lt}}).status == 403);

  // Locking a path that does not exist yet reserves it.
  CHECK(fx.req("LOCK", "/new.xlsx", {}, info, "alice").status == 200);
  CHECK(fx.req("PUT", "/new.xlsx", {}, "x", "bob").status == 423);
  CHECK(fx.req("LOCK", "/m.xlsx", {}, "<D:lockinfo xmlns:D=\"DAV:\"><D:lockscope><D:shared/></D:lockscope></D:lockinfo>")
            .status == 412);
}

TEST_CASE("server config and authentication") {
  const auto cfg = parse_server_config(R"({
    "bind": "127.0.0.1:0",
    "store_root": "store",
    "users": {"alice": {"password": "secret"},
              "bob": {"password_sha256": "2BB80D537B1DA3E38BD30361AA855686BDE0EACD7162FEF6A25FE97BF527A25B"}},
    "lock_timeout_seconds": 120,
    "outbox": "ignored"
  })", "/srv");
  CHECK(cfg.host == "127.0.0.1");
  CHECK(cfg.port == 0);
  CHECK(cfg.store_root == "/srv/store");
  CHECK(cfg.handler.default_lock_seconds == 120);
  CHECK(authenticate(cfg, basic_auth("alice", "secret")) == "alice");
  CHECK(authenticate(cfg, basic_auth("bob", "secret")) == "bob");
  CHECK_FALSE(authenticate(cfg, basic_auth("alice", "wrong")));
  CHECK_FALSE(authenticate(cfg, basic_auth("carol", "secret")));
  CHECK_FALSE(authenticate(cfg, std::nullopt));
  CHECK_FALSE(authenticate(cfg, std::string("Bearer abc")));
  CHECK_FALSE(authenticate(cfg, std::string("Basic !!!!")));

  for (const auto* bad : {"[]", "{}", R"({"store_root":"s"})", R"({"store_root":"s","users":{}})",
                          R"({"store_root":"s","users":{"a":{}}})",
                          R"({"store_root":"s","users":{"a":{"password":"x"}},"bind":"nohost"})",
                          R"({"store_root":"s","users":{"a":{"password_sha256":"abc"}}})", "{"}) {
    CHECK_THROWS_WITH_AS(parse_server_config(bad), doctest::Contains("InvalidConfig"), Error);
  }
}

TEST_CASE("live server") {
  testing::TempDir dir;
  repo::Store store(dir.path() / "store");
  ServerConfig cfg;
  cfg.port = 0;
  cfg.users = {{"alice", sha256_hex("pw")}, {"bob", sha256_hex("pw2")}};
  Server server(cfg, store);
  server.start();
  const auto base = server.base_url();
  const Headers alice = {{"Authorization", basic_auth("alice", "pw")}};
  const Headers bob = {{"Authorization", basic_auth("bob", "pw2")}};

  auto r = http_request("OPTIONS", base + "/");
  CHECK(r.status == 401);
  CHECK(r.header("WWW-Authenticate"));
  CHECK(http_request("OPTIONS", base + "/", {{"Authorization", basic_auth("alice", "nope")}}).status == 401);
  r = http_request("OPTIONS", base + "/", alice);
  CHECK(r.status == 200);
  CHECK(r.header("DAV") == "1,2");

  std::string payload(300'000, '\0');
  for (std::size_t i = 0; i < payload.size(); ++i) payload[i] = static_cast<char>(i * 7);
  CHECK(http_request("PUT", base + "/big%20file.xlsx", alice, payload).status == 201);
  r = http_request("GET", base + "/big%20file.xlsx", alice);
  CHECK(r.status == 200);
  CHECK(r.body == payload);
  r = http_request("HEAD", base + "/big%20file.xlsx", alice);
  CHECK(r.status == 200);
  CHECK(r.body.empty());
  CHECK(r.header("Content-Length") == std::to_string(payload.size()));
  CHECK(http_request("PROPFIND", base + "/", {alice[0], {"Depth", "1"}}).status == 207);
  CHECK(store.audit_log().back().actor == "alice");

  // Writers on one path: every 2xx PUT adds exactly one version.
  constexpr int kThreads = 4, kEach = 10;
  std::vector<std::thread> threads;
  std::mutex mu;
  std::set<int> versions;
  for (int t = 0; t < kThreads; ++t) {
    threads.emplace_back([&, t] {
      for (int i = 0; i < kEach; ++i) {
        const auto res = http_request("PUT", base + "/shared.xlsx", t % 2 ? alice : bob,
                                      "w" + std::to_string(t) + "-" + std::to_string(i));
        std::lock_guard lock(mu);
        versions.insert(std::stoi(*res.header(kVersionHeader)));
      }
    });
  }
  for (auto& th : threads) th.join();
  CHECK(versions.size() == kThreads * kEach);
  CHECK(*versions.rbegin() == kThreads * kEach);
  const auto hist = store.history("shared.xlsx");
  CHECK(hist.size() == kThreads * kEach);
  CHECK(sha256_hex(http_request("GET", base + "/shared.xlsx", alice).body) == hist.back().sha256);

  DavRepository client(base + "/", "alice", "pw");
  client.ping();
  CHECK(client.checkin("migrated/a b.xlsx", "bytes", "from migration") == 1);
  CHECK(client.checkin("migrated/a b.xlsx", "bytes2", "again") == 2);
  CHECK(store.history("migrated/a b.xlsx")[0].comment == "from migration");
  DavRepository wrong(base, "alice", "bad");
  CHECK_THROWS_WITH_AS(wrong.ping(), doctest::Contains("RepositoryUnreachable"), Error);

  server.stop();
  CHECK_THROWS_WITH_AS(client.ping(), doctest::Contains("RepositoryUnreachable"), Error);
}
