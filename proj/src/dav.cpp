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

#include "sheetguard/dav.hpp"

#include <openssl/crypto.h>
#include <sys/socket.h>
#include <sys/time.h>

#include <algorithm>
#include <boost/asio/signal_set.hpp>
#include <boost/asio/strand.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <charconv>
#include <mutex>
#include <thread>
#include <tuple>

#include "json.hpp"
#include "sheetguard/error.hpp"
#include "sheetguard/uri.hpp"
#include "sheetguard/xml.hpp"

namespace sheetguard::dav {

namespace beast = boost::beast;
namespace http = beast::http;
namespace net = boost::asio;
using tcp = net::ip::tcp;
using nlohmann::json;

namespace {

constexpr std::string_view kAllow = "OPTIONS, GET, HEAD, PUT, MKCOL, PROPFIND, LOCK, UNLOCK";
constexpr std::string_view kXmlType = "application/xml; charset=utf-8";
constexpr std::string_view kDavNs = "DAV:";

std::string_view sv(beast::string_view s) { return {s.data(), s.size()}; }

DavResponse plain(int status, std::string body = {}) {
  DavResponse r;
  r.status = status;
  if (!body.empty()) {
    r.headers.emplace_back("Content-Type", "text/plain; charset=utf-8");
    r.body = std::move(body) + "\n";
  }
  return r;
}

std::string status_line(int status) {
  return "HTTP/1.1 " + std::to_string(status) + " " +
         std::string(http::obsolete_reason(http::int_to_status(static_cast<unsigned>(status))));
}

std::optional<long long> parse_int(std::string_view s) {
  long long v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) return std::nullopt;
  return v;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

struct Target {
  std::string path;  // decoded, not yet normalized
  std::optional<std::string> version;
};

Target parse_target(std::string_view raw) {
  if (raw.substr(0, 7) == "http://" || raw.substr(0, 8) == "https://") {
    const auto slash = raw.find('/', raw.find("//") + 2);
    raw = slash == std::string_view::npos ? std::string_view("/") : raw.substr(slash);
  }
  Target t;
  const auto q = raw.find('?');
  t.path = uri::percent_decode(raw.substr(0, q));
  if (q != std::string_view::npos) {
    for (const auto& kv : split(raw.substr(q + 1), '&')) {
      const auto eq = kv.find('=');
      if (eq != std::string::npos && kv.substr(0, eq) == "version") t.version = kv.substr(eq + 1);
    }
  }
  return t;
}

std::string href_for(const std::string& path, bool collection) {
  std::string h = "/" + uri::percent_encode_path(path);
  if (collection && !path.empty()) h += '/';
  return h;
}

std::string content_type(std::string_view path) {
  const auto lower = to_lower(path);
  const auto ends = [&](std::string_view ext) {
    return lower.size() >= ext.size() && lower.compare(lower.size() - ext.size(), ext.size(), ext) == 0;
  };
  if (ends(".xlsx")) return "application/vnd.openxmlformats-officedocument.spreadsheetml.sheet";
  if (ends(".xlsm")) return "application/vnd.ms-excel.sheet.macroEnabled.12";
  if (ends(".xls")) return "application/vnd.ms-excel";
  if (ends(".csv")) return "text/csv";
  return "application/octet-stream";
}

std::string strip_scheme(std::string s) {
  if (s.rfind(kLockTokenScheme, 0) == 0) s.erase(0, kLockTokenScheme.size());
  return s;
}

// State tokens from an If header: every <...> inside a parenthesized list.
std::vector<std::string> if_tokens(const Headers& headers) {
  std::vector<std::string> out;
  const auto v = find_header(headers, "If");
  if (!v) return out;
  int depth = 0;
  for (std::size_t i = 0; i < v->size(); ++i) {
    const char c = (*v)[i];
    if (c == '(') ++depth;
    if (c == ')') depth = std::max(0, depth - 1);
    if (c == '<' && depth > 0) {
      const auto end = v->find('>', i);
      if (end == std::string::npos) break;
      out.push_back(strip_scheme(v->substr(i + 1, end - i - 1)));
      i = end;
    }
  }
  return out;
}

std::optional<std::string> lock_token_header(const Headers& headers) {
  auto v = find_header(headers, "Lock-Token");
  if (!v) return std::nullopt;
  auto s = trim(*v);
  if (s.size() >= 2 && s.front() == '<' && s.back() == '>') s = s.substr(1, s.size() - 2);
  if (s.empty()) return std::nullopt;
  return strip_scheme(s);
}

std::string lock_xml(const repo::LockToken& lk, Timestamp now) {
  const auto left = std::max<std::int64_t>(
      0, std::chrono::duration_cast<std::chrono::seconds>(lk.expires() - now).count());
  return "<D:activelock><D:locktype><D:write/></D:locktype><D:lockscope><D:exclusive/></D:lockscope>"
         "<D:depth>0</D:depth><D:owner>" + xml::escape(lk.owner) + "</D:owner>"
         "<D:timeout>Second-" + std::to_string(left) + "</D:timeout>"
         "<D:locktoken><D:href>" + std::string(kLockTokenScheme) + lk.token + "</D:href></D:locktoken>"
         "<D:lockroot><D:href>" + xml::escape(href_for(lk.path, false)) + "</D:href></D:lockroot>"
         "</D:activelock>";
}

// ---------------------------------------------------------------------------
// PROPFIND

struct PropName {
  std::string ns, local;
};

enum class PropMode { All, Names, Some };

struct PropRequest {
  PropMode mode = PropMode::All;
  std::vector<PropName> props;
};

using Scope = std::vector<std::pair<std::string, std::string>>;

std::string resolve_ns(const xml::Element& e, const Scope& scope) {
  const auto colon = e.qname.find(':');
  const std::string prefix = colon == std::string::npos ? "" : e.qname.substr(0, colon);
  for (auto it = scope.rbegin(); it != scope.rend(); ++it) {
    if (it->first == prefix) return it->second;
  }
  return {};
}

Scope extend(Scope scope, const xml::Element& e) {
  scope.insert(scope.end(), e.namespace_decls.begin(), e.namespace_decls.end());
  return scope;
}

// Throws CorruptPart for malformed XML, InvalidArgument for a non-propfind body.
PropRequest parse_propfind(std::string_view body) {
  PropRequest req;
  if (trim(body).empty()) return req;
  const auto root = xml::parse(body, "PROPFIND body");
  const auto scope = extend({}, root);
  if (root.name != "propfind" || resolve_ns(root, scope) != kDavNs) {
    throw Error(ErrorCode::InvalidArgument, "expected DAV:propfind");
  }
  for (const auto& c : root.children) {
    const auto cscope = extend(scope, c);
    if (resolve_ns(c, cscope) != kDavNs) continue;
    if (c.name == "propname") req.mode = PropMode::Names;
    if (c.name == "prop") {
      req.mode = PropMode::Some;
      for (const auto& p : c.children) req.props.push_back({resolve_ns(p, extend(cscope, p)), p.name});
    }
  }
  return req;
}

const std::vector<PropName>& known_props(bool collection) {
  static const std::vector<PropName> resource = {
      {"DAV:", "displayname"},   {"DAV:", "resourcetype"},  {"DAV:", "getcontentlength"},
      {"DAV:", "getlastmodified"}, {"DAV:", "getcontenttype"}, {"DAV:", "getetag"},
      {"DAV:", "supportedlock"}, {"DAV:", "lockdiscovery"},
      {std::string(kPropNamespace), "version-count"}, {std::string(kPropNamespace), "sha256"}};
  static const std::vector<PropName> coll = {
      {"DAV:", "displayname"},   {"DAV:", "resourcetype"}, {"DAV:", "getlastmodified"},
      {"DAV:", "supportedlock"}, {"DAV:", "lockdiscovery"},
      {std::string(kPropNamespace), "version-count"}};
  return collection ? coll : resource;
}

std::string prefixed(const PropName& p) {
  if (p.ns == kDavNs) return "D:" + p.local;
  if (p.ns == kPropNamespace) return "S:" + p.local;
  return {};
}

std::string empty_element(const PropName& p) {
  const auto q = prefixed(p);
  if (!q.empty()) return "<" + q + "/>";
  return "<X:" + p.local + " xmlns:X=\"" + xml::escape_attr(p.ns) + "\"/>";
}

std::optional<std::string> prop_value(const repo::EntryInfo& e, const PropName& p,
                                      const std::optional<repo::LockToken>& lock, Timestamp now) {
  const auto& known = known_props(e.collection);
  const bool ok = std::any_of(known.begin(), known.end(), [&](const PropName& k) {
    return k.ns == p.ns && k.local == p.local;
  });
  if (!ok) return std::nullopt;
  const auto q = prefixed(p);
  const auto wrap = [&](const std::string& inner) { return "<" + q + ">" + inner + "</" + q + ">"; };
  const auto& n = p.local;
  if (n == "displayname") return wrap(xml::escape(uri::basename(e.path)));
  if (n == "resourcetype") return e.collection ? wrap("<D:collection/>") : "<" + q + "/>";
  if (n == "getcontentlength") return wrap(std::to_string(e.size_bytes));
  if (n == "getlastmodified") return wrap(format_http_date(e.modified));
  if (n == "getcontenttype") return wrap(content_type(e.path));
  if (n == "getetag") return wrap("\"" + e.sha256 + "\"");
  if (n == "supportedlock") {
    return wrap("<D:lockentry><D:lockscope><D:exclusive/></D:lockscope>"
                "<D:locktype><D:write/></D:locktype></D:lockentry>");
  }
  if (n == "lockdiscovery") return lock ? wrap(lock_xml(*lock, now)) : "<" + q + "/>";
  if (n == "version-count") return wrap(std::to_string(e.version_count));
  if (n == "sha256") return wrap(e.sha256);
  return std::nullopt;
}

std::string propfind_response(repo::Store& store, const repo::EntryInfo& e, const PropRequest& req,
                              Timestamp now) {
  const auto lock = e.collection || e.path.empty() ? std::nullopt : store.active_lock(e.path);
  std::string found, missing;
  if (req.mode == PropMode::Names) {
    for (const auto& p : known_props(e.collection)) found += empty_element(p);
  } else {
    const auto& wanted = req.mode == PropMode::All ? known_props(e.collection) : req.props;
    for (const auto& p : wanted) {
      if (auto v = prop_value(e, p, lock, now)) {
        found += *v;
      } else {
        missing += empty_element(p);
      }
    }
  }
  std::string out = "<D:response><D:href>" + xml::escape(href_for(e.path, e.collection)) + "</D:href>";
  if (!found.empty() || missing.empty()) {
    out += "<D:propstat><D:prop>" + found + "</D:prop><D:status>" + status_line(200) +
           "</D:status></D:propstat>";
  }
  if (!missing.empty()) {
    out += "<D:propstat><D:prop>" + missing + "</D:prop><D:status>" + status_line(404) +
           "</D:status></D:propstat>";
  }
  return out + "</D:response>";
}

// ---------------------------------------------------------------------------
// Methods

DavResponse do_options() {
  DavResponse r;
  r.headers = {{"DAV", "1,2"}, {"Allow", std::string(kAllow)}, {"MS-Author-Via", "DAV"}};
  return r;
}

DavResponse do_get(repo::Store& store, const std::string& path, const Target& t,
                   std::string_view user, bool head) {
  if (store.is_collection(path)) {
    auto r = plain(405, "collections have no content; use PROPFIND");
    r.headers.emplace_back("Allow", "OPTIONS, PROPFIND, MKCOL, LOCK, UNLOCK");
    return r;
  }
  std::optional<int> version;
  if (t.version) {
    const auto v = parse_int(*t.version);
    if (!v || *v < 1 || *v > 1'000'000'000) return plain(400, "bad version parameter");
    version = static_cast<int>(*v);
  }
  const auto bytes = store.get(path, version, user);
  const auto hist = store.history(path);
  const int shown = version.value_or(static_cast<int>(hist.size()));
  const auto& rec = hist.at(static_cast<std::size_t>(shown - 1));
  DavResponse r;
  r.headers = {{"Content-Type", content_type(path)},
               {"ETag", "\"" + rec.sha256 + "\""},
               {"Last-Modified", format_http_date(rec.timestamp)},
               {std::string(kVersionHeader), std::to_string(shown)}};
  if (head) {
    r.headers.emplace_back("Content-Length", std::to_string(bytes.size()));
  } else {
    r.body = bytes;
  }
  return r;
}

DavResponse do_put(repo::Store& store, const std::string& path, const Headers& headers,
                   std::string_view body, std::string_view user) {
  if (path.empty() || store.is_collection(path)) return plain(405, "cannot PUT to a collection");
  const auto tokens = if_tokens(headers);
  std::optional<std::string> token;
  if (!tokens.empty()) {
    token = tokens.front();
    if (const auto lk = store.active_lock(path)) {
      if (std::find(tokens.begin(), tokens.end(), lk->token) != tokens.end()) token = lk->token;
    }
  }
  const auto comment = find_header(headers, "Sheetguard-Comment").value_or("WebDAV PUT");
  const auto rec = store.checkin(path, body, user, comment, token, /*keep_lock=*/true);
  DavResponse r;
  r.status = rec.version == 1 ? 201 : 204;
  r.headers = {{"ETag", "\"" + rec.sha256 + "\""},
               {std::string(kVersionHeader), std::to_string(rec.version)}};
  return r;
}

DavResponse do_mkcol(repo::Store& store, const std::string& path, std::string_view body,
                     std::string_view user) {
  if (!body.empty()) return plain(415, "MKCOL bodies are not supported");
  if (path.empty() || store.stat(path)) {
    auto r = plain(405, "already exists");
    r.headers.emplace_back("Allow", std::string(kAllow));
    return r;
  }
  try {
    store.make_collection(path, user);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::NotFound || e.code() == ErrorCode::InvalidPath) {
      return plain(409, e.what());
    }
    throw;
  }
  return plain(201);
}

DavResponse do_propfind(repo::Store& store, const std::string& path, const Headers& headers,
                        std::string_view body) {
  const auto depth = trim(find_header(headers, "Depth").value_or(""));
  if (depth != "0" && depth != "1") {
    DavResponse r;
    r.status = 403;
    r.headers.emplace_back("Content-Type", std::string(kXmlType));
    r.body = "<?xml version=\"1.0\" encoding=\"utf-8\"?>\n"
             "<D:error xmlns:D=\"DAV:\"><D:propfind-finite-depth/></D:error>\n";
    return r;
  }
  PropRequest req;
  try {
    req = parse_propfind(body);
  } catch (const Error& e) {
    return plain(400, e.what());
  }
  std::optional<repo::EntryInfo> self = store.stat(path);
  if (!self && path.empty()) self = repo::EntryInfo{"", true, 0, {}, 0, {}};
  if (!self) return plain(404, "not found: /" + path);
  const auto now = now_utc();
  std::string out = "<?xml version=\"1.0\" encoding=\"utf-8\"?>\n<D:multistatus xmlns:D=\"DAV:\" xmlns:S=\"" +
                    std::string(kPropNamespace) + "\">";
  out += propfind_response(store, *self, req, now);
  if (depth == "1" && self->collection) {
    for (const auto& child : store.list(path)) out += propfind_response(store, child, req, now);
  }
  out += "</D:multistatus>\n";
  DavResponse r;
  r.status = 207;
  r.headers.emplace_back("Content-Type", std::string(kXmlType));
  r.body = std::move(out);
  return r;
}

std::int64_t lock_seconds(const Headers& headers, const HandlerOptions& opt) {
  const auto v = find_header(headers, "Timeout");
  if (!v) return opt.default_lock_seconds;
  const auto first = trim(split(*v, ',').front());
  if (iequals(first, "Infinite")) return opt.max_lock_seconds;
  if (first.size() > 7 && iequals(first.substr(0, 7), "Second-")) {
    if (const auto n = parse_int(std::string_view(first).substr(7)); n && *n > 0) {
      return std::min<std::int64_t>(*n, opt.max_lock_seconds);
    }
  }
  return opt.default_lock_seconds;
}

DavResponse lock_reply(int status, const repo::LockToken& lk) {
  DavResponse r;
  r.status = status;
  r.headers = {{"Content-Type", std::string(kXmlType)},
               {"Lock-Token", "<" + std::string(kLockTokenScheme) + lk.token + ">"}};
  r.body = "<?xml version=\"1.0\" encoding=\"utf-8\"?>\n<D:prop xmlns:D=\"DAV:\"><D:lockdiscovery>" +
           lock_xml(lk, now_utc()) + "</D:lockdiscovery></D:prop>\n";
  return r;
}

DavResponse do_lock(repo::Store& store, const std::string& path, const Headers& headers,
                    std::string_view body, std::string_view user, const HandlerOptions& opt) {
  if (path.empty()) return plain(405, "the root cannot be locked");
  if (trim(body).empty()) {
    // Refresh: the existing lock is reported, its expiry is unchanged.
    const auto lk = store.active_lock(path);
    const auto tokens = if_tokens(headers);
    if (!lk || std::find(tokens.begin(), tokens.end(), lk->token) == tokens.end()) {
      return plain(412, "no matching lock to refresh");
    }
    auto r = lock_reply(200, *lk);
    r.headers.pop_back();  // Lock-Token is only sent for new locks
    return r;
  }
  try {
    const auto info = xml::parse(body, "LOCK body");
    if (info.name != "lockinfo") return plain(400, "expected DAV:lockinfo");
    if (const auto* scope = info.child("lockscope"); scope && scope->child("shared")) {
      return plain(412, "only exclusive locks are supported");
    }
  } catch (const Error& e) {
    return plain(400, e.what());
  }
  return lock_reply(200, store.lock(path, user, lock_seconds(headers, opt)));
}

DavResponse do_unlock(repo::Store& store, const std::string& path, const Headers& headers,
                      std::string_view user) {
  const auto token = lock_token_header(headers);
  if (!token) return plain(400, "missing Lock-Token header");
  store.unlock(path, *token, user);
  return plain(204);
}

int status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::NotFound:
    case ErrorCode::GoneVersion:
      return 404;
    case ErrorCode::Locked:
      return 423;
    case ErrorCode::BadToken:
      return 403;
    case ErrorCode::InvalidPath:
      return 409;
    case ErrorCode::InvalidArgument:
      return 400;
    default:
      return 500;
  }
}

}  // namespace

std::optional<std::string> find_header(const Headers& headers, std::string_view name) {
  for (const auto& [k, v] : headers) {
    if (iequals(k, name)) return v;
  }
  return std::nullopt;
}

DavResponse handle_request(repo::Store& store, std::string_view method, std::string_view target,
                           const Headers& headers, std::string_view body, std::string_view user,
                           const HandlerOptions& options) {
  const auto t = parse_target(target);
  std::string path;
  try {
    path = repo::normalize_path(t.path);
  } catch (const Error& e) {
    return plain(400, e.what());
  }
  const auto m = to_upper(method);
  try {
    if (m == "OPTIONS") return do_options();
    if (m == "GET" || m == "HEAD") return do_get(store, path, t, user, m == "HEAD");
    if (m == "PUT") return do_put(store, path, headers, body, user);
    if (m == "MKCOL") return do_mkcol(store, path, body, user);
    if (m == "PROPFIND") return do_propfind(store, path, headers, body);
    if (m == "LOCK") return do_lock(store, path, headers, body, user, options);
    if (m == "UNLOCK") return do_unlock(store, path, headers, user);
  } catch (const Error& e) {
    return plain(status_for(e.code()), e.what());
  }
  auto r = plain(405, std::string(method) + " is not supported");
  r.headers.emplace_back("Allow", std::string(kAllow));
  return r;
}

// ---------------------------------------------------------------------------
// Configuration and authentication

std::pair<std::string, std::uint16_t> parse_bind(std::string_view bind) {
  const auto bad = [&] { return Error(ErrorCode::InvalidConfig, "bad bind address '" + std::string(bind) + "'"); };
  const auto colon = bind.rfind(':');
  if (colon == std::string_view::npos) throw bad();
  auto host = std::string(bind.substr(0, colon));
  if (host.size() >= 2 && host.front() == '[' && host.back() == ']') host = host.substr(1, host.size() - 2);
  const auto port = parse_int(bind.substr(colon + 1));
  if (host.empty() || !port || *port < 0 || *port > 65535) throw bad();
  return {host, static_cast<std::uint16_t>(*port)};
}

ServerConfig parse_server_config(std::string_view json_text, const std::filesystem::path& base_dir) {
  const auto bad = [](const std::string& why) { return Error(ErrorCode::InvalidConfig, why); };
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw bad(std::string("server config is not JSON: ") + e.what());
  }
  if (!j.is_object()) throw bad("server config must be an object");
  ServerConfig cfg;
  try {
    if (j.contains("bind")) {
      std::tie(cfg.host, cfg.port) = parse_bind(j.at("bind").get<std::string>());
    }
    if (!j.contains("store_root")) throw bad("store_root is required");
    std::filesystem::path root = j.at("store_root").get<std::string>();
    if (root.empty()) throw bad("store_root is empty");
    cfg.store_root = root.is_relative() && !base_dir.empty() ? base_dir / root : root;

    if (!j.contains("users") || !j.at("users").is_object() || j.at("users").empty()) {
      throw bad("users must be a non-empty object");
    }
    for (const auto& [name, spec] : j.at("users").items()) {
      if (name.empty() || name.find(':') != std::string::npos) throw bad("bad user name '" + name + "'");
      if (!spec.is_object()) throw bad("user " + name + " must be an object");
      if (spec.contains("password_sha256")) {
        const auto h = to_lower(spec.at("password_sha256").get<std::string>());
        if (h.size() != 64 || h.find_first_not_of("0123456789abcdef") != std::string::npos) {
          throw bad("user " + name + " has a malformed password_sha256");
        }
        cfg.users[name] = h;
      } else if (spec.contains("password")) {
        cfg.users[name] = sha256_hex(spec.at("password").get<std::string>());
      } else {
        throw bad("user " + name + " needs password or password_sha256");
      }
    }
    if (j.contains("lock_timeout_seconds")) {
      const auto s = j.at("lock_timeout_seconds").get<std::int64_t>();
      if (s <= 0) throw bad("lock_timeout_seconds must be positive");
      cfg.handler.default_lock_seconds = s;
      cfg.handler.max_lock_seconds = std::max<std::int64_t>(cfg.handler.max_lock_seconds, s);
    }
  } catch (const json::exception& e) {
    throw bad(std::string("server config: ") + e.what());
  }
  return cfg;
}

std::optional<std::string> authenticate(const ServerConfig& config,
                                        const std::optional<std::string>& authorization) {
  if (!authorization) return std::nullopt;
  const auto v = trim(*authorization);
  if (v.size() < 6 || !iequals(v.substr(0, 6), "Basic ")) return std::nullopt;
  const auto decoded = base64_decode(trim(std::string_view(v).substr(6)));
  if (!decoded) return std::nullopt;
  const auto colon = decoded->find(':');
  if (colon == std::string::npos) return std::nullopt;
  const auto user = decoded->substr(0, colon);
  const auto it = config.users.find(user);
  if (it == config.users.end()) return std::nullopt;
  const auto given = sha256_hex(std::string_view(*decoded).substr(colon + 1));
  if (given.size() != it->second.size() ||
      CRYPTO_memcmp(given.data(), it->second.data(), given.size()) != 0) {
    return std::nullopt;
  }
  return user;
}

std::string basic_auth(std::string_view user, std::string_view password) {
  return "Basic " + base64_encode(std::string(user) + ":" + std::string(password));
}

// ---------------------------------------------------------------------------
// Server

struct Server::Impl {
  ServerConfig config;
  repo::Store& store;
  unsigned thread_count;
  net::io_context ioc;
  tcp::acceptor acceptor{ioc};
  std::vector<std::thread> threads;
  std::mutex mu;
  std::uint16_t port = 0;

  Impl(ServerConfig c, repo::Store& s, unsigned n)
      : config(std::move(c)), store(s), thread_count(std::max(1u, n)), ioc(static_cast<int>(thread_count)) {}

  http::response<http::string_body> respond(const http::request<http::string_body>& req);
  void do_accept();
};

namespace {

class Session : public std::enable_shared_from_this<Session> {
 public:
  Session(tcp::socket socket, Server::Impl& server) : stream_(std::move(socket)), server_(server) {}

  void run() {
    net::dispatch(stream_.get_executor(), beast::bind_front_handler(&Session::read, shared_from_this()));
  }

 private:
  void read() {
    parser_.emplace();
    parser_->body_limit(std::uint64_t{1} << 30);
    stream_.expires_after(std::chrono::seconds(60));
    http::async_read(stream_, buffer_, *parser_,
                     beast::bind_front_handler(&Session::on_read, shared_from_this()));
  }

  void on_read(beast::error_code ec, std::size_t) {
    if (ec == http::error::end_of_stream) return close();
    if (ec) return;
    const auto req = parser_->release();
    response_ = server_.respond(req);
    stream_.expires_after(std::chrono::seconds(60));
    http::async_write(stream_, response_,
                      beast::bind_front_handler(&Session::on_write, shared_from_this(),
                                                response_.need_eof()));
  }

  void on_write(bool eof, beast::error_code ec, std::size_t) {
    if (ec) return;
    if (eof) return close();
    read();
  }

  void close() {
    beast::error_code ec;
    stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
  }

  beast::tcp_stream stream_;
  beast::flat_buffer buffer_;
  std::optional<http::request_parser<http::string_body>> parser_;
  http::response<http::string_body> response_;
  Server::Impl& server_;
};

}  // namespace

http::response<http::string_body> Server::Impl::respond(const http::request<http::string_body>& req) {
  Headers headers;
  for (const auto& f : req) headers.emplace_back(std::string(f.name_string()), std::string(f.value()));
  DavResponse r;
  const auto user = authenticate(config, find_header(headers, "Authorization"));
  if (!user) {
    r = plain(401, "authentication required");
    r.headers.emplace_back("WWW-Authenticate", "Basic realm=\"sheetguard\", charset=\"UTF-8\"");
  } else {
    try {
      r = handle_request(store, sv(req.method_string()), sv(req.target()), headers, req.body(), *user,
                         config.handler);
    } catch (const std::exception& e) {
      r = plain(500, e.what());
    }
  }
  http::response<http::string_body> res;
  res.version(req.version());
  res.result(static_cast<unsigned>(r.status));
  res.set(http::field::server, "sheetguard");
  std::optional<std::string> head_length;
  for (const auto& [k, v] : r.headers) {
    if (iequals(k, "Content-Length")) {
      head_length = v;
      continue;
    }
    res.insert(k, v);
  }
  res.body() = std::move(r.body);
  res.keep_alive(req.keep_alive());
  if (head_length && req.method() == http::verb::head) {
    res.set(http::field::content_length, *head_length);
  } else {
    res.prepare_payload();
  }
  return res;
}

void Server::Impl::do_accept() {
  acceptor.async_accept(net::make_strand(ioc), [this](beast::error_code ec, tcp::socket socket) {
    if (ec) {
      if (ec == net::error::operation_aborted || !acceptor.is_open()) return;
    } else {
      std::make_shared<Session>(std::move(socket), *this)->run();
    }
    do_accept();
  });
}

Server::Server(ServerConfig config, repo::Store& store, unsigned threads)
    : impl_(std::make_unique<Impl>(std::move(config), store, threads)) {}

Server::~Server() { stop(); }

std::uint16_t Server::start() {
  std::lock_guard lock(impl_->mu);
  if (!impl_->threads.empty()) return impl_->port;
  try {
    tcp::resolver resolver(impl_->ioc);
    const auto results = resolver.resolve(impl_->config.host, std::to_string(impl_->config.port));
    const tcp::endpoint ep = *results.begin();
    impl_->acceptor.open(ep.protocol());
    impl_->acceptor.set_option(net::socket_base::reuse_address(true));
    impl_->acceptor.bind(ep);
    impl_->acceptor.listen(net::socket_base::max_listen_connections);
    impl_->port = impl_->acceptor.local_endpoint().port();
  } catch (const boost::system::system_error& e) {
    throw Error(ErrorCode::IoError, "cannot listen on " + impl_->config.host + ":" +
                                        std::to_string(impl_->config.port) + ": " + e.what());
  }
  impl_->do_accept();
  for (unsigned i = 0; i < impl_->thread_count; ++i) {
    impl_->threads.emplace_back([this] { impl_->ioc.run(); });
  }
  return impl_->port;
}

void Server::wait() {
  net::signal_set signals(impl_->ioc, SIGINT, SIGTERM);
  signals.async_wait([this](beast::error_code ec, int) {
    if (!ec) impl_->ioc.stop();
  });
  {
    std::unique_lock lock(impl_->mu);
    for (auto& t : impl_->threads) {
      if (t.joinable()) t.join();
    }
  }
  stop();
}

void Server::stop() {
  impl_->ioc.stop();
  std::lock_guard lock(impl_->mu);
  for (auto& t : impl_->threads) {
    if (t.joinable() && t.get_id() != std::this_thread::get_id()) t.join();
  }
  // Only now, with no thread inside the io_context, is closing safe. A
  // listening socket left open would keep accepting connections nobody reads.
  beast::error_code ec;
  impl_->acceptor.close(ec);
}

std::string Server::base_url() const {
  const auto& host = impl_->config.host;
  const bool v6 = host.find(':') != std::string::npos;
  return "http://" + (v6 ? "[" + host + "]" : host) + ":" + std::to_string(impl_->port);
}

// ---------------------------------------------------------------------------
// Client

HttpResponse http_request(std::string_view method, std::string_view url, const Headers& headers,
                          std::string_view body) {
  if (url.substr(0, 7) != "http://") throw Error(ErrorCode::InvalidArgument, "not an http URL: " + std::string(url));
  const auto rest = url.substr(7);
  const auto slash = rest.find('/');
  const std::string authority(rest.substr(0, slash));
  const std::string target = slash == std::string_view::npos ? "/" : std::string(rest.substr(slash));
  std::string host = authority, port = "80";
  if (const auto close = authority.find(']'); !authority.empty() && authority[0] == '[') {
    host = authority.substr(1, close - 1);
    if (close + 1 < authority.size() && authority[close + 1] == ':') port = authority.substr(close + 2);
  } else if (const auto colon = authority.rfind(':'); colon != std::string::npos) {
    host = authority.substr(0, colon);
    port = authority.substr(colon + 1);
  }
  try {
    net::io_context ioc;
    tcp::resolver resolver(ioc);
    beast::tcp_stream stream(ioc);
    stream.expires_after(std::chrono::seconds(60));
    stream.connect(resolver.resolve(host, port));
    // tcp_stream deadlines only cover asynchronous operations.
    const timeval tv{60, 0};
    ::setsockopt(stream.socket().native_handle(), SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
    ::setsockopt(stream.socket().native_handle(), SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof tv);

    http::request<http::string_body> req;
    req.method_string(beast::string_view(method.data(), method.size()));
    req.target(target);
    req.version(11);
    req.set(http::field::host, authority);
    for (const auto& [k, v] : headers) req.set(k, v);
    req.body() = std::string(body);
    req.prepare_payload();
    http::write(stream, req);

    beast::flat_buffer buffer;
    http::response_parser<http::string_body> parser;
    parser.body_limit(std::uint64_t{1} << 30);
    if (iequals(method, "HEAD")) parser.skip(true);
    http::read(stream, buffer, parser);
    auto res = parser.release();

    HttpResponse out;
    out.status = static_cast<int>(res.result_int());
    for (const auto& f : res) out.headers.emplace_back(std::string(f.name_string()), std::string(f.value()));
    out.body = std::move(res.body());
    beast::error_code ec;
    stream.socket().shutdown(tcp::socket::shutdown_both, ec);
    return out;
  } catch (const boost::system::system_error& e) {
    throw Error(ErrorCode::IoError, std::string(method) + " " + std::string(url) + ": " + e.what());
  }
}

DavRepository::DavRepository(std::string base_url, std::string user, std::string password)
    : base_url_(std::move(base_url)), auth_(basic_auth(user, password)) {
  while (!base_url_.empty() && base_url_.back() == '/') base_url_.pop_back();
}

void DavRepository::ping() {
  HttpResponse r;
  try {
    r = http_request("OPTIONS", base_url_ + "/", {{"Authorization", auth_}});
  } catch (const Error& e) {
    throw Error(ErrorCode::RepositoryUnreachable, e.what());
  }
  if (r.status != 200) {
    throw Error(ErrorCode::RepositoryUnreachable,
                base_url_ + " answered OPTIONS with " + std::to_string(r.status));
  }
}

int DavRepository::checkin(const std::string& dest_path, const Bytes& bytes, const std::string& comment) {
  std::string safe = comment;
  std::replace_if(safe.begin(), safe.end(), [](char c) { return c == '\r' || c == '\n'; }, ' ');
  const auto url = base_url_ + "/" + uri::percent_encode_path(repo::normalize_path(dest_path));
  HttpResponse r;
  try {
    r = http_request("PUT", url, {{"Authorization", auth_}, {"Sheetguard-Comment", safe}}, bytes);
  } catch (const Error& e) {
    throw Error(ErrorCode::RepositoryUnreachable, e.what());
  }
  if (r.status == 423) throw Error(ErrorCode::Locked, dest_path + " is locked");
  if (r.status != 201 && r.status != 204) {
    throw Error(ErrorCode::StorageFailure, "PUT " + url + " answered " + std::to_string(r.status));
  }
  const auto v = r.header(kVersionHeader);
  const auto n = v ? parse_int(*v) : std::nullopt;
  if (!n || *n < 1) throw Error(ErrorCode::StorageFailure, "PUT " + url + " returned no version");
  return static_cast<int>(*n);
}

}  // namespace sheetguard::dav
