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

// WebDAV view of a repository store.
//
// Supported: OPTIONS, GET/HEAD (with the "?version=n" extension), PUT,
// MKCOL, PROPFIND (Depth 0 or 1), LOCK and UNLOCK. DELETE, PROPPATCH, COPY
// and MOVE answer 405. Besides the DAV: properties, PROPFIND reports
// version-count and sha256 in the namespace kPropNamespace. Successful PUT
// and GET responses carry the version number in a "Sheetguard-Version"
// header.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sheetguard/migration.hpp"
#include "sheetguard/repo.hpp"

namespace sheetguard::dav {

inline constexpr std::string_view kPropNamespace = "urn:sheetguard:props";
inline constexpr std::string_view kVersionHeader = "Sheetguard-Version";
inline constexpr std::string_view kLockTokenScheme = "opaquelocktoken:";

using Headers = std::vector<std::pair<std::string, std::string>>;

// Case-insensitive header lookup; the first match wins.
std::optional<std::string> find_header(const Headers& headers, std::string_view name);

struct DavResponse {
  int status = 200;
  Headers headers;
  Bytes body;

  std::optional<std::string> header(std::string_view name) const {
    return find_header(headers, name);
  }
};

struct HandlerOptions {
  std::int64_t default_lock_seconds = 3600;
  std::int64_t max_lock_seconds = 86400;
};

// One request against the store. `target` is the raw request target
// (percent-encoded path plus optional query); `user` has already been
// authenticated. Stateless apart from the store.
DavResponse handle_request(repo::Store& store, std::string_view method, std::string_view target,
                           const Headers& headers, std::string_view body, std::string_view user,
                           const HandlerOptions& options = {});

struct ServerConfig {
  std::string host = "127.0.0.1";
  std::uint16_t port = 8080;  // 0 picks a free port
  std::filesystem::path store_root;
  // user -> lowercase SHA-256 hex of the password
  std::map<std::string, std::string> users;
  HandlerOptions handler;
};

// "host:port", with IPv6 hosts optionally in brackets. Throws InvalidConfig.
std::pair<std::string, std::uint16_t> parse_bind(std::string_view bind);

// JSON object with "bind" ("host:port"), "store_root" and "users", an
// object mapping each name to {"password": ...} or {"password_sha256": ...}.
// Optional "lock_timeout_seconds". Other keys are ignored, so the server
// and command-line tools can share one file. A relative store_root is taken
// relative to `base_dir`. Throws InvalidConfig.
ServerConfig parse_server_config(std::string_view json_text,
                                 const std::filesystem::path& base_dir = {});

// Returns the user named by a valid "Basic" Authorization header value.
std::optional<std::string> authenticate(const ServerConfig& config,
                                        const std::optional<std::string>& authorization);

// HTTP/1.1 server on its own threads.
class Server {
 public:
  Server(ServerConfig config, repo::Store& store, unsigned threads = 4);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  // Binds and starts accepting; returns the bound port. Throws IoError.
  std::uint16_t start();
  // Blocks until stop() is called from another thread or a signal handler.
  void wait();
  void stop();

  std::string base_url() const;

  struct Impl;

 private:
  std::unique_ptr<Impl> impl_;
};

struct HttpResponse {
  int status = 0;
  Headers headers;
  Bytes body;

  std::optional<std::string> header(std::string_view name) const {
    return find_header(headers, name);
  }
};

// Minimal blocking HTTP/1.1 client over one connection per request.
// `url` is "http://host:port/path?query". Throws IoError.
HttpResponse http_request(std::string_view method, std::string_view url, const Headers& headers = {},
                          std::string_view body = {});

std::string basic_auth(std::string_view user, std::string_view password);

// Repository reached over WebDAV, for migrating into a running server.
class DavRepository : public migration::RepositoryClient {
 public:
  DavRepository(std::string base_url, std::string user, std::string password);
  void ping() override;
  int checkin(const std::string& dest_path, const Bytes& bytes, const std::string& comment) override;

 private:
  std::string base_url_;
  std::string auth_;
};

}  // namespace sheetguard::dav
