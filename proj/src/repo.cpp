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

#include "sheetguard/repo.hpp"

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "file_lock.hpp"
#include "json.hpp"
#include "sheetguard/error.hpp"

namespace sheetguard::repo {

namespace fs = std::filesystem;
using detail::append_line;
using detail::FileLock;
using nlohmann::json;

namespace {

constexpr std::string_view kIndexSuffix = ".versions.jsonl";

std::vector<std::string> read_lines(const fs::path& file) {
  std::vector<std::string> out;
  std::ifstream in(file, std::ios::binary);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(std::move(line));
  }
  return out;
}

json parse_line(const std::string& line, const fs::path& file) {
  try {
    return json::parse(line);
  } catch (const json::exception&) {
    throw Error(ErrorCode::StorageFailure, "corrupt line in " + file.string());
  }
}

Timestamp time_of(const json& j, const char* key) {
  const auto t = parse_timestamp(j.at(key).get<std::string>());
  if (!t) throw Error(ErrorCode::StorageFailure, "bad timestamp in store");
  return *t;
}

std::string parent_of(const std::string& path) {
  const auto slash = path.rfind('/');
  return slash == std::string::npos ? "" : path.substr(0, slash);
}

}  // namespace

std::string_view audit_action_name(AuditAction a) {
  switch (a) {
    case AuditAction::CheckIn: return "CheckIn";
    case AuditAction::CheckOut: return "CheckOut";
    case AuditAction::Unlock: return "Unlock";
    case AuditAction::Read: return "Read";
    case AuditAction::Purge: return "Purge";
    case AuditAction::MakeCollection: return "MakeCollection";
    case AuditAction::Annotate: return "Annotate";
  }
  return "Unknown";
}

std::string normalize_path(std::string_view path) {
  std::string_view p = path;
  while (!p.empty() && p.front() == '/') p.remove_prefix(1);
  while (!p.empty() && p.back() == '/') p.remove_suffix(1);
  if (p.empty()) return "";
  for (char c : p) {
    if (c == '\\' || static_cast<unsigned char>(c) < 0x20 || c == 0x7f) {
      throw Error(ErrorCode::InvalidPath, "invalid character in path: " + std::string(path));
    }
  }
  for (const auto& seg : split(p, '/')) {
    if (seg.empty() || seg == "." || seg == "..") {
      throw Error(ErrorCode::InvalidPath, "invalid path segment in: " + std::string(path));
    }
    if (seg.size() > kIndexSuffix.size() &&
        seg.compare(seg.size() - kIndexSuffix.size(), kIndexSuffix.size(), kIndexSuffix) == 0) {
      throw Error(ErrorCode::InvalidPath, "reserved name: " + seg);
    }
  }
  return std::string(p);
}

Store::Store(fs::path root, Clock clock) : root_(std::move(root)), clock_(std::move(clock)) {
  std::error_code ec;
  for (const char* d : {"objects", "index", "locks"}) fs::create_directories(root_ / d, ec);
  if (ec || !fs::is_directory(root_ / "index")) {
    throw Error(ErrorCode::StorageFailure, "cannot initialize store at " + root_.string());
  }
}

fs::path Store::index_file(const std::string& path) const {
  return root_ / "index" / (path + std::string(kIndexSuffix));
}

fs::path Store::index_dir(const std::string& path) const {
  return path.empty() ? root_ / "index" : root_ / "index" / path;
}

fs::path Store::object_file(const std::string& sha) const {
  return root_ / "objects" / sha.substr(0, 2) / sha;
}

fs::path Store::lock_file(const std::string& path) const {
  return root_ / "locks" / (sha256_hex(path) + ".json");
}

fs::path Store::mutex_file(const std::string& path) const {
  return root_ / "locks" / (sha256_hex(path) + ".mutex");
}

std::vector<VersionRecord> Store::read_index(const std::string& path) const {
  const auto file = index_file(path);
  std::vector<VersionRecord> out;
  for (const auto& line : read_lines(file)) {
    const auto j = parse_line(line, file);
    if (j.contains("purge")) {
      const int v = j.at("purge").get<int>();
      if (v >= 1 && v <= static_cast<int>(out.size())) out[v - 1].purged = true;
      continue;
    }
    VersionRecord r;
    r.path = path;
    r.version = j.at("version").get<int>();
    r.sha256 = j.at("sha256").get<std::string>();
    r.size_bytes = j.at("size").get<std::int64_t>();
    r.author = j.at("author").get<std::string>();
    r.timestamp = time_of(j, "timestamp");
    r.comment = j.at("comment").get<std::string>();
    if (r.version != static_cast<int>(out.size()) + 1) {
      throw Error(ErrorCode::StorageFailure, "non-contiguous versions in " + file.string());
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::optional<LockToken> Store::read_lock(const std::string& path) const {
  const auto file = lock_file(path);
  std::error_code ec;
  if (!fs::exists(file, ec)) return std::nullopt;
  std::string text;
  try {
    text = read_file(file);
  } catch (const Error&) {
    return std::nullopt;
  }
  const auto j = parse_line(text, file);
  LockToken t;
  t.path = j.at("path").get<std::string>();
  t.owner = j.at("owner").get<std::string>();
  t.token = j.at("token").get<std::string>();
  t.acquired = time_of(j, "acquired");
  t.ttl_seconds = j.at("ttl_seconds").get<std::int64_t>();
  return t;
}

void Store::append_audit(AuditAction action, std::string_view actor, const std::string& path,
                         std::optional<int> version, std::string_view detail) {
  json j = {{"timestamp", format_timestamp(clock_())},
            {"actor", actor},
            {"action", audit_action_name(action)},
            {"path", path},
            {"version", version ? json(*version) : json(nullptr)},
            {"detail", detail}};
  const auto file = root_ / "audit.jsonl";
  FileLock guard(root_ / "audit.lock", true);
  append_line(file, j.dump());
}

VersionRecord Store::checkin(std::string_view raw_path, std::string_view bytes,
                             std::string_view author, std::string_view comment,
                             const std::optional<std::string>& token, bool keep_lock) {
  const auto path = normalize_path(raw_path);
  if (path.empty()) throw Error(ErrorCode::InvalidPath, "cannot check in at the root");
  FileLock store(root_ / "store.lock", false);
  if (is_collection(path)) throw Error(ErrorCode::InvalidPath, "path is a collection: " + path);
  for (auto p = parent_of(path); !p.empty(); p = parent_of(p)) {
    if (is_resource(p)) throw Error(ErrorCode::InvalidPath, "parent is a resource: " + p);
  }
  FileLock guard(mutex_file(path), true);

  const auto now = clock_();
  bool release = false;
  if (const auto lk = read_lock(path)) {
    if (lk->expires() > now) {
      if (!token || *token != lk->token) {
        throw Error(ErrorCode::Locked, path + " is locked by " + lk->owner);
      }
      release = !keep_lock;
    } else {
      std::error_code ec;
      fs::remove(lock_file(path), ec);
    }
  }

  const auto history = read_index(path);
  VersionRecord rec;
  rec.path = path;
  rec.version = static_cast<int>(history.size()) + 1;
  rec.sha256 = sha256_hex(bytes);
  rec.size_bytes = static_cast<std::int64_t>(bytes.size());
  rec.author = std::string(author);
  rec.timestamp = now;
  rec.comment = std::string(comment);

  try {
    fs::create_directories(index_dir(parent_of(path)));
    const auto obj = object_file(rec.sha256);
    if (!fs::exists(obj)) {
      fs::create_directories(obj.parent_path());
      write_file_atomic(obj, bytes);
    }
  } catch (const fs::filesystem_error& e) {
    throw Error(ErrorCode::StorageFailure, e.what());
  } catch (const Error& e) {
    throw Error(ErrorCode::StorageFailure, e.what());
  }
  append_line(index_file(path), json{{"version", rec.version},
                                     {"sha256", rec.sha256},
                                     {"size", rec.size_bytes},
                                     {"author", rec.author},
                                     {"timestamp", format_timestamp(rec.timestamp)},
                                     {"comment", rec.comment}}
                                    .dump());
  if (release) {
    std::error_code ec;
    fs::remove(lock_file(path), ec);
  }
  append_audit(AuditAction::CheckIn, author, path, rec.version,
               release ? "lock released" : std::string_view{});
  return rec;
}

Bytes Store::get(std::string_view raw_path, std::optional<int> version, std::string_view actor) {
  const auto path = normalize_path(raw_path);
  FileLock store(root_ / "store.lock", false);
  Bytes data;
  int v = 0;
  {
    FileLock guard(mutex_file(path), false);
    if (path.empty() || !is_resource(path)) throw Error(ErrorCode::NotFound, "no such resource: " + path);
    const auto hist = read_index(path);
    v = version.value_or(static_cast<int>(hist.size()));
    if (v < 1 || v > static_cast<int>(hist.size())) {
      throw Error(ErrorCode::NotFound, path + " has no version " + std::to_string(v));
    }
    const auto& rec = hist[v - 1];
    if (rec.purged) throw Error(ErrorCode::GoneVersion, path + " version " + std::to_string(v) + " was purged");
    try {
      data = read_file(object_file(rec.sha256));
    } catch (const Error&) {
      throw Error(ErrorCode::StorageFailure, "missing object for " + path);
    }
    if (sha256_hex(data) != rec.sha256) {
      throw Error(ErrorCode::StorageFailure, "object hash mismatch for " + path);
    }
  }
  append_audit(AuditAction::Read, actor, path, v, {});
  return data;
}

LockToken Store::lock(std::string_view raw_path, std::string_view owner, std::int64_t ttl_seconds) {
  const auto path = normalize_path(raw_path);
  if (path.empty()) throw Error(ErrorCode::InvalidPath, "cannot lock the root");
  if (ttl_seconds <= 0) throw Error(ErrorCode::InvalidArgument, "lock ttl must be positive");
  FileLock store(root_ / "store.lock", false);
  FileLock guard(mutex_file(path), true);
  const auto now = clock_();
  if (const auto lk = read_lock(path); lk && lk->expires() > now) {
    throw Error(ErrorCode::Locked, path + " is locked by " + lk->owner);
  }
  LockToken t{path, std::string(owner), random_hex(16), now, ttl_seconds};
  write_file_atomic(lock_file(path), json{{"path", t.path},
                                          {"owner", t.owner},
                                          {"token", t.token},
                                          {"acquired", format_timestamp(t.acquired)},
                                          {"ttl_seconds", t.ttl_seconds}}
                                         .dump());
  append_audit(AuditAction::CheckOut, owner, path, std::nullopt,
               "ttl " + std::to_string(ttl_seconds) + "s");
  return t;
}

void Store::unlock(std::string_view raw_path, std::string_view token, std::string_view actor) {
  const auto path = normalize_path(raw_path);
  FileLock store(root_ / "store.lock", false);
  FileLock guard(mutex_file(path), true);
  const auto lk = read_lock(path);
  if (!lk || lk->token != token) throw Error(ErrorCode::BadToken, "lock token does not match for " + path);
  std::error_code ec;
  fs::remove(lock_file(path), ec);
  append_audit(AuditAction::Unlock, actor.empty() ? std::string_view(lk->owner) : actor, path,
               std::nullopt, {});
}

std::optional<LockToken> Store::active_lock(std::string_view raw_path) const {
  const auto path = normalize_path(raw_path);
  auto lk = read_lock(path);
  if (lk && lk->expires() <= clock_()) return std::nullopt;
  return lk;
}

std::vector<VersionRecord> Store::history(std::string_view raw_path) const {
  const auto path = normalize_path(raw_path);
  FileLock store(root_ / "store.lock", false);
  FileLock guard(mutex_file(path), false);
  if (path.empty() || !is_resource(path)) throw Error(ErrorCode::NotFound, "no such resource: " + path);
  return read_index(path);
}

std::vector<std::pair<std::string, int>> Store::apply_retention(const RetentionPolicy& policy,
                                                                std::string_view actor) {
  if (policy.kind == RetentionPolicy::Kind::KeepLast && policy.keep_last < 1) {
    throw Error(ErrorCode::InvalidPolicy, "keep-last needs k >= 1");
  }
  FileLock store(root_ / "store.lock", true);
  std::vector<std::pair<std::string, int>> purged;
  std::set<std::string> live, dropped;
  for (const auto& path : all_resources()) {
    const auto hist = read_index(path);
    const int n = static_cast<int>(hist.size());
    for (const auto& rec : hist) {
      bool keep = rec.version == n;  // the latest version is never purged
      if (!keep) {
        keep = policy.kind == RetentionPolicy::Kind::KeepLast
                   ? rec.version > n - policy.keep_last
                   : rec.timestamp >= policy.newer_than;
      }
      if (rec.purged) continue;
      if (keep) {
        live.insert(rec.sha256);
        continue;
      }
      append_line(index_file(path), json{{"purge", rec.version}}.dump());
      append_audit(AuditAction::Purge, actor, path, rec.version, {});
      purged.emplace_back(path, rec.version);
      dropped.insert(rec.sha256);
    }
  }
  for (const auto& sha : dropped) {
    if (live.count(sha)) continue;
    std::error_code ec;
    fs::remove(object_file(sha), ec);
  }
  return purged;
}

void Store::make_collection(std::string_view raw_path, std::string_view actor) {
  const auto path = normalize_path(raw_path);
  FileLock store(root_ / "store.lock", false);
  FileLock guard(mutex_file(path), true);
  if (path.empty() || is_collection(path) || is_resource(path)) {
    throw Error(ErrorCode::InvalidPath, "already exists: /" + path);
  }
  if (!is_collection(parent_of(path))) {
    throw Error(ErrorCode::NotFound, "parent collection missing for /" + path);
  }
  std::error_code ec;
  fs::create_directory(index_dir(path), ec);
  if (ec) throw Error(ErrorCode::StorageFailure, "cannot create collection /" + path);
  append_audit(AuditAction::MakeCollection, actor, path, std::nullopt, {});
}

void Store::annotate(std::string_view raw_path, int version, std::string_view actor,
                     std::string_view detail) {
  const auto path = normalize_path(raw_path);
  const auto hist = history(path);
  if (version < 1 || version > static_cast<int>(hist.size())) {
    throw Error(ErrorCode::NotFound, path + " has no version " + std::to_string(version));
  }
  append_audit(AuditAction::Annotate, actor, path, version, detail);
}

bool Store::is_resource(std::string_view raw_path) const {
  const auto path = normalize_path(raw_path);
  std::error_code ec;
  return !path.empty() && fs::is_regular_file(index_file(path), ec);
}

bool Store::is_collection(std::string_view raw_path) const {
  const auto path = normalize_path(raw_path);
  std::error_code ec;
  return fs::is_directory(index_dir(path), ec);
}

std::optional<EntryInfo> Store::stat(std::string_view raw_path) const {
  const auto path = normalize_path(raw_path);
  EntryInfo e;
  e.path = path;
  if (is_collection(path)) {
    e.collection = true;
    std::error_code ec;
    const auto t = fs::last_write_time(index_dir(path), ec);
    if (!ec) {
      e.modified = std::chrono::floor<std::chrono::seconds>(
          std::chrono::file_clock::to_sys(t));
    }
    return e;
  }
  if (!is_resource(path)) return std::nullopt;
  const auto hist = read_index(path);
  if (hist.empty()) return std::nullopt;
  const auto& last = hist.back();
  e.size_bytes = last.size_bytes;
  e.modified = last.timestamp;
  e.version_count = static_cast<int>(hist.size());
  e.sha256 = last.sha256;
  return e;
}

std::vector<EntryInfo> Store::list(std::string_view raw_path) const {
  const auto path = normalize_path(raw_path);
  if (!is_collection(path)) throw Error(ErrorCode::NotFound, "no such collection: /" + path);
  std::vector<EntryInfo> out;
  for (const auto& de : fs::directory_iterator(index_dir(path))) {
    auto name = de.path().filename().string();
    if (de.is_regular_file()) {
      if (name.size() <= kIndexSuffix.size() || !name.ends_with(kIndexSuffix)) continue;
      name.resize(name.size() - kIndexSuffix.size());
    } else if (!de.is_directory()) {
      continue;
    }
    const auto child = path.empty() ? name : path + "/" + name;
    if (auto info = stat(child)) out.push_back(std::move(*info));
  }
  std::sort(out.begin(), out.end(),
            [](const EntryInfo& a, const EntryInfo& b) { return a.path < b.path; });
  return out;
}

std::vector<std::string> Store::all_resources() const {
  std::vector<std::string> out;
  const auto base = root_ / "index";
  for (const auto& de : fs::recursive_directory_iterator(base)) {
    if (!de.is_regular_file()) continue;
    auto rel = fs::relative(de.path(), base).generic_string();
    if (!rel.ends_with(kIndexSuffix)) continue;
    rel.resize(rel.size() - kIndexSuffix.size());
    out.push_back(std::move(rel));
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<AuditEvent> Store::audit_log() const {
  std::vector<AuditEvent> out;
  const auto file = root_ / "audit.jsonl";
  std::int64_t seq = 0;
  for (const auto& line : read_lines(file)) {
    const auto j = parse_line(line, file);
    AuditEvent e;
    e.seq = ++seq;
    e.timestamp = time_of(j, "timestamp");
    e.actor = j.at("actor").get<std::string>();
    const auto action = j.at("action").get<std::string>();
    for (auto a : {AuditAction::CheckIn, AuditAction::CheckOut, AuditAction::Unlock,
                   AuditAction::Read, AuditAction::Purge, AuditAction::MakeCollection,
                   AuditAction::Annotate}) {
      if (audit_action_name(a) == action) e.action = a;
    }
    e.path = j.at("path").get<std::string>();
    if (!j.at("version").is_null()) e.version = j.at("version").get<int>();
    e.detail = j.at("detail").get<std::string>();
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace sheetguard::repo
