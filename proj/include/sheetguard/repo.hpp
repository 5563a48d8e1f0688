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

// Versioned content store.
//
// On-disk layout under the store root:
//
//   objects/ab/<sha256>             content, named by SHA-256
//   index/<path>.versions.jsonl     one line per version, plus purge lines
//   index/<dir>/                    collections are directories
//   locks/<sha256(path)>.json       active check-out lock
//   locks/<sha256(path)>.mutex      flock target serializing one path
//   audit.jsonl                     append-only audit trail
//   store.lock                      shared by operations, exclusive for retention
//
// Every operation takes OS file locks (flock), so several threads or
// processes may share one store root.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sheetguard/util.hpp"

namespace sheetguard::repo {

struct VersionRecord {
  std::string path;
  int version = 1;
  std::string sha256;
  std::int64_t size_bytes = 0;
  std::string author;
  Timestamp timestamp{};
  std::string comment;
  bool purged = false;

  bool operator==(const VersionRecord&) const = default;
};

struct LockToken {
  std::string path;
  std::string owner;
  std::string token;  // 128-bit lowercase hex
  Timestamp acquired{};
  std::int64_t ttl_seconds = 0;

  Timestamp expires() const { return acquired + std::chrono::seconds{ttl_seconds}; }
  bool operator==(const LockToken&) const = default;
};

enum class AuditAction { CheckIn, CheckOut, Unlock, Read, Purge, MakeCollection, Annotate };
std::string_view audit_action_name(AuditAction a);

struct AuditEvent {
  std::int64_t seq = 0;  // line number in audit.jsonl, from 1
  Timestamp timestamp{};
  std::string actor;
  AuditAction action = AuditAction::Read;
  std::string path;
  std::optional<int> version;
  std::string detail;
};

struct RetentionPolicy {
  enum class Kind { KeepLast, KeepNewerThan };
  Kind kind = Kind::KeepLast;
  int keep_last = 1;
  Timestamp newer_than{};

  static RetentionPolicy last(int k) { return {Kind::KeepLast, k, {}}; }
  static RetentionPolicy newer(Timestamp t) { return {Kind::KeepNewerThan, 0, t}; }
};

// Listing entry for a resource or collection.
struct EntryInfo {
  std::string path;
  bool collection = false;
  std::int64_t size_bytes = 0;
  Timestamp modified{};
  int version_count = 0;
  std::string sha256;  // latest version
};

// Canonical repository path: no leading or trailing '/', no empty, "." or
// ".." segments, no backslashes or control characters. "" names the root
// collection. Throws InvalidPath.
std::string normalize_path(std::string_view path);

class Store {
 public:
  explicit Store(std::filesystem::path root, Clock clock = system_clock());

  const std::filesystem::path& root() const { return root_; }

  // Throws Locked, InvalidPath, StorageFailure. Parent collections are
  // created as needed. A matching token releases the lock unless
  // `keep_lock` is set (WebDAV clients save several times under one lock).
  VersionRecord checkin(std::string_view path, std::string_view bytes, std::string_view author,
                        std::string_view comment,
                        const std::optional<std::string>& token = std::nullopt,
                        bool keep_lock = false);

  // Throws NotFound, GoneVersion.
  Bytes get(std::string_view path, std::optional<int> version = std::nullopt,
            std::string_view actor = "");

  // Throws Locked, InvalidPath.
  LockToken lock(std::string_view path, std::string_view owner, std::int64_t ttl_seconds);
  // Throws BadToken.
  void unlock(std::string_view path, std::string_view token, std::string_view actor = "");
  std::optional<LockToken> active_lock(std::string_view path) const;

  // Throws NotFound.
  std::vector<VersionRecord> history(std::string_view path) const;

  // Throws InvalidPolicy.
  std::vector<std::pair<std::string, int>> apply_retention(const RetentionPolicy& policy,
                                                           std::string_view actor = "");

  // Throws InvalidPath when something already exists at `path`, NotFound
  // when the parent collection is missing.
  void make_collection(std::string_view path, std::string_view actor = "");

  // Records an audit annotation against an existing version.
  void annotate(std::string_view path, int version, std::string_view actor,
                std::string_view detail);

  bool is_resource(std::string_view path) const;
  bool is_collection(std::string_view path) const;
  std::optional<EntryInfo> stat(std::string_view path) const;
  // Direct children of a collection, sorted by path. Throws NotFound.
  std::vector<EntryInfo> list(std::string_view collection) const;
  // Every resource path in the store, sorted.
  std::vector<std::string> all_resources() const;

  std::vector<AuditEvent> audit_log() const;

 private:
  std::filesystem::path index_file(const std::string& path) const;
  std::filesystem::path index_dir(const std::string& path) const;
  std::filesystem::path object_file(const std::string& sha) const;
  std::filesystem::path lock_file(const std::string& path) const;
  std::filesystem::path mutex_file(const std::string& path) const;
  std::vector<VersionRecord> read_index(const std::string& path) const;
  std::optional<LockToken> read_lock(const std::string& path) const;
  void append_audit(AuditAction action, std::string_view actor, const std::string& path,
                    std::optional<int> version, std::string_view detail);

  std::filesystem::path root_;
  Clock clock_;
};

}  // namespace sheetguard::repo
