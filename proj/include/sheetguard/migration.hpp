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

// Copying selected workbooks into the repository with their links rewritten
// to the new locations. Sources are never modified or deleted.

#pragma once

#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "sheetguard/graph.hpp"
#include "sheetguard/ooxml.hpp"
#include "sheetguard/repo.hpp"

namespace sheetguard::migration {

struct Layout {
  enum class Kind { Flatten, PreserveTree };
  Kind kind = Kind::Flatten;
  std::string root;  // PreserveTree only; a path or URI

  static Layout flatten() { return {}; }
  static Layout preserve_tree(std::string root) { return {Kind::PreserveTree, std::move(root)}; }
  bool operator==(const Layout&) const = default;
};

struct PlanEntry {
  std::string source_uri;  // canonical
  std::string dest_path;   // repository-relative, not encoded

  bool operator==(const PlanEntry&) const = default;
};

struct MigrationPlan {
  std::string base_url;
  Layout layout;
  std::vector<PlanEntry> entries;  // sorted by source_uri
  std::vector<std::string> warnings;

  bool operator==(const MigrationPlan&) const = default;
};

enum class Status { Migrated, Skipped, Failed };
std::string_view status_name(Status s);

struct LogEntry {
  std::string source_uri;
  std::string dest_url;
  Timestamp timestamp{};
  std::string sha256_before;
  std::string sha256_after;  // empty unless Migrated
  std::vector<ooxml::AppliedRewrite> rewrites;
  Status status = Status::Migrated;
  std::string detail;

  bool operator==(const LogEntry&) const = default;
};

// Throws EmptySelection, InvalidPlan (selection outside the graph, or a
// source outside the PreserveTree root).
MigrationPlan plan_migration(const graph::DependencyGraph& g, const std::set<std::string>& selected,
                             const std::string& base_url, const Layout& layout);

// New URL for a link target when it resolves to a plan source.
std::optional<std::string> remap_target(const std::string& raw_target, const MigrationPlan& plan,
                                        const std::string& owner_uri);

// Destination side of a migration.
class RepositoryClient {
 public:
  virtual ~RepositoryClient() = default;
  // Throws RepositoryUnreachable.
  virtual void ping() = 0;
  // Stores a new version at `dest_path` and returns its number.
  virtual int checkin(const std::string& dest_path, const Bytes& bytes,
                      const std::string& comment) = 0;
};

class LocalRepository : public RepositoryClient {
 public:
  LocalRepository(repo::Store& store, std::string author)
      : store_(store), author_(std::move(author)) {}
  void ping() override;
  int checkin(const std::string& dest_path, const Bytes& bytes, const std::string& comment) override;

 private:
  repo::Store& store_;
  std::string author_;
};

using Loader = std::function<Bytes(const std::string& uri)>;

// Precedents are migrated before their dependents; members of a link cycle
// go in URI order and carry a warning. Throws RepositoryUnreachable before
// writing anything, InvalidPlan for duplicate destinations.
std::vector<LogEntry> execute(const MigrationPlan& plan, RepositoryClient& repo,
                              const Loader& load = graph::Resolver::local().load,
                              const Clock& clock = system_clock());

std::string plan_to_json(const MigrationPlan& plan);
// Throws InvalidPlan.
MigrationPlan plan_from_json(std::string_view text);

enum class LogFormat { Jsonl, Csv };
std::string write_log(const std::vector<LogEntry>& log, LogFormat format);
// Reads the JSON-lines form. Throws SyntaxError.
std::vector<LogEntry> read_log_jsonl(std::string_view text);

}  // namespace sheetguard::migration
