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

#include "sheetguard/migration.hpp"

#include <algorithm>
#include <map>

#include "json.hpp"
#include "sheetguard/error.hpp"
#include "sheetguard/uri.hpp"

namespace sheetguard::migration {

using nlohmann::json;

std::string_view status_name(Status s) {
  switch (s) {
    case Status::Migrated: return "Migrated";
    case Status::Skipped: return "Skipped";
    case Status::Failed: return "Failed";
  }
  return "Unknown";
}

namespace {

std::string trim_slashes(std::string s) {
  while (!s.empty() && s.back() == '/') s.pop_back();
  return s;
}

std::string tree_prefix(const std::string& root) {
  std::string n = uri::normalize(root);
  if (!uri::is_absolute(n)) n = uri::from_path(root);
  return trim_slashes(n) + "/";
}

std::string with_suffix(const std::string& name, int k) {
  const auto dot = name.rfind('.');
  const auto slash = name.rfind('/');
  const bool has_ext = dot != std::string::npos && dot != 0 &&
                       (slash == std::string::npos || dot > slash + 1);
  const std::string stem = has_ext ? name.substr(0, dot) : name;
  const std::string ext = has_ext ? name.substr(dot) : "";
  return stem + "-" + std::to_string(k) + ext;
}

std::string dest_url(const MigrationPlan& plan, const PlanEntry& e) {
  return trim_slashes(plan.base_url) + "/" + uri::percent_encode_path(e.dest_path);
}

void check_unique(const MigrationPlan& plan) {
  std::set<std::string> dests, sources;
  for (const auto& e : plan.entries) {
    if (e.dest_path.empty() || !dests.insert(e.dest_path).second) {
      throw Error(ErrorCode::InvalidPlan, "duplicate or empty destination: " + e.dest_path);
    }
    if (!sources.insert(e.source_uri).second) {
      throw Error(ErrorCode::InvalidPlan, "source listed twice: " + e.source_uri);
    }
  }
}

}  // namespace

MigrationPlan plan_migration(const graph::DependencyGraph& g, const std::set<std::string>& selected,
                             const std::string& base_url, const Layout& layout) {
  if (selected.empty()) throw Error(ErrorCode::EmptySelection, "no workbooks selected");
  std::set<std::string> chosen;
  for (const auto& s : selected) {
    const auto key = uri::resolve("", s);
    if (!g.has_node(key)) throw Error(ErrorCode::InvalidPlan, "not in the dependency graph: " + s);
    chosen.insert(key);
  }

  MigrationPlan plan;
  plan.base_url = trim_slashes(base_url);
  plan.layout = layout;
  std::set<std::string> taken;
  const std::string prefix =
      layout.kind == Layout::Kind::PreserveTree ? tree_prefix(layout.root) : std::string();
  for (const auto& src : chosen) {
    std::string dest;
    if (layout.kind == Layout::Kind::Flatten) {
      dest = uri::basename(src);
      const std::string base = dest;
      for (int k = 2; taken.count(dest); ++k) dest = with_suffix(base, k);
    } else {
      if (src.rfind(prefix, 0) != 0) {
        throw Error(ErrorCode::InvalidPlan, src + " is outside " + layout.root);
      }
      dest = src.substr(prefix.size());
    }
    taken.insert(dest);
    plan.entries.push_back({src, dest});
  }

  for (const auto& src : chosen) {
    for (const auto& p : graph::precedents(g, src)) {
      if (!chosen.count(p)) plan.warnings.push_back(src + " depends on unselected " + p);
    }
  }
  return plan;
}

std::optional<std::string> remap_target(const std::string& raw_target, const MigrationPlan& plan,
                                        const std::string& owner_uri) {
  const auto target = uri::resolve(owner_uri, raw_target);
  for (const auto& e : plan.entries) {
    if (e.source_uri == target) return dest_url(plan, e);
  }
  return std::nullopt;
}

void LocalRepository::ping() {
  std::error_code ec;
  if (!std::filesystem::is_directory(store_.root() / "index", ec)) {
    throw Error(ErrorCode::RepositoryUnreachable, "no store at " + store_.root().string());
  }
}

int LocalRepository::checkin(const std::string& dest_path, const Bytes& bytes,
                             const std::string& comment) {
  return store_.checkin(dest_path, bytes, author_, comment).version;
}

std::vector<LogEntry> execute(const MigrationPlan& plan, RepositoryClient& repo, const Loader& load,
                              const Clock& clock) {
  check_unique(plan);
  repo.ping();

  const std::size_t n = plan.entries.size();
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < n; ++i) index[plan.entries[i].source_uri] = i;

  struct Source {
    std::optional<Bytes> bytes;
    std::vector<ExternalLink> links;
    std::string error;
    std::set<std::size_t> deps;  // precedents inside the plan
  };
  std::vector<Source> src(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& uri = plan.entries[i].source_uri;
    try {
      src[i].bytes = load(uri);
      src[i].links = ooxml::list_link_targets(*src[i].bytes);
    } catch (const std::exception& e) {
      src[i].error = e.what();
      continue;
    }
    for (const auto& l : src[i].links) {
      const auto it = index.find(uri::resolve(uri, l.target));
      if (it != index.end()) src[i].deps.insert(it->second);
    }
  }

  // Condense cycles into units; run the smallest ready unit first.
  graph::DependencyGraph dg;
  for (const auto& e : plan.entries) dg.nodes.push_back({e.source_uri});
  for (std::size_t i = 0; i < n; ++i) {
    for (auto j : src[i].deps) dg.edges.push_back({plan.entries[i].source_uri, plan.entries[j].source_uri, 1});
  }
  std::vector<std::size_t> unit(n);
  std::vector<std::vector<std::size_t>> units;
  std::vector<bool> cyclic;
  std::vector<bool> placed(n, false);
  for (const auto& comp : graph::cycles(dg)) {
    std::vector<std::size_t> members;
    for (const auto& u : comp) members.push_back(index.at(u));
    for (auto m : members) {
      unit[m] = units.size();
      placed[m] = true;
    }
    units.push_back(members);
    cyclic.push_back(true);
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (placed[i]) continue;
    unit[i] = units.size();
    units.push_back({i});
    cyclic.push_back(false);
  }

  std::vector<std::size_t> order;
  std::vector<bool> done_unit(units.size(), false);
  std::vector<bool> done(n, false);
  while (order.size() < n) {
    std::optional<std::size_t> best;
    for (std::size_t u = 0; u < units.size(); ++u) {
      if (done_unit[u]) continue;
      bool ready = true;
      for (auto m : units[u]) {
        for (auto d : src[m].deps) {
          if (unit[d] != u && !done[d]) ready = false;
        }
      }
      if (ready && (!best || units[u].front() < units[*best].front())) best = u;
    }
    // The condensation is acyclic, so some unit is always ready.
    done_unit[*best] = true;
    for (auto m : units[*best]) {
      order.push_back(m);
      done[m] = true;
    }
  }

  std::vector<LogEntry> log;
  std::vector<std::optional<Status>> outcome(n);
  for (auto i : order) {
    const auto& entry = plan.entries[i];
    LogEntry le;
    le.source_uri = entry.source_uri;
    le.dest_url = dest_url(plan, entry);
    le.timestamp = clock();
    std::vector<std::string> notes;
    if (cyclic[unit[i]]) {
      std::string others;
      for (auto m : units[unit[i]]) {
        if (m != i) others += (others.empty() ? "" : ", ") + plan.entries[m].source_uri;
      }
      notes.push_back("Warn: link cycle" + (others.empty() ? std::string(" (self link)") : " with " + others));
    }

    auto finish = [&](Status s, const std::string& why) {
      le.status = s;
      if (!why.empty()) notes.insert(notes.begin(), why);
      for (std::size_t k = 0; k < notes.size(); ++k) le.detail += (k ? "; " : "") + notes[k];
      outcome[i] = s;
      log.push_back(std::move(le));
    };

    if (!src[i].bytes) {
      finish(Status::Failed, "cannot read source: " + src[i].error);
      continue;
    }
    le.sha256_before = sha256_hex(*src[i].bytes);
    std::string blocked;
    for (auto d : src[i].deps) {
      if (outcome[d] && *outcome[d] != Status::Migrated) blocked = plan.entries[d].source_uri;
    }
    if (!blocked.empty()) {
      finish(Status::Skipped, "precedent " + blocked + " was not migrated");
      continue;
    }

    std::map<std::string, std::string> mapping;
    for (const auto& l : src[i].links) {
      if (const auto url = remap_target(l.target, plan, entry.source_uri)) {
        mapping[l.target] = *url;
      } else {
        notes.push_back("link " + std::to_string(l.index) + " to " + l.target +
                        " left unchanged (not in plan)");
      }
    }
    try {
      auto result = ooxml::rewrite_links(*src[i].bytes, mapping);
      repo.checkin(entry.dest_path, result.bytes, "migrated from " + entry.source_uri);
      le.sha256_after = sha256_hex(result.bytes);
      le.rewrites = std::move(result.applied);
    } catch (const std::exception& e) {
      le.rewrites.clear();
      finish(Status::Failed, e.what());
      continue;
    }
    finish(Status::Migrated, "");
  }
  return log;
}

std::string plan_to_json(const MigrationPlan& plan) {
  json layout = {{"kind", plan.layout.kind == Layout::Kind::Flatten ? "Flatten" : "PreserveTree"}};
  if (plan.layout.kind == Layout::Kind::PreserveTree) layout["root"] = plan.layout.root;
  json entries = json::array();
  for (const auto& e : plan.entries) {
    entries.push_back({{"source_uri", e.source_uri}, {"dest_path", e.dest_path}});
  }
  return json{{"base_url", plan.base_url},
              {"layout", layout},
              {"entries", entries},
              {"warnings", plan.warnings}}
             .dump(2) +
         "\n";
}

MigrationPlan plan_from_json(std::string_view text) {
  MigrationPlan plan;
  try {
    const json j = json::parse(text);
    plan.base_url = j.at("base_url").get<std::string>();
    const auto& layout = j.at("layout");
    const auto kind = layout.at("kind").get<std::string>();
    if (kind == "Flatten") {
      plan.layout = Layout::flatten();
    } else if (kind == "PreserveTree") {
      plan.layout = Layout::preserve_tree(layout.at("root").get<std::string>());
    } else {
      throw Error(ErrorCode::InvalidPlan, "unknown layout " + kind);
    }
    for (const auto& e : j.at("entries")) {
      plan.entries.push_back({uri::resolve("", e.at("source_uri").get<std::string>()),
                              e.at("dest_path").get<std::string>()});
    }
    if (j.contains("warnings")) plan.warnings = j.at("warnings").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidPlan, std::string("plan JSON: ") + e.what());
  }
  std::sort(plan.entries.begin(), plan.entries.end(),
            [](const PlanEntry& a, const PlanEntry& b) { return a.source_uri < b.source_uri; });
  check_unique(plan);
  return plan;
}

std::string write_log(const std::vector<LogEntry>& log, LogFormat format) {
  std::string out;
  if (format == LogFormat::Csv) {
    out = csv_row({"source_uri", "dest_url", "timestamp", "status", "sha256_before",
                   "sha256_after", "rewrites", "detail"});
    for (const auto& e : log) {
      std::string rw;
      for (const auto& r : e.rewrites) {
        rw += (rw.empty() ? "" : "; ") + std::to_string(r.index) + ": " + r.old_target + " -> " +
              r.new_target;
      }
      out += csv_row({e.source_uri, e.dest_url, format_timestamp(e.timestamp),
                      std::string(status_name(e.status)), e.sha256_before, e.sha256_after, rw,
                      e.detail});
    }
    return out;
  }
  for (const auto& e : log) {
    json rw = json::array();
    for (const auto& r : e.rewrites) {
      rw.push_back({{"link_index", r.index}, {"old_target", r.old_target}, {"new_target", r.new_target}});
    }
    out += json{{"source_uri", e.source_uri},
                {"dest_url", e.dest_url},
                {"timestamp", format_timestamp(e.timestamp)},
                {"sha256_before", e.sha256_before},
                {"sha256_after", e.sha256_after},
                {"rewrites", rw},
                {"status", status_name(e.status)},
                {"detail", e.detail}}
               .dump() +
           "\n";
  }
  return out;
}

std::vector<LogEntry> read_log_jsonl(std::string_view text) {
  std::vector<LogEntry> out;
  std::size_t offset = 0;
  for (const auto& line : split(text, '\n')) {
    const std::size_t at = offset;
    offset += line.size() + 1;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      LogEntry e;
      e.source_uri = j.at("source_uri").get<std::string>();
      e.dest_url = j.at("dest_url").get<std::string>();
      const auto t = parse_timestamp(j.at("timestamp").get<std::string>());
      if (!t) throw Error(ErrorCode::SyntaxError, "bad timestamp in migration log", at);
      e.timestamp = *t;
      e.sha256_before = j.at("sha256_before").get<std::string>();
      e.sha256_after = j.at("sha256_after").get<std::string>();
      for (const auto& r : j.at("rewrites")) {
        e.rewrites.push_back({r.at("link_index").get<int>(), r.at("old_target").get<std::string>(),
                              r.at("new_target").get<std::string>()});
      }
      const auto s = j.at("status").get<std::string>();
      if (s == "Migrated") {
        e.status = Status::Migrated;
      } else if (s == "Skipped") {
        e.status = Status::Skipped;
      } else if (s == "Failed") {
        e.status = Status::Failed;
      } else {
        throw Error(ErrorCode::SyntaxError, "unknown status " + s, at);
      }
      e.detail = j.at("detail").get<std::string>();
      out.push_back(std::move(e));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::SyntaxError, std::string("migration log: ") + e.what(), at);
    }
  }
  return out;
}

}  // namespace sheetguard::migration
