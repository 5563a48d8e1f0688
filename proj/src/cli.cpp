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

#include "sheetguard/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "sheetguard/dav.hpp"
#include "sheetguard/discovery.hpp"
#include "sheetguard/error.hpp"
#include "sheetguard/graph.hpp"
#include "sheetguard/migration.hpp"
#include "sheetguard/ooxml.hpp"
#include "sheetguard/repo.hpp"
#include "sheetguard/risk.hpp"
#include "sheetguard/uri.hpp"
#include "sheetguard/workflow.hpp"

namespace sheetguard::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::optional<std::string> env(const char* name) {
  const char* v = std::getenv(name);
  if (v == nullptr || *v == '\0') return std::nullopt;
  return std::string(v);
}

// Command-line values shared by the handlers.
struct Args {
  std::string config;
  std::string store;
  std::string user;

  // scan / graph
  std::vector<std::string> roots;
  std::string query;
  std::string format;
  bool include_hidden = false;
  bool rate = false;
  bool cycles = false;
  std::string inventory;

  // analyze
  std::string target;
  std::string risk_config;

  // migrate
  std::vector<std::string> select;
  bool select_all = false;
  std::string base_url;
  std::string layout = "flatten";
  std::string layout_root;
  std::string output;
  std::string plan_file;
  std::string log_file;
  std::string dav_url;

  // diff
  std::string left, right;
  bool notify = false;

  // repo
  std::string path;
  std::string file;
  std::string comment;
  std::string token;
  int version = 0;
  std::int64_t ttl = 3600;
  int keep_last = 0;
  std::string newer_than;

  // workflow
  std::string id;
  int base = 0, proposed = 0;
  std::string title, description, reviewer;

  // serve
  std::string bind;
};

struct Context {
  Args a;
  std::ostream& out;
  std::ostream& err;
  CliConfig cfg;

  fs::path store_root() const {
    if (!a.store.empty()) return a.store;
    if (cfg.store_root.empty()) {
      throw Error(ErrorCode::InvalidConfig,
                  "no store configured; pass --store or set store_root in the config file");
    }
    return cfg.store_root;
  }

  risk::RiskConfig risk_config() const {
    fs::path p;
    if (!a.risk_config.empty()) p = a.risk_config;
    else if (cfg.risk_config) p = *cfg.risk_config;
    if (p.empty()) return {};
    std::string text;
    try {
      text = read_file(p);
    } catch (const Error&) {
      throw Error(ErrorCode::InvalidConfig, "cannot read risk config " + p.string());
    }
    return risk::RiskConfig::from_json(text);
  }
};

std::string to_uri(const std::string& s) {
  if (s.rfind("file:", 0) == 0 || s.find("://") != std::string::npos) return uri::normalize(s);
  return uri::from_path(fs::absolute(s));
}

void require_format(const std::string& f, std::initializer_list<std::string_view> allowed) {
  for (auto a : allowed) {
    if (f == a) return;
  }
  throw CLI::ValidationError("--format", "unsupported format '" + f + "'");
}

void emit(Context& c, const std::string& data) {
  if (c.a.output.empty()) {
    c.out << data;
  } else {
    write_file_atomic(c.a.output, data);
  }
}

// ---------------------------------------------------------------------------

std::vector<discovery::InventoryRecord> scan_roots(Context& c, bool rate) {
  discovery::ScanOptions opts;
  opts.roots = c.a.roots;
  opts.include_hidden = c.a.include_hidden;
  if (!c.a.query.empty()) opts.query = discovery::parse_query(c.a.query);
  if (rate) opts.risk = c.risk_config();
  return discovery::scan(opts);
}

int cmd_scan(Context& c) {
  const auto fmt = c.a.format.empty() ? "json" : c.a.format;
  const auto records = scan_roots(c, c.a.rate);
  emit(c, discovery::export_inventory(records, fmt == "csv" ? discovery::Format::Csv
                                                             : discovery::Format::Json));
  c.err << records.size() << " file(s)\n";
  return kOk;
}

json analyze_file(const fs::path& file, const risk::RiskConfig& rc, std::string& text) {
  const auto bytes = read_file(file);
  const auto wb = ooxml::read_package(bytes, uri::from_path(fs::absolute(file)));
  auto findings = risk::diagnose(wb);
  const auto broken = risk::broken_links(wb, graph::Resolver::local().exists);
  findings.insert(findings.end(), broken.begin(), broken.end());
  const auto s = risk::score(wb, findings, rc);
  text = risk::report_text(findings, s);
  return json::parse(risk::report_json(findings, s));
}

int cmd_analyze(Context& c) {
  const auto fmt = c.a.format.empty() ? "text" : c.a.format;
  const auto rc = c.risk_config();
  const fs::path target = c.a.target;
  const auto ext = to_lower(target.extension().string());
  if (ext == ".json" || ext == ".csv") {
    const auto records = discovery::import_inventory(
        read_file(target), ext == ".csv" ? discovery::Format::Csv : discovery::Format::Json);
    json all = json::array();
    std::string text_out;
    int failures = 0;
    for (const auto& r : records) {
      if (r.kind != discovery::FileKind::Spreadsheet && r.kind != discovery::FileKind::MacroSpreadsheet) continue;
      const auto path = uri::to_path(r.uri);
      json entry;
      std::string text;
      try {
        if (!path) throw Error(ErrorCode::InvalidArgument, "not a local file");
        entry = analyze_file(*path, rc, text);
      } catch (const Error& e) {
        ++failures;
        entry = {{"error", e.what()}};
        text = std::string("error: ") + e.what() + "\n";
      }
      entry["uri"] = r.uri;
      all.push_back(entry);
      text_out += "== " + r.uri + "\n" + text + "\n";
    }
    c.out << (fmt == "json" ? all.dump(2) + "\n" : text_out);
    return failures ? kOperationalError : kOk;
  }
  std::string text;
  const auto report = analyze_file(target, rc, text);
  c.out << (fmt == "json" ? report.dump(2) + "\n" : text);
  return kOk;
}

graph::DependencyGraph graph_for(Context& c) {
  std::vector<discovery::InventoryRecord> records;
  if (!c.a.inventory.empty()) {
    const auto ext = to_lower(fs::path(c.a.inventory).extension().string());
    records = discovery::import_inventory(read_file(c.a.inventory),
                                          ext == ".csv" ? discovery::Format::Csv : discovery::Format::Json);
  }
  if (!c.a.roots.empty()) {
    const auto more = scan_roots(c, false);
    records.insert(records.end(), more.begin(), more.end());
  }
  if (records.empty() && c.a.roots.empty() && c.a.inventory.empty()) {
    throw CLI::ValidationError("roots", "give scan roots or --inventory");
  }
  return graph::build_graph(records);
}

int cmd_graph(Context& c) {
  const auto fmt = c.a.format.empty() ? "dot" : c.a.format;
  const auto g = graph_for(c);
  if (c.a.cycles) {
    std::string text;
    for (const auto& cycle : graph::cycles(g)) {
      for (const auto& u : cycle) text += u + " -> ";
      text += cycle.front() + "\n";
    }
    emit(c, text);
    return kOk;
  }
  emit(c, graph::emit(g, fmt == "json" ? graph::Format::Json : graph::Format::Dot));
  for (const auto& b : g.broken) c.err << "broken: " << b.from << " -> " << b.target << " (" << b.detail << ")\n";
  return kOk;
}

int cmd_migrate_plan(Context& c) {
  const auto g = graph_for(c);
  std::set<std::string> selected;
  if (c.a.select_all) {
    for (const auto& n : g.nodes) {
      if (n.kind == graph::NodeKind::Spreadsheet && graph::Resolver::local().exists(n.uri)) selected.insert(n.uri);
    }
  }
  for (const auto& s : c.a.select) selected.insert(to_uri(s));
  migration::Layout layout;
  if (c.a.layout == "tree") {
    auto root = c.a.layout_root;
    if (root.empty() && !c.a.roots.empty()) root = c.a.roots.front();
    if (root.empty()) throw CLI::ValidationError("--root", "tree layout needs --root");
    layout = migration::Layout::preserve_tree(to_uri(root));
  }
  const auto plan = migration::plan_migration(g, selected, c.a.base_url, layout);
  for (const auto& w : plan.warnings) c.err << "warning: " << w << "\n";
  emit(c, migration::plan_to_json(plan));
  return kOk;
}

int cmd_migrate_execute(Context& c) {
  const auto plan = migration::plan_from_json(read_file(c.a.plan_file));
  std::unique_ptr<repo::Store> store;
  std::unique_ptr<migration::RepositoryClient> client;
  if (!c.a.dav_url.empty()) {
    client = std::make_unique<dav::DavRepository>(c.a.dav_url, c.a.user,
                                                  env("SHEETGUARD_PASSWORD").value_or(""));
  } else {
    store = std::make_unique<repo::Store>(c.store_root());
    client = std::make_unique<migration::LocalRepository>(*store, c.a.user);
  }
  const auto log = migration::execute(plan, *client);
  const auto fmt = c.a.format.empty() ? "jsonl" : c.a.format;
  const auto text = migration::write_log(log, fmt == "csv" ? migration::LogFormat::Csv
                                                           : migration::LogFormat::Jsonl);
  if (c.a.log_file.empty()) c.out << text;
  else write_file_atomic(c.a.log_file, text);
  int counts[3] = {0, 0, 0};
  for (const auto& e : log) ++counts[static_cast<int>(e.status)];
  c.err << counts[0] << " migrated, " << counts[1] << " skipped, " << counts[2] << " failed\n";
  return counts[1] + counts[2] ? kOperationalError : kOk;
}

// "file.xlsx" or "repo/path.xlsx@3".
Workbook load_side(Context& c, const std::string& spec, std::unique_ptr<repo::Store>& store) {
  if (fs::is_regular_file(spec)) return ooxml::read_package(read_file(spec), uri::from_path(fs::absolute(spec)));
  const auto at = spec.rfind('@');
  if (at != std::string::npos) {
    try {
      std::size_t used = 0;
      const int v = std::stoi(spec.substr(at + 1), &used);
      if (used == spec.size() - at - 1) {
        if (!store) store = std::make_unique<repo::Store>(c.store_root());
        return ooxml::read_package(store->get(spec.substr(0, at), v, c.a.user), spec);
      }
    } catch (const std::logic_error&) {
    }
  }
  throw Error(ErrorCode::NotFound, "no such file or repository version: " + spec);
}

int cmd_diff(Context& c) {
  const auto fmt = c.a.format.empty() ? "text" : c.a.format;
  std::unique_ptr<repo::Store> store;
  const auto left = load_side(c, c.a.left, store);
  const auto right = load_side(c, c.a.right, store);
  const auto cs = audit::diff_workbooks(left, right, c.a.left, c.a.right);
  const auto format = fmt == "json" ? audit::ReportFormat::Json
                      : fmt == "csv" ? audit::ReportFormat::Csv
                                     : audit::ReportFormat::Text;
  auto report = audit::render_change_report(cs, format);
  if (format == audit::ReportFormat::Text && report.back() != '\n') report += '\n';
  c.out << report;
  if (c.a.notify) {
    if (c.cfg.outbox.empty()) throw Error(ErrorCode::InvalidConfig, "no outbox configured");
    for (const auto& p : audit::notify(cs, c.cfg.subscriptions, c.cfg.outbox)) c.err << "notified: " << p.string() << "\n";
  }
  return kOk;
}

json record_json(const repo::VersionRecord& r) {
  return {{"path", r.path},     {"version", r.version},
          {"sha256", r.sha256}, {"size", r.size_bytes},
          {"author", r.author}, {"timestamp", format_timestamp(r.timestamp)},
          {"comment", r.comment}, {"purged", r.purged}};
}

int cmd_repo(Context& c, const std::string& sub) {
  repo::Store store(c.store_root());
  if (sub == "checkin") {
    const auto bytes = read_file(c.a.file);
    const auto rec = store.checkin(c.a.path, bytes, c.a.user, c.a.comment,
                                   c.a.token.empty() ? std::nullopt : std::optional(c.a.token));
    c.out << record_json(rec).dump() << "\n";
  } else if (sub == "get") {
    const auto bytes = store.get(c.a.path, c.a.version > 0 ? std::optional(c.a.version) : std::nullopt, c.a.user);
    if (c.a.output.empty()) c.out << bytes;
    else write_file_atomic(c.a.output, bytes);
  } else if (sub == "lock") {
    const auto t = store.lock(c.a.path, c.a.user, c.a.ttl);
    c.out << json{{"path", t.path}, {"owner", t.owner}, {"token", t.token},
                  {"acquired", format_timestamp(t.acquired)}, {"ttl_seconds", t.ttl_seconds}}
                 .dump()
          << "\n";
  } else if (sub == "unlock") {
    store.unlock(c.a.path, c.a.token, c.a.user);
  } else if (sub == "history") {
    const auto hist = store.history(c.a.path);
    if (c.a.format == "json") {
      json arr = json::array();
      for (const auto& r : hist) arr.push_back(record_json(r));
      c.out << arr.dump(2) << "\n";
    } else {
      for (const auto& r : hist) {
        c.out << r.version << "\t" << format_timestamp(r.timestamp) << "\t" << r.author << "\t"
              << r.size_bytes << "\t" << r.sha256 << (r.purged ? "\tpurged" : "") << "\t" << r.comment << "\n";
      }
    }
  } else if (sub == "retain") {
    repo::RetentionPolicy policy;
    if (c.a.keep_last > 0 && c.a.newer_than.empty()) {
      policy = repo::RetentionPolicy::last(c.a.keep_last);
    } else if (!c.a.newer_than.empty() && c.a.keep_last == 0) {
      const auto t = parse_timestamp(c.a.newer_than);
      if (!t) throw CLI::ValidationError("--newer-than", "not a timestamp: " + c.a.newer_than);
      policy = repo::RetentionPolicy::newer(*t);
    } else {
      throw CLI::ValidationError("retain", "give exactly one of --keep-last or --newer-than");
    }
    for (const auto& [p, v] : store.apply_retention(policy, c.a.user)) c.out << p << "\t" << v << "\n";
  } else if (sub == "mkcol") {
    store.make_collection(c.a.path, c.a.user);
  } else if (sub == "ls") {
    for (const auto& e : store.list(c.a.path)) {
      c.out << (e.collection ? e.path + "/" : e.path) << "\t" << e.version_count << "\t" << e.size_bytes << "\n";
    }
  } else if (sub == "audit") {
    for (const auto& e : store.audit_log()) {
      c.out << e.seq << "\t" << format_timestamp(e.timestamp) << "\t" << e.actor << "\t"
            << repo::audit_action_name(e.action) << "\t" << e.path << "\t"
            << (e.version ? std::to_string(*e.version) : "-") << "\t" << e.detail << "\n";
    }
  }
  return kOk;
}

json request_json(const workflow::ChangeRequest& r) {
  return {{"id", r.id},
          {"resource_path", r.resource_path},
          {"requester", r.requester},
          {"reviewer", r.reviewer},
          {"title", r.title},
          {"base_version", r.base_version},
          {"proposed_version", r.proposed_version},
          {"state", workflow::state_name(r.state)}};
}

int cmd_workflow(Context& c, const std::string& sub) {
  repo::Store store(c.store_root());
  const auto log = c.cfg.workflow_log.empty() ? c.store_root() / "workflow.jsonl" : c.cfg.workflow_log;
  if (sub == "verify") {
    std::string text;
    if (fs::exists(log)) text = read_file(log);
    const auto v = workflow::verify_log_text(text);
    if (v.ok) {
      c.out << "ok\n";
      return kOk;
    }
    c.out << "tampered at seq " << v.first_bad_seq << "\n";
    return kOperationalError;
  }
  workflow::Workflow wf(log, store);
  if (sub == "create") {
    workflow::CreateParams p;
    p.id = c.a.id;
    p.resource_path = c.a.path;
    p.requester = c.a.user;
    p.reviewer = c.a.reviewer;
    p.title = c.a.title;
    p.description = c.a.description;
    p.base_version = c.a.base;
    p.proposed_version = c.a.proposed;
    c.out << request_json(wf.create_request(p)).dump() << "\n";
    return kOk;
  }
  if (sub == "list") {
    for (const auto& r : wf.requests()) c.out << request_json(r).dump() << "\n";
    return kOk;
  }
  if (sub == "show") {
    c.out << request_json(wf.get(c.a.id)).dump() << "\n";
    return kOk;
  }
  static const std::map<std::string, workflow::Action> actions = {
      {"submit", workflow::Action::Submit},   {"review", workflow::Action::StartReview},
      {"approve", workflow::Action::Approve}, {"reject", workflow::Action::Reject},
      {"rework", workflow::Action::Rework},   {"withdraw", workflow::Action::Withdraw}};
  const auto action = actions.at(sub);
  std::optional<workflow::Signature> sig;
  if (action == workflow::Action::Approve || action == workflow::Action::Reject) {
    // The signature covers the bytes the signer can fetch right now.
    const auto cr = wf.get(c.a.id);
    sig = workflow::sign(c.a.user, store.get(cr.resource_path, cr.proposed_version, c.a.user), action,
                         now_utc());
  }
  c.out << request_json(wf.transition(c.a.id, action, c.a.user, sig)).dump() << "\n";
  return kOk;
}

int cmd_serve(Context& c) {
  if (c.cfg.text.empty()) throw Error(ErrorCode::InvalidConfig, "serve needs a config file with users");
  auto sc = dav::parse_server_config(c.cfg.text, c.cfg.file.parent_path());
  if (!c.a.store.empty()) sc.store_root = c.a.store;
  if (!c.a.bind.empty()) {
    std::tie(sc.host, sc.port) = dav::parse_bind(c.a.bind);
  }
  repo::Store store(sc.store_root);
  dav::Server server(sc, store);
  server.start();
  c.err << "serving " << sc.store_root.string() << " at " << server.base_url() << "\n";
  server.wait();
  return kOk;
}

}  // namespace

CliConfig load_config(const fs::path& file) {
  CliConfig cfg;
  cfg.file = file;
  try {
    cfg.text = read_file(file);
  } catch (const Error&) {
    throw Error(ErrorCode::InvalidConfig, "cannot read config " + file.string());
  }
  json j;
  try {
    j = json::parse(cfg.text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, file.string() + ": " + e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, file.string() + ": expected an object");
  const auto dir = fs::absolute(file).parent_path();
  const auto path_of = [&](const char* key) -> fs::path {
    const fs::path p = j.at(key).get<std::string>();
    return p.is_relative() ? dir / p : p;
  };
  try {
    if (j.contains("store_root")) cfg.store_root = path_of("store_root");
    if (j.contains("outbox")) cfg.outbox = path_of("outbox");
    if (j.contains("workflow_log")) cfg.workflow_log = path_of("workflow_log");
    if (j.contains("bind")) cfg.bind = j.at("bind").get<std::string>();
    if (j.contains("risk_config")) {
      cfg.risk_config = path_of("risk_config");
      std::string text;
      try {
        text = read_file(*cfg.risk_config);
      } catch (const Error&) {
        throw Error(ErrorCode::InvalidConfig, "cannot read risk config " + cfg.risk_config->string());
      }
      risk::RiskConfig::from_json(text);
    }
    if (j.contains("subscriptions")) {
      for (const auto& s : j.at("subscriptions")) {
        cfg.subscriptions.push_back(
            {s.at("user").get<std::string>(), audit::parse_filter(s.at("filter").get<std::string>())});
      }
    }
    for (const auto* p : {&cfg.store_root, &cfg.outbox}) {
      if (!p->empty() && fs::exists(*p) && !fs::is_directory(*p)) {
        throw Error(ErrorCode::InvalidConfig, p->string() + " is not a directory");
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, file.string() + ": " + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::InvalidConfig) throw;
    throw Error(ErrorCode::InvalidConfig, file.string() + ": " + e.what());
  }
  return cfg;
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Args a;
  CLI::App app{"Spreadsheet inventory, risk analysis, link-safe migration and change control.",
               "sheetguard"};
  app.require_subcommand(1);
  app.add_option("--config", a.config, "JSON config file (default: $SHEETGUARD_CONFIG)");
  app.add_option("--store", a.store, "Repository store directory (overrides store_root)");
  app.add_option("--user", a.user, "Acting user (default: $USER)");

  const auto format_opt = [&](CLI::App* sub, const std::string& choices) {
    sub->add_option("--format", a.format, "Output format: " + choices);
  };

  auto* scan = app.add_subcommand("scan", "Inventory spreadsheets and databases under roots");
  scan->add_option("roots", a.roots, "Directories or file:// URIs")->required();
  scan->add_option("--query", a.query, "Filter, e.g. \"kind = spreadsheet AND external_link_count > 0\"");
  format_opt(scan, "json (default) or csv");
  scan->add_flag("--include-hidden", a.include_hidden, "Descend into hidden directories");
  scan->add_flag("--rate", a.rate, "Risk-rate spreadsheets (enables the risk field in queries)");
  scan->add_option("-o,--output", a.output, "Write to a file instead of stdout");

  auto* analyze = app.add_subcommand("analyze", "Risk findings and rating for a workbook or inventory");
  analyze->add_option("target", a.target, "Workbook, or inventory .json/.csv")->required();
  analyze->add_option("--config", a.risk_config, "Risk configuration JSON");
  format_opt(analyze, "text (default) or json");

  auto* graph_cmd = app.add_subcommand("graph", "Link dependency graph");
  graph_cmd->add_option("roots", a.roots, "Directories to scan");
  graph_cmd->add_option("--inventory", a.inventory, "Inventory file to use instead of or besides roots");
  format_opt(graph_cmd, "dot (default) or json");
  graph_cmd->add_option("-o,--output", a.output, "Write to a file instead of stdout");
  graph_cmd->add_flag("--cycles", a.cycles, "Print link cycles, one per line, instead of the graph");

  auto* migrate = app.add_subcommand("migrate", "Move workbooks into the repository, rewriting links");
  migrate->require_subcommand(1);
  auto* plan = migrate->add_subcommand("plan", "Compute destinations for selected workbooks");
  plan->add_option("roots", a.roots, "Directories to scan");
  plan->add_option("--inventory", a.inventory, "Inventory file");
  plan->add_option("--select", a.select, "Workbook to migrate (repeatable)");
  plan->add_flag("--all", a.select_all, "Select every readable workbook in the graph");
  plan->add_option("--base-url", a.base_url, "Repository base URL")->required();
  plan->add_option("--layout", a.layout, "flatten (default) or tree")
      ->check(CLI::IsMember({"flatten", "tree"}));
  plan->add_option("--root", a.layout_root, "Source root for the tree layout");
  plan->add_option("-o,--output", a.output, "Write the plan to a file instead of stdout");
  auto* execute = migrate->add_subcommand("execute", "Run a saved plan");
  execute->add_option("plan", a.plan_file, "Plan JSON from 'migrate plan'")->required();
  execute->add_option("--log", a.log_file, "Write the log to a file instead of stdout");
  format_opt(execute, "jsonl (default) or csv, for the log");
  execute->add_option("--dav", a.dav_url,
                      "Check in through a WebDAV server (password from $SHEETGUARD_PASSWORD)");

  auto* diff = app.add_subcommand("diff", "Cell-level comparison of two workbooks");
  diff->add_option("old", a.left, "File, or repository path@version")->required();
  diff->add_option("new", a.right, "File, or repository path@version")->required();
  format_opt(diff, "text (default), json or csv");
  diff->add_flag("--notify", a.notify, "Write alert messages for matching subscriptions");

  auto* repo_cmd = app.add_subcommand("repo", "Versioned repository operations");
  repo_cmd->require_subcommand(1);
  auto* checkin = repo_cmd->add_subcommand("checkin", "Store a new version");
  checkin->add_option("path", a.path, "Repository path")->required();
  checkin->add_option("file", a.file, "Local file")->required();
  checkin->add_option("-m,--comment", a.comment, "Version comment");
  checkin->add_option("--token", a.token, "Lock token when the path is checked out");
  auto* get = repo_cmd->add_subcommand("get", "Fetch a version");
  get->add_option("path", a.path, "Repository path")->required();
  get->add_option("--version", a.version, "Version number (default latest)");
  get->add_option("-o,--output", a.output, "Write to a file instead of stdout");
  auto* lock = repo_cmd->add_subcommand("lock", "Check out (lock) a path");
  lock->add_option("path", a.path, "Repository path")->required();
  lock->add_option("--ttl", a.ttl, "Lock lifetime in seconds");
  auto* unlock = repo_cmd->add_subcommand("unlock", "Release a lock");
  unlock->add_option("path", a.path, "Repository path")->required();
  unlock->add_option("token", a.token, "Lock token")->required();
  auto* history = repo_cmd->add_subcommand("history", "List versions");
  history->add_option("path", a.path, "Repository path")->required();
  format_opt(history, "text (default) or json");
  auto* retain = repo_cmd->add_subcommand("retain", "Apply a retention policy");
  retain->add_option("--keep-last", a.keep_last, "Keep the newest K versions of each path");
  retain->add_option("--newer-than", a.newer_than, "Keep versions newer than this time");
  auto* mkcol = repo_cmd->add_subcommand("mkcol", "Create a collection");
  mkcol->add_option("path", a.path, "Repository path")->required();
  auto* ls = repo_cmd->add_subcommand("ls", "List a collection");
  ls->add_option("path", a.path, "Repository path (default root)");
  repo_cmd->add_subcommand("audit", "Print the audit trail");

  auto* wf = app.add_subcommand("workflow", "Change requests, review and approval");
  wf->require_subcommand(1);
  auto* create = wf->add_subcommand("create", "Open a change request");
  create->add_option("path", a.path, "Repository path")->required();
  create->add_option("--base", a.base, "Base version")->required();
  create->add_option("--proposed", a.proposed, "Proposed version")->required();
  create->add_option("--id", a.id, "Request id (default CR-<n>)");
  create->add_option("--title", a.title, "Title");
  create->add_option("--description", a.description, "Description");
  create->add_option("--reviewer", a.reviewer, "Assigned reviewer");
  for (const auto& [name, help] : std::vector<std::pair<std::string, std::string>>{
           {"submit", "Submit a draft for testing and review"},
           {"review", "Start reviewing a submitted request"},
           {"approve", "Approve and sign the proposed version"},
           {"reject", "Reject and sign the proposed version"},
           {"rework", "Return a rejected request to draft"},
           {"withdraw", "Withdraw an open request"},
           {"show", "Print one request"}}) {
    wf->add_subcommand(name, help)->add_option("id", a.id, "Request id")->required();
  }
  wf->add_subcommand("list", "Print all requests");
  wf->add_subcommand("verify", "Check the event log's hash chain");

  auto* serve = app.add_subcommand("serve", "Serve the repository over WebDAV");
  serve->add_option("--bind", a.bind, "host:port (overrides the config)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    // Help for the deepest subcommand named on the line.
    const CLI::App* deepest = &app;
    while (true) {
      const auto subs = deepest->get_subcommands();
      if (subs.empty()) break;
      deepest = subs.front();
    }
    out << deepest->help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "sheetguard: " << e.what() << "\n" << app.help();
    return kUsageError;
  }

  if (a.user.empty()) a.user = env("USER").value_or("unknown");
  Context c{a, out, err, {}};
  try {
    const auto config = a.config.empty() ? env("SHEETGUARD_CONFIG").value_or("") : a.config;
    if (!config.empty()) c.cfg = load_config(config);

    if (scan->parsed()) return cmd_scan(c);
    if (analyze->parsed()) {
      require_format(a.format.empty() ? "text" : a.format, {"text", "json"});
      return cmd_analyze(c);
    }
    if (graph_cmd->parsed()) {
      require_format(a.format.empty() ? "dot" : a.format, {"dot", "json"});
      return cmd_graph(c);
    }
    if (plan->parsed()) return cmd_migrate_plan(c);
    if (execute->parsed()) {
      require_format(a.format.empty() ? "jsonl" : a.format, {"jsonl", "csv"});
      return cmd_migrate_execute(c);
    }
    if (diff->parsed()) {
      require_format(a.format.empty() ? "text" : a.format, {"text", "json", "csv"});
      return cmd_diff(c);
    }
    for (auto* sub : repo_cmd->get_subcommands()) return cmd_repo(c, sub->get_name());
    for (auto* sub : wf->get_subcommands()) return cmd_workflow(c, sub->get_name());
    if (serve->parsed()) return cmd_serve(c);
  } catch (const CLI::ValidationError& e) {
    err << "sheetguard: " << e.what() << "\n";
    return kUsageError;
  } catch (const Error& e) {
    err << "sheetguard: " << e.what() << "\n";
    return kOperationalError;
  } catch (const std::exception& e) {
    err << "sheetguard: " << e.what() << "\n";
    return kOperationalError;
  }
  return kUsageError;
}

}  // namespace sheetguard::cli
