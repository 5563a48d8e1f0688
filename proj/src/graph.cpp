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

#include "sheetguard/graph.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "json.hpp"
#include "sheetguard/error.hpp"
#include "sheetguard/ooxml.hpp"
#include "sheetguard/uri.hpp"

namespace sheetguard::graph {

using nlohmann::json;

bool DependencyGraph::has_node(const std::string& uri) const {
  return std::binary_search(nodes.begin(), nodes.end(), Node{uri},
                            [](const Node& a, const Node& b) { return a.uri < b.uri; });
}

Resolver Resolver::local() {
  Resolver r;
  r.load = [](const std::string& u) {
    const auto p = uri::to_path(u);
    if (!p) throw Error(ErrorCode::IoError, "not a local file URI: " + u);
    return read_file(*p);
  };
  r.exists = [](const std::string& u) {
    const auto p = uri::to_path(u);
    std::error_code ec;
    return p && std::filesystem::is_regular_file(*p, ec);
  };
  return r;
}

namespace {

bool is_spreadsheet_uri(const std::string& u) {
  const auto name = uri::basename(u);
  const auto dot = name.rfind('.');
  if (dot == std::string::npos) return false;
  const auto k = discovery::kind_for_extension(name.substr(dot));
  return k == discovery::FileKind::Spreadsheet || k == discovery::FileKind::MacroSpreadsheet;
}

void canonicalize(DependencyGraph& g) {
  std::sort(g.nodes.begin(), g.nodes.end(),
            [](const Node& a, const Node& b) { return a.uri < b.uri; });
  g.nodes.erase(std::unique(g.nodes.begin(), g.nodes.end(),
                            [](const Node& a, const Node& b) { return a.uri == b.uri; }),
                g.nodes.end());
  auto edge_key = [](const Edge& e) { return std::tie(e.from, e.to, e.link_index); };
  std::sort(g.edges.begin(), g.edges.end(),
            [&](const Edge& a, const Edge& b) { return edge_key(a) < edge_key(b); });
  g.edges.erase(std::unique(g.edges.begin(), g.edges.end()), g.edges.end());
  std::sort(g.broken.begin(), g.broken.end(), [](const Broken& a, const Broken& b) {
    return std::tie(a.from, a.target, a.detail) < std::tie(b.from, b.target, b.detail);
  });
}

std::map<std::string, std::vector<std::string>> adjacency(const DependencyGraph& g) {
  std::map<std::string, std::vector<std::string>> adj;
  for (const auto& n : g.nodes) adj[n.uri];
  for (const auto& e : g.edges) adj[e.from].push_back(e.to);
  return adj;
}

}  // namespace

DependencyGraph build_graph(const std::vector<discovery::InventoryRecord>& records,
                            const Resolver& resolver) {
  DependencyGraph g;
  std::set<std::string> known;
  std::vector<const discovery::InventoryRecord*> sheets;
  for (const auto& r : records) {
    if (r.kind != discovery::FileKind::Spreadsheet &&
        r.kind != discovery::FileKind::MacroSpreadsheet) {
      continue;
    }
    const auto key = uri::resolve("", r.uri);
    if (known.insert(key).second) {
      g.nodes.push_back({key, NodeKind::Spreadsheet});
      sheets.push_back(&r);
    }
  }
  for (const auto* r : sheets) {
    const auto from = uri::resolve("", r->uri);
    std::vector<ExternalLink> links;
    try {
      links = ooxml::list_link_targets(resolver.load(from));
    } catch (const Error& e) {
      g.broken.push_back({from, "", e.what()});
      continue;
    }
    for (const auto& link : links) {
      const auto target = uri::resolve(from, link.target);
      if (known.count(target)) {
        g.edges.push_back({from, target, link.index});
      } else if (resolver.exists && resolver.exists(target)) {
        known.insert(target);
        g.nodes.push_back(
            {target, is_spreadsheet_uri(target) ? NodeKind::Spreadsheet : NodeKind::Other});
        g.edges.push_back({from, target, link.index});
      } else {
        g.broken.push_back({from, link.target, "no file at " + target});
      }
    }
  }
  canonicalize(g);
  return g;
}

std::vector<std::vector<std::string>> cycles(const DependencyGraph& g) {
  // Iterative Tarjan over the sorted adjacency map.
  const auto adj = adjacency(g);
  std::map<std::string, int> index, low;
  std::set<std::string> on_stack;
  std::vector<std::string> stack;
  std::vector<std::vector<std::string>> out;
  int counter = 0;

  struct Frame {
    std::string node;
    std::size_t next = 0;
  };
  for (const auto& [start, unused] : adj) {
    if (index.count(start)) continue;
    std::vector<Frame> call{{start}};
    index[start] = low[start] = counter++;
    stack.push_back(start);
    on_stack.insert(start);
    while (!call.empty()) {
      Frame& f = call.back();
      const auto& succ = adj.at(f.node);
      if (f.next < succ.size()) {
        const auto& w = succ[f.next++];
        if (!index.count(w)) {
          index[w] = low[w] = counter++;
          stack.push_back(w);
          on_stack.insert(w);
          call.push_back({w});
        } else if (on_stack.count(w)) {
          low[f.node] = std::min(low[f.node], index[w]);
        }
        continue;
      }
      const std::string v = f.node;
      call.pop_back();
      if (!call.empty()) low[call.back().node] = std::min(low[call.back().node], low[v]);
      if (low[v] != index[v]) continue;
      std::vector<std::string> comp;
      while (true) {
        auto w = stack.back();
        stack.pop_back();
        on_stack.erase(w);
        comp.push_back(w);
        if (w == v) break;
      }
      const auto& vs = adj.at(v);
      const bool self_loop = std::find(vs.begin(), vs.end(), v) != vs.end();
      if (comp.size() > 1 || self_loop) {
        std::sort(comp.begin(), comp.end());
        out.push_back(std::move(comp));
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

DependencyGraph reversed(const DependencyGraph& g) {
  DependencyGraph r = g;
  for (auto& e : r.edges) std::swap(e.from, e.to);
  canonicalize(r);
  return r;
}

std::vector<std::string> precedents(const DependencyGraph& g, const std::string& start) {
  const auto adj = adjacency(g);
  std::set<std::string> seen;
  std::vector<std::string> todo{start};
  while (!todo.empty()) {
    const auto v = todo.back();
    todo.pop_back();
    const auto it = adj.find(v);
    if (it == adj.end()) continue;
    for (const auto& w : it->second) {
      if (w != start && seen.insert(w).second) todo.push_back(w);
    }
  }
  return {seen.begin(), seen.end()};
}

namespace {

std::string dot_quote(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string emit(const DependencyGraph& g, Format format) {
  if (format == Format::Json) {
    json nodes = json::array(), edges = json::array(), broken = json::array();
    for (const auto& n : g.nodes) {
      nodes.push_back({{"uri", n.uri}, {"kind", n.kind == NodeKind::Other ? "Other" : "Spreadsheet"}});
    }
    for (const auto& e : g.edges) {
      edges.push_back({{"from", e.from}, {"to", e.to}, {"link_index", e.link_index}});
    }
    for (const auto& b : g.broken) {
      broken.push_back({{"from", b.from}, {"target", b.target}, {"detail", b.detail}});
    }
    return json{{"nodes", nodes}, {"edges", edges}, {"broken", broken}}.dump(2) + "\n";
  }
  std::map<std::string, std::string> ids;
  std::string out = "digraph dependencies {\n";
  if (!g.nodes.empty()) out += "  rankdir=LR;\n  node [shape=box];\n";
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    const auto& n = g.nodes[i];
    ids[n.uri] = "n" + std::to_string(i);
    out += "  " + ids[n.uri] + " [label=" + dot_quote(uri::basename(n.uri)) +
           ", tooltip=" + dot_quote(n.uri) + (n.kind == NodeKind::Other ? ", style=rounded" : "") +
           "];\n";
  }
  for (const auto& e : g.edges) {
    out += "  " + ids.at(e.from) + " -> " + ids.at(e.to) + " [label=" +
           dot_quote(std::to_string(e.link_index)) + "];\n";
  }
  for (std::size_t i = 0; i < g.broken.size(); ++i) {
    const auto& b = g.broken[i];
    const std::string id = "b" + std::to_string(i);
    const std::string label = b.target.empty() ? "(unreadable)" : uri::basename(uri::normalize(b.target));
    out += "  " + id + " [label=" + dot_quote(label) + ", tooltip=" + dot_quote(b.target) +
           ", shape=diamond, style=dashed, color=red];\n";
    out += "  " + ids.at(b.from) + " -> " + id + " [style=dashed, color=red];\n";
  }
  return out + "}\n";
}

DependencyGraph parse_graph_json(std::string_view text) {
  DependencyGraph g;
  try {
    const json j = json::parse(text);
    for (const auto& n : j.at("nodes")) {
      g.nodes.push_back({n.at("uri").get<std::string>(),
                         n.value("kind", "Spreadsheet") == "Other" ? NodeKind::Other
                                                                   : NodeKind::Spreadsheet});
    }
    for (const auto& e : j.at("edges")) {
      g.edges.push_back({e.at("from").get<std::string>(), e.at("to").get<std::string>(),
                         e.at("link_index").get<int>()});
    }
    for (const auto& b : j.at("broken")) {
      g.broken.push_back({b.at("from").get<std::string>(), b.at("target").get<std::string>(),
                          b.value("detail", "")});
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SyntaxError, std::string("graph JSON: ") + e.what());
  }
  canonicalize(g);
  for (const auto& e : g.edges) {
    if (!g.has_node(e.from) || !g.has_node(e.to)) {
      throw Error(ErrorCode::SyntaxError, "graph JSON: edge endpoint is not a node");
    }
  }
  return g;
}

}  // namespace sheetguard::graph
