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

// Workbook dependency graph. Edges point from the dependent workbook to the
// precedent it links to. Node keys are canonical URIs (uri::resolve).

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "sheetguard/discovery.hpp"

namespace sheetguard::graph {

enum class NodeKind { Spreadsheet, Other };

struct Node {
  std::string uri;
  NodeKind kind = NodeKind::Spreadsheet;

  bool operator==(const Node&) const = default;
};

struct Edge {
  std::string from;  // dependent
  std::string to;    // precedent
  int link_index = 1;

  bool operator==(const Edge&) const = default;
};

struct Broken {
  std::string from;
  std::string target;  // raw stored target, or empty for an unreadable source
  std::string detail;

  bool operator==(const Broken&) const = default;
};

struct DependencyGraph {
  std::vector<Node> nodes;  // sorted by uri
  std::vector<Edge> edges;  // sorted by (from, to, link_index)
  std::vector<Broken> broken;

  bool has_node(const std::string& uri) const;
  bool operator==(const DependencyGraph&) const = default;
};

// Content access by canonical URI. The default reads the local filesystem
// and only answers for file:// URIs.
struct Resolver {
  std::function<Bytes(const std::string&)> load;
  std::function<bool(const std::string&)> exists;

  static Resolver local();
};

DependencyGraph build_graph(const std::vector<discovery::InventoryRecord>& records,
                            const Resolver& resolver = Resolver::local());

// Strongly connected components with more than one node, or a self-loop.
// Each component is sorted; the list is sorted.
std::vector<std::vector<std::string>> cycles(const DependencyGraph& g);

DependencyGraph reversed(const DependencyGraph& g);

// Nodes reachable by following edges from `uri` (its transitive precedents).
std::vector<std::string> precedents(const DependencyGraph& g, const std::string& uri);

enum class Format { Dot, Json };

std::string emit(const DependencyGraph& g, Format format);
// Parses the JSON form written by emit. Throws SyntaxError.
DependencyGraph parse_graph_json(std::string_view text);

}  // namespace sheetguard::graph
