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

// Reads .xlsx/.xlsm packages into the grid model and rewrites external-link
// relationship targets in place.
//
// Rewriting touches only the Target attribute of the relationship inside
// xl/externalLinks/_rels/externalLinkN.xml.rels. Formulas refer to external
// books by index ("[1]Sheet1!A1"), so they never need editing.

#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "sheetguard/grid.hpp"
#include "sheetguard/util.hpp"

namespace sheetguard::ooxml {

struct LinkPart {
  std::string part;       // xl/externalLinks/externalLink1.xml
  std::string rels_part;  // xl/externalLinks/_rels/externalLink1.xml.rels

  bool operator==(const LinkPart&) const = default;
};

struct PackageSummary {
  std::vector<std::string> part_names;
  bool has_vba_part = false;
  bool has_connections_part = false;
  std::vector<LinkPart> external_link_parts;  // in link-index order
};

inline constexpr std::string_view kVbaPart = "xl/vbaProject.bin";
inline constexpr std::string_view kConnectionsPart = "xl/connections.xml";

PackageSummary summarize_package(std::string_view bytes);

// Errors: NotAPackage, NotASpreadsheet, CorruptPart (message names the part).
Workbook read_package(std::string_view bytes, std::string source_uri = {});

// Link targets without parsing any worksheet.
std::vector<ExternalLink> list_link_targets(std::string_view bytes);

struct AppliedRewrite {
  int index = 0;
  std::string old_target;
  std::string new_target;

  bool operator==(const AppliedRewrite&) const = default;
};

struct RewriteResult {
  Bytes bytes;
  std::vector<AppliedRewrite> applied;
};

// Keys are matched against stored targets after uri::normalize on both sides.
// With nothing to apply the input bytes are returned unchanged.
RewriteResult rewrite_links(std::string_view bytes,
                            const std::map<std::string, std::string>& rewrites);

// Fixed palettes used to resolve theme- and index-based colors.
const std::vector<std::string>& default_theme_palette();
const std::vector<std::string>& indexed_palette();

}  // namespace sheetguard::ooxml
