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

// Cell-level workbook comparison, change reports and alert messages.
//
// Alignment model. Rows are aligned first with columns held in place, then
// columns are aligned over the matched rows. Each axis is a minimum-cost
// monotone alignment where
//   matching two rows costs the number of positions whose content differs,
//   leaving a row unmatched costs 1 plus the number of populated cells in it.
// Identical rows match for free, so this reduces to a longest common
// subsequence when nothing else changed. Among equal-cost alignments the one
// chosen is found by backtracking from the end preferring match, then delete,
// then insert. Styles are ignored; a cell is populated when it has a value or
// a formula.

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sheetguard/grid.hpp"

namespace sheetguard::audit {

enum class ChangeKind { ValueChanged, FormulaChanged, BothChanged, Added, Removed };
std::string_view change_kind_name(ChangeKind k);

struct CellChange {
  // New-version coordinates, except for Removed which uses the old version.
  CellAddress addr;
  ChangeKind kind = ChangeKind::ValueChanged;
  std::optional<CellValue> old_value, new_value;
  std::optional<std::string> old_formula, new_formula;

  bool operator==(const CellChange&) const = default;
};

enum class StructKind { RowInserted, RowDeleted, ColInserted, ColDeleted };
std::string_view struct_kind_name(StructKind k);

struct StructuralOp {
  std::string sheet;
  StructKind kind = StructKind::RowInserted;
  int index = 1;  // new coordinates for insertions, old for deletions
  int count = 1;

  bool operator==(const StructuralOp&) const = default;
};

struct SheetRename {
  std::string old_name, new_name;
  bool operator==(const SheetRename&) const = default;
};

struct NameChange {
  std::string name;
  std::optional<std::string> old_refers_to, new_refers_to;
  bool operator==(const NameChange&) const = default;
};

struct LinkChange {
  int index = 1;
  std::string old_target, new_target;  // empty when absent on that side
  bool operator==(const LinkChange&) const = default;
};

struct VisibilityChange {
  std::string sheet;
  Visibility old_state = Visibility::Visible;
  Visibility new_state = Visibility::Visible;
  bool operator==(const VisibilityChange&) const = default;
};

struct ChangeSet {
  std::string old_label, new_label;
  std::vector<CellChange> cell_changes;
  std::vector<StructuralOp> structural;
  std::vector<std::string> sheets_added, sheets_removed;
  std::vector<SheetRename> sheets_renamed;
  std::vector<NameChange> defined_name_changes;
  std::vector<LinkChange> link_changes;
  std::vector<VisibilityChange> visibility_changes;
  bool macro_changed = false;
  bool connections_changed = false;
  std::vector<std::string> ambiguous_sheets;

  // True when nothing differs; labels are not considered.
  bool empty() const;
  bool operator==(const ChangeSet&) const = default;
};

struct Alignment {
  std::vector<std::pair<int, int>> matched;  // (old, new), 1-based, increasing
  std::vector<int> inserted;                 // new indices
  std::vector<int> deleted;                  // old indices

  bool operator==(const Alignment&) const = default;
};

Alignment align_rows(const Worksheet& old_sheet, const Worksheet& new_sheet);
// Column alignment over the given matched row pairs.
Alignment align_columns(const Worksheet& old_sheet, const Worksheet& new_sheet,
                        const std::vector<std::pair<int, int>>& row_pairs);

// Structural ops and cell changes for one pair of same-named sheets.
// When both axes show insertions or deletions the sheet is compared
// positionally and recorded in out.ambiguous_sheets.
void diff_sheet(const Worksheet& old_sheet, const Worksheet& new_sheet, ChangeSet& out);

ChangeSet diff_workbooks(const Workbook& old_wb, const Workbook& new_wb,
                         std::string old_label = "old", std::string new_label = "new");

enum class ReportFormat { Text, Json, Csv };
std::string render_change_report(const ChangeSet& cs, ReportFormat format);

// Change categories a subscription can filter on.
enum class Category {
  Values,       // ValueChanged, BothChanged
  Formulas,     // FormulaChanged, BothChanged
  Cells,        // any cell change
  Structure,    // row/column insertions and deletions
  Sheets,       // sheets added, removed, renamed or re-hidden
  Names,
  Links,
  Macros,
  Connections,
};

struct Subscription {
  std::string user;  // mailbox written to the To header
  // Parsed from text such as "macros OR links"; "any" or "*" selects all.
  std::vector<Category> filter;
};

// Throws SyntaxError for an unknown category.
std::vector<Category> parse_filter(std::string_view text);
bool matches(const ChangeSet& cs, const std::vector<Category>& filter);

// Writes one message per matching subscriber and returns the paths in the
// order written. Throws OutboxUnwritable.
std::vector<std::filesystem::path> notify(const ChangeSet& cs,
                                          const std::vector<Subscription>& subscriptions,
                                          const std::filesystem::path& outbox,
                                          const Clock& clock = system_clock());

}  // namespace sheetguard::audit
