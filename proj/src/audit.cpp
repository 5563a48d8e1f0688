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

#include "sheetguard/audit.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cstring>
#include <functional>
#include <map>
#include <set>

#include "json.hpp"
#include "sheetguard/error.hpp"

namespace sheetguard::audit {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view change_kind_name(ChangeKind k) {
  switch (k) {
    case ChangeKind::ValueChanged: return "ValueChanged";
    case ChangeKind::FormulaChanged: return "FormulaChanged";
    case ChangeKind::BothChanged: return "BothChanged";
    case ChangeKind::Added: return "Added";
    case ChangeKind::Removed: return "Removed";
  }
  return "Unknown";
}

std::string_view struct_kind_name(StructKind k) {
  switch (k) {
    case StructKind::RowInserted: return "RowInserted";
    case StructKind::RowDeleted: return "RowDeleted";
    case StructKind::ColInserted: return "ColInserted";
    case StructKind::ColDeleted: return "ColDeleted";
  }
  return "Unknown";
}

bool ChangeSet::empty() const {
  return cell_changes.empty() && structural.empty() && sheets_added.empty() &&
         sheets_removed.empty() && sheets_renamed.empty() && defined_name_changes.empty() &&
         link_changes.empty() && visibility_changes.empty() && !macro_changed &&
         !connections_changed && ambiguous_sheets.empty();
}

namespace {

// ---------------------------------------------------------------------------
// Sequence alignment
// ---------------------------------------------------------------------------

enum class Op : char { Match, Delete, Insert };

// Indices passed to the callbacks are 1-based.
struct Problem {
  int n = 0, m = 0;
  std::function<int(int, int)> match_cost;
  std::function<int(int)> delete_cost;
  std::function<int(int)> insert_cost;
  std::function<bool(int, int)> identical;
};

constexpr std::int64_t kDpLimit = 4'000'000;
constexpr int kMyersMaxD = 2000;

// Exact DP over old[lo_i+1..hi_i] x new[lo_j+1..hi_j], appended to `out`.
void dp_align(const Problem& p, int lo_i, int hi_i, int lo_j, int hi_j, std::vector<Op>& out) {
  const int n = hi_i - lo_i, m = hi_j - lo_j;
  const std::size_t w = static_cast<std::size_t>(m) + 1;
  std::vector<int> d((static_cast<std::size_t>(n) + 1) * w);
  auto at = [&](int i, int j) -> int& { return d[static_cast<std::size_t>(i) * w + j]; };
  for (int i = 1; i <= n; ++i) at(i, 0) = at(i - 1, 0) + p.delete_cost(lo_i + i);
  for (int j = 1; j <= m; ++j) at(0, j) = at(0, j - 1) + p.insert_cost(lo_j + j);
  for (int i = 1; i <= n; ++i) {
    const int del = p.delete_cost(lo_i + i);
    for (int j = 1; j <= m; ++j) {
      at(i, j) = std::min({at(i - 1, j - 1) + p.match_cost(lo_i + i, lo_j + j), at(i - 1, j) + del,
                           at(i, j - 1) + p.insert_cost(lo_j + j)});
    }
  }
  std::vector<Op> rev;
  int i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 && at(i, j) == at(i - 1, j - 1) + p.match_cost(lo_i + i, lo_j + j)) {
      rev.push_back(Op::Match);
      --i, --j;
    } else if (i > 0 && at(i, j) == at(i - 1, j) + p.delete_cost(lo_i + i)) {
      rev.push_back(Op::Delete);
      --i;
    } else {
      rev.push_back(Op::Insert);
      --j;
    }
  }
  out.insert(out.end(), rev.rbegin(), rev.rend());
}

void positional(int n, int m, std::vector<Op>& out) {
  const int k = std::min(n, m);
  out.insert(out.end(), k, Op::Match);
  out.insert(out.end(), n - k, Op::Delete);
  out.insert(out.end(), m - k, Op::Insert);
}

void gap_align(const Problem& p, int lo_i, int hi_i, int lo_j, int hi_j, std::vector<Op>& out) {
  const std::int64_t area = static_cast<std::int64_t>(hi_i - lo_i) * (hi_j - lo_j);
  if (area <= kDpLimit) {
    dp_align(p, lo_i, hi_i, lo_j, hi_j, out);
  } else {
    positional(hi_i - lo_i, hi_j - lo_j, out);
  }
}

// Matched (i, j) pairs of a longest common subsequence of identical items in
// the given ranges, by Myers' O((N+M)D) method. nullopt when D exceeds the cap.
std::optional<std::vector<std::pair<int, int>>> myers(const Problem& p, int lo_i, int hi_i,
                                                      int lo_j, int hi_j) {
  const int n = hi_i - lo_i, m = hi_j - lo_j;
  const int max_d = std::min(n + m, kMyersMaxD);
  std::vector<std::vector<int>> trace;  // trace[d][k + d] = furthest x
  std::vector<int> prev;
  for (int d = 0; d <= max_d; ++d) {
    std::vector<int> cur(2 * static_cast<std::size_t>(d) + 1);
    for (int k = -d; k <= d; k += 2) {
      int x;
      auto prev_at = [&](int kk) { return prev[static_cast<std::size_t>(kk + d - 1)]; };
      if (d == 0) {
        x = 0;
      } else if (k == -d || (k != d && prev_at(k - 1) < prev_at(k + 1))) {
        x = prev_at(k + 1);
      } else {
        x = prev_at(k - 1) + 1;
      }
      int y = x - k;
      while (x < n && y < m && p.identical(lo_i + x + 1, lo_j + y + 1)) ++x, ++y;
      cur[static_cast<std::size_t>(k + d)] = x;
      if (x >= n && y >= m) {
        trace.push_back(std::move(cur));
        // Walk back through the trace collecting diagonal moves.
        std::vector<std::pair<int, int>> pairs;
        int cx = n, cy = m;
        for (int dd = d; dd > 0; --dd) {
          const int kk = cx - cy;
          const auto& pv = trace[static_cast<std::size_t>(dd - 1)];
          auto pat = [&](int q) { return pv[static_cast<std::size_t>(q + dd - 1)]; };
          const bool down = kk == -dd || (kk != dd && pat(kk - 1) < pat(kk + 1));
          const int pk = down ? kk + 1 : kk - 1;
          const int px = pat(pk), py = px - pk;
          const int sx = down ? px : px + 1, sy = sx - kk;
          while (cx > sx && cy > sy) pairs.emplace_back(lo_i + cx--, lo_j + cy--);
          cx = px, cy = py;
        }
        while (cx > 0 && cy > 0) pairs.emplace_back(lo_i + cx--, lo_j + cy--);
        std::reverse(pairs.begin(), pairs.end());
        return pairs;
      }
    }
    trace.push_back(cur);
    prev = std::move(cur);
  }
  return std::nullopt;
}

std::vector<Op> align(const Problem& p) {
  std::vector<Op> ops;
  if (static_cast<std::int64_t>(p.n) * p.m <= kDpLimit) {
    dp_align(p, 0, p.n, 0, p.m, ops);
    return ops;
  }
  // Large inputs: fix identical prefix and suffix, anchor on a common
  // subsequence of identical items, and solve the gaps exactly.
  int pre = 0;
  while (pre < p.n && pre < p.m && p.identical(pre + 1, pre + 1)) ++pre;
  int suf = 0;
  while (suf < p.n - pre && suf < p.m - pre && p.identical(p.n - suf, p.m - suf)) ++suf;
  ops.insert(ops.end(), pre, Op::Match);
  const int hi_i = p.n - suf, hi_j = p.m - suf;
  if (static_cast<std::int64_t>(hi_i - pre) * (hi_j - pre) <= kDpLimit) {
    dp_align(p, pre, hi_i, pre, hi_j, ops);
  } else if (const auto anchors = myers(p, pre, hi_i, pre, hi_j)) {
    int ci = pre, cj = pre;
    for (const auto& [ai, aj] : *anchors) {
      gap_align(p, ci, ai - 1, cj, aj - 1, ops);
      ops.push_back(Op::Match);
      ci = ai, cj = aj;
    }
    gap_align(p, ci, hi_i, cj, hi_j, ops);
  } else {
    positional(hi_i - pre, hi_j - pre, ops);
  }
  ops.insert(ops.end(), suf, Op::Match);
  return ops;
}

Alignment to_alignment(const std::vector<Op>& ops) {
  Alignment a;
  int i = 0, j = 0;
  for (Op op : ops) {
    switch (op) {
      case Op::Match: a.matched.emplace_back(++i, ++j); break;
      case Op::Delete: a.deleted.push_back(++i); break;
      case Op::Insert: a.inserted.push_back(++j); break;
    }
  }
  return a;
}

// Runs of deletions and insertions, in path order.
void structural_ops(const std::vector<Op>& ops, const std::string& sheet, bool rows,
                    std::vector<StructuralOp>& out) {
  int i = 0, j = 0;
  for (std::size_t k = 0; k < ops.size();) {
    if (ops[k] == Op::Match) {
      ++i, ++j, ++k;
      continue;
    }
    const Op op = ops[k];
    int count = 0;
    while (k < ops.size() && ops[k] == op) ++count, ++k;
    if (op == Op::Delete) {
      out.push_back({sheet, rows ? StructKind::RowDeleted : StructKind::ColDeleted, i + 1, count});
      i += count;
    } else {
      out.push_back({sheet, rows ? StructKind::RowInserted : StructKind::ColInserted, j + 1, count});
      j += count;
    }
  }
}

bool has_indels(const std::vector<Op>& ops) {
  return std::any_of(ops.begin(), ops.end(), [](Op o) { return o != Op::Match; });
}

// ---------------------------------------------------------------------------
// Sheet content
// ---------------------------------------------------------------------------

bool populated(const Cell& c) { return !c.value.is_empty() || c.formula.has_value(); }

bool same(const Cell* a, const Cell* b) {
  if (!a || !b) return a == b;
  return a->value == b->value && a->formula == b->formula;
}

using Entry = std::pair<int, const Cell*>;  // (position, cell), sorted by position

// Populated cells by row, rows 1..n.
struct Grid {
  int rows = 0, cols = 0;
  std::vector<std::vector<Entry>> by_row;  // index 0 unused
  std::vector<std::uint64_t> fingerprint;

  explicit Grid(const Worksheet& ws) {
    for (const auto& [rc, cell] : ws.cells) {
      if (!populated(cell)) continue;
      rows = std::max(rows, rc.first);
      cols = std::max(cols, rc.second);
    }
    by_row.resize(static_cast<std::size_t>(rows) + 1);
    for (const auto& [rc, cell] : ws.cells) {
      if (populated(cell)) by_row[rc.first].emplace_back(rc.second, &cell);
    }
    fingerprint.resize(by_row.size());
    for (int r = 1; r <= rows; ++r) {
      std::uint64_t h = 1469598103934665603ull;
      auto mix = [&](const void* p, std::size_t len) {
        const auto* b = static_cast<const unsigned char*>(p);
        for (std::size_t k = 0; k < len; ++k) h = (h ^ b[k]) * 1099511628211ull;
      };
      for (const auto& [c, cell] : by_row[r]) {
        mix(&c, sizeof c);
        const int kind = static_cast<int>(cell->value.kind);
        mix(&kind, sizeof kind);
        mix(&cell->value.number, sizeof cell->value.number);
        mix(cell->value.text.data(), cell->value.text.size());
        mix(&cell->value.boolean, sizeof cell->value.boolean);
        if (cell->formula) mix(cell->formula->data(), cell->formula->size());
        mix("|", 1);
      }
      fingerprint[r] = h;
    }
  }

  const Cell* at(int r, int c) const {
    if (r < 1 || r > rows) return nullptr;
    const auto& v = by_row[r];
    const auto it = std::lower_bound(v.begin(), v.end(), c,
                                     [](const Entry& e, int col) { return e.first < col; });
    return it != v.end() && it->first == c ? it->second : nullptr;
  }
};

// Positions where two sorted entry lists differ.
int list_diff(const std::vector<Entry>& a, const std::vector<Entry>& b) {
  int diff = 0;
  std::size_t x = 0, y = 0;
  while (x < a.size() || y < b.size()) {
    if (y == b.size() || (x < a.size() && a[x].first < b[y].first)) {
      ++diff, ++x;
    } else if (x == a.size() || b[y].first < a[x].first) {
      ++diff, ++y;
    } else {
      diff += !same(a[x].second, b[y].second);
      ++x, ++y;
    }
  }
  return diff;
}

std::vector<Op> row_ops(const Grid& o, const Grid& n) {
  Problem p;
  p.n = o.rows;
  p.m = n.rows;
  p.match_cost = [&](int i, int j) { return list_diff(o.by_row[i], n.by_row[j]); };
  p.delete_cost = [&](int i) { return 1 + static_cast<int>(o.by_row[i].size()); };
  p.insert_cost = [&](int j) { return 1 + static_cast<int>(n.by_row[j].size()); };
  p.identical = [&](int i, int j) {
    return o.fingerprint[i] == n.fingerprint[j] && list_diff(o.by_row[i], n.by_row[j]) == 0;
  };
  return align(p);
}

// Cells of each column restricted to the matched rows, keyed by pair index.
std::vector<std::vector<Entry>> columns_over(const Grid& g,
                                             const std::vector<std::pair<int, int>>& pairs,
                                             bool old_side, int& ncols) {
  ncols = 0;
  std::vector<std::vector<Entry>> cols(static_cast<std::size_t>(g.cols) + 1);
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const int r = old_side ? pairs[k].first : pairs[k].second;
    if (r < 1 || r > g.rows) continue;
    for (const auto& [c, cell] : g.by_row[r]) {
      cols[c].emplace_back(static_cast<int>(k), cell);
      ncols = std::max(ncols, c);
    }
  }
  cols.resize(static_cast<std::size_t>(ncols) + 1);
  return cols;
}

std::vector<Op> column_ops(const Grid& o, const Grid& n, const std::vector<std::pair<int, int>>& pairs) {
  int nc_old = 0, nc_new = 0;
  const auto oc = columns_over(o, pairs, true, nc_old);
  const auto nc = columns_over(n, pairs, false, nc_new);
  Problem p;
  p.n = nc_old;
  p.m = nc_new;
  p.match_cost = [&](int i, int j) { return list_diff(oc[i], nc[j]); };
  p.delete_cost = [&](int i) { return 1 + static_cast<int>(oc[i].size()); };
  p.insert_cost = [&](int j) { return 1 + static_cast<int>(nc[j].size()); };
  p.identical = [&](int i, int j) { return list_diff(oc[i], nc[j]) == 0; };
  return align(p);
}

CellChange change_of(const std::string& sheet, const Cell* a, const Cell* b, int row, int col) {
  CellChange ch;
  ch.addr.sheet = sheet;
  ch.addr.row = row;
  ch.addr.col = col;
  if (a) {
    ch.old_value = a->value;
    ch.old_formula = a->formula;
  }
  if (b) {
    ch.new_value = b->value;
    ch.new_formula = b->formula;
  }
  if (!a) {
    ch.kind = ChangeKind::Added;
  } else if (!b) {
    ch.kind = ChangeKind::Removed;
  } else {
    const bool v = !(a->value == b->value), f = a->formula != b->formula;
    ch.kind = v && f ? ChangeKind::BothChanged : f ? ChangeKind::FormulaChanged : ChangeKind::ValueChanged;
  }
  return ch;
}

void compare_rows(const std::string& sheet, const Grid& o, const Grid& n, int ro, int rn,
                  const std::vector<std::pair<int, int>>& col_pairs, const std::vector<int>& col_del,
                  const std::vector<int>& col_ins, std::vector<CellChange>& out) {
  for (const auto& [co, cn] : col_pairs) {
    const Cell* a = o.at(ro, co);
    const Cell* b = n.at(rn, cn);
    if (!same(a, b)) out.push_back(change_of(sheet, a, b, b ? rn : ro, b ? cn : co));
  }
  for (int co : col_del) {
    if (const Cell* a = o.at(ro, co)) out.push_back(change_of(sheet, a, nullptr, ro, co));
  }
  for (int cn : col_ins) {
    if (const Cell* b = n.at(rn, cn)) out.push_back(change_of(sheet, nullptr, b, rn, cn));
  }
}

std::string content_hash(const Worksheet& ws) {
  std::string s;
  for (const auto& [rc, cell] : ws.cells) {
    if (!populated(cell)) continue;
    s += std::to_string(rc.first) + "," + std::to_string(rc.second) + "," +
         std::to_string(static_cast<int>(cell.value.kind)) + "," + cell.value.display() + "," +
         (cell.formula ? "=" + *cell.formula : "") + "\n";
  }
  return sha256_hex(s);
}

}  // namespace

Alignment align_rows(const Worksheet& old_sheet, const Worksheet& new_sheet) {
  return to_alignment(row_ops(Grid(old_sheet), Grid(new_sheet)));
}

Alignment align_columns(const Worksheet& old_sheet, const Worksheet& new_sheet,
                        const std::vector<std::pair<int, int>>& row_pairs) {
  return to_alignment(column_ops(Grid(old_sheet), Grid(new_sheet), row_pairs));
}

void diff_sheet(const Worksheet& old_sheet, const Worksheet& new_sheet, ChangeSet& out) {
  const Grid o(old_sheet), n(new_sheet);
  const std::string& sheet = new_sheet.name;
  const auto rops = row_ops(o, n);
  auto rows = to_alignment(rops);
  const auto cops = column_ops(o, n, rows.matched);
  auto cols = to_alignment(cops);
  const bool row_edits = has_indels(rops), col_edits = has_indels(cops);

  std::vector<CellChange> changes;
  if (row_edits && col_edits) {
    out.ambiguous_sheets.push_back(sheet);
    const int nr = std::max(o.rows, n.rows), nc = std::max(o.cols, n.cols);
    std::vector<std::pair<int, int>> identity;
    for (int c = 1; c <= nc; ++c) identity.emplace_back(c, c);
    for (int r = 1; r <= nr; ++r) compare_rows(sheet, o, n, r, r, identity, {}, {}, changes);
  } else {
    if (row_edits) structural_ops(rops, sheet, true, out.structural);
    if (col_edits) structural_ops(cops, sheet, false, out.structural);
    for (const auto& [ro, rn] : rows.matched) {
      compare_rows(sheet, o, n, ro, rn, cols.matched, cols.deleted, cols.inserted, changes);
    }
    for (int ro : rows.deleted) {
      for (const auto& [c, cell] : o.by_row[ro]) changes.push_back(change_of(sheet, cell, nullptr, ro, c));
    }
    for (int rn : rows.inserted) {
      for (const auto& [c, cell] : n.by_row[rn]) changes.push_back(change_of(sheet, nullptr, cell, rn, c));
    }
  }
  std::sort(changes.begin(), changes.end(), [](const CellChange& a, const CellChange& b) {
    return std::tuple(a.addr.row, a.addr.col, a.kind) < std::tuple(b.addr.row, b.addr.col, b.kind);
  });
  out.cell_changes.insert(out.cell_changes.end(), changes.begin(), changes.end());
}

ChangeSet diff_workbooks(const Workbook& old_wb, const Workbook& new_wb, std::string old_label,
                         std::string new_label) {
  ChangeSet cs;
  cs.old_label = std::move(old_label);
  cs.new_label = std::move(new_label);

  std::vector<const Worksheet*> removed, added;
  for (const auto& s : old_wb.sheets) {
    if (!new_wb.find_sheet(s.name)) removed.push_back(&s);
  }
  for (const auto& s : new_wb.sheets) {
    const Worksheet* prev = old_wb.find_sheet(s.name);
    if (!prev) {
      added.push_back(&s);
      continue;
    }
    if (prev->visibility != s.visibility) {
      cs.visibility_changes.push_back({s.name, prev->visibility, s.visibility});
    }
    diff_sheet(*prev, s, cs);
  }
  if (removed.size() == 1 && added.size() == 1 &&
      content_hash(*removed[0]) == content_hash(*added[0])) {
    cs.sheets_renamed.push_back({removed[0]->name, added[0]->name});
    if (removed[0]->visibility != added[0]->visibility) {
      cs.visibility_changes.push_back({added[0]->name, removed[0]->visibility, added[0]->visibility});
    }
  } else {
    for (const auto* s : removed) cs.sheets_removed.push_back(s->name);
    for (const auto* s : added) cs.sheets_added.push_back(s->name);
  }

  std::map<std::string, std::pair<std::optional<std::string>, std::optional<std::string>>> names;
  for (const auto& d : old_wb.defined_names) names[d.name].first = d.refers_to;
  for (const auto& d : new_wb.defined_names) names[d.name].second = d.refers_to;
  for (const auto& [name, v] : names) {
    if (v.first != v.second) cs.defined_name_changes.push_back({name, v.first, v.second});
  }

  std::map<int, std::pair<std::string, std::string>> links;
  for (const auto& l : old_wb.external_links) links[l.index].first = l.target;
  for (const auto& l : new_wb.external_links) links[l.index].second = l.target;
  for (const auto& [index, v] : links) {
    if (v.first != v.second) cs.link_changes.push_back({index, v.first, v.second});
  }

  cs.macro_changed = old_wb.macro_sha256 != new_wb.macro_sha256;
  cs.connections_changed = old_wb.connections_sha256 != new_wb.connections_sha256;
  return cs;
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

namespace {

std::string cell_text(const std::optional<CellValue>& v, const std::optional<std::string>& f) {
  std::string s = v ? v->display() : "";
  if (f) s += (s.empty() ? "" : " ") + std::string("(=") + *f + ")";
  return s.empty() ? "(empty)" : s;
}

std::string a1(const CellAddress& a) { return column_label(a.col) + std::to_string(a.row); }

std::string describe(const StructuralOp& op) {
  const bool row = op.kind == StructKind::RowInserted || op.kind == StructKind::RowDeleted;
  const bool ins = op.kind == StructKind::RowInserted || op.kind == StructKind::ColInserted;
  const std::string where = row ? std::to_string(op.index) : column_label(op.index);
  const std::string unit = row ? "row" : "column";
  return std::to_string(op.count) + " " + unit + (op.count == 1 ? "" : "s") + " " +
         (ins ? "inserted" : "deleted") + " at " + where;
}

std::vector<std::string> sheet_order(const ChangeSet& cs) {
  std::vector<std::string> order;
  auto add = [&](const std::string& s) {
    if (std::find(order.begin(), order.end(), s) == order.end()) order.push_back(s);
  };
  for (const auto& s : cs.ambiguous_sheets) add(s);
  for (const auto& op : cs.structural) add(op.sheet);
  for (const auto& c : cs.cell_changes) add(c.addr.sheet);
  return order;
}

std::string render_text(const ChangeSet& cs) {
  if (cs.empty()) return "No changes.";
  std::string out = "Changes from " + cs.old_label + " to " + cs.new_label + "\n";
  std::vector<std::string> wb;
  if (cs.macro_changed) wb.push_back("macros changed");
  if (cs.connections_changed) wb.push_back("data connections changed");
  for (const auto& s : cs.sheets_added) wb.push_back("sheet added: " + s);
  for (const auto& s : cs.sheets_removed) wb.push_back("sheet removed: " + s);
  for (const auto& r : cs.sheets_renamed) wb.push_back("sheet renamed: " + r.old_name + " -> " + r.new_name);
  for (const auto& v : cs.visibility_changes) {
    wb.push_back("sheet " + v.sheet + " visibility: " + std::string(visibility_name(v.old_state)) +
                 " -> " + std::string(visibility_name(v.new_state)));
  }
  for (const auto& d : cs.defined_name_changes) {
    wb.push_back("defined name " + d.name + ": " + d.old_refers_to.value_or("(none)") + " -> " +
                 d.new_refers_to.value_or("(none)"));
  }
  for (const auto& l : cs.link_changes) {
    wb.push_back("link [" + std::to_string(l.index) + "]: " +
                 (l.old_target.empty() ? "(none)" : l.old_target) + " -> " +
                 (l.new_target.empty() ? "(none)" : l.new_target));
  }
  if (!wb.empty()) {
    out += "\nWorkbook\n";
    for (const auto& line : wb) out += "  " + line + "\n";
  }
  for (const auto& sheet : sheet_order(cs)) {
    out += "\nSheet " + sheet + "\n";
    if (std::find(cs.ambiguous_sheets.begin(), cs.ambiguous_sheets.end(), sheet) !=
        cs.ambiguous_sheets.end()) {
      out += "  rows and columns both moved; compared cell by cell in place\n";
    }
    for (const auto& op : cs.structural) {
      if (op.sheet == sheet) out += "  " + describe(op) + "\n";
    }
    for (const auto& c : cs.cell_changes) {
      if (c.addr.sheet != sheet) continue;
      out += "  " + a1(c.addr) + " ";
      switch (c.kind) {
        case ChangeKind::Added: out += "added: " + cell_text(c.new_value, c.new_formula); break;
        case ChangeKind::Removed: out += "removed: " + cell_text(c.old_value, c.old_formula); break;
        case ChangeKind::ValueChanged:
          out += "value: " + cell_text(c.old_value, std::nullopt) + " -> " +
                 cell_text(c.new_value, std::nullopt);
          break;
        case ChangeKind::FormulaChanged:
        case ChangeKind::BothChanged:
          out += (c.kind == ChangeKind::BothChanged ? "value and formula: " : "formula: ") +
                 cell_text(c.old_value, c.old_formula) + " -> " + cell_text(c.new_value, c.new_formula);
          break;
      }
      out += "\n";
    }
  }
  return out;
}

json value_json(const std::optional<CellValue>& v) {
  if (!v) return nullptr;
  switch (v->kind) {
    case ValueKind::Empty: return nullptr;
    case ValueKind::Number: return v->number;
    case ValueKind::Boolean: return v->boolean;
    case ValueKind::Text: return v->text;
    case ValueKind::Error: return json{{"error", v->text}};
  }
  return nullptr;
}

json opt_json(const std::optional<std::string>& s) { return s ? json(*s) : json(nullptr); }

std::string render_json(const ChangeSet& cs) {
  json cells = json::array();
  for (const auto& c : cs.cell_changes) {
    cells.push_back({{"sheet", c.addr.sheet},
                     {"address", a1(c.addr)},
                     {"kind", change_kind_name(c.kind)},
                     {"old_value", value_json(c.old_value)},
                     {"new_value", value_json(c.new_value)},
                     {"old_formula", opt_json(c.old_formula)},
                     {"new_formula", opt_json(c.new_formula)}});
  }
  json structural = json::array();
  for (const auto& s : cs.structural) {
    structural.push_back(
        {{"sheet", s.sheet}, {"kind", struct_kind_name(s.kind)}, {"index", s.index}, {"count", s.count}});
  }
  json renamed = json::array();
  for (const auto& r : cs.sheets_renamed) renamed.push_back({{"old", r.old_name}, {"new", r.new_name}});
  json names = json::array();
  for (const auto& d : cs.defined_name_changes) {
    names.push_back({{"name", d.name}, {"old", opt_json(d.old_refers_to)}, {"new", opt_json(d.new_refers_to)}});
  }
  json links = json::array();
  for (const auto& l : cs.link_changes) {
    links.push_back({{"index", l.index}, {"old_target", l.old_target}, {"new_target", l.new_target}});
  }
  json vis = json::array();
  for (const auto& v : cs.visibility_changes) {
    vis.push_back({{"sheet", v.sheet},
                   {"old", visibility_name(v.old_state)},
                   {"new", visibility_name(v.new_state)}});
  }
  return json{{"old_label", cs.old_label},
              {"new_label", cs.new_label},
              {"cell_changes", cells},
              {"structural", structural},
              {"sheets_added", cs.sheets_added},
              {"sheets_removed", cs.sheets_removed},
              {"sheets_renamed", renamed},
              {"defined_name_changes", names},
              {"link_changes", links},
              {"visibility_changes", vis},
              {"macro_changed", cs.macro_changed},
              {"connections_changed", cs.connections_changed},
              {"ambiguous_sheets", cs.ambiguous_sheets}}
             .dump(2) +
         "\n";
}

std::string render_csv(const ChangeSet& cs) {
  std::string out = csv_row(
      {"category", "sheet", "location", "kind", "count", "old_value", "new_value", "old_formula", "new_formula"});
  auto row = [&](std::string cat, std::string sheet, std::string loc, std::string kind,
                 std::string count = "", std::string ov = "", std::string nv = "", std::string of = "",
                 std::string nf = "") {
    out += csv_row({cat, sheet, loc, kind, count, ov, nv, of, nf});
  };
  if (cs.macro_changed) row("workbook", "", "", "MacroChanged");
  if (cs.connections_changed) row("workbook", "", "", "ConnectionsChanged");
  for (const auto& s : cs.sheets_added) row("workbook", s, "", "SheetAdded");
  for (const auto& s : cs.sheets_removed) row("workbook", s, "", "SheetRemoved");
  for (const auto& r : cs.sheets_renamed) row("workbook", r.new_name, "", "SheetRenamed", "", r.old_name, r.new_name);
  for (const auto& v : cs.visibility_changes) {
    row("workbook", v.sheet, "", "VisibilityChanged", "", std::string(visibility_name(v.old_state)),
        std::string(visibility_name(v.new_state)));
  }
  for (const auto& d : cs.defined_name_changes) {
    row("workbook", "", d.name, "NameChanged", "", d.old_refers_to.value_or(""), d.new_refers_to.value_or(""));
  }
  for (const auto& l : cs.link_changes) {
    row("workbook", "", std::to_string(l.index), "LinkChanged", "", l.old_target, l.new_target);
  }
  for (const auto& s : cs.ambiguous_sheets) row("sheet", s, "", "Ambiguous");
  for (const auto& s : cs.structural) {
    const bool r = s.kind == StructKind::RowInserted || s.kind == StructKind::RowDeleted;
    row("structure", s.sheet, r ? std::to_string(s.index) : column_label(s.index),
        std::string(struct_kind_name(s.kind)), std::to_string(s.count));
  }
  for (const auto& c : cs.cell_changes) {
    row("cell", c.addr.sheet, a1(c.addr), std::string(change_kind_name(c.kind)), "",
        c.old_value ? c.old_value->display() : "", c.new_value ? c.new_value->display() : "",
        c.old_formula.value_or(""), c.new_formula.value_or(""));
  }
  return out;
}

}  // namespace

std::string render_change_report(const ChangeSet& cs, ReportFormat format) {
  switch (format) {
    case ReportFormat::Text: return render_text(cs);
    case ReportFormat::Json: return render_json(cs);
    case ReportFormat::Csv: return render_csv(cs);
  }
  return {};
}

// ---------------------------------------------------------------------------
// Alerts
// ---------------------------------------------------------------------------

std::vector<Category> parse_filter(std::string_view text) {
  static const std::map<std::string, std::vector<Category>> kTerms = {
      {"values", {Category::Values}},
      {"formulas", {Category::Formulas}},
      {"cells", {Category::Cells}},
      {"structure", {Category::Structure}},
      {"structural", {Category::Structure}},
      {"sheets", {Category::Sheets}},
      {"names", {Category::Names}},
      {"links", {Category::Links}},
      {"macros", {Category::Macros}},
      {"connections", {Category::Connections}},
      {"queries", {Category::Connections}},
      {"any", {Category::Cells, Category::Structure, Category::Sheets, Category::Names,
               Category::Links, Category::Macros, Category::Connections}},
  };
  std::vector<Category> out;
  std::string word;
  std::size_t start = 0;
  bool expect_term = true;
  auto flush = [&](std::size_t at) {
    if (word.empty()) return;
    const auto lower = to_lower(word);
    if (lower == "or") {
      if (expect_term) throw Error(ErrorCode::SyntaxError, "filter: OR without a category", start);
      expect_term = true;
    } else {
      if (!expect_term) throw Error(ErrorCode::SyntaxError, "filter: expected OR before " + word, start);
      const auto it = kTerms.find(lower == "*" ? "any" : lower);
      if (it == kTerms.end()) throw Error(ErrorCode::SyntaxError, "filter: unknown category " + word, start);
      for (auto c : it->second) {
        if (std::find(out.begin(), out.end(), c) == out.end()) out.push_back(c);
      }
      expect_term = false;
    }
    word.clear();
    start = at;
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c == ' ' || c == '\t' || c == ',') {
      flush(i + 1);
      if (c == ',') {
        if (expect_term) throw Error(ErrorCode::SyntaxError, "filter: misplaced comma", i);
        expect_term = true;
      }
      start = i + 1;
    } else {
      if (word.empty()) start = i;
      word += c;
    }
  }
  flush(text.size());
  if (out.empty() || expect_term) throw Error(ErrorCode::SyntaxError, "filter: missing category", text.size());
  return out;
}

bool matches(const ChangeSet& cs, const std::vector<Category>& filter) {
  auto any_cell = [&](std::initializer_list<ChangeKind> kinds) {
    return std::any_of(cs.cell_changes.begin(), cs.cell_changes.end(), [&](const CellChange& c) {
      return std::find(kinds.begin(), kinds.end(), c.kind) != kinds.end();
    });
  };
  for (auto c : filter) {
    switch (c) {
      case Category::Values:
        if (any_cell({ChangeKind::ValueChanged, ChangeKind::BothChanged})) return true;
        break;
      case Category::Formulas:
        if (any_cell({ChangeKind::FormulaChanged, ChangeKind::BothChanged})) return true;
        break;
      case Category::Cells:
        if (!cs.cell_changes.empty()) return true;
        break;
      case Category::Structure:
        if (!cs.structural.empty() || !cs.ambiguous_sheets.empty()) return true;
        break;
      case Category::Sheets:
        if (!cs.sheets_added.empty() || !cs.sheets_removed.empty() || !cs.sheets_renamed.empty() ||
            !cs.visibility_changes.empty()) {
          return true;
        }
        break;
      case Category::Names:
        if (!cs.defined_name_changes.empty()) return true;
        break;
      case Category::Links:
        if (!cs.link_changes.empty()) return true;
        break;
      case Category::Macros:
        if (cs.macro_changed) return true;
        break;
      case Category::Connections:
        if (cs.connections_changed) return true;
        break;
    }
  }
  return false;
}

namespace {

std::string header_safe(std::string_view s) {
  std::string out;
  for (char c : s) out += (c == '\r' || c == '\n') ? ' ' : c;
  return out;
}

std::string file_safe(std::string_view s) {
  std::string out;
  for (char c : s) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                    c == '-' || c == '_' || c == '.' || c == '@';
    out += ok ? c : '_';
  }
  return out.empty() ? "user" : out;
}

std::string crlf(std::string_view text) {
  std::string out;
  for (char c : text) {
    if (c == '\n') out += '\r';
    out += c;
  }
  return out;
}

}  // namespace

std::vector<fs::path> notify(const ChangeSet& cs, const std::vector<Subscription>& subscriptions,
                             const fs::path& outbox, const Clock& clock) {
  std::vector<fs::path> written;
  if (cs.empty()) return written;
  std::error_code ec;
  fs::create_directories(outbox, ec);
  if (ec || !fs::is_directory(outbox)) {
    throw Error(ErrorCode::OutboxUnwritable, "cannot use outbox " + outbox.string());
  }
  const auto now = clock();
  std::string stamp = format_timestamp(now);  // 2026-10-15T09:30:00Z
  stamp.erase(std::remove_if(stamp.begin(), stamp.end(), [](char c) { return c == '-' || c == ':'; }),
              stamp.end());
  std::string date = format_http_date(now);
  date.replace(date.size() - 3, 3, "+0000");

  // Continue numbering after any message already written this second.
  int seq = 0;
  for (const auto& de : fs::directory_iterator(outbox, ec)) {
    const auto name = de.path().filename().string();
    if (name.rfind(stamp + "-", 0) == 0) seq = std::max(seq, std::atoi(name.c_str() + stamp.size() + 1));
  }
  const std::string report = crlf(render_change_report(cs, ReportFormat::Text));
  for (const auto& sub : subscriptions) {
    if (!matches(cs, sub.filter)) continue;
    fs::path path;
    int fd = -1;
    for (int attempt = 0; fd < 0 && attempt < 1000; ++attempt) {
      char num[16];
      std::snprintf(num, sizeof num, "%06d", ++seq);
      path = outbox / (stamp + "-" + num + "-" + file_safe(sub.user) + ".eml");
      fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_EXCL | O_CLOEXEC, 0644);
      if (fd < 0 && errno != EEXIST) break;
    }
    if (fd < 0) throw Error(ErrorCode::OutboxUnwritable, "cannot create message in " + outbox.string());
    const std::string msg = "From: sheetguard@localhost\r\nTo: " + header_safe(sub.user) +
                            "\r\nSubject: Workbook changes: " + header_safe(cs.old_label) + " -> " +
                            header_safe(cs.new_label) + "\r\nDate: " + date + "\r\nMessage-ID: <" +
                            stamp + "." + std::to_string(seq) + "." + random_hex(4) +
                            "@sheetguard>\r\nMIME-Version: 1.0\r\nContent-Type: text/plain; charset=utf-8\r\n\r\n" +
                            report + (report.ends_with("\r\n") ? "" : "\r\n");
    const auto n = ::write(fd, msg.data(), msg.size());
    ::close(fd);
    if (n != static_cast<ssize_t>(msg.size())) {
      throw Error(ErrorCode::OutboxUnwritable, "short write to " + path.string());
    }
    written.push_back(path);
  }
  return written;
}

}  // namespace sheetguard::audit
