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

#include "sheetguard/uri.hpp"

#include <cctype>
#include <vector>

#include "sheetguard/util.hpp"

namespace sheetguard::uri {

namespace {

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

bool is_alpha(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }

// Position just past "scheme:" when the text starts with a URI scheme of at
// least two characters (a single letter is a drive, "C:").
std::size_t scheme_end(std::string_view s) {
  if (s.empty() || !is_alpha(s[0])) return 0;
  std::size_t i = 1;
  while (i < s.size() && (std::isalnum(static_cast<unsigned char>(s[i])) || s[i] == '+' ||
                          s[i] == '-' || s[i] == '.')) {
    ++i;
  }
  if (i < s.size() && s[i] == ':' && i >= 2) return i + 1;
  return 0;
}

bool is_drive_path(std::string_view s) {
  return s.size() >= 2 && is_alpha(s[0]) && s[1] == ':' &&
         (s.size() == 2 || s[2] == '/');
}

std::string remove_dot_segments(std::string_view path) {
  const bool leading = !path.empty() && path.front() == '/';
  const bool trailing = path.size() > 1 && path.back() == '/';
  std::vector<std::string> out;
  for (auto& seg : split(path, '/')) {
    if (seg.empty() || seg == ".") continue;
    if (seg == "..") {
      // Never pop a drive designator.
      if (!out.empty() && !is_drive_path(out.back())) out.pop_back();
      continue;
    }
    out.push_back(seg);
  }
  std::string result = leading ? "/" : "";
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (i) result += '/';
    result += out[i];
  }
  if (trailing && !out.empty()) result += '/';
  return result;
}

struct Parts {
  std::string scheme;     // lowercased, without ':'
  std::string authority;  // lowercased host[:port], may be empty
  std::string path;
};

// Splits an absolute normalized URI; `path` keeps its leading slash.
Parts split_absolute(std::string_view s) {
  Parts p;
  const std::size_t se = scheme_end(s);
  p.scheme = to_lower(s.substr(0, se - 1));
  std::string_view rest = s.substr(se);
  if (rest.substr(0, 2) == "//") {
    rest.remove_prefix(2);
    const auto slash = rest.find('/');
    p.authority = to_lower(rest.substr(0, slash));
    rest = slash == std::string_view::npos ? std::string_view{} : rest.substr(slash);
  }
  p.path = std::string(rest);
  return p;
}

std::string join(const Parts& p) {
  std::string out = p.scheme + ":";
  if (p.scheme == "file" || !p.authority.empty()) out += "//" + p.authority;
  out += p.path;
  return out;
}

std::string canonical_path(std::string path) {
  // Upper-case drive letters: "/c:/x" and "/C:/x" name the same file.
  if (path.size() >= 3 && path[0] == '/' && is_alpha(path[1]) && path[2] == ':') {
    path[1] = static_cast<char>(std::toupper(static_cast<unsigned char>(path[1])));
  }
  return remove_dot_segments(path);
}

}  // namespace

std::string percent_decode(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '%' && i + 2 < s.size()) {
      const int hi = hex_value(s[i + 1]);
      const int lo = hex_value(s[i + 2]);
      if (hi >= 0 && lo >= 0) {
        out.push_back(static_cast<char>(hi * 16 + lo));
        i += 2;
        continue;
      }
    }
    out.push_back(s[i]);
  }
  return out;
}

std::string percent_encode_path(std::string_view s) {
  static constexpr char kDigits[] = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : s) {
    if (std::isalnum(c) || c == '-' || c == '.' || c == '_' || c == '~' || c == '/') {
      out.push_back(static_cast<char>(c));
    } else {
      out.push_back('%');
      out.push_back(kDigits[c >> 4]);
      out.push_back(kDigits[c & 0xF]);
    }
  }
  return out;
}

std::string normalize(std::string_view raw) {
  std::string s(raw);
  for (auto& c : s) {
    if (c == '\\') c = '/';
  }
  s = percent_decode(s);
  if (s.rfind("//", 0) == 0) {
    // UNC path: //server/share/...
    s = "file:" + s;
  } else if (is_drive_path(s)) {
    s = "file:///" + s;
  } else if (!s.empty() && s.front() == '/') {
    s = "file://" + s;
  }
  if (!scheme_end(s)) return s;
  Parts p = split_absolute(s);
  if (p.scheme == "file" && p.authority.empty() && !p.path.empty() && p.path[0] != '/') {
    p.path = "/" + p.path;
  }
  p.path = canonical_path(p.path);
  if (p.path.empty() && p.scheme != "file") p.path = "/";
  return join(p);
}

bool is_absolute(std::string_view normalized) { return scheme_end(normalized) != 0; }

std::string resolve(std::string_view owner_uri, std::string_view target) {
  const std::string t = normalize(target);
  if (is_absolute(t)) return t;
  const std::string base = normalize(owner_uri);
  if (!is_absolute(base)) return t;
  Parts p = split_absolute(base);
  const auto slash = p.path.rfind('/');
  const std::string dir = slash == std::string::npos ? "/" : p.path.substr(0, slash + 1);
  p.path = canonical_path(dir + t);
  return join(p);
}

std::string from_path(const std::filesystem::path& path) {
  auto abs = std::filesystem::absolute(path).lexically_normal();
  std::string generic = abs.generic_string();
  if (generic.empty() || generic.front() != '/') generic = "/" + generic;
  return normalize("file://" + generic);
}

std::optional<std::filesystem::path> to_path(std::string_view uri) {
  const std::string n = normalize(uri);
  if (!is_absolute(n)) return std::nullopt;
  const Parts p = split_absolute(n);
  if (p.scheme != "file" || !p.authority.empty()) return std::nullopt;
  return std::filesystem::path(p.path);
}

std::string basename(std::string_view uri) {
  std::string n = normalize(uri);
  while (n.size() > 1 && n.back() == '/') n.pop_back();
  const auto slash = n.rfind('/');
  return slash == std::string::npos ? n : n.substr(slash + 1);
}

}  // namespace sheetguard::uri
