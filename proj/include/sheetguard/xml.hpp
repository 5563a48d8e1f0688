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

#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace sheetguard::xml {

// Element tree built with expat. Element and attribute names are stored by
// local name (namespace prefix stripped); `qname` keeps the original.
struct Element {
  std::string name;
  std::string qname;
  std::vector<std::pair<std::string, std::string>> attributes;
  // Namespace declarations made on this element: prefix ("" for the
  // default namespace) and URI.
  std::vector<std::pair<std::string, std::string>> namespace_decls;
  std::vector<Element> children;
  std::string text;  // character data directly inside this element
  std::size_t start_offset = 0;  // byte offset of '<' of the start tag
  std::size_t start_length = 0;  // length of the start tag in bytes

  const Element* child(std::string_view local) const;
  std::vector<const Element*> children_named(std::string_view local) const;
  std::optional<std::string> attr(std::string_view local) const;
  // Concatenated text of all descendants (document order).
  std::string deep_text() const;
};

// Throws CorruptPart naming `part_name` when the document is not well formed.
Element parse(std::string_view document, std::string_view part_name);

std::string escape(std::string_view text);       // element content
std::string escape_attr(std::string_view text);  // attribute values

}  // namespace sheetguard::xml
