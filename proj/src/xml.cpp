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

#include "sheetguard/xml.hpp"

#include <expat.h>

#include <memory>

#include "sheetguard/error.hpp"

namespace sheetguard::xml {

namespace {

std::string local_name(std::string_view qname) {
  const auto colon = qname.find(':');
  return std::string(colon == std::string_view::npos ? qname : qname.substr(colon + 1));
}

struct Builder {
  XML_Parser parser = nullptr;
  Element root;
  bool have_root = false;
  std::vector<Element*> stack;

  static void on_start(void* user, const XML_Char* name, const XML_Char** atts) {
    auto* self = static_cast<Builder*>(user);
    Element e;
    e.qname = name;
    e.name = local_name(name);
    for (std::size_t i = 0; atts[i] != nullptr; i += 2) {
      const std::string_view qn = atts[i];
      if (qn == "xmlns") e.namespace_decls.emplace_back("", atts[i + 1]);
      if (qn.substr(0, 6) == "xmlns:") e.namespace_decls.emplace_back(qn.substr(6), atts[i + 1]);
      e.attributes.emplace_back(local_name(atts[i]), atts[i + 1]);
    }
    e.start_offset = static_cast<std::size_t>(XML_GetCurrentByteIndex(self->parser));
    e.start_length = static_cast<std::size_t>(XML_GetCurrentByteCount(self->parser));
    if (self->stack.empty()) {
      self->root = std::move(e);
      self->have_root = true;
      self->stack.push_back(&self->root);
    } else {
      auto& siblings = self->stack.back()->children;
      siblings.push_back(std::move(e));
      self->stack.push_back(&siblings.back());
    }
  }

  static void on_end(void* user, const XML_Char*) {
    static_cast<Builder*>(user)->stack.pop_back();
  }

  static void on_text(void* user, const XML_Char* s, int len) {
    auto* self = static_cast<Builder*>(user);
    if (!self->stack.empty()) self->stack.back()->text.append(s, static_cast<std::size_t>(len));
  }
};

void append_deep_text(const Element& e, std::string& out) {
  // Mixed content is rare in SpreadsheetML; children follow own text.
  out += e.text;
  for (const auto& c : e.children) append_deep_text(c, out);
}

}  // namespace

const Element* Element::child(std::string_view local) const {
  for (const auto& c : children) {
    if (c.name == local) return &c;
  }
  return nullptr;
}

std::vector<const Element*> Element::children_named(std::string_view local) const {
  std::vector<const Element*> out;
  for (const auto& c : children) {
    if (c.name == local) out.push_back(&c);
  }
  return out;
}

std::optional<std::string> Element::attr(std::string_view local) const {
  for (const auto& [k, v] : attributes) {
    if (k == local) return v;
  }
  return std::nullopt;
}

std::string Element::deep_text() const {
  std::string out;
  append_deep_text(*this, out);
  return out;
}

Element parse(std::string_view document, std::string_view part_name) {
  std::unique_ptr<std::remove_pointer_t<XML_Parser>, decltype(&XML_ParserFree)> parser(
      XML_ParserCreate("UTF-8"), &XML_ParserFree);
  if (!parser) throw Error(ErrorCode::IoError, "cannot create XML parser");
  Builder b;
  b.parser = parser.get();
  XML_SetUserData(parser.get(), &b);
  XML_SetElementHandler(parser.get(), &Builder::on_start, &Builder::on_end);
  XML_SetCharacterDataHandler(parser.get(), &Builder::on_text);
  if (XML_Parse(parser.get(), document.data(), static_cast<int>(document.size()),
                XML_TRUE) != XML_STATUS_OK ||
      !b.have_root) {
    const auto line = XML_GetCurrentLineNumber(parser.get());
    const char* why = XML_ErrorString(XML_GetErrorCode(parser.get()));
    throw Error(ErrorCode::CorruptPart,
                std::string(part_name) + ": " + (why ? why : "no root element") +
                    " at line " + std::to_string(line));
  }
  return std::move(b.root);
}

std::string escape(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

std::string escape_attr(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

}  // namespace sheetguard::xml
