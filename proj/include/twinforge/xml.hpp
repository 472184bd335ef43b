#pragma once

#include <string>
#include <utility>
#include <vector>

#include "twinforge/common.hpp"

namespace twinforge {

// Minimal XML reader covering the URDF subset this project emits: elements,
// attributes, comments, declarations, self-closing tags. Tracks line numbers
// so parse errors can point at the offending element. Text content is ignored
// (the subset carries all data in attributes).
struct XmlNode {
  std::string name;
  std::vector<std::pair<std::string, std::string>> attributes;
  std::vector<XmlNode> children;
  int line = 0;

  const std::string* attribute(const std::string& key) const {
    for (const auto& [k, v] : attributes)
      if (k == key) return &v;
    return nullptr;
  }

  const XmlNode* child(const std::string& child_name) const {
    for (const auto& c : children)
      if (c.name == child_name) return &c;
    return nullptr;
  }

  std::vector<const XmlNode*> children_named(const std::string& child_name) const {
    std::vector<const XmlNode*> out;
    for (const auto& c : children)
      if (c.name == child_name) out.push_back(&c);
    return out;
  }
};

class XmlParser {
 public:
  static XmlNode parse(const std::string& text) {
    XmlParser parser(text);
    parser.skip_misc();
    require(!parser.at_end(), "parse-error", "xml: document has no root element");
    XmlNode root = parser.parse_element();
    parser.skip_misc();
    require(parser.at_end(), "parse-error",
            "xml line " + std::to_string(parser.line_) + ": trailing content after root element");
    return root;
  }

 private:
  explicit XmlParser(const std::string& text) : text_(text) {}

  bool at_end() const { return pos_ >= text_.size(); }
  char peek() const { return text_[pos_]; }

  char take() {
    const char c = text_[pos_++];
    if (c == '\n') ++line_;
    return c;
  }

  [[noreturn]] void error(const std::string& message) const {
    fail("parse-error", "xml line " + std::to_string(line_) + ": " + message);
  }

  void skip_whitespace() {
    while (!at_end() && (peek() == ' ' || peek() == '\t' || peek() == '\r' || peek() == '\n'))
      take();
  }

  // Whitespace, comments, processing instructions / declarations.
  void skip_misc() {
    for (;;) {
      skip_whitespace();
      if (at_end()) return;
      if (peek() != '<') {
        // stray text between elements: tolerated, the subset carries no text data
        take();
        continue;
      }
      if (starts_with("<!--")) {
        const std::size_t end = text_.find("-->", pos_);
        if (end == std::string::npos) error("unterminated comment");
        while (pos_ < end + 3) take();
        continue;
      }
      if (starts_with("<?")) {
        const std::size_t end = text_.find("?>", pos_);
        if (end == std::string::npos) error("unterminated declaration");
        while (pos_ < end + 2) take();
        continue;
      }
      if (starts_with("<!")) {
        const std::size_t end = text_.find('>', pos_);
        if (end == std::string::npos) error("unterminated doctype");
        while (pos_ <= end) take();
        continue;
      }
      return;  // an element tag
    }
  }

  bool starts_with(const std::string& prefix) const {
    return text_.compare(pos_, prefix.size(), prefix) == 0;
  }

  static bool is_name_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == ':' ||
           c == '.';
  }

  std::string parse_name() {
    std::string name;
    while (!at_end() && is_name_char(peek())) name.push_back(take());
    if (name.empty()) error("expected a name");
    return name;
  }

  std::string decode_entities(const std::string& raw) const {
    std::string out;
    for (std::size_t i = 0; i < raw.size(); ++i) {
      if (raw[i] != '&') {
        out.push_back(raw[i]);
        continue;
      }
      const std::size_t semi = raw.find(';', i);
      if (semi == std::string::npos) fail("parse-error", "xml: unterminated entity reference");
      const std::string entity = raw.substr(i + 1, semi - i - 1);
      if (entity == "lt")
        out.push_back('<');
      else if (entity == "gt")
        out.push_back('>');
      else if (entity == "amp")
        out.push_back('&');
      else if (entity == "quot")
        out.push_back('"');
      else if (entity == "apos")
        out.push_back('\'');
      else
        fail("parse-error", "xml: unsupported entity &" + entity + ";");
      i = semi;
    }
    return out;
  }

  XmlNode parse_element() {
    if (at_end() || peek() != '<') error("expected '<'");
    take();
    XmlNode node;
    node.line = line_;
    node.name = parse_name();
    for (;;) {
      skip_whitespace();
      if (at_end()) error("unterminated tag <" + node.name + ">");
      if (peek() == '/') {
        take();
        if (at_end() || peek() != '>') error("malformed self-closing tag");
        take();
        return node;
      }
      if (peek() == '>') {
        take();
        break;
      }
      const std::string key = parse_name();
      skip_whitespace();
      if (at_end() || peek() != '=') error("attribute '" + key + "' missing '='");
      take();
      skip_whitespace();
      if (at_end() || (peek() != '"' && peek() != '\'')) error("attribute value must be quoted");
      const char quote = take();
      std::string value;
      while (!at_end() && peek() != quote) value.push_back(take());
      if (at_end()) error("unterminated attribute value");
      take();
      node.attributes.emplace_back(key, decode_entities(value));
    }
    // children until the matching close tag
    for (;;) {
      skip_misc();
      if (at_end()) error("missing </" + node.name + ">");
      if (starts_with("</")) {
        take();
        take();
        const std::string closing = parse_name();
        if (closing != node.name)
          error("mismatched close tag </" + closing + "> for <" + node.name + ">");
        skip_whitespace();
        if (at_end() || peek() != '>') error("malformed close tag");
        take();
        return node;
      }
      node.children.push_back(parse_element());
    }
  }

  const std::string& text_;
  std::size_t pos_ = 0;
  int line_ = 1;
};

}  // namespace twinforge
