#include "hscrf/toml_lite.hpp"

#include <fstream>
#include <sstream>

#include "hscrf/common.hpp"

namespace hscrf {

using nlohmann::json;

namespace {

class Parser {
 public:
  Parser(const std::string& text, std::string name) : s_(text), name_(std::move(name)) {}

  json parse() {
    json root = json::object();
    json* table = &root;
    while (true) {
      skip_blank_lines();
      if (eof()) break;
      if (peek() == '[') {
        table = header(root);
      } else {
        key_value(*table);
      }
      end_of_line();
    }
    return root;
  }

 private:
  const std::string& s_;
  std::string name_;
  size_t pos_ = 0;
  int line_ = 1;

  [[noreturn]] void fail(const std::string& msg) const {
    throw UsageError(name_ + ":" + std::to_string(line_) + ": " + msg);
  }
  bool eof() const { return pos_ >= s_.size(); }
  char peek() const { return eof() ? '\0' : s_[pos_]; }
  char get() {
    const char c = s_[pos_++];
    if (c == '\n') ++line_;
    return c;
  }
  void skip_ws() {
    while (!eof() && (peek() == ' ' || peek() == '\t')) ++pos_;
  }
  void skip_comment() {
    if (peek() == '#')
      while (!eof() && peek() != '\n') ++pos_;
  }
  void skip_blank_lines() {
    while (true) {
      skip_ws();
      skip_comment();
      if (peek() == '\r') ++pos_;
      if (peek() == '\n') {
        get();
        continue;
      }
      break;
    }
  }
  // Whitespace, comments and newlines inside arrays and inline tables.
  void skip_all() {
    while (!eof()) {
      skip_ws();
      skip_comment();
      if (peek() == '\n' || peek() == '\r')
        get();
      else
        break;
    }
  }
  void end_of_line() {
    skip_ws();
    skip_comment();
    if (peek() == '\r') ++pos_;
    if (eof()) return;
    if (peek() != '\n') fail("unexpected text after value");
    get();
  }

  std::string key() {
    skip_ws();
    if (peek() == '"') return basic_string();
    if (peek() == '\'') return literal_string();
    std::string k;
    while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' || peek() == '-')) k += get();
    if (k.empty()) fail("expected a key");
    return k;
  }

  std::vector<std::string> dotted_key() {
    std::vector<std::string> parts{key()};
    skip_ws();
    while (peek() == '.') {
      ++pos_;
      parts.push_back(key());
      skip_ws();
    }
    return parts;
  }

  json* header(json& root) {
    ++pos_;
    const bool array = peek() == '[';
    if (array) ++pos_;
    const auto parts = dotted_key();
    if (get() != ']' || (array && get() != ']')) fail("malformed table header");
    json* t = &root;
    for (size_t i = 0; i < parts.size(); ++i) {
      const bool last = i + 1 == parts.size();
      json& slot = (*t)[parts[i]];
      if (last && array) {
        if (slot.is_null()) slot = json::array();
        if (!slot.is_array()) fail("'" + parts[i] + "' is not an array of tables");
        slot.push_back(json::object());
        t = &slot.back();
      } else if (slot.is_array()) {
        if (slot.empty() || !slot.back().is_object()) fail("'" + parts[i] + "' is not a table");
        t = &slot.back();
      } else {
        if (slot.is_null()) slot = json::object();
        if (!slot.is_object()) fail("'" + parts[i] + "' is not a table");
        t = &slot;
      }
    }
    return t;
  }

  void key_value(json& table) {
    const auto parts = dotted_key();
    skip_ws();
    if (get() != '=') fail("expected '=' after key");
    skip_ws();
    json* t = &table;
    for (size_t i = 0; i + 1 < parts.size(); ++i) {
      json& slot = (*t)[parts[i]];
      if (slot.is_null()) slot = json::object();
      if (!slot.is_object()) fail("'" + parts[i] + "' is not a table");
      t = &slot;
    }
    if (t->contains(parts.back())) fail("duplicate key '" + parts.back() + "'");
    (*t)[parts.back()] = value();
  }

  json value() {
    const char c = peek();
    if (c == '"') return basic_string();
    if (c == '\'') return literal_string();
    if (c == '[') return array();
    if (c == '{') return inline_table();
    if (s_.compare(pos_, 4, "true") == 0) {
      pos_ += 4;
      return true;
    }
    if (s_.compare(pos_, 5, "false") == 0) {
      pos_ += 5;
      return false;
    }
    return number();
  }

  std::string basic_string() {
    ++pos_;
    std::string out;
    while (true) {
      if (eof() || peek() == '\n') fail("unterminated string");
      const char c = get();
      if (c == '"') break;
      if (c != '\\') {
        out += c;
        continue;
      }
      const char e = get();
      switch (e) {
        case 'n': out += '\n'; break;
        case 't': out += '\t'; break;
        case '"': out += '"'; break;
        case '\\': out += '\\'; break;
        default: fail(std::string("unsupported escape \\") + e);
      }
    }
    return out;
  }

  std::string literal_string() {
    ++pos_;
    std::string out;
    while (true) {
      if (eof() || peek() == '\n') fail("unterminated string");
      const char c = get();
      if (c == '\'') break;
      out += c;
    }
    return out;
  }

  json array() {
    ++pos_;
    json a = json::array();
    while (true) {
      skip_all();
      if (peek() == ']') {
        ++pos_;
        return a;
      }
      a.push_back(value());
      skip_all();
      if (peek() == ',') {
        ++pos_;
      } else if (peek() != ']') {
        fail("expected ',' or ']' in array");
      }
    }
  }

  json inline_table() {
    ++pos_;
    json t = json::object();
    skip_ws();
    if (peek() == '}') {
      ++pos_;
      return t;
    }
    while (true) {
      skip_ws();
      key_value(t);
      skip_ws();
      const char c = get();
      if (c == '}') return t;
      if (c != ',') fail("expected ',' or '}' in inline table");
    }
  }

  json number() {
    std::string tok;
    while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '+' || peek() == '-' ||
                      peek() == '.' || peek() == '_'))
      tok += get();
    if (tok.empty()) fail("expected a value");
    std::string clean;
    for (char c : tok)
      if (c != '_') clean += c;
    const bool is_float = clean.find_first_of(".eE") != std::string::npos || clean == "inf" || clean == "+inf" ||
                          clean == "-inf" || clean == "nan";
    try {
      size_t used = 0;
      if (is_float) {
        const double v = std::stod(clean, &used);
        if (used == clean.size()) return v;
      } else {
        const long long v = std::stoll(clean, &used, 10);
        if (used == clean.size()) return v;
      }
    } catch (const std::exception&) {
    }
    fail("invalid value '" + tok + "'");
  }
};

}  // namespace

json parse_toml(const std::string& text, const std::string& name) { return Parser(text, name).parse(); }

json read_toml_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError(path.string() + ": cannot open");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_toml(buf.str(), path.string());
}

}  // namespace hscrf
