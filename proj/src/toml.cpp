#include "stlplan/toml.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

namespace stlplan::toml {

namespace {

using json = nlohmann::json;

bool is_bare_key_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-'; }

class Reader {
 public:
  explicit Reader(std::string_view src) : src_(src) {}

  json run() {
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
  [[noreturn]] void fail(const std::string& msg) const { throw Error(msg, line_); }

  bool eof() const { return pos_ >= src_.size(); }
  char peek(std::size_t ahead = 0) const { return pos_ + ahead < src_.size() ? src_[pos_ + ahead] : '\0'; }
  char get() {
    char c = src_[pos_++];
    if (c == '\n') ++line_;
    return c;
  }

  void skip_inline_space() {
    while (!eof() && (peek() == ' ' || peek() == '\t')) get();
  }
  void skip_comment() {
    if (peek() == '#') {
      while (!eof() && peek() != '\n') get();
    }
  }
  void skip_blank_lines() {
    while (!eof()) {
      skip_inline_space();
      skip_comment();
      if (peek() == '\n' || peek() == '\r') {
        get();
      } else {
        break;
      }
    }
  }
  // Whitespace, newlines and comments inside arrays and inline tables.
  void skip_any_space() {
    while (!eof()) {
      char c = peek();
      if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
        get();
      } else if (c == '#') {
        skip_comment();
      } else {
        break;
      }
    }
  }
  void end_of_line() {
    skip_inline_space();
    skip_comment();
    if (eof()) return;
    if (peek() == '\r') get();
    if (eof()) return;
    if (peek() != '\n') fail(std::string("unexpected '") + peek() + "' after value");
    get();
  }
  void expect(char c) {
    if (peek() != c) fail(std::string("expected '") + c + "'");
    get();
  }

  std::string key_part() {
    skip_inline_space();
    if (peek() == '"') return basic_string();
    if (peek() == '\'') return literal_string();
    std::size_t start = pos_;
    while (!eof() && is_bare_key_char(peek())) get();
    if (pos_ == start) fail("expected key");
    return std::string(src_.substr(start, pos_ - start));
  }

  std::vector<std::string> key_path() {
    std::vector<std::string> path{key_part()};
    skip_inline_space();
    while (peek() == '.') {
      get();
      path.push_back(key_part());
      skip_inline_space();
    }
    return path;
  }

  json* descend(json* node, const std::string& key) {
    json& child = (*node)[key];
    if (child.is_null()) child = json::object();
    if (child.is_array()) {
      if (child.empty() || !child.back().is_object()) fail("key '" + key + "' is not a table");
      return &child.back();
    }
    if (!child.is_object()) fail("key '" + key + "' is not a table");
    return &child;
  }

  json* header(json& root) {
    get();
    bool array = peek() == '[';
    if (array) get();
    auto path = key_path();
    expect(']');
    if (array) expect(']');
    json* node = &root;
    for (std::size_t i = 0; i + 1 < path.size(); ++i) node = descend(node, path[i]);
    const std::string& last = path.back();
    if (array) {
      json& arr = (*node)[last];
      if (arr.is_null()) arr = json::array();
      if (!arr.is_array()) fail("key '" + last + "' is not an array of tables");
      arr.push_back(json::object());
      return &arr.back();
    }
    return descend(node, last);
  }

  void assign(json& table, const std::vector<std::string>& path, json value) {
    json* node = &table;
    for (std::size_t i = 0; i + 1 < path.size(); ++i) node = descend(node, path[i]);
    if (node->contains(path.back())) fail("duplicate key '" + path.back() + "'");
    (*node)[path.back()] = std::move(value);
  }

  void key_value(json& table) {
    auto path = key_path();
    skip_inline_space();
    expect('=');
    skip_inline_space();
    assign(table, path, value());
  }

  json value() {
    char c = peek();
    if (c == '"') {
      if (peek(1) == '"' && peek(2) == '"') fail("multi-line strings are not supported");
      return basic_string();
    }
    if (c == '\'') return literal_string();
    if (c == '[') return array();
    if (c == '{') return inline_table();
    if (src_.substr(pos_, 4) == "true" && !is_bare_key_char(peek(4))) {
      pos_ += 4;
      return true;
    }
    if (src_.substr(pos_, 5) == "false" && !is_bare_key_char(peek(5))) {
      pos_ += 5;
      return false;
    }
    return number();
  }

  json array() {
    get();
    json arr = json::array();
    skip_any_space();
    while (peek() != ']') {
      if (eof()) fail("unterminated array");
      arr.push_back(value());
      skip_any_space();
      if (peek() == ',') {
        get();
        skip_any_space();
      } else if (peek() != ']') {
        fail("expected ',' or ']' in array");
      }
    }
    get();
    return arr;
  }

  json inline_table() {
    get();
    json table = json::object();
    skip_inline_space();
    if (peek() == '}') {
      get();
      return table;
    }
    while (true) {
      auto path = key_path();
      skip_inline_space();
      expect('=');
      skip_inline_space();
      assign(table, path, value());
      skip_inline_space();
      if (peek() == ',') {
        get();
        continue;
      }
      expect('}');
      return table;
    }
  }

  std::string literal_string() {
    get();
    std::string out;
    while (peek() != '\'') {
      if (eof() || peek() == '\n') fail("unterminated string");
      out.push_back(get());
    }
    get();
    return out;
  }

  std::string basic_string() {
    get();
    std::string out;
    while (peek() != '"') {
      if (eof() || peek() == '\n') fail("unterminated string");
      char c = get();
      if (c != '\\') {
        out.push_back(c);
        continue;
      }
      char e = get();
      switch (e) {
        case '"': out.push_back('"'); break;
        case '\\': out.push_back('\\'); break;
        case 'n': out.push_back('\n'); break;
        case 't': out.push_back('\t'); break;
        case 'r': out.push_back('\r'); break;
        case 'b': out.push_back('\b'); break;
        case 'f': out.push_back('\f'); break;
        case 'u': {
          std::string hex(src_.substr(pos_, 4));
          if (hex.size() != 4) fail("bad unicode escape");
          pos_ += 4;
          unsigned cp = std::stoul(hex, nullptr, 16);
          if (cp < 0x80) {
            out.push_back(static_cast<char>(cp));
          } else if (cp < 0x800) {
            out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
            out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
          } else {
            out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
            out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
          }
          break;
        }
        default: fail(std::string("unknown escape '\\") + e + "'");
      }
    }
    get();
    return out;
  }

  json number() {
    std::size_t start = pos_;
    while (!eof() && (is_bare_key_char(peek()) || peek() == '.' || peek() == '+')) get();
    std::string raw(src_.substr(start, pos_ - start));
    if (raw.empty()) fail("expected a value");
    std::string s;
    for (char c : raw) {
      if (c != '_') s.push_back(c);
    }
    std::string body = (s[0] == '+' || s[0] == '-') ? s.substr(1) : s;
    const double sign = s[0] == '-' ? -1.0 : 1.0;
    if (body == "inf") return sign * std::numeric_limits<double>::infinity();
    if (body == "nan") return std::numeric_limits<double>::quiet_NaN();
    const bool is_float = s.find_first_of(".eE") != std::string::npos;
    const char* first = s.data() + (s[0] == '+' ? 1 : 0);
    const char* last = s.data() + s.size();
    if (is_float) {
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(first, last, v);
      if (ec != std::errc() || ptr != last) fail("malformed number '" + raw + "'");
      return v;
    }
    std::int64_t v = 0;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last) fail("malformed value '" + raw + "'");
    return v;
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  int line_ = 1;
};

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default: out.push_back(c);
    }
  }
  return out + "\"";
}

std::string key_text(const std::string& k) {
  bool bare = !k.empty();
  for (char c : k) bare = bare && is_bare_key_char(c);
  return bare ? k : quote(k);
}

std::string scalar_text(const json& v) {
  if (v.is_string()) return quote(v.get<std::string>());
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
  if (v.is_number_float()) {
    double d = v.get<double>();
    if (std::isnan(d)) return "nan";
    if (std::isinf(d)) return d > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", d);
    std::string s(buf);
    if (s.find_first_of(".en") == std::string::npos) s += ".0";
    return s;
  }
  if (v.is_array()) {
    std::string out = "[";
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) out += ", ";
      out += scalar_text(v[i]);
    }
    return out + "]";
  }
  if (v.is_object()) {
    std::string out = "{";
    bool first = true;
    for (const auto& [k, x] : v.items()) {
      if (!first) out += ", ";
      first = false;
      out += key_text(k) + " = " + scalar_text(x);
    }
    return out + "}";
  }
  throw std::invalid_argument("toml: cannot write null values");
}

bool is_table_array(const json& v) {
  if (!v.is_array() || v.empty()) return false;
  for (const auto& e : v) {
    if (!e.is_object()) return false;
  }
  return true;
}

void emit_table(const json& table, const std::string& prefix, std::ostringstream& out) {
  for (const auto& [k, v] : table.items()) {
    if (v.is_object() || is_table_array(v)) continue;
    out << key_text(k) << " = " << scalar_text(v) << '\n';
  }
  for (const auto& [k, v] : table.items()) {
    const std::string path = prefix.empty() ? key_text(k) : prefix + "." + key_text(k);
    if (v.is_object()) {
      out << "\n[" << path << "]\n";
      emit_table(v, path, out);
    } else if (is_table_array(v)) {
      for (const auto& e : v) {
        out << "\n[[" << path << "]]\n";
        emit_table(e, path, out);
      }
    }
  }
}

}  // namespace

nlohmann::json parse(std::string_view text) { return Reader(text).run(); }

nlohmann::json parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse(ss.str());
  } catch (const Error& e) {
    throw Error(path + ": " + e.what(), e.line());
  }
}

std::string dump(const nlohmann::json& doc) {
  if (!doc.is_object()) throw std::invalid_argument("toml: document root must be a table");
  std::ostringstream out;
  emit_table(doc, "", out);
  return out.str();
}

}  // namespace stlplan::toml
