#pragma once

#include <json.hpp>

#include <stdexcept>
#include <string>
#include <string_view>

namespace stlplan::toml {

class Error : public std::runtime_error {
 public:
  Error(const std::string& what, int line) : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

/// Reads the TOML subset used by scenario, plan, and grid files into a JSON tree:
/// tables, arrays of tables, dotted keys, basic and literal strings, integers, floats
/// (including inf/nan), booleans, arrays, and inline tables. Dates and multi-line
/// strings are rejected.
nlohmann::json parse(std::string_view text);

nlohmann::json parse_file(const std::string& path);

/// Writes a JSON object tree back out; floats keep 17 significant digits.
std::string dump(const nlohmann::json& doc);

}  // namespace stlplan::toml
