#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

// Line-oriented record dialect shared by plan, scenario, and context files:
//
//   keyword positional... key=value...
//
// '#' starts a comment line; blank lines are ignored. Numbers are plain
// decimal in the C locale.
namespace aidtwin::records {

struct Record {
  int line = 0;                // 1-based line number in the source text
  std::string keyword;
  std::string rest;            // raw text after the keyword, trimmed
  std::vector<std::string> positional;
  std::map<std::string, std::string> named;
};

[[nodiscard]] std::vector<Record> split_records(std::string_view text);

/// Locale-independent decimal parse. Rejects trailing garbage, inf and nan.
[[nodiscard]] std::optional<double> parse_number(std::string_view token);

/// Shortest decimal representation that parses back to the same double.
[[nodiscard]] std::string format_number(double value);

[[nodiscard]] std::string_view trim(std::string_view s);

}  // namespace aidtwin::records
