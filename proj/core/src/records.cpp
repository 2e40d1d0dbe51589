#include "aidtwin/records.hpp"

#include <charconv>
#include <cmath>
#include <system_error>

namespace aidtwin::records {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<Record> split_records(std::string_view text) {
  std::vector<Record> out;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    auto line = trim(text.substr(pos, eol - pos));
    ++line_no;
    pos = eol + 1;
    if (line.empty() || line.front() == '#') {
      if (eol == text.size()) break;
      continue;
    }

    Record rec;
    rec.line = line_no;
    auto ws = line.find_first_of(" \t");
    rec.keyword = std::string(line.substr(0, ws));
    if (ws != std::string_view::npos) rec.rest = std::string(trim(line.substr(ws)));

    std::string_view tail = rec.rest;
    while (!tail.empty()) {
      auto end = tail.find_first_of(" \t");
      auto tok = tail.substr(0, end);
      if (auto eq = tok.find('='); eq != std::string_view::npos && eq > 0) {
        rec.named[std::string(tok.substr(0, eq))] = std::string(tok.substr(eq + 1));
      } else {
        rec.positional.emplace_back(tok);
      }
      tail = end == std::string_view::npos ? std::string_view{} : trim(tail.substr(end));
    }
    out.push_back(std::move(rec));
    if (eol == text.size()) break;
  }
  return out;
}

std::optional<double> parse_number(std::string_view token) {
  token = trim(token);
  if (token.empty()) return std::nullopt;
  if (token.front() == '+') token.remove_prefix(1);
  double value = 0.0;
  const auto* first = token.data();
  const auto* last = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(first, last, value, std::chars_format::general);
  if (ec != std::errc{} || ptr != last || !std::isfinite(value)) return std::nullopt;
  return value;
}

std::string format_number(double value) {
  if (value == 0.0) return "0";  // also folds -0
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return ec == std::errc{} ? std::string(buf, ptr) : std::string("nan");
}

}  // namespace aidtwin::records
