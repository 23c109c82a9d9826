#pragma once

#include <charconv>
#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "prs/error.hpp"

// Line-oriented "kind key=value ..." records shared by the text formats.
namespace prs::detail {

struct Record {
  std::string kind;
  std::map<std::string, std::string, std::less<>> fields;
  int line = 0;
};

class RecordReader {
 public:
  RecordReader(const Record& rec, const std::string& source) : rec_(rec), source_(source) {}

  double number(std::string_view key) {
    auto it = rec_.fields.find(key);
    if (it == rec_.fields.end()) fail("missing field '" + std::string(key) + "'");
    used_.insert(std::string(key));
    return parse_number(key, it->second);
  }

  double number_or(std::string_view key, double fallback) {
    if (rec_.fields.find(key) == rec_.fields.end()) return fallback;
    return number(key);
  }

  int integer(std::string_view key) {
    const double v = number(key);
    if (v != std::floor(v) || std::abs(v) > 1e9)
      fail("field '" + std::string(key) + "' must be an integer");
    return static_cast<int>(v);
  }

  std::string text(std::string_view key) {
    auto it = rec_.fields.find(key);
    if (it == rec_.fields.end()) fail("missing field '" + std::string(key) + "'");
    used_.insert(std::string(key));
    return it->second;
  }

  void finish() {
    for (const auto& [key, value] : rec_.fields)
      if (!used_.count(key)) fail("unknown field '" + key + "' in '" + rec_.kind + "' record");
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw Error(Errc::parse, source_ + ":" + std::to_string(rec_.line) + ": " + msg);
  }

 private:
  double parse_number(std::string_view key, const std::string& raw) const {
    double value = 0.0;
    const char* first = raw.data();
    const char* last = raw.data() + raw.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last || !std::isfinite(value))
      fail("field '" + std::string(key) + "' has invalid number '" + raw + "'");
    return value;
  }

  const Record& rec_;
  const std::string& source_;
  std::set<std::string> used_;
};

inline std::vector<Record> tokenize(std::string_view text, const std::string& source) {
  std::vector<Record> out;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream words(line);
    std::string word;
    Record rec;
    rec.line = lineno;
    while (words >> word) {
      if (rec.kind.empty()) {
        rec.kind = word;
        continue;
      }
      auto eq = word.find('=');
      if (eq == std::string::npos || eq == 0 || eq + 1 == word.size())
        throw Error(Errc::parse,
                    source + ":" + std::to_string(lineno) + ": expected key=value, got '" + word + "'");
      auto key = word.substr(0, eq);
      if (rec.fields.count(key))
        throw Error(Errc::parse,
                    source + ":" + std::to_string(lineno) + ": duplicate field '" + key + "'");
      rec.fields.emplace(std::move(key), word.substr(eq + 1));
    }
    if (!rec.kind.empty()) out.push_back(std::move(rec));
  }
  return out;
}

// Shortest text that reads back to the same double.
inline std::string shortest(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return ec == std::errc{} ? std::string(buf, ptr) : std::string("nan");
}

}  // namespace prs::detail
