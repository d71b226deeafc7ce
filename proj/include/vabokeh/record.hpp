#pragma once

// Plain-text "key = value" records. One entry per line, '#' starts a comment,
// keys keep their insertion order on output. Every configuration and metadata
// file of the toolkit uses this format.

#include <charconv>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include "vabokeh/errors.hpp"

namespace vabokeh {

// Shortest decimal text that parses back to the same double.
inline std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::optional<double> parse_number(std::string_view text) {
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) return std::nullopt;
  return v;
}

class TextRecord {
 public:
  TextRecord() = default;

  static TextRecord parse(std::string_view text) {
    TextRecord rec;
    std::istringstream in{std::string(text)};
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      const std::string trimmed = trim(line);
      if (trimmed.empty()) continue;
      const auto eq = trimmed.find('=');
      if (eq == std::string::npos) {
        throw FormatError("record line " + std::to_string(line_no) + ": expected 'key = value'");
      }
      const std::string key = trim(trimmed.substr(0, eq));
      if (key.empty()) throw FormatError("record line " + std::to_string(line_no) + ": empty key");
      rec.set(key, trim(trimmed.substr(eq + 1)));
    }
    return rec;
  }

  static TextRecord load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open record '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
  }

  void set(const std::string& key, std::string value) {
    for (auto& [k, v] : entries_) {
      if (k == key) {
        v = std::move(value);
        return;
      }
    }
    entries_.emplace_back(key, std::move(value));
  }
  void set(const std::string& key, double value) { set(key, format_number(value)); }
  void set(const std::string& key, int value) { set(key, std::to_string(value)); }
  void set(const std::string& key, std::size_t value) { set(key, std::to_string(value)); }
  void set(const std::string& key, const char* value) { set(key, std::string(value)); }

  bool contains(const std::string& key) const { return find(key) != nullptr; }

  std::optional<std::string> get(const std::string& key) const {
    const std::string* v = find(key);
    return v ? std::optional<std::string>(*v) : std::nullopt;
  }

  double number(const std::string& key) const {
    const std::string* v = find(key);
    if (!v) throw FormatError("record is missing '" + key + "'");
    const auto parsed = parse_number(*v);
    if (!parsed) throw FormatError("record entry '" + key + "' is not a number: '" + *v + "'");
    return *parsed;
  }

  double number_or(const std::string& key, double fallback) const {
    return contains(key) ? number(key) : fallback;
  }

  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

  std::string str() const {
    std::string out;
    for (const auto& [k, v] : entries_) out += k + " = " + v + "\n";
    return out;
  }

  void save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write record '" + path.string() + "'");
    out << str();
  }

 private:
  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  }

  const std::string* find(const std::string& key) const {
    for (const auto& [k, v] : entries_) {
      if (k == key) return &v;
    }
    return nullptr;
  }

  std::vector<std::pair<std::string, std::string>> entries_;
};

}  // namespace vabokeh
