// SPDX-License-Identifier: Apache-2.0
#pragma once

// Plain-text `key=value` sidecar records.

#include <charconv>
#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <string_view>

#include "asd/error.hpp"

namespace asd {

class Metadata {
 public:
  void set(const std::string& key, std::string value) { entries_[key] = std::move(value); }
  void set(const std::string& key, const char* value) { entries_[key] = value; }
  void set(const std::string& key, bool value) { entries_[key] = value ? "true" : "false"; }

  template <typename T>
    requires std::is_arithmetic_v<T>
  void set(const std::string& key, T value) {
    std::ostringstream os;
    os.precision(17);
    os << value;
    entries_[key] = os.str();
  }

  bool contains(const std::string& key) const { return entries_.count(key) != 0; }

  const std::string& get(const std::string& key) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) fail(ErrorCode::format, "metadata missing key '" + key + "'");
    return it->second;
  }

  std::string get_or(const std::string& key, std::string fallback) const {
    auto it = entries_.find(key);
    return it == entries_.end() ? fallback : it->second;
  }

  double get_double(const std::string& key) const {
    const auto& text = get(key);
    try {
      std::size_t used = 0;
      double v = std::stod(text, &used);
      if (used != text.size()) throw std::invalid_argument(text);
      return v;
    } catch (const std::exception&) {
      fail(ErrorCode::format, "metadata key '" + key + "' is not a number: " + text);
    }
  }

  std::int64_t get_int(const std::string& key) const {
    const auto& text = get(key);
    std::int64_t v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size())
      fail(ErrorCode::format, "metadata key '" + key + "' is not an integer: " + text);
    return v;
  }

  bool get_bool(const std::string& key) const {
    const auto& text = get(key);
    if (text == "true") return true;
    if (text == "false") return false;
    fail(ErrorCode::format, "metadata key '" + key + "' is not a boolean: " + text);
  }

  const std::map<std::string, std::string>& entries() const noexcept { return entries_; }

  std::string serialize() const {
    std::string out;
    for (const auto& [k, v] : entries_) out += k + "=" + v + "\n";
    return out;
  }

  static Metadata parse(std::string_view text) {
    Metadata meta;
    std::size_t start = 0;
    while (start < text.size()) {
      auto end = text.find('\n', start);
      if (end == std::string_view::npos) end = text.size();
      auto line = text.substr(start, end - start);
      start = end + 1;
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      if (line.empty() || line.front() == '#') continue;
      const auto eq = line.find('=');
      if (eq == std::string_view::npos)
        fail(ErrorCode::format, "metadata line without '=': " + std::string(line));
      meta.entries_[std::string(line.substr(0, eq))] = std::string(line.substr(eq + 1));
    }
    return meta;
  }

  bool operator==(const Metadata&) const = default;

 private:
  std::map<std::string, std::string> entries_;
};

}  // namespace asd
