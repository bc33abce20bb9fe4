// SPDX-License-Identifier: Apache-2.0
#pragma once

// Minimal RFC 4180 reader/writer. Lines starting with '#' are comments.

#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "asd/bytes.hpp"
#include "asd/error.hpp"

namespace asd {

inline std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

inline std::string csv_row(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out += ',';
    out += csv_escape(fields[i]);
  }
  out += '\n';
  return out;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> comments;

  std::size_t column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    fail(ErrorCode::format, "missing column '" + std::string(name) + "'");
  }

  bool has_column(std::string_view name) const {
    for (const auto& h : header)
      if (h == name) return true;
    return false;
  }
};

inline std::vector<std::vector<std::string>> parse_csv_records(std::string_view text,
                                                               std::vector<std::string>* comments = nullptr) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool at_line_start = true;
  bool field_started = false;

  auto end_record = [&] {
    if (field_started || !record.empty()) {
      record.push_back(std::move(field));
      records.push_back(std::move(record));
    }
    record.clear();
    field.clear();
    field_started = false;
    at_line_start = true;
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    if (at_line_start && c == '#') {
      auto end = text.find('\n', i);
      if (end == std::string_view::npos) end = text.size();
      if (comments) {
        auto line = text.substr(i + 1, end - i - 1);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        comments->emplace_back(line);
      }
      i = end;
      continue;
    }
    at_line_start = false;
    switch (c) {
      case '"':
        in_quotes = true;
        field_started = true;
        break;
      case ',':
        record.push_back(std::move(field));
        field.clear();
        field_started = true;
        break;
      case '\r':
        break;
      case '\n':
        end_record();
        break;
      default:
        field += c;
        field_started = true;
    }
  }
  if (in_quotes) fail(ErrorCode::format, "unterminated quoted CSV field");
  end_record();
  return records;
}

inline CsvTable parse_csv(std::string_view text) {
  CsvTable table;
  auto records = parse_csv_records(text, &table.comments);
  if (records.empty()) fail(ErrorCode::format, "CSV input has no header row");
  table.header = std::move(records.front());
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != table.header.size())
      fail(ErrorCode::format, "CSV row " + std::to_string(r) + " has " +
                                  std::to_string(records[r].size()) + " fields, header has " +
                                  std::to_string(table.header.size()));
    table.rows.push_back(std::move(records[r]));
  }
  return table;
}

inline CsvTable read_csv(const std::filesystem::path& path) { return parse_csv(read_file(path)); }

}  // namespace asd
