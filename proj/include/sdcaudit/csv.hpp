#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "sdcaudit/error.hpp"

namespace sdcaudit::csv {

using Record = std::vector<std::string>;

/// RFC-4180 parser: quoted fields may contain commas, CRLF and doubled quotes.
/// A trailing line break does not produce an extra empty record.
inline std::vector<Record> parse(std::string_view text) {
  std::vector<Record> records;
  Record current;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  bool row_has_content = false;

  auto end_field = [&] {
    current.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    end_field();
    records.push_back(std::move(current));
    current.clear();
    row_has_content = false;
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        if (field_started && !field.empty()) {
          throw AuditError(ErrorCode::Io, "stray quote inside unquoted CSV field at record " +
                                              std::to_string(records.size()));
        }
        in_quotes = true;
        field_started = true;
        row_has_content = true;
        break;
      case ',':
        end_field();
        row_has_content = true;
        break;
      case '\r':
        if (i + 1 < text.size() && text[i + 1] == '\n') ++i;
        [[fallthrough]];
      case '\n':
        if (row_has_content || field_started || !current.empty()) {
          end_record();
        }
        break;
      default:
        field.push_back(c);
        field_started = true;
        row_has_content = true;
    }
  }
  if (in_quotes) {
    throw AuditError(ErrorCode::Io, "unterminated quoted CSV field");
  }
  if (row_has_content || field_started || !current.empty()) {
    end_record();
  }
  return records;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw AuditError(ErrorCode::Io, "cannot open '" + path + "'");
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

inline std::vector<Record> read(const std::string& path) { return parse(read_file(path)); }

inline std::string escape(std::string_view value) {
  if (value.find_first_of(",\"\r\n") == std::string_view::npos) {
    return std::string(value);
  }
  std::string out = "\"";
  for (char c : value) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

inline std::string format(const std::vector<Record>& records) {
  std::string out;
  for (const auto& record : records) {
    for (std::size_t i = 0; i < record.size(); ++i) {
      if (i > 0) out.push_back(',');
      out += escape(record[i]);
    }
    out += "\r\n";
  }
  return out;
}

}  // namespace sdcaudit::csv
