#include "rrmix/csv.hpp"

#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

#include "rrmix/types.hpp"

namespace rrmix {

int CsvTable::column_index(const std::string& name) const {
  for (std::size_t j = 0; j < header.size(); ++j)
    if (header[j] == name) return static_cast<int>(j);
  return -1;
}

CsvTable parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;

  auto end_field = [&] {
    record.push_back(field);
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    end_field();
    records.push_back(std::move(record));
    record.clear();
  };

  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < n && text[i + 1] == '"') {
          field.push_back('"');
          i += 2;
        } else {
          in_quotes = false;
          ++i;
        }
      } else {
        field.push_back(c);
        ++i;
      }
    } else if (c == '"' && !field_started) {
      in_quotes = true;
      field_started = true;
      ++i;
    } else if (c == ',') {
      end_field();
      ++i;
    } else if (c == '\r') {
      if (i + 1 < n && text[i + 1] == '\n') ++i;
      end_record();
      ++i;
    } else if (c == '\n') {
      end_record();
      ++i;
    } else {
      field.push_back(c);
      field_started = true;
      ++i;
    }
  }
  if (in_quotes) fail(errc::parse_error, "unterminated quoted CSV field");
  if (field_started || !field.empty() || !record.empty()) end_record();

  CsvTable out;
  if (records.empty()) fail(errc::parse_error, "CSV input has no header row");
  out.header = records.front();
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() == 1 && records[r][0].empty()) continue;  // blank line
    if (records[r].size() != out.header.size())
      fail(errc::parse_error, "CSV row " + std::to_string(r) + " has " +
                                  std::to_string(records[r].size()) + " fields, expected " +
                                  std::to_string(out.header.size()));
    out.rows.push_back(std::move(records[r]));
  }
  return out;
}

CsvTable read_csv_file(const std::string& path) { return parse_csv(read_text_file(path)); }

std::string csv_quote(const std::string& field) {
  bool needs = field.find_first_of(",\"\r\n") != std::string::npos;
  if (!needs) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out += '"';
  return out;
}

void write_csv_row(std::ostream& os, const std::vector<std::string>& cells) {
  for (std::size_t j = 0; j < cells.size(); ++j) {
    if (j) os << ',';
    os << csv_quote(cells[j]);
  }
  os << '\n';
}

void write_csv(std::ostream& os, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
  write_csv_row(os, header);
  for (const auto& r : rows) write_csv_row(os, r);
}

void write_csv(const std::string& path, const std::vector<std::vector<std::string>>& rows) {
  std::ostringstream out;
  for (const auto& r : rows) write_csv_row(out, r);
  write_text_file(path, out.str());
}

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", x);
  return buf;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(errc::io_error, "cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(errc::io_error, "cannot write file: " + path);
  out << content;
  if (!out) fail(errc::io_error, "write failed: " + path);
}

}  // namespace rrmix
