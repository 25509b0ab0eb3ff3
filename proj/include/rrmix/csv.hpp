#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace rrmix {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;  // every row has header.size() cells

  int n_rows() const { return static_cast<int>(rows.size()); }
  int n_cols() const { return static_cast<int>(header.size()); }
  int column_index(const std::string& name) const;  // -1 when absent
};

// RFC 4180: quoted fields, doubled quotes, embedded separators/newlines, CRLF.
CsvTable parse_csv(const std::string& text);
CsvTable read_csv_file(const std::string& path);

std::string csv_quote(const std::string& field);
void write_csv_row(std::ostream& os, const std::vector<std::string>& cells);
void write_csv(std::ostream& os, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);
// rows[0] is the header
void write_csv(const std::string& path, const std::vector<std::vector<std::string>>& rows);

// Fixed formatting keeps seeded artifacts byte-identical across runs.
std::string format_double(double x);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace rrmix
