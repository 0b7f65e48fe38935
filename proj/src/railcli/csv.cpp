#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "railvo/error.hpp"
#include "railvo/railcli.hpp"

namespace railvo::railcli {

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace

int CsvTable::column(const std::string& name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw Error(ErrorCode::Format, "missing column '" + name + "'");
  return static_cast<int>(it - header.begin());
}

bool CsvTable::has_column(const std::string& name) const {
  return std::find(header.begin(), header.end(), name) != header.end();
}

std::vector<double> CsvTable::values(const std::string& name) const {
  const int c = column(name);
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r[c]);
  return out;
}

CsvTable parse_csv(const std::string& text) {
  CsvTable t;
  std::istringstream in(text);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split(line);
    if (t.header.empty()) {
      t.header = std::move(fields);
      continue;
    }
    if (fields.size() != t.header.size()) {
      throw Error(ErrorCode::Format, "line " + std::to_string(n) + ": expected " +
                                         std::to_string(t.header.size()) + " fields, got " +
                                         std::to_string(fields.size()));
    }
    std::vector<double> row(fields.size());
    for (std::size_t i = 0; i < fields.size(); ++i) {
      const char* b = fields[i].data();
      const char* e = b + fields[i].size();
      auto [p, ec] = std::from_chars(b, e, row[i]);
      if (ec != std::errc() || p != e) {
        throw Error(ErrorCode::Format, "line " + std::to_string(n) + ": '" + fields[i] +
                                           "' is not a number");
      }
    }
    t.rows.push_back(std::move(row));
  }
  if (t.header.empty()) throw Error(ErrorCode::Format, "CSV has no header");
  return t;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::Io, "cannot read " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::Io, "cannot write " + path.string());
  f << text;
  if (!f) throw Error(ErrorCode::Io, "short write to " + path.string());
}

CsvTable read_csv(const std::filesystem::path& path) { return parse_csv(read_text(path)); }

}  // namespace railvo::railcli
