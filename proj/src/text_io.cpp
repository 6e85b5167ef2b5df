#include "bipedkit/text_io.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "bipedkit/common.hpp"

namespace bipedkit {

std::string format_double(double value) {
  if (value == 0.0) return std::signbit(value) ? "-0" : "0";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

std::optional<double> parse_double(std::string_view text) {
  if (text.empty()) return std::nullopt;
  if (text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) return std::nullopt;
  return value;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write file: " + path.string());
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
}

namespace {

bool is_key_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.';
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

}  // namespace

KeyValueFile KeyValueFile::parse(std::string_view text, std::string source) {
  KeyValueFile file;
  file.source_ = std::move(source);
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

    std::size_t hash = line.find('#');
    if (hash != std::string_view::npos) line = line.substr(0, hash);
    std::size_t i = 0;
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i == line.size()) {
      if (end == text.size()) break;
      continue;
    }
    const int key_col = static_cast<int>(i) + 1;
    std::size_t k = i;
    while (k < line.size() && is_key_char(line[k])) ++k;
    if (k == i) {
      throw ParseError(file.source_ + ": expected a key", line_no, key_col);
    }
    std::string key(line.substr(i, k - i));
    std::size_t j = k;
    while (j < line.size() && (line[j] == ' ' || line[j] == '\t')) ++j;
    if (j >= line.size() || line[j] != '=') {
      throw ParseError(file.source_ + ": expected '=' after key '" + key + "'", line_no,
                       static_cast<int>(j) + 1);
    }
    ++j;
    while (j < line.size() && (line[j] == ' ' || line[j] == '\t')) ++j;
    std::string_view value = trim(line.substr(j));
    if (value.empty()) {
      throw ParseError(file.source_ + ": missing value for key '" + key + "'", line_no,
                       static_cast<int>(j) + 1);
    }
    if (file.entries_.count(key)) {
      throw ParseError(file.source_ + ": duplicate key '" + key + "'", line_no, key_col);
    }
    file.entries_[key] = Entry{std::string(value), line_no, static_cast<int>(j) + 1, key_col};
    if (end == text.size()) break;
  }
  return file;
}

KeyValueFile KeyValueFile::load(const std::filesystem::path& path) {
  return parse(read_file(path), path.string());
}

const KeyValueFile::Entry& KeyValueFile::require(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) {
    throw ParseError(source_ + ": missing required key '" + key + "'", 0, 0);
  }
  used_[key] = true;
  return it->second;
}

double KeyValueFile::number(const std::string& key) const {
  const Entry& e = require(key);
  auto v = parse_double(e.value);
  if (!v || !std::isfinite(*v)) {
    throw ParseError(source_ + ": key '" + key + "' expects a finite number, got '" + e.value + "'",
                     e.line, e.column);
  }
  return *v;
}

double KeyValueFile::number_or(const std::string& key, double fallback) const {
  return has(key) ? number(key) : fallback;
}

std::vector<double> KeyValueFile::list(const std::string& key, std::size_t expected_size) const {
  const Entry& e = require(key);
  std::string_view v = e.value;
  if (v.size() < 2 || v.front() != '[' || v.back() != ']') {
    throw ParseError(source_ + ": key '" + key + "' expects a [list]", e.line, e.column);
  }
  std::vector<double> out;
  std::string_view body = v.substr(1, v.size() - 2);
  std::size_t offset = 1;
  if (!trim(body).empty()) {
    while (true) {
      std::size_t comma = body.find(',');
      std::string_view item = body.substr(0, comma);
      std::size_t lead = 0;
      while (lead < item.size() && std::isspace(static_cast<unsigned char>(item[lead]))) ++lead;
      auto d = parse_double(trim(item));
      if (!d || !std::isfinite(*d)) {
        throw ParseError(source_ + ": bad list element in '" + key + "'", e.line,
                         e.column + static_cast<int>(offset + lead));
      }
      out.push_back(*d);
      if (comma == std::string_view::npos) break;
      offset += comma + 1;
      body = body.substr(comma + 1);
    }
  }
  if (expected_size != 0 && out.size() != expected_size) {
    throw ParseError(source_ + ": key '" + key + "' expects " + std::to_string(expected_size) +
                         " values, got " + std::to_string(out.size()),
                     e.line, e.column);
  }
  return out;
}

std::string KeyValueFile::text(const std::string& key) const {
  std::string v = require(key).value;
  if (v.size() >= 2 && v.front() == '"' && v.back() == '"') v = v.substr(1, v.size() - 2);
  return v;
}

std::string KeyValueFile::text_or(const std::string& key, const std::string& fallback) const {
  return has(key) ? text(key) : fallback;
}

bool KeyValueFile::boolean_or(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  const Entry& e = require(key);
  if (e.value == "true") return true;
  if (e.value == "false") return false;
  throw ParseError(source_ + ": key '" + key + "' expects true/false", e.line, e.column);
}

void KeyValueFile::reject_unused() const {
  for (const auto& [key, entry] : entries_) {
    if (!used_.count(key)) {
      throw ParseError(source_ + ": unknown key '" + key + "'", entry.line, entry.key_column);
    }
  }
}

void KeyValueWriter::comment(std::string_view text) {
  out_ += "# ";
  out_ += text;
  out_ += '\n';
}

void KeyValueWriter::blank() { out_ += '\n'; }

void KeyValueWriter::number(std::string_view key, double value) {
  out_ += key;
  out_ += " = ";
  out_ += format_double(value);
  out_ += '\n';
}

void KeyValueWriter::list(std::string_view key, const std::vector<double>& values) {
  out_ += key;
  out_ += " = [";
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out_ += ", ";
    out_ += format_double(values[i]);
  }
  out_ += "]\n";
}

void KeyValueWriter::text(std::string_view key, std::string_view value) {
  out_ += key;
  out_ += " = ";
  out_ += value;
  out_ += '\n';
}

// ---------------------------------------------------------------------------

std::optional<std::size_t> CsvTable::find_column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  return std::nullopt;
}

std::size_t CsvTable::column(std::string_view name) const {
  auto c = find_column(name);
  if (!c) throw InputError("CSV is missing column '" + std::string(name) + "'");
  return *c;
}

CsvTable parse_csv(std::string_view text, std::string_view source) {
  CsvTable table;
  int line_no = 0;
  std::size_t pos = 0;
  bool have_header = false;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (trim(line).empty()) continue;

    std::vector<std::string_view> cells;
    std::vector<int> columns;
    std::size_t start = 0;
    while (true) {
      std::size_t comma = line.find(',', start);
      cells.push_back(trim(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start)));
      columns.push_back(static_cast<int>(start) + 1);
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (!have_header) {
      for (auto c : cells) table.header.emplace_back(c);
      have_header = true;
      continue;
    }
    if (cells.size() != table.header.size()) {
      throw ParseError(std::string(source) + ": expected " + std::to_string(table.header.size()) +
                           " fields, got " + std::to_string(cells.size()),
                       line_no, 1);
    }
    std::vector<double> row;
    row.reserve(cells.size());
    for (std::size_t i = 0; i < cells.size(); ++i) {
      auto d = parse_double(cells[i]);
      if (!d) {
        throw ParseError(std::string(source) + ": non-numeric field '" + std::string(cells[i]) + "'",
                         line_no, columns[i]);
      }
      row.push_back(*d);
    }
    table.rows.push_back(std::move(row));
  }
  if (!have_header) throw ParseError(std::string(source) + ": empty CSV", 1, 1);
  return table;
}

CsvTable load_csv(const std::filesystem::path& path) {
  return parse_csv(read_file(path), path.string());
}

std::string to_csv(const CsvTable& table) {
  std::string out;
  for (std::size_t i = 0; i < table.header.size(); ++i) {
    if (i) out += ',';
    out += table.header[i];
  }
  out += '\n';
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      out += format_double(row[i]);
    }
    out += '\n';
  }
  return out;
}

}  // namespace bipedkit
