#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace bipedkit {

/// Shortest decimal text that parses back to exactly the same double.
std::string format_double(double value);

/// Strict full-string parse; nullopt on any trailing garbage.
std::optional<double> parse_double(std::string_view text);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

// ---------------------------------------------------------------------------
// Key/value configuration dialect shared by the robot description, reward
// config and randomization table files:
//
//   # comment
//   key.with.dots = 0.12
//   some.list     = [0.1, -0.2, 0.3]
//   mode          = dynamic
//
// Keys are [A-Za-z0-9_.]+, one assignment per line, duplicates rejected.
// Every error carries the line and column where it was detected.
// ---------------------------------------------------------------------------
class KeyValueFile {
 public:
  struct Entry {
    std::string value;
    int line = 0;
    int column = 0;  // column where the value starts
    int key_column = 1;
  };

  static KeyValueFile parse(std::string_view text, std::string source = "<memory>");
  static KeyValueFile load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return entries_.count(key) != 0; }
  const std::string& source() const { return source_; }

  double number(const std::string& key) const;
  double number_or(const std::string& key, double fallback) const;
  std::vector<double> list(const std::string& key, std::size_t expected_size = 0) const;
  std::string text(const std::string& key) const;
  std::string text_or(const std::string& key, const std::string& fallback) const;
  bool boolean_or(const std::string& key, bool fallback) const;

  /// Throws a ParseError naming the first key that was never read.
  void reject_unused() const;

 private:
  const Entry& require(const std::string& key) const;

  std::string source_;
  std::map<std::string, Entry> entries_;
  mutable std::map<std::string, bool> used_;
};

/// Ordered writer for the same dialect.
class KeyValueWriter {
 public:
  void comment(std::string_view text);
  void blank();
  void number(std::string_view key, double value);
  void list(std::string_view key, const std::vector<double>& values);
  void text(std::string_view key, std::string_view value);
  const std::string& str() const { return out_; }

 private:
  std::string out_;
};

// ---------------------------------------------------------------------------
// Minimal numeric CSV: one header line, comma separated, no quoting.
// ---------------------------------------------------------------------------
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  std::size_t column(std::string_view name) const;  // throws InputError
  std::optional<std::size_t> find_column(std::string_view name) const;
};

CsvTable parse_csv(std::string_view text, std::string_view source = "<memory>");
CsvTable load_csv(const std::filesystem::path& path);
std::string to_csv(const CsvTable& table);

}  // namespace bipedkit
