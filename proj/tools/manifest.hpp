#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

namespace bipedkit {

/// Lowercase hex SHA-256 of a byte string or file.
std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

/// One record per CLI run: enough to re-run it and to check that the inputs
/// and outputs are the ones that were used.
struct RunManifest {
  std::string subcommand;
  std::vector<std::string> argv;  // arguments after the program name
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  std::map<std::string, std::string> configs;  // role -> path
  std::map<std::string, std::string> inputs;   // path -> digest
  std::map<std::string, std::string> outputs;  // path -> digest
  int exit_code = 0;
  std::string error;  // diagnostic of a failed run

  /// Adds a file, or every regular file under a directory (sorted).
  void add_input(const std::filesystem::path& path);
  void add_output(const std::filesystem::path& path);

  nlohmann::json to_json() const;
  static RunManifest from_json(const nlohmann::json& j);

  /// Paths whose current digest differs from the recorded one (missing
  /// files included).
  std::vector<std::string> stale_inputs() const;
};

}  // namespace bipedkit
