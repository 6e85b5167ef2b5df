#include "manifest.hpp"

#include <algorithm>
#include <memory>

#include <openssl/evp.h>

#include "bipedkit/common.hpp"
#include "bipedkit/text_io.hpp"

namespace bipedkit {

std::string sha256_hex(std::string_view bytes) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1) {
    throw Error("sha256: digest failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xf]);
  }
  return out;
}

std::string sha256_file(const std::filesystem::path& path) { return sha256_hex(read_file(path)); }

namespace {

std::vector<std::filesystem::path> expand(const std::filesystem::path& path) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(path)) return {path};
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(path)) {
    if (e.is_regular_file()) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

}  // namespace

void RunManifest::add_input(const std::filesystem::path& path) {
  for (const auto& f : expand(path)) inputs[f.generic_string()] = sha256_file(f);
}

void RunManifest::add_output(const std::filesystem::path& path) {
  for (const auto& f : expand(path)) outputs[f.generic_string()] = sha256_file(f);
}

nlohmann::json RunManifest::to_json() const {
  return {{"format_version", kFormatVersion},
          {"toolkit_version", kToolkitVersion},
          {"subcommand", subcommand},
          {"argv", argv},
          {"seed", seed},
          {"workers", workers},
          {"configs", configs},
          {"inputs", inputs},
          {"outputs", outputs},
          {"exit_code", exit_code},
          {"error", error}};
}

RunManifest RunManifest::from_json(const nlohmann::json& j) {
  RunManifest m;
  try {
    m.subcommand = j.at("subcommand").get<std::string>();
    m.argv = j.at("argv").get<std::vector<std::string>>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.workers = j.value("workers", std::size_t{1});
    m.configs = j.value("configs", std::map<std::string, std::string>{});
    m.inputs = j.value("inputs", std::map<std::string, std::string>{});
    m.outputs = j.value("outputs", std::map<std::string, std::string>{});
    m.exit_code = j.value("exit_code", 0);
    m.error = j.value("error", std::string());
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("manifest: ") + e.what());
  }
  return m;
}

std::vector<std::string> RunManifest::stale_inputs() const {
  std::vector<std::string> stale;
  for (const auto& [path, digest] : inputs) {
    if (!std::filesystem::is_regular_file(path) || sha256_file(path) != digest) {
      stale.push_back(path);
    }
  }
  return stale;
}

}  // namespace bipedkit
