// Eigen goes first: httplib pulls in <resolv.h>, whose _res macro breaks Eigen.
#include "bipedkit/instruct.hpp"

#include <cmath>
#include <cstdlib>

#include <httplib.h>
#include <json.hpp>

namespace bipedkit {

namespace {

std::string env_or_empty(const char* name) {
  const char* v = std::getenv(name);
  return v ? std::string(v) : std::string();
}

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

Endpoint split_url(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos || (url.compare(0, scheme, "http") != 0 &&
                                      url.compare(0, scheme, "https") != 0)) {
    throw InputError("LLM endpoint must start with http:// or https://: '" + url + "'");
  }
  const auto slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, "/v1/chat/completions"};
  return {url.substr(0, slash), url.substr(slash)};
}

}  // namespace

HttpBackendConfig HttpBackendConfig::from_env() {
  HttpBackendConfig c;
  c.endpoint = env_or_empty("BIPEDKIT_LLM_ENDPOINT");
  c.model = env_or_empty("BIPEDKIT_LLM_MODEL");
  c.api_key = env_or_empty("BIPEDKIT_LLM_API_KEY");
  if (c.endpoint.empty() || c.model.empty()) {
    throw InputError(
        "set BIPEDKIT_LLM_ENDPOINT and BIPEDKIT_LLM_MODEL (and BIPEDKIT_LLM_API_KEY), or use --mock");
  }
  return c;
}

HttpBackend::HttpBackend(HttpBackendConfig cfg) : cfg_(std::move(cfg)) {
  split_url(cfg_.endpoint);
  if (!(cfg_.timeout > 0) || cfg_.retries < 0) throw InputError("invalid HTTP backend timeout/retries");
}

std::string HttpBackend::send(const std::vector<ChatMessage>& messages) {
  const Endpoint ep = split_url(cfg_.endpoint);
  nlohmann::json body = {{"model", cfg_.model}, {"temperature", cfg_.temperature}};
  body["messages"] = nlohmann::json::array();
  for (const auto& m : messages) body["messages"].push_back({{"role", m.role}, {"content", m.content}});

  httplib::Client client(ep.origin);
  const auto secs = static_cast<time_t>(cfg_.timeout);
  const auto usecs = static_cast<time_t>((cfg_.timeout - std::floor(cfg_.timeout)) * 1e6);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);
  httplib::Headers headers;
  if (!cfg_.api_key.empty()) headers.emplace("Authorization", "Bearer " + cfg_.api_key);

  std::string last_error;
  for (int attempt = 0; attempt <= cfg_.retries; ++attempt) {
    const auto res = client.Post(ep.path, headers, body.dump(), "application/json");
    if (!res) {
      last_error = "request failed: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status != 200) {
      last_error = "HTTP " + std::to_string(res->status);
      if (res->status >= 400 && res->status < 500 && res->status != 408 && res->status != 429) break;
      continue;
    }
    try {
      const auto j = nlohmann::json::parse(res->body);
      return j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      last_error = std::string("unexpected response body: ") + e.what();
    }
  }
  throw TransportError("LLM backend " + cfg_.endpoint + ": " + last_error);
}

}  // namespace bipedkit
