#include "oransec/remote.hpp"

#include <cmath>
#include <cstdlib>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "oransec/error.hpp"

namespace oransec::remote {

Endpoint parse_endpoint(const std::string& url) {
  const std::string scheme = "http://";
  if (url.rfind(scheme, 0) != 0) {
    throw Error(ErrorCode::InvalidConfig, "endpoint must start with http:// (got '" + url + "')");
  }
  std::string rest = url.substr(scheme.size());
  Endpoint ep;
  const auto slash = rest.find('/');
  if (slash != std::string::npos) {
    ep.path = rest.substr(slash);
    rest = rest.substr(0, slash);
  }
  const auto colon = rest.find(':');
  if (colon != std::string::npos) {
    try {
      ep.port = std::stoi(rest.substr(colon + 1));
    } catch (const std::exception&) {
      throw Error(ErrorCode::InvalidConfig, "bad port in endpoint '" + url + "'");
    }
    rest = rest.substr(0, colon);
  }
  if (rest.empty()) throw Error(ErrorCode::InvalidConfig, "endpoint '" + url + "' has no host");
  ep.host = rest;
  return ep;
}

RemoteConfig with_env_overrides(RemoteConfig cfg) {
  if (const char* v = std::getenv("ORANSEC_LLM_ENDPOINT")) cfg.endpoint = v;
  if (const char* v = std::getenv("ORANSEC_LLM_MODEL")) cfg.model = v;
  if (const char* v = std::getenv("ORANSEC_LLM_API_KEY")) cfg.api_key = v;
  if (cfg.endpoint.empty()) throw Error(ErrorCode::InvalidConfig, "remote provider needs an endpoint");
  if (cfg.model.empty()) throw Error(ErrorCode::InvalidConfig, "remote provider needs a model");
  return cfg;
}

namespace {

// POSTs `body` and returns the parsed JSON response. Retries once on timeout
// or connection failure with twice the timeout.
Json post_json(const Endpoint& ep, const RemoteConfig& cfg, const Json& body, ErrorCode failure) {
  httplib::Headers headers;
  if (!cfg.api_key.empty()) headers.emplace("Authorization", "Bearer " + cfg.api_key);
  auto timeout = cfg.timeout;
  for (int attempt = 1; attempt <= 2; ++attempt, timeout *= 2) {
    httplib::Client client(ep.host, ep.port);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());
    auto res = client.Post(ep.path, headers, body.dump(), "application/json");
    if (!res) {
      const auto err = res.error();
      spdlog::warn("remote call to {}:{}{} failed ({}), attempt {}", ep.host, ep.port, ep.path,
                   httplib::to_string(err), attempt);
      if (attempt == 2) {
        throw Error(failure, "remote endpoint unreachable: " + httplib::to_string(err));
      }
      continue;
    }
    if (res->status < 200 || res->status >= 300) {
      throw Error(failure, "remote endpoint returned HTTP " + std::to_string(res->status));
    }
    try {
      return Json::parse(res->body);
    } catch (const Json::parse_error& e) {
      throw Error(failure, std::string("remote response is not JSON: ") + e.what());
    }
  }
  throw Error(failure, "remote endpoint unreachable");
}

}  // namespace

RemoteProvider::RemoteProvider(RemoteConfig cfg) : cfg_(std::move(cfg)), ep_(parse_endpoint(cfg_.endpoint)) {}

std::string RemoteProvider::complete(const agent::CompletionRequest& request) {
  Json body{{"model", cfg_.model},
            {"temperature", 0},
            {"messages",
             Json::array({Json{{"role", "system"},
                               {"content", "You are a " + std::string(agent::to_string(request.role)) +
                                               " agent. Reply with one JSON object only."}},
                          Json{{"role", "user"}, {"content", request.prompt}}})}};
  const Json res = post_json(ep_, cfg_, body, ErrorCode::ProviderUnavailable);
  try {
    return res.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::ProviderUnavailable, std::string("unexpected completion shape: ") + e.what());
  }
}

RemoteEmbeddingBackend::RemoteEmbeddingBackend(RemoteConfig cfg, std::size_t dimension)
    : cfg_(std::move(cfg)), ep_(parse_endpoint(cfg_.endpoint)), dim_(dimension) {}

kb::EmbeddingVector RemoteEmbeddingBackend::embed(std::string_view text) const {
  const Json res = post_json(ep_, cfg_, Json{{"model", cfg_.model}, {"input", std::string(text)}},
                             ErrorCode::RemoteBackendUnavailable);
  kb::EmbeddingVector v;
  try {
    v = res.at("data").at(0).at("embedding").get<kb::EmbeddingVector>();
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::RemoteBackendUnavailable, std::string("unexpected embedding shape: ") + e.what());
  }
  if (v.size() != dim_) {
    throw Error(ErrorCode::RemoteBackendUnavailable, "embedding dimension " + std::to_string(v.size()) +
                                                         " != " + std::to_string(dim_));
  }
  double n = 0;
  for (double x : v) n += x * x;
  n = std::sqrt(n);
  if (n > 0) {
    for (double& x : v) x /= n;
  }
  return v;
}

}  // namespace oransec::remote
