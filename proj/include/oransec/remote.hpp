#pragma once

#include <chrono>
#include <string>

#include "oransec/agent.hpp"
#include "oransec/kb.hpp"

namespace oransec::remote {

// http://host[:port][/path]. Only plain http is supported.
struct Endpoint {
  std::string host;
  int port = 80;
  std::string path = "/";
};

// Throws InvalidConfig.
Endpoint parse_endpoint(const std::string& url);

struct RemoteConfig {
  std::string endpoint;  // chat completions or embeddings URL
  std::string model;
  std::string api_key;
  std::chrono::milliseconds timeout{30'000};
};

// Fills endpoint/model/api_key from ORANSEC_LLM_ENDPOINT, ORANSEC_LLM_MODEL
// and ORANSEC_LLM_API_KEY when set; validates that endpoint and model exist.
RemoteConfig with_env_overrides(RemoteConfig cfg);

// Chat-completions style provider. A timed-out call is retried once with
// twice the timeout; any other failure surfaces as ProviderUnavailable.
class RemoteProvider final : public agent::CompletionProvider {
 public:
  explicit RemoteProvider(RemoteConfig cfg);
  std::string complete(const agent::CompletionRequest& request) override;
  std::string name() const override { return "remote:" + cfg_.model; }

 private:
  RemoteConfig cfg_;
  Endpoint ep_;
};

// Embeddings-endpoint backend; failures raise RemoteBackendUnavailable.
class RemoteEmbeddingBackend final : public kb::EmbeddingBackend {
 public:
  RemoteEmbeddingBackend(RemoteConfig cfg, std::size_t dimension);
  kb::EmbeddingVector embed(std::string_view text) const override;
  std::size_t dimension() const override { return dim_; }
  std::string name() const override { return "remote:" + cfg_.model; }

 private:
  RemoteConfig cfg_;
  Endpoint ep_;
  std::size_t dim_;
};

}  // namespace oransec::remote
