#pragma once

#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include "infocir/provider.hpp"

namespace httplib {
class Server;
}

namespace infocir {

struct HttpProviderOptions {
  std::string base_url;      // e.g. http://127.0.0.1:8700
  std::string bearer_token;  // optional
  int timeout_seconds = 30;
};

/// Provider client speaking the JSON wire protocol (GET /v1/info, POST
/// /v1/embed_text, ...). info() is fetched once and cached.
class HttpProvider : public Provider {
 public:
  explicit HttpProvider(HttpProviderOptions options);

  ProviderInfo info() const override;
  Vector embed_text(const std::string& text) const override;
  Vector embed_image(const std::string& ref) const override;
  Vector embed_image_masked(const std::string& ref, const OcclusionMask& mask) const override;
  Vector compose(const Reference& reference, const std::string& modifier) const override;
  TokenGradients token_gradients(const Reference& reference, const std::string& modifier,
                                 std::span<const float> target) const override;
  Grid gradient_saliency(const std::string& ref, std::span<const float> query,
                         GridShape grid) const override;

 private:
  std::string post(const std::string& path, const std::string& body) const;
  std::string get(const std::string& path) const;

  HttpProviderOptions options_;
  std::string origin_;
  std::string prefix_;
  mutable std::mutex info_mu_;
  mutable std::optional<ProviderInfo> info_;
};

/// Serves any Provider over the wire protocol. Used to expose the stub
/// provider as a standalone process and in protocol tests.
class ProviderServer {
 public:
  explicit ProviderServer(const Provider& provider, std::string bearer_token = {});
  ~ProviderServer();

  ProviderServer(const ProviderServer&) = delete;
  ProviderServer& operator=(const ProviderServer&) = delete;

  /// Binds and serves on a background thread. Port 0 picks a free port.
  /// Returns the bound port.
  int start(const std::string& host, int port);
  /// Blocks serving on the calling thread.
  bool listen(const std::string& host, int port);
  void stop();

 private:
  const Provider& provider_;
  std::string token_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
};

}  // namespace infocir
