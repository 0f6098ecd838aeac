#include "infocir/http_provider.hpp"

#include "http_util.hpp"
#include "httplib.h"
#include "infocir/error.hpp"
#include "json.hpp"

namespace infocir {

using nlohmann::json;

namespace {

json vector_json(std::span<const float> v) {
  json arr = json::array();
  for (float x : v) arr.push_back(double(x));
  return arr;
}

Vector vector_from(const json& j) {
  if (!j.is_array()) fail(ErrorKind::kInvalidArgument, "expected a number array");
  Vector v;
  v.reserve(j.size());
  for (const auto& x : j) {
    if (!x.is_number()) fail(ErrorKind::kInvalidArgument, "expected a number array");
    v.push_back(static_cast<float>(x.get<double>()));
  }
  return v;
}

json reference_json(const Reference& r) {
  if (r.is_image()) return {{"ref", r.image_ref()}};
  return {{"vector", vector_json(r.raw_vector())}};
}

Reference reference_from(const json& j) {
  if (j.contains("ref")) return Reference::image(j.at("ref").get<std::string>());
  if (j.contains("vector")) return Reference::vector(vector_from(j.at("vector")));
  fail(ErrorKind::kInvalidArgument, "reference needs \"ref\" or \"vector\"");
}

GridShape grid_from(const json& j) {
  if (!j.is_array() || j.size() != 2) fail(ErrorKind::kInvalidArgument, "grid must be [rows, cols]");
  return {j.at(0).get<std::size_t>(), j.at(1).get<std::size_t>()};
}

ErrorKind kind_for_status(int status) {
  if (status == 404) return ErrorKind::kNotFound;
  if (status == 400 || status == 422) return ErrorKind::kInvalidArgument;
  return ErrorKind::kProvider;
}

std::string error_message(const std::string& body) {
  try {
    auto j = json::parse(body);
    if (j.contains("error")) return j.at("error").get<std::string>();
  } catch (const json::exception&) {
  }
  return body;
}

Vector checked_vector(const std::string& body, std::size_t dim) {
  Vector v;
  try {
    v = vector_from(json::parse(body).at("vector"));
  } catch (const json::exception& e) {
    fail(ErrorKind::kProvider, std::string("malformed provider response: ") + e.what());
  } catch (const Error& e) {
    fail(ErrorKind::kProvider, std::string("malformed provider response: ") + e.what());
  }
  if (v.size() != dim) fail(ErrorKind::kProvider, "provider returned a vector of the wrong dimension");
  return v;
}

int status_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kNotFound: return 404;
    case ErrorKind::kInvalidArgument:
    case ErrorKind::kFormat: return 400;
    default: return 500;
  }
}

}  // namespace

HttpProvider::HttpProvider(HttpProviderOptions options) : options_(std::move(options)) {
  std::tie(origin_, prefix_) = detail::split_url(options_.base_url);
}

std::string HttpProvider::get(const std::string& path) const {
  httplib::Client cli(origin_);
  cli.set_connection_timeout(options_.timeout_seconds, 0);
  cli.set_read_timeout(options_.timeout_seconds, 0);
  if (!options_.bearer_token.empty()) cli.set_bearer_token_auth(options_.bearer_token);
  auto res = cli.Get(prefix_ + path);
  if (!res) fail(ErrorKind::kProvider, "provider unreachable: " + httplib::to_string(res.error()));
  if (res->status != 200) fail(kind_for_status(res->status), "provider error: " + error_message(res->body));
  return res->body;
}

std::string HttpProvider::post(const std::string& path, const std::string& body) const {
  httplib::Client cli(origin_);
  cli.set_connection_timeout(options_.timeout_seconds, 0);
  cli.set_read_timeout(options_.timeout_seconds, 0);
  if (!options_.bearer_token.empty()) cli.set_bearer_token_auth(options_.bearer_token);
  auto res = cli.Post(prefix_ + path, body, "application/json");
  if (!res) fail(ErrorKind::kProvider, "provider unreachable: " + httplib::to_string(res.error()));
  if (res->status != 200) fail(kind_for_status(res->status), "provider error: " + error_message(res->body));
  return res->body;
}

ProviderInfo HttpProvider::info() const {
  std::lock_guard lock(info_mu_);
  if (info_) return *info_;
  ProviderInfo info;
  try {
    auto j = json::parse(get("/v1/info"));
    info.name = j.at("name").get<std::string>();
    info.dim = j.at("dim").get<std::size_t>();
    for (const auto& c : j.at("capabilities")) info.capabilities.insert(c.get<std::string>());
  } catch (const json::exception& e) {
    fail(ErrorKind::kProvider, std::string("malformed provider info: ") + e.what());
  }
  info.validate();
  info_ = info;
  return info;
}

Vector HttpProvider::embed_text(const std::string& text) const {
  if (text.empty()) fail(ErrorKind::kInvalidArgument, "empty text");
  return checked_vector(post("/v1/embed_text", json{{"text", text}}.dump()), info().dim);
}

Vector HttpProvider::embed_image(const std::string& ref) const {
  return checked_vector(post("/v1/embed_image", json{{"ref", ref}}.dump()), info().dim);
}

Vector HttpProvider::embed_image_masked(const std::string& ref, const OcclusionMask& mask) const {
  if (!info().has(kCapMaskEmbedding)) {
    fail(ErrorKind::kInvalidArgument, std::string("capability absent: ") + kCapMaskEmbedding);
  }
  mask.validate();
  json cells = json::array();
  for (const auto& c : mask.occluded_cells) cells.push_back({c.first, c.second});
  json body = {{"ref", ref}, {"grid", {mask.grid.rows, mask.grid.cols}}, {"occluded", cells}};
  return checked_vector(post("/v1/embed_image_masked", body.dump()), info().dim);
}

Vector HttpProvider::compose(const Reference& reference, const std::string& modifier) const {
  json body = {{"reference", reference_json(reference)}, {"modifier", modifier}};
  return checked_vector(post("/v1/compose", body.dump()), info().dim);
}

TokenGradients HttpProvider::token_gradients(const Reference& reference, const std::string& modifier,
                                             std::span<const float> target) const {
  if (!info().has(kCapTokenGradients)) {
    fail(ErrorKind::kInvalidArgument, std::string("capability absent: ") + kCapTokenGradients);
  }
  json body = {{"reference", reference_json(reference)}, {"modifier", modifier}, {"target", vector_json(target)}};
  TokenGradients out;
  try {
    auto j = json::parse(post("/v1/token_gradients", body.dump()));
    out.tokens = j.at("tokens").get<std::vector<std::string>>();
    out.scores = j.at("scores").get<std::vector<double>>();
  } catch (const json::exception& e) {
    fail(ErrorKind::kProvider, std::string("malformed token_gradients response: ") + e.what());
  }
  if (out.tokens.size() != out.scores.size()) fail(ErrorKind::kProvider, "token/score length mismatch");
  return out;
}

Grid HttpProvider::gradient_saliency(const std::string& ref, std::span<const float> query,
                                     GridShape grid) const {
  if (!info().has(kCapGradientSaliency)) {
    fail(ErrorKind::kInvalidArgument, std::string("capability absent: ") + kCapGradientSaliency);
  }
  json body = {{"ref", ref}, {"query", vector_json(query)}, {"grid", {grid.rows, grid.cols}}};
  Grid out;
  try {
    out = json::parse(post("/v1/gradient_saliency", body.dump())).at("grid").get<Grid>();
  } catch (const json::exception& e) {
    fail(ErrorKind::kProvider, std::string("malformed gradient_saliency response: ") + e.what());
  }
  if (out.size() != grid.rows) fail(ErrorKind::kProvider, "gradient_saliency grid has wrong shape");
  for (const auto& row : out) {
    if (row.size() != grid.cols) fail(ErrorKind::kProvider, "gradient_saliency grid has wrong shape");
  }
  return out;
}

// ---------------------------------------------------------------------------

ProviderServer::ProviderServer(const Provider& provider, std::string bearer_token)
    : provider_(provider), token_(std::move(bearer_token)), server_(std::make_unique<httplib::Server>()) {
  auto handle = [this](auto fn) {
    return [this, fn](const httplib::Request& req, httplib::Response& res) {
      if (!token_.empty() && req.get_header_value("Authorization") != "Bearer " + token_) {
        res.status = 401;
        res.set_content(json{{"error", "unauthorized"}}.dump(), "application/json");
        return;
      }
      try {
        json body = req.body.empty() ? json::object() : json::parse(req.body);
        res.set_content(fn(body).dump(), "application/json");
      } catch (const Error& e) {
        res.status = status_for(e.kind());
        res.set_content(json{{"error", e.what()}}.dump(), "application/json");
      } catch (const json::exception& e) {
        res.status = 400;
        res.set_content(json{{"error", std::string("bad request: ") + e.what()}}.dump(), "application/json");
      } catch (const std::exception& e) {
        res.status = 500;
        res.set_content(json{{"error", "internal error"}}.dump(), "application/json");
      }
    };
  };

  server_->Get("/v1/info", handle([this](const json&) {
    const auto info = provider_.info();
    return json{{"name", info.name}, {"dim", info.dim}, {"capabilities", info.capabilities}};
  }));
  server_->Post("/v1/embed_text", handle([this](const json& b) {
    return json{{"vector", vector_json(provider_.embed_text(b.at("text").get<std::string>()))}};
  }));
  server_->Post("/v1/embed_image", handle([this](const json& b) {
    return json{{"vector", vector_json(provider_.embed_image(b.at("ref").get<std::string>()))}};
  }));
  server_->Post("/v1/embed_image_masked", handle([this](const json& b) {
    OcclusionMask mask{grid_from(b.at("grid")), {}};
    for (const auto& c : b.at("occluded")) mask.occluded_cells.emplace_back(c.at(0).get<std::size_t>(), c.at(1).get<std::size_t>());
    return json{{"vector", vector_json(provider_.embed_image_masked(b.at("ref").get<std::string>(), mask))}};
  }));
  server_->Post("/v1/compose", handle([this](const json& b) {
    const auto modifier = b.contains("modifier") ? b.at("modifier").get<std::string>() : std::string();
    return json{{"vector", vector_json(provider_.compose(reference_from(b.at("reference")), modifier))}};
  }));
  server_->Post("/v1/token_gradients", handle([this](const json& b) {
    const auto target = vector_from(b.at("target"));
    auto g = provider_.token_gradients(reference_from(b.at("reference")), b.at("modifier").get<std::string>(), target);
    return json{{"tokens", g.tokens}, {"scores", g.scores}};
  }));
  server_->Post("/v1/gradient_saliency", handle([this](const json& b) {
    const auto query = vector_from(b.at("query"));
    return json{{"grid", provider_.gradient_saliency(b.at("ref").get<std::string>(), query, grid_from(b.at("grid")))}};
  }));
}

ProviderServer::~ProviderServer() { stop(); }

int ProviderServer::start(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = server_->bind_to_any_port(host);
  } else if (!server_->bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound < 0) fail(ErrorKind::kIo, "cannot bind provider server to " + host);
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return bound;
}

bool ProviderServer::listen(const std::string& host, int port) { return server_->listen(host, port); }

void ProviderServer::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace infocir
