#include "infocir/api_server.hpp"

#include "httplib.h"
#include "infocir/json_codec.hpp"

namespace infocir {

namespace {

const json& field(const json& body, const char* key) {
  if (!body.contains(key)) fail(ErrorKind::kInvalidArgument, std::string("missing \"") + key + "\"");
  return body.at(key);
}

std::string string_field(const json& body, const char* key) {
  const auto& v = field(body, key);
  if (!v.is_string()) fail(ErrorKind::kInvalidArgument, std::string("\"") + key + "\" must be a string");
  return v.get<std::string>();
}

std::vector<std::string> string_list(const json& body, const char* key) {
  const auto& v = field(body, key);
  if (!v.is_array()) fail(ErrorKind::kInvalidArgument, std::string("\"") + key + "\" must be an array of strings");
  std::vector<std::string> out;
  for (const auto& x : v) {
    if (!x.is_string()) fail(ErrorKind::kInvalidArgument, std::string("\"") + key + "\" must be an array of strings");
    out.push_back(x.get<std::string>());
  }
  return out;
}

json status_json(const FitStatus& s) {
  json j = {{"state", s.state}, {"generation", s.generation}};
  if (!s.error.empty()) j["error"] = s.error;
  if (s.quality) j["quality"] = *s.quality;
  return j;
}

}  // namespace

int http_status(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument: return 400;
    case ErrorKind::kNotFound: return 404;
    case ErrorKind::kConflict: return 409;
    case ErrorKind::kProvider: return 502;
    default: return 500;
  }
}

ApiServer::ApiServer(Workbench& workbench, ApiServerOptions options)
    : wb_(workbench), options_(std::move(options)), server_(std::make_unique<httplib::Server>()) {
  auto handle = [this](auto fn) {
    return [this, fn](const httplib::Request& req, httplib::Response& res) {
      res.set_header("Access-Control-Allow-Origin", options_.cors_origin);
      json out;
      try {
        json body = json::object();
        if (!req.body.empty()) {
          body = json::parse(req.body);
          if (!body.is_object()) fail(ErrorKind::kInvalidArgument, "request body must be a JSON object");
        }
        out = fn(req, body);
      } catch (const Error& e) {
        res.status = http_status(e.kind());
        out = {{"error", e.what()}};
      } catch (const json::exception& e) {
        res.status = 400;
        out = {{"error", std::string("bad request: ") + e.what()}};
      } catch (const std::exception&) {
        res.status = 500;
        out = {{"error", "internal error"}};
      }
      res.set_content(out.dump(), "application/json");
    };
  };

  server_->Options(R"(/api/.*)", [this](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Origin", options_.cors_origin);
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    res.status = 204;
  });

  server_->Get("/api/health", handle([this](const httplib::Request&, const json&) {
    const auto snap = wb_.snapshot();
    return json{{"ok", true},
                {"corpus_size", snap.corpus->count()},
                {"model_fitted", snap.model != nullptr},
                {"provider", wb_.provider().info()}};
  }));

  server_->Post("/api/query", handle([this](const httplib::Request&, const json& b) {
    const ComposedQuery q = query_from_json(b);
    std::optional<std::string> sid;
    if (b.contains("session_id") && !b.at("session_id").is_null()) sid = string_field(b, "session_id");
    const auto r = wb_.query(q, sid);
    return to_json(r, *wb_.snapshot().corpus);
  }));

  server_->Post("/api/ideals", handle([this](const httplib::Request&, const json& b) {
    const auto anchors = wb_.select_ideals(string_field(b, "session_id"), string_list(b, "image_ids"));
    return json{{"ok", true}, {"ideals", anchors.image_ids}};
  }));

  server_->Post("/api/enhance", handle([this](const httplib::Request&, const json& b) {
    std::size_t n = 5;
    if (b.contains("n_variants")) {
      const auto& v = b.at("n_variants");
      if (!v.is_number_integer() || v.get<long long>() < 0) {
        fail(ErrorKind::kInvalidArgument, "n_variants must be a non-negative integer");
      }
      n = v.get<std::size_t>();
    }
    std::vector<std::string> manual;
    if (b.contains("manual_variants")) manual = string_list(b, "manual_variants");
    return json(wb_.enhance(string_field(b, "session_id"), n, manual));
  }));

  server_->Post("/api/attribution", handle([this](const httplib::Request&, const json& b) {
    std::optional<std::string> variant;
    if (b.contains("variant_text") && !b.at("variant_text").is_null()) variant = string_field(b, "variant_text");
    const GridShape grid = grid_from_json(b.contains("grid") ? b.at("grid") : json(nullptr));
    return json(wb_.attribution(string_field(b, "session_id"), variant, string_field(b, "ideal_id"), grid));
  }));

  server_->Get("/api/projection", handle([this](const httplib::Request& req, const json&) {
    const std::string scope = req.has_param("scope") ? req.get_param_value("scope") : "corpus";
    std::optional<std::string> sid;
    if (req.has_param("session_id")) sid = req.get_param_value("session_id");
    const auto p = wb_.projection(scope, sid);
    return json{{"scope", scope}, {"points", projection_to_json(p, wb_.snapshot().corpus.get())}};
  }));

  server_->Get("/api/projection/status",
               handle([this](const httplib::Request&, const json&) { return status_json(wb_.fit_status()); }));

  server_->Get(R"(/api/session/([A-Za-z0-9_-]+))", handle([this](const httplib::Request& req, const json&) {
    const std::string id = req.matches[1];
    const auto s = wb_.session(id);
    json events = json::array();
    for (const auto& e : s.events) events.push_back(e.to_json());
    json out = {{"id", s.id}, {"created_at_us", s.created_at_us}, {"events", events}};
    if (req.has_param("replay") && req.get_param_value("replay") != "0") {
      json checks = json::array();
      for (const auto& c : wb_.replay(id)) checks.push_back({{"seq", c.seq}, {"matches", c.matches}});
      out["replay"] = checks;
    }
    return out;
  }));
}

ApiServer::~ApiServer() { stop(); }

int ApiServer::start(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = server_->bind_to_any_port(host);
  } else if (!server_->bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound < 0) fail(ErrorKind::kIo, "cannot bind api server to " + host + ":" + std::to_string(port));
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return bound;
}

bool ApiServer::listen(const std::string& host, int port) { return server_->listen(host, port); }

void ApiServer::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace infocir
