#include <cstdlib>

#include "http_util.hpp"
#include "httplib.h"
#include "infocir/prompt_enhancer.hpp"
#include "json.hpp"

namespace infocir {

using nlohmann::json;

namespace {

std::string env_or_empty(const char* name) {
  const char* v = std::getenv(name);
  return v ? std::string(v) : std::string();
}

}  // namespace

LlmConfig LlmConfig::from_env() {
  LlmConfig c;
  c.url = env_or_empty("INFOCIR_LLM_URL");
  c.model = env_or_empty("INFOCIR_LLM_MODEL");
  c.api_key = env_or_empty("INFOCIR_LLM_KEY");
  return c;
}

LlmClient::LlmClient(LlmConfig config) : config_(std::move(config)) {}

std::optional<std::string> LlmClient::complete(const std::string& system_prompt,
                                               const std::string& user_prompt) const {
  if (!config_.configured()) return std::nullopt;
  std::string origin, path;
  try {
    std::tie(origin, path) = detail::split_url(config_.url);
  } catch (const Error&) {
    return std::nullopt;
  }
  httplib::Client cli(origin);
  cli.set_connection_timeout(config_.timeout_seconds, 0);
  cli.set_read_timeout(config_.timeout_seconds, 0);
  cli.set_write_timeout(config_.timeout_seconds, 0);
  if (!config_.api_key.empty()) cli.set_bearer_token_auth(config_.api_key);

  json body = {{"model", config_.model},
               {"temperature", config_.temperature},
               {"messages",
                {{{"role", "system"}, {"content", system_prompt}}, {{"role", "user"}, {"content", user_prompt}}}}};
  auto res = cli.Post(path.empty() ? "/" : path, body.dump(), "application/json");
  if (!res || res->status != 200) return std::nullopt;
  try {
    return json::parse(res->body).at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception&) {
    return std::nullopt;
  }
}

std::optional<std::vector<std::string>> parse_variant_array(const std::string& content) {
  auto try_parse = [](const std::string& s) -> std::optional<std::vector<std::string>> {
    try {
      auto j = json::parse(s);
      if (!j.is_array()) return std::nullopt;
      std::vector<std::string> out;
      for (const auto& v : j) {
        if (!v.is_string()) return std::nullopt;
        out.push_back(v.get<std::string>());
      }
      return out;
    } catch (const json::exception&) {
      return std::nullopt;
    }
  };
  if (auto direct = try_parse(content)) return direct;
  const auto open = content.find('[');
  const auto close = content.rfind(']');
  if (open == std::string::npos || close == std::string::npos || close < open) return std::nullopt;
  return try_parse(content.substr(open, close - open + 1));
}

}  // namespace infocir
