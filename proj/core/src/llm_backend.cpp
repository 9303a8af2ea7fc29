#include <cmath>
#include <cstdlib>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "looplab/optimizer.hpp"

namespace looplab {

namespace {

using json = nlohmann::json;

constexpr std::string_view kReformatRequest =
    "Your reply could not be read. Answer again using only the fenced slot blocks "
    "described in the instructions, or NO CHANGE.";

json base_messages(const LearningContext& ctx) {
  return json::array({
      {{"role", "system"}, {"content", std::string(reply_format_instruction())}},
      {{"role", "user"}, {"content", ctx.text}},
  });
}

}  // namespace

LlmBackend::LlmBackend(LlmConfig config, Sleeper sleeper)
    : config_(std::move(config)), sleeper_(std::move(sleeper)) {
  if (!config_.base_url.starts_with("http://")) {
    throw ConfigError("llm base_url must start with http:// (got '" + config_.base_url + "')");
  }
  if (config_.model.empty()) throw ConfigError("llm model must be set");
  if (config_.max_attempts < 1) throw ConfigError("llm max_attempts must be at least 1");
  if (config_.initial_backoff_seconds < 0.0) {
    throw ConfigError("llm initial_backoff_seconds must not be negative");
  }
  if (config_.timeout_seconds < 1) throw ConfigError("llm timeout_seconds must be at least 1");
  if (!sleeper_) {
    sleeper_ = [](double s) { std::this_thread::sleep_for(std::chrono::duration<double>(s)); };
  }
}

std::string LlmBackend::request_body(const LearningContext& ctx) const {
  json body = {{"model", config_.model},
               {"temperature", config_.temperature},
               {"messages", base_messages(ctx)}};
  return body.dump();
}

std::string LlmBackend::complete(const std::string& body) {
  httplib::Headers headers;
  if (!config_.api_key_env.empty()) {
    if (const char* key = std::getenv(config_.api_key_env.c_str()); key != nullptr && *key) {
      headers.emplace("Authorization", std::string("Bearer ") + key);
    }
  }
  std::string last_problem;
  for (int attempt = 1; attempt <= config_.max_attempts; ++attempt) {
    ++last_attempts_;
    httplib::Client client(config_.base_url);
    client.set_connection_timeout(config_.timeout_seconds, 0);
    client.set_read_timeout(config_.timeout_seconds, 0);
    client.set_write_timeout(config_.timeout_seconds, 0);
    const auto res = client.Post(config_.path, headers, body, "application/json");

    LlmExchange ex;
    ex.request = body;
    bool retriable = true;
    if (!res) {
      ex.error = httplib::to_string(res.error());
      last_problem = "transport error: " + ex.error;
    } else {
      ex.status = res->status;
      ex.response = res->body;
      if (res->status == 200) {
        exchanges_.push_back(ex);
        const json parsed = json::parse(res->body, nullptr, false);
        if (parsed.is_discarded() || !parsed.contains("choices") ||
            !parsed["choices"].is_array() || parsed["choices"].empty()) {
          throw OptimizerError("the completion response is not valid chat JSON", false);
        }
        const json& message = parsed["choices"][0].value("message", json::object());
        if (!message.contains("content") || !message["content"].is_string()) {
          throw OptimizerError("the completion response has no message content", false);
        }
        return message["content"].get<std::string>();
      }
      last_problem = "HTTP status " + std::to_string(res->status);
      retriable = res->status >= 500 || res->status == 429;
      ex.error = last_problem;
    }
    exchanges_.push_back(ex);
    if (!retriable) throw OptimizerError("llm request failed with " + last_problem, false);
    if (attempt < config_.max_attempts) {
      sleeper_(config_.initial_backoff_seconds * std::pow(2.0, attempt - 1));
    }
  }
  throw OptimizerError("llm request failed after " + std::to_string(config_.max_attempts) +
                           " attempts, last " + last_problem,
                       true);
}

ArtifactDelta LlmBackend::propose(const LearningContext& ctx) {
  last_attempts_ = 0;
  exchanges_.clear();
  const std::string first = complete(request_body(ctx));
  try {
    return parse_reply(first);
  } catch (const OptimizerError&) {
  }
  json messages = base_messages(ctx);
  messages.push_back({{"role", "assistant"}, {"content", first}});
  messages.push_back({{"role", "user"}, {"content", std::string(kReformatRequest)}});
  const json body = {
      {"model", config_.model}, {"temperature", config_.temperature}, {"messages", messages}};
  const std::string second = complete(body.dump());
  try {
    return parse_reply(second);
  } catch (const OptimizerError& e) {
    throw OptimizerError(std::string("the reply stayed unreadable after a reformat request: ") +
                             e.what(),
                         false);
  }
}

}  // namespace looplab
