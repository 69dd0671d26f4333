#pragma once

#include "toolforge/common.hpp"
#include "toolforge/gateway.hpp"

#include <httplib.h>

#include <cstdlib>
#include <string>

namespace toolforge {

// Chat-completions-compatible HTTP backend. Base URL and model come from
// configuration; the API key from the TOOLFORGE_API_KEY environment variable.
class HttpChatBackend : public ChatBackend {
 public:
  HttpChatBackend(std::string base_url, std::string model)
      : base_url_(std::move(base_url)), model_(std::move(model)) {
    if (const char* key = std::getenv("TOOLFORGE_API_KEY")) api_key_ = key;
  }

  std::string id() const override { return "http:" + model_; }

  std::string complete(const ChatRequest& request,
                       const std::string& rendered_prompt) override {
    httplib::Client client(base_url_);
    client.set_read_timeout(120, 0);
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
    json body{{"model", model_},
              {"temperature", request.temperature},
              {"max_tokens", request.max_tokens},
              {"messages", json::array({json{{"role", "user"}, {"content", rendered_prompt}}})}};
    auto result = client.Post("/v1/chat/completions", headers, body.dump(),
                              "application/json");
    if (!result)
      throw BackendError("HTTP backend unreachable: " + base_url_);
    if (result->status != 200)
      throw BackendError("HTTP backend status " + std::to_string(result->status));
    json parsed = json::parse(result->body);
    return parsed.at("choices").at(0).at("message").at("content").get<std::string>();
  }

 private:
  std::string base_url_;
  std::string model_;
  std::string api_key_;
};

}  // namespace toolforge
