#pragma once

#include "toolforge/common.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace toolforge {

struct ChatRequest {
  std::string template_name;
  std::map<std::string, std::string> variables;  // sorted: canonical by design
  double temperature = 0.0;
  int max_tokens = 2048;
};

struct ChatResponse {
  std::string text;
  std::string backend_id;
  bool cached = false;
};

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual std::string id() const = 0;
  virtual std::string complete(const ChatRequest& request,
                               const std::string& rendered_prompt) = 0;
};

enum class CassetteMode { Record, Replay, Passthrough };

inline CassetteMode cassette_mode_from_string(const std::string& text) {
  if (text == "record") return CassetteMode::Record;
  if (text == "replay") return CassetteMode::Replay;
  if (text == "passthrough") return CassetteMode::Passthrough;
  throw ParseError("unknown cassette mode: " + text);
}

// Substitutes {placeholder} occurrences. Every placeholder must be bound and
// every variable must be used; both directions error with names.
inline std::string render_template_text(const std::string& template_text,
                                        const std::map<std::string, std::string>& variables) {
  std::string out;
  out.reserve(template_text.size());
  std::vector<std::string> missing;
  std::map<std::string, bool> used;
  for (const auto& [name, value] : variables) used[name] = false;

  size_t i = 0;
  while (i < template_text.size()) {
    char c = template_text[i];
    if (c == '{') {
      size_t close = template_text.find('}', i);
      if (close == std::string::npos) {
        out.push_back(c);
        ++i;
        continue;
      }
      std::string name = template_text.substr(i + 1, close - i - 1);
      auto it = variables.find(name);
      if (it == variables.end()) {
        missing.push_back(name);
      } else {
        out += it->second;
        used[name] = true;
      }
      i = close + 1;
    } else {
      out.push_back(c);
      ++i;
    }
  }
  if (!missing.empty()) {
    std::string names = missing.front();
    for (size_t k = 1; k < missing.size(); ++k) names += ", " + missing[k];
    throw InvalidArgumentError("template placeholders unbound: " + names);
  }
  for (const auto& [name, was_used] : used)
    if (!was_used)
      throw InvalidArgumentError("variable not present in template: " + name);
  return out;
}

// stable hash of (template_name, canonicalized variables, temperature)
inline std::string fingerprint(const ChatRequest& request) {
  json vars = json::object();
  for (const auto& [name, value] : request.variables) vars[name] = value;
  json key{{"template", request.template_name},
           {"variables", vars},
           {"temperature", request.temperature}};
  return hex64(fnv1a64(canonical_dump(key)));
}

// Single choke point for generative/judging calls: named templates, a
// pluggable backend, and a record/replay cassette for offline determinism.
class LlmGateway {
 public:
  LlmGateway(std::filesystem::path templates_dir, std::shared_ptr<ChatBackend> backend,
             CassetteMode mode = CassetteMode::Passthrough,
             std::filesystem::path cassette_path = {})
      : templates_dir_(std::move(templates_dir)),
        backend_(std::move(backend)),
        mode_(mode),
        cassette_path_(std::move(cassette_path)) {
    if (mode_ != CassetteMode::Passthrough && cassette_path_.empty())
      throw InvalidArgumentError("cassette path required for record/replay");
    if (mode_ == CassetteMode::Replay) load_cassette();
    if (mode_ == CassetteMode::Record && std::filesystem::exists(cassette_path_))
      load_cassette();  // resume an existing cassette
  }

  std::string render_template(const std::string& name,
                              const std::map<std::string, std::string>& variables) const {
    return render_template_text(load_template(name), variables);
  }

  ChatResponse complete(const ChatRequest& request) {
    // `_reprompt` is gateway-internal: it joins the fingerprint and is
    // appended to the prompt, but is not a template placeholder.
    if (request.variables.count("_reprompt")) return complete_with_suffix(request);
    std::string prompt = render_template(request.template_name, request.variables);
    std::string fp = fingerprint(request);

    if (mode_ == CassetteMode::Replay || mode_ == CassetteMode::Record) {
      std::lock_guard<std::mutex> lock(mutex_);
      auto it = entries_.find(fp);
      if (it != entries_.end())
        return ChatResponse{it->second, "cassette", true};
      if (mode_ == CassetteMode::Replay)
        throw BackendError("cassette miss for fingerprint " + fp + " (template " +
                           request.template_name + ")");
    }

    std::string text;
    try {
      text = backend_->complete(request, prompt);
    } catch (const Error&) {
      throw;
    } catch (const std::exception& e) {
      throw BackendError(std::string("backend failure: ") + e.what());
    }
    if (text.empty()) throw BackendError("backend returned empty text");

    if (mode_ == CassetteMode::Record) {
      std::lock_guard<std::mutex> lock(mutex_);
      entries_[fp] = text;
      std::ofstream out(cassette_path_, std::ios::app);
      if (!out) throw Error(ExitCode::Failure, "cannot append to cassette");
      out << canonical_dump(json{{"fingerprint", fp},
                                 {"template", request.template_name},
                                 {"response", text}})
          << '\n';
    }
    return ChatResponse{text, backend_->id(), false};
  }

  // First fenced block of the response, parsed as JSON. Malformed output is
  // reprompted with the parse error appended, up to `reprompts` times.
  json complete_json(ChatRequest request, int reprompts = 2) {
    std::string last_error;
    for (int attempt = 0; attempt <= reprompts; ++attempt) {
      ChatRequest attempt_request = request;
      if (attempt > 0)
        attempt_request.variables["_reprompt"] =
            "attempt " + std::to_string(attempt) + ": previous output was invalid: " + last_error;
      ChatResponse response = complete(attempt_request);
      auto block = extract_fenced_block(response.text);
      if (!block) {
        last_error = "no fenced block found";
        continue;
      }
      try {
        return json::parse(*block);
      } catch (const json::parse_error& e) {
        last_error = e.what();
      }
    }
    throw StageError("unparseable model output for template " + request.template_name +
                     " after reprompts: " + last_error);
  }

  static std::optional<std::string> extract_fenced_block(const std::string& text) {
    size_t open = text.find("```");
    if (open == std::string::npos) return std::nullopt;
    size_t body = text.find('\n', open);
    if (body == std::string::npos) return std::nullopt;
    size_t close = text.find("```", body);
    if (close == std::string::npos) return std::nullopt;
    return text.substr(body + 1, close - body - 1);
  }

 private:
  ChatResponse complete_with_suffix(const ChatRequest& request) {
    ChatRequest base = request;
    std::string suffix = request.variables.at("_reprompt");
    base.variables.erase("_reprompt");
    std::string prompt = render_template(base.template_name, base.variables) + "\n\n" + suffix;
    std::string fp = fingerprint(request);

    if (mode_ == CassetteMode::Replay || mode_ == CassetteMode::Record) {
      std::lock_guard<std::mutex> lock(mutex_);
      auto hit = entries_.find(fp);
      if (hit != entries_.end()) return ChatResponse{hit->second, "cassette", true};
      if (mode_ == CassetteMode::Replay)
        throw BackendError("cassette miss for fingerprint " + fp);
    }
    std::string text = backend_->complete(request, prompt);
    if (mode_ == CassetteMode::Record) {
      std::lock_guard<std::mutex> lock(mutex_);
      entries_[fp] = text;
      std::ofstream out(cassette_path_, std::ios::app);
      out << canonical_dump(json{{"fingerprint", fp},
                                 {"template", request.template_name},
                                 {"response", text}})
          << '\n';
    }
    return ChatResponse{text, backend_->id(), false};
  }

  std::string load_template(const std::string& name) const {
    auto path = templates_dir_ / (name + ".txt");
    std::ifstream in(path);
    if (!in) throw DependencyError("template not found: " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
  }

  void load_cassette() {
    if (!std::filesystem::exists(cassette_path_)) {
      if (mode_ == CassetteMode::Replay)
        throw BackendError("cassette file missing: " + cassette_path_.string());
      return;
    }
    for (const auto& record : read_jsonl(cassette_path_.string()))
      entries_[record.at("fingerprint").get<std::string>()] =
          record.at("response").get<std::string>();
  }

  std::filesystem::path templates_dir_;
  std::shared_ptr<ChatBackend> backend_;
  CassetteMode mode_;
  std::filesystem::path cassette_path_;
  std::map<std::string, std::string> entries_;
  std::mutex mutex_;
};

// Test helper: hands out canned responses in order.
class QueueBackend : public ChatBackend {
 public:
  explicit QueueBackend(std::vector<std::string> responses)
      : responses_(std::move(responses)) {}
  std::string id() const override { return "queue"; }
  std::string complete(const ChatRequest&, const std::string&) override {
    ++calls;
    if (next_ >= responses_.size()) throw BackendError("queue backend exhausted");
    return responses_[next_++];
  }
  int calls = 0;

 private:
  std::vector<std::string> responses_;
  size_t next_ = 0;
};

}  // namespace toolforge
