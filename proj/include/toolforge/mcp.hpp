#pragma once

#include "toolforge/common.hpp"
#include "toolforge/param_check.hpp"
#include "toolforge/registry.hpp"

#include <chrono>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

namespace toolforge {

enum class TransportStatus { Ok, ProtocolError, Timeout };

inline std::string to_string(TransportStatus status) {
  switch (status) {
    case TransportStatus::Ok: return "ok";
    case TransportStatus::ProtocolError: return "protocol_error";
    case TransportStatus::Timeout: return "timeout";
  }
  return "protocol_error";
}

struct ToolCall {
  std::string tool_id;
  json arguments = json::object();
  std::chrono::milliseconds timeout{30000};
};

struct ToolResult {
  std::optional<json> raw_payload;
  std::chrono::milliseconds elapsed{0};
  TransportStatus transport_status = TransportStatus::ProtocolError;
  std::string detail;
};

enum class Verdict { Valid, InvalidParams, ErrorPayload, Timeout };

inline std::string to_string(Verdict verdict) {
  switch (verdict) {
    case Verdict::Valid: return "Valid";
    case Verdict::InvalidParams: return "InvalidParams";
    case Verdict::ErrorPayload: return "ErrorPayload";
    case Verdict::Timeout: return "Timeout";
  }
  return "InvalidParams";
}

inline Verdict verdict_from_string(const std::string& text) {
  if (text == "Valid") return Verdict::Valid;
  if (text == "InvalidParams") return Verdict::InvalidParams;
  if (text == "ErrorPayload") return Verdict::ErrorPayload;
  if (text == "Timeout") return Verdict::Timeout;
  throw ParseError("unknown verdict: " + text);
}

struct ValidityVerdict {
  Verdict variant = Verdict::InvalidParams;
  std::string detail;

  bool valid() const { return variant == Verdict::Valid; }
};

struct ErrorMarkerConfig {
  // Case-insensitive regex applied to designated text fields of the payload.
  std::string text_pattern = R"(\b(error|failed|failure|exception)\b)";
  std::vector<std::string> text_fields = {"text", "message", "content"};
};

// Payload matches the error-marker predicate when the protocol error flag is
// set, a top-level error/failure/exception field is present, or a designated
// text field matches the configured regex.
inline bool payload_has_error_marker(const json& payload,
                                     const ErrorMarkerConfig& config = {}) {
  if (!payload.is_object()) return false;
  if (payload.value("isError", false)) return true;
  for (const char* key : {"error", "failure", "exception"})
    if (payload.contains(key)) return true;
  std::regex re(config.text_pattern, std::regex::icase);
  for (const auto& field : config.text_fields) {
    if (!payload.contains(field)) continue;
    const json& value = payload[field];
    if (value.is_string() && std::regex_search(value.get<std::string>(), re))
      return true;
    if (value.is_array()) {
      for (const auto& item : value) {
        if (item.is_string() && std::regex_search(item.get<std::string>(), re))
          return true;
        if (item.is_object() && item.contains("text") && item["text"].is_string() &&
            std::regex_search(item["text"].get<std::string>(), re))
          return true;
      }
    }
  }
  return false;
}

// Pure classification; precedence InvalidParams > Timeout > ErrorPayload > Valid.
inline ValidityVerdict classify_result(const ToolSpec& spec, const ToolCall& call,
                                       const ToolResult& result,
                                       const ErrorMarkerConfig& config = {}) {
  auto problems = check_arguments(spec, call.arguments);
  if (!problems.empty()) {
    std::string detail = problems.front();
    for (size_t i = 1; i < problems.size(); ++i) detail += "; " + problems[i];
    return {Verdict::InvalidParams, detail};
  }
  if (result.transport_status == TransportStatus::Timeout)
    return {Verdict::Timeout, "call exceeded timeout"};
  if (result.transport_status == TransportStatus::ProtocolError)
    return {Verdict::ErrorPayload, "protocol error: " + result.detail};
  if (result.raw_payload && payload_has_error_marker(*result.raw_payload, config))
    return {Verdict::ErrorPayload, "payload carries an error marker"};
  return {Verdict::Valid, "ok"};
}

// JSON-RPC 2.0 over a child process's stdin/stdout, one message per line
// (the protocol's stdio framing). One client serializes its own requests.
class StdioClient {
 public:
  StdioClient() = default;
  StdioClient(const StdioClient&) = delete;
  StdioClient& operator=(const StdioClient&) = delete;

  ~StdioClient() { close(); }

  void connect(const std::string& command, const std::vector<std::string>& args = {}) {
    // A dead child must surface as a write error, not kill the process.
    signal(SIGPIPE, SIG_IGN);
    int to_child[2];
    int from_child[2];
    if (pipe(to_child) != 0 || pipe(from_child) != 0)
      throw Error(ExitCode::Failure, "pipe() failed");
    pid_ = fork();
    if (pid_ < 0) throw Error(ExitCode::Failure, "fork() failed");
    if (pid_ == 0) {
      dup2(to_child[0], STDIN_FILENO);
      dup2(from_child[1], STDOUT_FILENO);
      ::close(to_child[0]);
      ::close(to_child[1]);
      ::close(from_child[0]);
      ::close(from_child[1]);
      std::vector<char*> argv;
      argv.push_back(const_cast<char*>(command.c_str()));
      for (const auto& arg : args) argv.push_back(const_cast<char*>(arg.c_str()));
      argv.push_back(nullptr);
      execvp(command.c_str(), argv.data());
      _exit(127);
    }
    ::close(to_child[0]);
    ::close(from_child[1]);
    write_fd_ = to_child[1];
    read_fd_ = from_child[0];
    try {
      initialize();
    } catch (const Error&) {
      // Distinguish "server binary missing" (exec failed, child exits 127)
      // from a live server that misbehaved during the handshake.
      int status = 0;
      pid_t reaped = 0;
      // Pipe EOF can precede the child's exit-status becoming reapable.
      for (int spin = 0; spin < 100 && reaped == 0; ++spin) {
        reaped = waitpid(pid_, &status, WNOHANG);
        if (reaped == 0) usleep(2000);
      }
      bool exec_failed =
          reaped == pid_ && WIFEXITED(status) && WEXITSTATUS(status) == 127;
      if (exec_failed) pid_ = -1;
      close();
      if (exec_failed)
        throw DependencyError("cannot launch server command: " + command);
      throw;
    }
  }

  void close() {
    if (write_fd_ >= 0) { ::close(write_fd_); write_fd_ = -1; }
    if (read_fd_ >= 0) { ::close(read_fd_); read_fd_ = -1; }
    if (pid_ > 0) {
      kill(pid_, SIGTERM);
      int status = 0;
      waitpid(pid_, &status, 0);
      pid_ = -1;
    }
  }

  bool connected() const { return pid_ > 0; }

  std::vector<ToolSpec> list_tools() {
    json response = request("tools/list", json::object());
    if (response.contains("error"))
      throw BackendError("tools/list failed: " + response["error"].dump());
    std::vector<ToolSpec> specs;
    const json& result = response.at("result");
    if (!result.is_object() || !result.contains("tools") || !result["tools"].is_array())
      throw BackendError("malformed tools/list result");
    for (const auto& tool : result["tools"]) {
      ToolSpec spec;
      spec.tool_id = tool.at("name").get<std::string>();
      spec.name = spec.tool_id;
      spec.description = tool.value("description", std::string());
      const json& schema = tool.value("inputSchema", json::object());
      auto required = schema.value("required", std::vector<std::string>{});
      if (schema.contains("properties")) {
        for (const auto& [pname, pschema] : schema["properties"].items()) {
          json param{{"name", pname}};
          param["kind"] = pschema.value("type", std::string("string"));
          if (pschema.contains("anyOf") || pschema.contains("oneOf"))
            param["kind"] = "union";
          param["required"] = std::find(required.begin(), required.end(), pname) != required.end();
          if (pschema.contains("minimum")) param["min"] = pschema["minimum"];
          if (pschema.contains("maximum")) param["max"] = pschema["maximum"];
          if (pschema.contains("pattern")) param["pattern"] = pschema["pattern"];
          if (pschema.contains("enum")) param["enum"] = pschema["enum"];
          spec.parameters.push_back(ParameterSpec::from_json(param));
        }
      }
      specs.push_back(std::move(spec));
    }
    return specs;
  }

  ToolResult call_tool(const ToolCall& call) {
    ToolResult result;
    auto started = std::chrono::steady_clock::now();
    json response;
    try {
      response = request("tools/call",
                         json{{"name", call.tool_id}, {"arguments", call.arguments}},
                         call.timeout);
    } catch (const TimeoutSignal&) {
      result.transport_status = TransportStatus::Timeout;
      result.elapsed = elapsed_since(started);
      result.detail = "no response within timeout";
      return result;
    } catch (const std::exception& e) {
      result.transport_status = TransportStatus::ProtocolError;
      result.elapsed = elapsed_since(started);
      result.detail = e.what();
      return result;
    }
    result.elapsed = elapsed_since(started);
    if (response.contains("error")) {
      result.transport_status = TransportStatus::ProtocolError;
      result.detail = response["error"].dump();
      return result;
    }
    result.transport_status = TransportStatus::Ok;
    result.raw_payload = response.at("result");
    return result;
  }

 private:
  struct TimeoutSignal : std::runtime_error {
    TimeoutSignal() : std::runtime_error("timeout") {}
  };

  static std::chrono::milliseconds elapsed_since(
      std::chrono::steady_clock::time_point start) {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
        std::chrono::steady_clock::now() - start);
  }

  void initialize() {
    json response = request(
        "initialize",
        json{{"protocolVersion", "2024-11-05"},
             {"capabilities", json::object()},
             {"clientInfo", json{{"name", "toolforge"}, {"version", "0.1"}}}});
    if (response.contains("error"))
      throw BackendError("initialize failed: " + response["error"].dump());
    send_line(json{{"jsonrpc", "2.0"}, {"method", "notifications/initialized"}}.dump());
  }

  json request(const std::string& method, const json& params,
               std::chrono::milliseconds timeout = std::chrono::milliseconds(30000)) {
    if (write_fd_ < 0) throw BackendError("client not connected");
    std::uint64_t id = next_id_++;
    json message{{"jsonrpc", "2.0"}, {"id", id}, {"method", method}, {"params", params}};
    send_line(message.dump());
    auto deadline = std::chrono::steady_clock::now() + timeout;
    for (;;) {
      std::string line = read_line(deadline);
      json response;
      try {
        response = json::parse(line);
      } catch (const json::parse_error& e) {
        throw BackendError(std::string("malformed response: ") + e.what());
      }
      // Skip notifications and responses to stale ids.
      if (response.contains("id") && response["id"] == id) return response;
    }
  }

  void send_line(const std::string& line) {
    std::string framed = line + "\n";
    size_t written = 0;
    while (written < framed.size()) {
      ssize_t n = ::write(write_fd_, framed.data() + written, framed.size() - written);
      if (n < 0) throw BackendError("write to server failed");
      written += static_cast<size_t>(n);
    }
  }

  std::string read_line(std::chrono::steady_clock::time_point deadline) {
    for (;;) {
      auto newline = buffer_.find('\n');
      if (newline != std::string::npos) {
        std::string line = buffer_.substr(0, newline);
        buffer_.erase(0, newline + 1);
        return line;
      }
      auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(
          deadline - std::chrono::steady_clock::now());
      if (remaining.count() <= 0) throw TimeoutSignal();
      pollfd pfd{read_fd_, POLLIN, 0};
      int ready = poll(&pfd, 1, static_cast<int>(remaining.count()));
      if (ready == 0) throw TimeoutSignal();
      if (ready < 0) throw BackendError("poll failed");
      char chunk[4096];
      ssize_t n = ::read(read_fd_, chunk, sizeof(chunk));
      if (n <= 0) throw BackendError("server closed the connection");
      buffer_.append(chunk, static_cast<size_t>(n));
    }
  }

  pid_t pid_ = -1;
  int write_fd_ = -1;
  int read_fd_ = -1;
  std::uint64_t next_id_ = 1;
  std::string buffer_;
};

}  // namespace toolforge
