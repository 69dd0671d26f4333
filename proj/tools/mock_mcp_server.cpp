// Scripted MCP server speaking JSON-RPC 2.0 over stdio, one message per
// line. Behavior comes entirely from a fixture file so tests stay hermetic.
//
// Fixture format (JSON):
// {
//   "tools": [
//     {
//       "name": "echo",
//       "description": "...",
//       "inputSchema": { ... },
//       "behavior": {
//         "echo_args": true,          // result = {"echo": <arguments>}
//         "payload": { ... },         // canned result object
//         "delay_ms": 0,              // sleep before responding
//         "rpc_error": "message"      // respond with a JSON-RPC error
//       }
//     }
//   ]
// }

#include <nlohmann/json.hpp>

#include <chrono>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <thread>

using json = nlohmann::json;

namespace {

json load_fixture(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    std::cerr << "mock_mcp_server: cannot open fixture " << path << "\n";
    std::exit(2);
  }
  return json::parse(in);
}

void reply(const json& message) {
  std::cout << message.dump() << "\n" << std::flush;
}

void reply_result(const json& id, json result) {
  reply(json{{"jsonrpc", "2.0"}, {"id", id}, {"result", std::move(result)}});
}

void reply_error(const json& id, int code, const std::string& message) {
  reply(json{{"jsonrpc", "2.0"},
             {"id", id},
             {"error", json{{"code", code}, {"message", message}}}});
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: mock_mcp_server <fixture.json>\n";
    return 2;
  }
  json fixture = load_fixture(argv[1]);
  std::map<std::string, json> tools;
  for (const auto& tool : fixture.value("tools", json::array()))
    tools[tool.at("name").get<std::string>()] = tool;

  std::string line;
  while (std::getline(std::cin, line)) {
    if (line.empty()) continue;
    json message;
    try {
      message = json::parse(line);
    } catch (const json::parse_error&) {
      continue;
    }
    std::string method = message.value("method", std::string());
    if (!message.contains("id")) continue;  // notification
    const json& id = message["id"];

    if (method == "initialize") {
      reply_result(id, json{{"protocolVersion", "2024-11-05"},
                            {"capabilities", json{{"tools", json::object()}}},
                            {"serverInfo", json{{"name", "mock-mcp-server"},
                                                {"version", "0.1"}}}});
    } else if (method == "tools/list") {
      if (fixture.value("malformed_listing", false)) {
        reply_result(id, json{{"tools", "not-an-array"}});
        continue;
      }
      json listing = json::array();
      for (const auto& [name, tool] : tools) {
        json entry{{"name", name},
                   {"description", tool.value("description", std::string())}};
        if (tool.contains("inputSchema")) entry["inputSchema"] = tool["inputSchema"];
        listing.push_back(entry);
      }
      reply_result(id, json{{"tools", listing}});
    } else if (method == "tools/call") {
      const json& params = message.value("params", json::object());
      std::string name = params.value("name", std::string());
      auto it = tools.find(name);
      if (it == tools.end()) {
        reply_error(id, -32602, "unknown tool: " + name);
        continue;
      }
      const json& behavior = it->second.value("behavior", json::object());
      int delay_ms = behavior.value("delay_ms", 0);
      if (delay_ms > 0)
        std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms));
      if (behavior.contains("rpc_error")) {
        reply_error(id, -32000, behavior["rpc_error"].get<std::string>());
        continue;
      }
      if (behavior.value("echo_args", false)) {
        reply_result(id, json{{"echo", params.value("arguments", json::object())}});
        continue;
      }
      reply_result(id, behavior.value("payload", json{{"text", "ok"}}));
    } else {
      reply_error(id, -32601, "method not found: " + method);
    }
  }
  return 0;
}
