#pragma once

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace toolforge {

using json = nlohmann::json;

// Exit codes used by the CLI; exceptions carry the code they map to.
enum class ExitCode : int {
  Ok = 0,
  Failure = 1,
  InvalidArgument = 2,
  DependencyError = 3,
  BackendError = 4,
  IntegrityError = 5,
};

class Error : public std::runtime_error {
 public:
  Error(ExitCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ExitCode code() const { return code_; }

 private:
  ExitCode code_;
};

struct InvalidArgumentError : Error {
  explicit InvalidArgumentError(const std::string& what)
      : Error(ExitCode::InvalidArgument, what) {}
};

struct ParseError : Error {
  explicit ParseError(const std::string& what)
      : Error(ExitCode::InvalidArgument, what) {}
};

struct DependencyError : Error {
  explicit DependencyError(const std::string& what)
      : Error(ExitCode::DependencyError, what) {}
};

struct BackendError : Error {
  explicit BackendError(const std::string& what)
      : Error(ExitCode::BackendError, what) {}
};

struct IntegrityError : Error {
  explicit IntegrityError(const std::string& what)
      : Error(ExitCode::IntegrityError, what) {}
};

struct StageError : Error {
  explicit StageError(const std::string& what)
      : Error(ExitCode::Failure, what) {}
};

// Canonical serialization: sorted keys, no whitespace. nlohmann::json
// objects already iterate in key order, so dump() is canonical as long as
// the value was built through json (not ordered_json).
inline std::string canonical_dump(const json& value) { return value.dump(); }

inline std::string to_lower(std::string_view text) {
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return out;
}

inline std::string trim(std::string_view text) {
  size_t begin = 0;
  size_t end = text.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(text[begin]))) ++begin;
  while (end > begin && std::isspace(static_cast<unsigned char>(text[end - 1]))) --end;
  return std::string(text.substr(begin, end - begin));
}

// lowercase + remove ALL whitespace, the normalization used for ICP matching.
inline std::string normalize_for_match(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) continue;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

// FNV-1a 64-bit; stable across runs and platforms, used for request
// fingerprints and seed substreams.
inline std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

inline std::string hex64(std::uint64_t value) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<size_t>(i)] = digits[value & 0xF];
    value >>= 4;
  }
  return out;
}

// Named substream: one master seed, independent streams per stage so adding
// a stage never perturbs the draws of another.
inline std::mt19937_64 substream(std::uint64_t seed, std::string_view stage) {
  return std::mt19937_64(seed ^ fnv1a64(stage));
}

inline std::vector<json> read_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DependencyError("cannot open " + path);
  std::vector<json> records;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    try {
      records.push_back(json::parse(line));
    } catch (const json::parse_error& e) {
      throw ParseError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return records;
}

inline void write_jsonl(const std::string& path, const std::vector<json>& records) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ExitCode::Failure, "cannot write " + path);
  for (const auto& record : records) out << canonical_dump(record) << '\n';
}

// Minimal payload path syntax: $.field.sub[0]
// Returns nullptr json on a missing path instead of throwing.
inline json eval_json_path(const json& root, std::string_view path) {
  if (path.empty() || path[0] != '$') return json();
  const json* cur = &root;
  size_t i = 1;
  while (i < path.size()) {
    if (path[i] == '.') {
      ++i;
      size_t start = i;
      while (i < path.size() && path[i] != '.' && path[i] != '[') ++i;
      std::string key(path.substr(start, i - start));
      if (!cur->is_object() || !cur->contains(key)) return json();
      cur = &(*cur)[key];
    } else if (path[i] == '[') {
      size_t close = path.find(']', i);
      if (close == std::string_view::npos) return json();
      size_t index = 0;
      auto digits = path.substr(i + 1, close - i - 1);
      for (char c : digits) {
        if (!std::isdigit(static_cast<unsigned char>(c))) return json();
        index = index * 10 + static_cast<size_t>(c - '0');
      }
      if (!cur->is_array() || index >= cur->size()) return json();
      cur = &(*cur)[index];
      i = close + 1;
    } else {
      return json();
    }
  }
  return *cur;
}

// Value rendered the way it would appear inside a request sentence.
inline std::string value_to_text(const json& value) {
  if (value.is_string()) return value.get<std::string>();
  return value.dump();
}

}  // namespace toolforge
