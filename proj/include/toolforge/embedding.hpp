#pragma once

#include "toolforge/common.hpp"

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace toolforge {

// Pluggable text embedder. Only cosine similarity is consumed downstream,
// so any fixed-dimension vector source qualifies.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::vector<double> embed(const std::string& text) = 0;
};

inline double cosine_similarity(const std::vector<double>& a,
                                const std::vector<double>& b) {
  if (a.size() != b.size())
    throw InvalidArgumentError("embedding dimension mismatch");
  double dot = 0, na = 0, nb = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0 || nb == 0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

// Deterministic mock: hashes lowercased tokens into a fixed-dimension
// bag-of-words vector. Identical strings embed identically; token-disjoint
// strings are near-orthogonal.
class HashingEmbedder : public EmbeddingProvider {
 public:
  explicit HashingEmbedder(size_t dim = 64) : dim_(dim) {}

  std::vector<double> embed(const std::string& text) override {
    std::vector<double> vec(dim_, 0.0);
    std::string token;
    auto flush = [&] {
      if (token.empty()) return;
      std::uint64_t h = fnv1a64(to_lower(token));
      vec[h % dim_] += 1.0;
      token.clear();
    };
    for (char c : text) {
      if (std::isalnum(static_cast<unsigned char>(c)))
        token.push_back(c);
      else
        flush();
    }
    flush();
    return vec;
  }

 private:
  size_t dim_;
};

// Test helper: returns whatever the callback says.
class CallbackEmbedder : public EmbeddingProvider {
 public:
  using Fn = std::function<std::vector<double>(const std::string&)>;
  explicit CallbackEmbedder(Fn fn) : fn_(std::move(fn)) {}
  std::vector<double> embed(const std::string& text) override { return fn_(text); }

 private:
  Fn fn_;
};

}  // namespace toolforge
