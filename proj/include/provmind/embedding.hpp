#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "provmind/provgraph.hpp"

namespace provmind {

using Vector = Eigen::VectorXd;

inline constexpr int kEmbeddingDim = 512;

/// Cosine of two vectors; 0 when either has zero norm.
template <typename A, typename B>
double cosine_similarity(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return a.dot(b) / (na * nb);
}

/// Affine map of a cosine from [-1, 1] onto [0, 1], clamped against rounding.
inline double cosine_to_unit(double cosine) {
  const double v = (cosine + 1.0) / 2.0;
  return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
}

class TextEmbedder {
 public:
  virtual ~TextEmbedder() = default;
  /// One L2-normalized vector per text. Endpoint backends throw
  /// Error{embedder_unavailable}.
  virtual std::vector<Vector> embed(const std::vector<std::string>& texts) const = 0;
  virtual std::string name() const = 0;

  Vector embed_one(const std::string& text) const { return embed({text}).front(); }
};

/// Hashed character n-gram frequencies (n in [n_min, n_max]) folded into
/// `dim` buckets. Needs no network and is stable across platforms.
class HashedNgramEmbedder final : public TextEmbedder {
 public:
  explicit HashedNgramEmbedder(int dim = kEmbeddingDim, int n_min = 3, int n_max = 5);
  std::vector<Vector> embed(const std::vector<std::string>& texts) const override;
  std::string name() const override;

  Vector embed_text(const std::string& text) const;

 private:
  int dim_;
  int n_min_;
  int n_max_;
};

/// Remote embedding service. Request {"texts": [...]}, response
/// {"vectors": [[...], ...]} or {"data": [{"embedding": [...]}, ...]}.
class EndpointEmbedder final : public TextEmbedder {
 public:
  EndpointEmbedder(std::string url, std::string token, double timeout_seconds = 30.0);
  std::vector<Vector> embed(const std::vector<std::string>& texts) const override;
  std::string name() const override { return "endpoint:" + url_; }

 private:
  std::string url_;
  std::string token_;
  double timeout_;
};

/// PROVMIND_EMBED_URL selects the endpoint backend (with PROVMIND_EMBED_TOKEN);
/// otherwise the built-in embedder.
std::unique_ptr<TextEmbedder> make_text_embedder_from_env();

/// Untrained single-head graph attention over text features of node labels.
///
/// Features are projected once by a seed-derived matrix W, then `rounds`
/// passes of softmax-attention averaging run over the undirected usage and
/// generation edges (self loops included). The node mean is L2-normalized.
class FrozenGraphAttention {
 public:
  explicit FrozenGraphAttention(std::uint64_t seed, int dim = kEmbeddingDim, int rounds = 2);

  Vector embed(const ProcessGraph& g, const TextEmbedder& features) const;
  /// Node features from the built-in n-gram embedder.
  Vector embed(const ProcessGraph& g) const;

  const Eigen::MatrixXd& projection() const { return w_; }
  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  int rounds_;
  Eigen::MatrixXd w_;
  Vector a_src_;
  Vector a_dst_;
};

}  // namespace provmind
