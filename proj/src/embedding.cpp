#include "provmind/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <map>

#include "provmind/http.hpp"

namespace provmind {

HashedNgramEmbedder::HashedNgramEmbedder(int dim, int n_min, int n_max) : dim_(dim), n_min_(n_min), n_max_(n_max) {
  if (dim <= 0 || n_min < 1 || n_max < n_min) throw Error(ErrorCode::invalid_params, "bad n-gram embedder shape");
}

std::string HashedNgramEmbedder::name() const {
  return "hashed-ngram:" + std::to_string(dim_) + ":" + std::to_string(n_min_) + "-" + std::to_string(n_max_);
}

Vector HashedNgramEmbedder::embed_text(const std::string& text) const {
  const std::string padded = " " + canonical_label(text) + " ";
  Vector v = Vector::Zero(dim_);
  for (int n = n_min_; n <= n_max_; ++n) {
    if (padded.size() < static_cast<std::size_t>(n)) continue;
    for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= padded.size(); ++i) {
      const auto bucket = fnv1a64(std::string_view(padded).substr(i, static_cast<std::size_t>(n))) %
                          static_cast<std::uint64_t>(dim_);
      v[static_cast<Eigen::Index>(bucket)] += 1.0;
    }
  }
  if (v.squaredNorm() == 0.0) v[static_cast<Eigen::Index>(fnv1a64(padded) % static_cast<std::uint64_t>(dim_))] = 1.0;
  return v / v.norm();
}

std::vector<Vector> HashedNgramEmbedder::embed(const std::vector<std::string>& texts) const {
  std::vector<Vector> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(embed_text(t));
  return out;
}

EndpointEmbedder::EndpointEmbedder(std::string url, std::string token, double timeout_seconds)
    : url_(std::move(url)), token_(std::move(token)), timeout_(timeout_seconds) {}

std::vector<Vector> EndpointEmbedder::embed(const std::vector<std::string>& texts) const {
  if (texts.empty()) return {};
  const auto result = http_post_json(url_, token_, nlohmann::json{{"texts", texts}}, timeout_);
  if (!result.ok) throw Error(ErrorCode::embedder_unavailable, url_ + ": " + result.error);
  nlohmann::json rows;
  if (result.body.contains("vectors")) {
    rows = result.body["vectors"];
  } else if (result.body.contains("data")) {
    rows = nlohmann::json::array();
    for (const auto& d : result.body["data"]) rows.push_back(d.at("embedding"));
  }
  if (!rows.is_array() || rows.size() != texts.size()) {
    throw Error(ErrorCode::embedder_unavailable, url_ + ": response does not hold one vector per text");
  }
  std::vector<Vector> out;
  std::size_t dim = 0;
  for (const auto& row : rows) {
    const auto values = row.get<std::vector<double>>();
    if (values.empty() || (dim != 0 && values.size() != dim)) {
      throw Error(ErrorCode::embedder_unavailable, url_ + ": vectors of unequal dimension");
    }
    dim = values.size();
    Vector v = Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
    const double norm = v.norm();
    if (norm > 0.0) v /= norm;
    out.push_back(std::move(v));
  }
  return out;
}

std::unique_ptr<TextEmbedder> make_text_embedder_from_env() {
  const char* url = std::getenv("PROVMIND_EMBED_URL");
  if (url && *url) {
    const char* token = std::getenv("PROVMIND_EMBED_TOKEN");
    return std::make_unique<EndpointEmbedder>(url, token ? token : "");
  }
  return std::make_unique<HashedNgramEmbedder>();
}

// Graph attention -------------------------------------------------------------------

namespace {

double symmetric_uniform(Rng& rng, double bound) { return (2.0 * rng.unit() - 1.0) * bound; }

}  // namespace

FrozenGraphAttention::FrozenGraphAttention(std::uint64_t seed, int dim, int rounds)
    : seed_(seed), rounds_(rounds), w_(dim, dim), a_src_(dim), a_dst_(dim) {
  Rng rng(derive_seed(seed, std::string_view("frozen-gat")));
  const double bound = std::sqrt(3.0 / static_cast<double>(dim));
  for (Eigen::Index c = 0; c < w_.cols(); ++c) {
    for (Eigen::Index r = 0; r < w_.rows(); ++r) w_(r, c) = symmetric_uniform(rng, bound);
  }
  for (Eigen::Index i = 0; i < dim; ++i) a_src_[i] = symmetric_uniform(rng, bound);
  for (Eigen::Index i = 0; i < dim; ++i) a_dst_[i] = symmetric_uniform(rng, bound);
}

Vector FrozenGraphAttention::embed(const ProcessGraph& g, const TextEmbedder& features) const {
  std::vector<std::string> ids;
  std::vector<std::string> labels;
  std::map<std::string, std::size_t> index;
  auto add = [&](const std::string& id, const std::string& label) {
    if (index.emplace(id, ids.size()).second) {
      ids.push_back(id);
      labels.push_back(label);
    }
  };
  for (const auto& e : g.material_entities) add(e.id, e.label);
  for (const auto& e : g.tool_entities) add(e.id, e.label);
  for (const auto& a : g.activities) add(a.id, a.label);
  const auto n = static_cast<Eigen::Index>(ids.size());
  if (n == 0) return Vector::Zero(w_.rows());

  const auto x = features.embed(labels);
  if (static_cast<Eigen::Index>(x.front().size()) != w_.cols()) {
    throw Error(ErrorCode::invalid_params, "node feature dimension does not match the projection");
  }
  Eigen::MatrixXd feat(w_.cols(), n);
  for (Eigen::Index i = 0; i < n; ++i) feat.col(i) = x[static_cast<std::size_t>(i)];
  Eigen::MatrixXd h = w_ * feat;

  std::vector<std::vector<std::size_t>> neighbours(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) neighbours[i].push_back(i);
  auto link = [&](const std::string& a, const std::string& b) {
    auto ia = index.find(a);
    auto ib = index.find(b);
    if (ia == index.end() || ib == index.end() || ia->second == ib->second) return;
    neighbours[ia->second].push_back(ib->second);
    neighbours[ib->second].push_back(ia->second);
  };
  for (const auto& u : g.usage_edges) link(u.entity, u.activity);
  for (const auto& e : g.generation_edges) link(e.activity, e.entity);

  for (int round = 0; round < rounds_; ++round) {
    const Vector src = h.transpose() * a_src_;
    const Vector dst = h.transpose() * a_dst_;
    Eigen::MatrixXd next = Eigen::MatrixXd::Zero(h.rows(), n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& nb = neighbours[static_cast<std::size_t>(i)];
      std::vector<double> logits;
      double peak = -std::numeric_limits<double>::infinity();
      for (std::size_t j : nb) {
        double e = src[i] + dst[static_cast<Eigen::Index>(j)];
        e = e > 0.0 ? e : 0.2 * e;
        logits.push_back(e);
        peak = std::max(peak, e);
      }
      double total = 0.0;
      for (auto& l : logits) total += (l = std::exp(l - peak));
      for (std::size_t t = 0; t < nb.size(); ++t) {
        next.col(i) += (logits[t] / total) * h.col(static_cast<Eigen::Index>(nb[t]));
      }
    }
    h = std::move(next);
  }
  Vector pooled = h.rowwise().mean();
  const double norm = pooled.norm();
  if (norm > 0.0) pooled /= norm;
  return pooled;
}

Vector FrozenGraphAttention::embed(const ProcessGraph& g) const {
  static const HashedNgramEmbedder builtin(static_cast<int>(w_.cols()));
  return embed(g, builtin);
}

}  // namespace provmind
