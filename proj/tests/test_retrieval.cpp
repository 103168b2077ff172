#include <gtest/gtest.h>

#include <algorithm>

#include "provmind/retrieval.hpp"
#include "provmind/synthetic.hpp"
#include "test_support.hpp"

using namespace provmind;

namespace {

const HashedNgramEmbedder& text() {
  static const HashedNgramEmbedder e;
  return e;
}

const FrozenGraphAttention& gat() {
  static const FrozenGraphAttention g(7);
  return g;
}

ProcessSummary summary(std::vector<std::string> route, std::vector<std::string> precursors) {
  ProcessSummary s;
  s.route = std::move(route);
  s.route_length = s.route.size();
  s.precursors = std::move(precursors);
  return s;
}

RetrievedPrecedent views(const std::string& id, double t, double s, double h) {
  RetrievedPrecedent r;
  r.graph_id = id;
  r.s_text = t;
  r.s_struct = s;
  r.s_heur = h;
  return r;
}

}  // namespace

TEST(Heuristic, HandValues) {
  const auto q = summary({"mill", "sinter"}, {"Li2CO3"});
  EXPECT_DOUBLE_EQ(score_heuristic(q, q), 1.0);
  const auto p = summary({"mill", "anneal"}, {"CoO"});
  EXPECT_NEAR(score_heuristic(q, p), (1.0 / 3.0 + 1.0 + 0.0) / 3.0, 1e-12);
  EXPECT_NEAR(score_heuristic(q, p), 0.444, 1e-3);
  const auto a = summary({"mix"}, {"x"});
  const auto b = summary({"dry", "press", "sinter", "anneal"}, {"y"});
  EXPECT_NEAR(score_heuristic(a, b), 0.25 / 3.0, 1e-12);
  EXPECT_NEAR(score_heuristic(a, b), 0.083, 1e-3);
  EXPECT_DOUBLE_EQ(score_heuristic(summary({}, {}), summary({}, {})), 1.0);
}

TEST(Fusion, ThreeProcessHandRanking) {
  std::vector<RetrievedPrecedent> v{views("p1", 0.9, 0.2, 0.5), views("p2", 0.5, 0.9, 0.6), views("p3", 0.4, 0.4, 1.0)};
  // 0.4 t + 0.3 s + 0.3 h
  const auto ranked = fuse_and_rank(v, {}, 8);
  ASSERT_EQ(ranked.size(), 3u);
  EXPECT_EQ(ranked[0].graph_id, "p2");
  EXPECT_NEAR(ranked[0].s_ret, 0.65, 1e-12);
  EXPECT_EQ(ranked[1].graph_id, "p3");
  EXPECT_NEAR(ranked[1].s_ret, 0.58, 1e-12);
  EXPECT_EQ(ranked[2].graph_id, "p1");
  EXPECT_NEAR(ranked[2].s_ret, 0.57, 1e-12);
  const auto text_only = fuse_and_rank(v, {1.0, 0.0, 0.0}, 1);
  ASSERT_EQ(text_only.size(), 1u);
  EXPECT_EQ(text_only[0].graph_id, "p1");
}

TEST(Fusion, TiesByGraphId) {
  std::vector<RetrievedPrecedent> v{views("b", 0.5, 0.5, 0.5), views("a", 0.5, 0.5, 0.5), views("c", 0.5, 0.5, 0.5)};
  const auto r = fuse_and_rank(v, {}, 2);
  EXPECT_EQ(r[0].graph_id, "a");
  EXPECT_EQ(r[1].graph_id, "b");
}

TEST(Fusion, RejectsBadWeightsAndK) {
  std::vector<RetrievedPrecedent> v{views("a", 0.1, 0.1, 0.1)};
  EXPECT_THROW(fuse_and_rank(v, {0.5, 0.5, 0.5}, 1), Error);
  EXPECT_THROW(fuse_and_rank(v, {-0.2, 0.6, 0.6}, 1), Error);
  EXPECT_THROW(fuse_and_rank(v, {}, 0), Error);
}

class RetrieveOnCorpus : public ::testing::Test {
 protected:
  void SetUp() override {
    SyntheticParams p;
    p.n_records = 40;
    corpus = generate_synthetic_corpus(p, 31);
    memory = build_memory(corpus, {}, text(), gat());
  }
  std::vector<ProcessGraph> corpus;
  ProcessMemory memory;
};

TEST_F(RetrieveOnCorpus, HeuristicSelfMatch) {
  for (std::size_t i = 0; i < corpus.size(); i += 5) {
    const auto q = make_query(summarize(corpus[i]), corpus[i], text(), gat());
    const auto top = retrieve(q, memory, {0.0, 0.0, 1.0}, 3);
    ASSERT_FALSE(top.empty());
    EXPECT_DOUBLE_EQ(top[0].s_ret, 1.0);
    // exact duplicates of the route and precursors can tie; the own graph must be among the 1.0 scores
    bool found = false;
    for (const auto& r : retrieve(q, memory, {0.0, 0.0, 1.0}, memory.processes.size())) {
      if (r.graph_id == corpus[i].record_id) found = r.s_ret == 1.0;
    }
    EXPECT_TRUE(found);
  }
}

TEST_F(RetrieveOnCorpus, CountAndRanges) {
  const auto q = make_query(summarize(corpus[0]), corpus[0], text(), gat());
  EXPECT_EQ(retrieve(q, memory, {}, 8).size(), std::min<std::size_t>(8, memory.processes.size()));
  EXPECT_EQ(retrieve(q, memory, {}, 1000).size(), memory.processes.size());
  for (const auto& r : retrieve(q, memory, {}, 1000)) {
    for (double v : {r.s_text, r.s_struct, r.s_heur, r.s_ret}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
  EXPECT_THROW(retrieve(q, memory, {}, 0), Error);
}

TEST_F(RetrieveOnCorpus, ViewsMatchDirectRecompute) {
  const auto q = make_query(summarize(corpus[3]), corpus[3], text(), gat());
  const auto all = score_views(q, memory);
  ASSERT_EQ(all.size(), memory.processes.size());
  for (const auto& r : all) {
    const auto& g = *std::find_if(corpus.begin(), corpus.end(), [&](const ProcessGraph& x) { return x.record_id == r.graph_id; });
    const Vector t = text().embed_text(linearize(summarize(g)));
    const Vector s = gat().embed(g);
    EXPECT_NEAR(r.s_text, (q.text.dot(t) / (q.text.norm() * t.norm()) + 1.0) / 2.0, 1e-12);
    EXPECT_NEAR(r.s_struct, (q.structure.dot(s) / (q.structure.norm() * s.norm()) + 1.0) / 2.0, 1e-12);
    EXPECT_DOUBLE_EQ(r.s_heur, score_heuristic(q.summary, summarize(g)));
  }
  // fused order equals a full sort by the weighted sum
  auto manual = all;
  for (auto& r : manual) r.s_ret = 0.4 * r.s_text + 0.3 * r.s_struct + 0.3 * r.s_heur;
  std::sort(manual.begin(), manual.end(), [](const auto& a, const auto& b) {
    return a.s_ret != b.s_ret ? a.s_ret > b.s_ret : a.graph_id < b.graph_id;
  });
  const auto fused = retrieve(q, memory, {}, 8);
  for (std::size_t i = 0; i < fused.size(); ++i) EXPECT_EQ(fused[i].graph_id, manual[i].graph_id);
}

TEST_F(RetrieveOnCorpus, QueryNeverSeesGold) {
  const auto bench = generate_benchmark(corpus, {}, 42);
  for (const auto& item : bench.items) {
    auto other = item;
    for (auto& o : other.options) o = "zz " + o;
    other.gold_index = (item.gold_index + 1) % static_cast<int>(item.options.size());
    EXPECT_EQ(query_summary(item), query_summary(other)) << item.item_id;
    EXPECT_EQ(query_graph(item), query_graph(other)) << item.item_id;
  }
}

TEST(Retrieve, EmptyMemory) {
  ProcessMemory m;
  RetrievalQuery q;
  try {
    retrieve(q, m, {}, 8);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::empty_memory);
  }
}
