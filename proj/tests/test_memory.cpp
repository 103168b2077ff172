#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "provmind/embedding.hpp"
#include "provmind/memory.hpp"
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

ProcessMemory toy_memory() {
  const std::vector<ProcessGraph> graphs{testsupport::chain("r1", {"mill", "sinter"}),
                                         testsupport::chain("r2", {"mill", "anneal"})};
  return build_memory(graphs, {}, text(), gat());
}

std::vector<ProcessGraph> synthetic(std::size_t n, std::uint64_t seed) {
  SyntheticParams p;
  p.n_records = n;
  return generate_synthetic_corpus(p, seed);
}

StepEntry entry(const std::string& gid, const std::string& label, std::optional<std::string> prev,
                std::optional<std::string> next, double pos, std::vector<std::string> forms) {
  StepEntry e;
  e.graph_id = gid;
  e.label = label;
  e.previous = std::move(prev);
  e.next = std::move(next);
  e.normalized_position = pos;
  e.input_forms = std::move(forms);
  return e;
}

}  // namespace

TEST(Build, ToyCounts) {
  const auto m = toy_memory();
  EXPECT_EQ(m.transition_table.at({"mill", "sinter"}), 1u);
  EXPECT_EQ(m.transition_table.at({"mill", "anneal"}), 1u);
  EXPECT_EQ(m.prefix_index.at({"mill"}), (CountMap{{"sinter", 1}, {"anneal", 1}}));
  EXPECT_EQ(m.step_library.size(), 4u);
  EXPECT_EQ(m.vocabulary(), (std::set<std::string>{"anneal", "mill", "sinter"}));
  EXPECT_EQ(m.text_embedder, text().name());
}

TEST(Build, EmptyAndForeignGraphs) {
  try {
    build_memory(std::vector<ProcessGraph>{}, {}, text(), gat());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::empty_train_set);
  }
  const std::vector<ProcessGraph> graphs{testsupport::chain("r1", {"mill"})};
  const std::set<std::string> allowed{"other"};
  EXPECT_THROW(build_memory(graphs, {}, text(), gat(), 1, &allowed), Error);
}

TEST(Build, CountsConservedOnSyntheticCorpus) {
  const auto corpus = synthetic(80, 21);
  const auto m = build_memory(corpus, {}, text(), gat(), 4);
  std::size_t steps = 0, pairs = 0;
  std::map<Transition, std::size_t> recount;
  std::map<std::vector<std::string>, CountMap> windows;
  for (const auto& g : corpus) {
    const auto r = g.ordered_activity_labels();
    steps += r.size();
    pairs += r.size() - 1;
    for (std::size_t i = 0; i + 1 < r.size(); ++i) {
      ++recount[{r[i], r[i + 1]}];
      for (std::size_t len = 1; len <= 4 && len <= i + 1; ++len) {
        ++windows[std::vector<std::string>(r.begin() + static_cast<long>(i + 1 - len), r.begin() + static_cast<long>(i + 1))][r[i + 1]];
      }
    }
  }
  EXPECT_EQ(m.step_library.size(), steps);
  std::size_t total = 0;
  for (const auto& [k, v] : m.transition_table) total += v;
  EXPECT_EQ(total, pairs);
  EXPECT_EQ(m.transition_table, recount);
  EXPECT_EQ(m.prefix_index, windows);
  // every referenced graph id is one of the training graphs
  std::set<std::string> ids;
  for (const auto& g : corpus) ids.insert(g.record_id);
  for (const auto& s : m.step_library) EXPECT_TRUE(ids.count(s.graph_id));
  for (const auto& [gid, _] : m.embedding_store) EXPECT_TRUE(ids.count(gid));
  EXPECT_EQ(m.graph_ids(), ids);
}

TEST(Build, SameResultForAnyJobCount) {
  const auto corpus = synthetic(40, 2);
  const auto a = build_memory(corpus, {}, text(), gat(), 1);
  const auto b = build_memory(corpus, {}, text(), gat(), 8);
  EXPECT_EQ(to_json(a).dump(), to_json(b).dump());
}

TEST(Next, ExactSuffixAndUniform) {
  const auto m = toy_memory();
  auto d = next_distribution(m, {"mill"});
  EXPECT_EQ(d.backoff, Backoff::exact);
  EXPECT_DOUBLE_EQ(d.probabilities.at("sinter"), 0.5);
  EXPECT_DOUBLE_EQ(d.probabilities.at("anneal"), 0.5);

  const auto s = next_distribution(m, {"grind", "mill"});
  EXPECT_EQ(s.backoff, Backoff::suffix);
  EXPECT_EQ(s.matched_length, 1u);
  EXPECT_EQ(s.probabilities, d.probabilities);

  const auto u = next_distribution(m, {"sinter"});
  EXPECT_EQ(u.backoff, Backoff::unigram);

  ProcessMemory lone = build_memory(std::vector<ProcessGraph>{testsupport::chain("x", {"mill"})}, {}, text(), gat());
  const auto f = next_distribution(lone, {"zzz"});
  EXPECT_EQ(f.backoff, Backoff::uniform);
  EXPECT_DOUBLE_EQ(f.probabilities.at("mill"), 1.0);
}

TEST(Next, SumsToOne) {
  const auto corpus = synthetic(60, 5);
  const auto m = build_memory(corpus, {}, text(), gat());
  for (const auto& g : corpus) {
    const auto r = g.ordered_activity_labels();
    for (std::size_t len = 0; len <= r.size(); ++len) {
      const auto d = next_distribution(m, std::vector<std::string>(r.begin(), r.begin() + static_cast<long>(len)));
      double sum = 0.0;
      for (const auto& [k, p] : d.probabilities) sum += p;
      EXPECT_NEAR(sum, 1.0, 1e-9);
    }
  }
}

TEST(Steps, SelfMatchFirst) {
  const auto corpus = synthetic(30, 4);
  const auto m = build_memory(corpus, {}, text(), gat());
  const StepWeights w;
  for (std::size_t i = 0; i < m.step_library.size(); i += 11) {
    const auto& e = m.step_library[i];
    const auto q = StepQuery::from_entry(e);
    const auto top = match_steps(m, q, 5, w);
    ASSERT_FALSE(top.empty());
    EXPECT_DOUBLE_EQ(top[0].score, step_compatibility(q, e, w));
    const double max = w.label + (q.previous || q.next ? w.neighbours : 0.0) + w.position +
                       (q.input_forms.empty() ? 0.0 : w.forms);
    EXPECT_NEAR(top[0].score, max, 1e-12);
  }
}

TEST(Steps, LabelDominates) {
  const auto m = build_memory(synthetic(40, 6), {}, text(), gat());
  StepQuery q;
  q.label = "sinter";
  const auto ranked = match_steps(m, q, m.step_library.size(), {});
  bool seen_other = false;
  for (const auto& s : ranked) {
    if (s.entry->label != "sinter") seen_other = true;
    else EXPECT_FALSE(seen_other);
  }
}

TEST(Steps, HandBuiltLibrary) {
  ProcessMemory m;
  m.step_library = {entry("g1", "sinter", "press", "anneal", 0.5, {"pellet"}),
                    entry("g2", "sinter", "mix", std::nullopt, 1.0, {"powder"}),
                    entry("g3", "anneal", "press", "quench", 0.5, {"pellet"}),
                    entry("g4", "press", "mix", "sinter", 0.25, {"powder"}),
                    entry("g5", "sinter", "press", "quench", 0.75, {"pellet", "powder"})};
  StepQuery q;
  q.label = "sinter";
  q.previous = "press";
  q.next = "anneal";
  q.normalized_position = 0.5;
  q.input_forms = {"pellet"};
  // label 1, neighbours 0.5 * jaccard, position 0.25 * (1 - |dp|), forms 0.25 * jaccard
  const std::map<std::string, double> expected{
      {"g1", 1.0 + 0.5 * 1.0 + 0.25 * 1.0 + 0.25 * 1.0},
      {"g2", 1.0 + 0.5 * 0.0 + 0.25 * 0.5 + 0.25 * 0.0},
      {"g3", 0.0 + 0.5 * (1.0 / 3.0) + 0.25 * 1.0 + 0.25 * 1.0},
      {"g4", 0.0 + 0.5 * 0.0 + 0.25 * 0.75 + 0.25 * 0.0},
      {"g5", 1.0 + 0.5 * (1.0 / 3.0) + 0.25 * 0.75 + 0.25 * 0.5}};
  const auto ranked = match_steps(m, q, 5, {});
  ASSERT_EQ(ranked.size(), 5u);
  const std::vector<std::string> order{"g1", "g5", "g2", "g3", "g4"};
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(ranked[i].entry->graph_id, order[i]);
    EXPECT_NEAR(ranked[i].score, expected.at(ranked[i].entry->graph_id), 1e-12);
  }
  EXPECT_EQ(match_steps(m, q, 2, {}).size(), 2u);
  EXPECT_THROW(match_steps(m, StepQuery{}, 2, {}), Error);
  ProcessMemory empty;
  try {
    match_steps(empty, q, 2, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::empty_library);
  }
}

TEST(Summary, LinearizeFormat) {
  auto g = testsupport::chain("s", {"mix", "sinter"});
  g.activities[1].conditions = {{"temperature", "900 °C"}, {"atmosphere", "air"}};
  const auto s = summarize(g);
  EXPECT_EQ(s.route, (std::vector<std::string>{"mix", "sinter"}));
  EXPECT_EQ(s.route_length, 2u);
  EXPECT_EQ(linearize(s), "precursors: precursor s | route: mix -> sinter(atmosphere=air; temperature=900 °C) | "
                          "products: product s | tools: ");
}

TEST(Files, MemoryRoundTrip) {
  testsupport::TempDir dir("mem");
  const auto m = build_memory(synthetic(20, 3), {}, text(), gat());
  save_memory(dir.file("m.json"), m, nlohmann::json::object());
  const auto back = load_memory(dir.file("m.json"));
  EXPECT_EQ(to_json(back).dump(), to_json(m).dump());
}

TEST(Embedding, TextUnitNormAndDeterministic) {
  const auto corpus = synthetic(25, 9);
  for (const auto& g : corpus) {
    const auto t = linearize(summarize(g));
    const Vector a = text().embed_text(t);
    const Vector b = HashedNgramEmbedder().embed_text(t);
    EXPECT_NEAR(a.norm(), 1.0, 1e-9);
    EXPECT_EQ(a, b);
    EXPECT_NEAR(cosine_similarity(a, b), 1.0, 1e-12);
    const Vector s = gat().embed(g);
    EXPECT_NEAR(s.norm(), 1.0, 1e-9);
    EXPECT_EQ(s, FrozenGraphAttention(7).embed(g));
  }
}

TEST(Embedding, SingleNodeIsProjectedFeature) {
  ProcessGraph g;
  g.activities = {{"a", "sinter", {}, 0}};
  Vector expected = gat().projection() * text().embed_text("sinter");
  expected /= expected.norm();
  EXPECT_LT((gat().embed(g) - expected).norm(), 1e-12);
}

TEST(Embedding, RelabelledIsomorphicGraph) {
  auto g = testsupport::chain("iso", {"mix", "dry", "sinter"});
  ProcessGraph h = g;
  auto rename = [](const std::string& id) { return "z" + id; };
  for (auto& e : h.material_entities) e.id = rename(e.id);
  for (auto& a : h.activities) a.id = rename(a.id);
  for (auto& u : h.usage_edges) u = {rename(u.entity), rename(u.activity)};
  for (auto& x : h.generation_edges) x = {rename(x.activity), rename(x.entity)};
  std::reverse(h.material_entities.begin(), h.material_entities.end());
  std::reverse(h.activities.begin(), h.activities.end());
  EXPECT_LT((gat().embed(g) - gat().embed(h)).norm(), 1e-9);
}

TEST(Embedding, SeedChangesProjection) {
  EXPECT_NE(FrozenGraphAttention(7).projection(), FrozenGraphAttention(8).projection());
  EXPECT_DOUBLE_EQ(cosine_to_unit(-1.0), 0.0);
  EXPECT_DOUBLE_EQ(cosine_to_unit(1.0), 1.0);
  EXPECT_DOUBLE_EQ(cosine_similarity(Vector::Zero(3), Vector::Ones(3)), 0.0);
}
