#include <gtest/gtest.h>

#include <atomic>
#include <fstream>

#include "provmind/runner.hpp"
#include "provmind/splitter.hpp"
#include "provmind/synthetic.hpp"
#include "test_support.hpp"

using namespace provmind;
using nlohmann::json;

namespace {

using Rules = std::vector<std::pair<std::string, std::string>>;

const HashedNgramEmbedder& text() {
  static const HashedNgramEmbedder e;
  return e;
}

// Year split over a small synthetic corpus; memory from the train graphs.
struct World {
  std::vector<ProcessGraph> corpus;
  std::vector<BenchItem> train;
  std::vector<BenchItem> test;
  ProcessMemory memory;
  PreparedSet prepared;
  EvalResources resources;
};

const World& world() {
  static const World w = [] {
    World out;
    SyntheticParams p;
    p.n_records = 120;
    out.corpus = generate_synthetic_corpus(p, 42);
    const auto bench = generate_benchmark(out.corpus, {}, 42);
    const auto split = split_by_year(bench.items);
    out.train = items_in(bench.items, split, Partition::train);
    out.test = items_in(bench.items, split, Partition::test);
    std::set<std::string> train_graphs;
    for (const auto& it : out.train) train_graphs.insert(it.graph_id);
    std::vector<ProcessGraph> graphs;
    for (const auto& g : out.corpus) {
      if (train_graphs.count(g.record_id)) graphs.push_back(g);
    }
    const FrozenGraphAttention gat(7);
    out.memory = build_memory(graphs, {}, text(), gat, 4);
    out.memory.split_id = "year";
    out.prepared = prepare_items(out.test, out.memory, text(), gat, 4);
    out.resources.text = &text();
    out.resources.train_items = out.train;
    out.resources.jobs = 4;
    out.resources.split_id = "year";
    return out;
  }();
  return w;
}

PolicyConfig policy(Policy p) {
  PolicyConfig c;
  c.policy = p;
  return c;
}

BenchItem small_item() {
  BenchItem it;
  it.item_id = "q";
  it.task = TaskKind::A3_next_activity;
  it.question = {{"prefix", {"mill"}}, {"precursors", {"x"}}};
  it.options = {"sinter", "anneal", "press", "dry"};
  it.gold_index = 2;
  return it;
}

OptionScores scores_with_raw_sym(std::vector<double> sym) {
  OptionScores s;
  s.item_id = "q";
  for (double v : sym) {
    OptionScore o;
    o.raw_sym = v;
    o.raw_neu = 1.0 - v;
    s.options.push_back(o);
  }
  return fuse_scores(s, s, 0.5);
}

class CountingClient : public ChatClient {
 public:
  explicit CountingClient(std::string reply) : reply_(std::move(reply)) {}
  ChatResponse complete(const ChatRequest& r) const override {
    ++calls;
    last_budget = r.max_new_tokens;
    if (reply_ == "timeout") throw Error(ErrorCode::client_timeout, "t");
    return {reply_, "stop"};
  }
  std::string name() const override { return "counting"; }
  mutable std::atomic<int> calls{0};
  mutable std::atomic<int> last_budget{0};

 private:
  std::string reply_;
};

}  // namespace

TEST(Argmax, Examples) {
  EXPECT_EQ(answer_argmax(std::vector<double>{0.1, 0.9, 0.3, 0.2}), 1);
  EXPECT_EQ(answer_argmax(std::vector<double>{0.5, 0.5, 0.5, 0.5}), 0);
  EXPECT_EQ(answer_argmax(std::vector<double>{}), -1);
  Rng rng(8);
  for (int t = 0; t < 500; ++t) {
    std::vector<double> v(1 + rng.index(6));
    for (auto& x : v) x = static_cast<double>(rng.index(4));
    int best = 0;
    for (std::size_t i = 1; i < v.size(); ++i) {
      if (v[i] > v[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
    }
    EXPECT_EQ(answer_argmax(v), best);
  }
}

TEST(Parse, AnswerLetters) {
  EXPECT_EQ(parse_answer("Answer: B", 4), 1);
  EXPECT_EQ(parse_answer("I think (C) fits", 4), 2);
  EXPECT_EQ(parse_answer("no option letter here", 4), -1);
  EXPECT_EQ(parse_answer("Answer: E", 4), -1);
  EXPECT_EQ(parse_answer("BAD", 4), -1);
}

TEST(Prompts, ZeroShotHasQuestionOnly) {
  const auto item = small_item();
  const auto msgs = build_prompt(item, PromptMode::zero_shot, {});
  ASSERT_EQ(msgs.size(), 2u);
  const auto& user = msgs[1].text;
  EXPECT_NE(user.find(render_question(item)), std::string::npos);
  EXPECT_NE(user.find("(D) dry"), std::string::npos);
  EXPECT_EQ(user.find("Example"), std::string::npos);
  EXPECT_EQ(user.find("compatibility"), std::string::npos);
  EXPECT_EQ(user.find("precedent"), std::string::npos);
}

TEST(Prompts, FewShotNeedsThreeExemplars) {
  const auto item = small_item();
  PromptContext ctx;
  ctx.exemplars = {&item, &item};
  try {
    build_prompt(item, PromptMode::few_shot, ctx);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::missing_context);
  }
  ctx.exemplars.push_back(&item);
  const auto user = build_prompt(item, PromptMode::few_shot, ctx)[1].text;
  EXPECT_NE(user.find("Example 3:"), std::string::npos);
  EXPECT_EQ(user.find("Example 4:"), std::string::npos);
  EXPECT_THROW(build_prompt(item, PromptMode::rag, {}), Error);
  EXPECT_THROW(build_prompt(item, PromptMode::graphrag, {}), Error);
  EXPECT_THROW(build_prompt(item, PromptMode::plan, {}), Error);
}

TEST(Prompts, AnswerEmbedsPlanVerbatim) {
  const auto& w = world();
  const auto& item = w.test.front();
  PromptContext ctx;
  ctx.memory = &w.memory;
  ctx.precedents = fuse_and_rank(w.prepared.prepared.front().views, {}, 8);
  const auto sym = score_options_symbolic(item, ctx.precedents, w.memory);
  const auto neu = score_options_neural(item, ctx.precedents, w.memory, text());
  const auto fused = fuse_scores(sym, neu, 0.5);
  ctx.scores = &fused;
  const MockChatClient mock;
  const auto plan_msgs = build_prompt(item, PromptMode::plan, ctx);
  const std::string plan = mock.complete({plan_msgs, 96, 0.0}).text;
  ASSERT_FALSE(plan.empty());
  ctx.plan = plan;
  const auto answer = build_prompt(item, PromptMode::answer, ctx)[1].text;
  EXPECT_NE(answer.find(plan), std::string::npos);
  const std::string best(1, option_letter(static_cast<std::size_t>(answer_argmax(fused))));
  EXPECT_NE(answer.find("Highest compatibility option: (" + best + ")"), std::string::npos);
}

TEST(Mock, RulesAndDirectives) {
  MockChatClient mock(Rules{{"say (\\w+)", "Answer: $1"}, {"slow", "$TIMEOUT"}, {"quiet", "$EMPTY"}});
  EXPECT_EQ(mock.complete({{{"user", "please say B"}}, 16, 0}).text, "Answer: B");
  EXPECT_EQ(mock.complete({{{"user", "quiet"}}, 16, 0}).text, "");
  try {
    mock.complete({{{"user", "slow"}}, 16, 0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::client_timeout);
  }
  EXPECT_THROW(MockChatClient(Rules{{"(", "x"}}), Error);
  const auto from = MockChatClient::from_json(json::array({{{"pattern", "x"}, {"response", "Answer: A"}}}));
  EXPECT_EQ(from.complete({{{"user", "x"}}, 16, 0}).text, "Answer: A");
}

TEST(Mock, HashLetterDeterministicAndInRange) {
  const MockChatClient mock;
  const auto item = small_item();
  const auto msgs = build_prompt(item, PromptMode::zero_shot, {});
  const auto a = mock.complete({msgs, 16, 0}).text;
  EXPECT_EQ(a, mock.complete({msgs, 16, 0}).text);
  const int idx = parse_answer(a, 4);
  EXPECT_GE(idx, 0);
  EXPECT_LT(idx, 4);
}

TEST(Llm, ParsedAnswer) {
  const auto item = small_item();
  const auto scores = scores_with_raw_sym({0.1, 0.9, 0.2, 0.3});
  PromptContext ctx;
  ProcessMemory empty;
  ctx.memory = &empty;
  MockChatClient mock(Rules{{"[\\s\\S]", "Answer: B"}});
  const auto out = llm_answer(item, ctx, scores, mock, policy(Policy::provmind_llm));
  EXPECT_EQ(out.answer, 1);
  EXPECT_FALSE(out.fallback);
  ASSERT_EQ(out.exchanges.size(), 2u);
  EXPECT_EQ(out.exchanges[0]["request"]["max_new_tokens"], 96);
  EXPECT_EQ(out.exchanges[1]["request"]["max_new_tokens"], 48);
  EXPECT_EQ(out.plan, "Answer: B");
}

TEST(Llm, FallbackOnFreeText) {
  const auto item = small_item();
  const auto scores = scores_with_raw_sym({0.1, 0.2, 0.9, 0.3});
  PromptContext ctx;
  ProcessMemory empty;
  ctx.memory = &empty;
  MockChatClient mock(Rules{{"[\\s\\S]", "it depends on the furnace"}});
  auto cfg = policy(Policy::provmind_llm);
  const auto out = llm_answer(item, ctx, scores, mock, cfg);
  EXPECT_TRUE(out.fallback);
  EXPECT_EQ(out.answer, 2);
  EXPECT_EQ(out.fallback_reason, "unparseable response");
  cfg.fallback = false;
  const auto none = llm_answer(item, ctx, scores, mock, cfg);
  EXPECT_EQ(none.answer, -1);
  EXPECT_FALSE(none.fallback);
  cfg.fallback = true;
  cfg.symbolic_scoring = false;
  // raw_neu = 1 - raw_sym, so the neural argmax is option 0
  EXPECT_EQ(llm_answer(item, ctx, scores, mock, cfg).answer, 0);
}

TEST(Llm, TimeoutRetriesThenFallsBack) {
  const auto item = small_item();
  const auto scores = scores_with_raw_sym({0.9, 0.2, 0.1, 0.3});
  PromptContext ctx;
  ProcessMemory empty;
  ctx.memory = &empty;
  CountingClient client("timeout");
  auto cfg = policy(Policy::provmind_llm);
  cfg.planning = false;
  cfg.retries = 2;
  const auto out = llm_answer(item, ctx, scores, client, cfg);
  EXPECT_EQ(client.calls.load(), 3);
  EXPECT_TRUE(out.fallback);
  EXPECT_EQ(out.fallback_reason, "client timeout");
  EXPECT_EQ(out.answer, 0);
}

TEST(Evaluate, OracleAndUniform) {
  const auto& w = world();
  const auto oracle = evaluate(w.prepared, w.memory, policy(Policy::oracle), nullptr, w.resources);
  EXPECT_EQ(oracle.overall.correct, w.test.size());
  EXPECT_DOUBLE_EQ(oracle.overall.accuracy(), 1.0);
  const auto uni = evaluate(w.prepared, w.memory, policy(Policy::uniform_random), nullptr, w.resources);
  EXPECT_NEAR(uni.overall.accuracy(), 0.25, 0.06);
  std::size_t per_task = 0;
  for (const auto& [t, tally] : uni.per_task) per_task += tally.total;
  EXPECT_EQ(per_task, w.test.size());
}

TEST(Evaluate, DeterministicAcrossJobs) {
  const auto& w = world();
  auto r1 = w.resources;
  r1.jobs = 1;
  const auto a = evaluate(w.prepared, w.memory, policy(Policy::argmax_hybrid), nullptr, r1);
  const auto b = evaluate(w.prepared, w.memory, policy(Policy::argmax_hybrid), nullptr, w.resources);
  ASSERT_EQ(a.items.size(), b.items.size());
  for (std::size_t i = 0; i < a.items.size(); ++i) EXPECT_EQ(a.items[i].to_json(), b.items[i].to_json());
  EXPECT_EQ(a.to_json().dump(), b.to_json().dump());
}

TEST(Evaluate, SymbolicBeatsUniformAndIsHygienic) {
  const auto& w = world();
  const auto sym = evaluate(w.prepared, w.memory, policy(Policy::argmax_symbolic), nullptr, w.resources);
  const auto uni = evaluate(w.prepared, w.memory, policy(Policy::uniform_random), nullptr, w.resources);
  EXPECT_GT(sym.overall.accuracy(), uni.overall.accuracy() + 0.1);
  EXPECT_EQ(sym.self_precedents, 0u);
  EXPECT_EQ(sym.flagged, 0u);
  std::set<std::string> test_graphs;
  for (const auto& it : w.test) test_graphs.insert(it.graph_id);
  for (const auto& log : sym.items) {
    EXPECT_EQ(log.precedents.size(), 8u);
    for (const auto& p : log.precedents) EXPECT_FALSE(test_graphs.count(p));
  }
}

TEST(Evaluate, LambdaOneLlmEqualsSymbolicArgmax) {
  const auto& w = world();
  const MockChatClient mock;
  auto cfg = policy(Policy::provmind_llm);
  cfg.lambda = 1.0;
  const auto llm = evaluate(w.prepared, w.memory, cfg, &mock, w.resources);
  const auto sym = evaluate(w.prepared, w.memory, policy(Policy::argmax_symbolic), nullptr, w.resources);
  for (std::size_t i = 0; i < llm.items.size(); ++i) EXPECT_EQ(llm.items[i].answer, sym.items[i].answer);
  EXPECT_EQ(llm.fallbacks, 0u);
}

TEST(Evaluate, BaselinesWithMock) {
  const auto& w = world();
  const MockChatClient mock;
  for (auto p : {Policy::zero_shot, Policy::few_shot, Policy::rag, Policy::graphrag}) {
    const auto r = evaluate(w.prepared, w.memory, policy(p), &mock, w.resources);
    EXPECT_EQ(r.flagged, 0u) << to_string(p);
    EXPECT_EQ(r.overall.total, w.test.size());
  }
  const auto fs = evaluate(w.prepared, w.memory, policy(Policy::few_shot), &mock, w.resources);
  std::map<std::string, const BenchItem*> train;
  for (const auto& t : w.train) train[t.item_id] = &t;
  for (std::size_t i = 0; i < fs.items.size(); ++i) {
    ASSERT_EQ(fs.items[i].exemplars.size(), 3u);
    for (const auto& id : fs.items[i].exemplars) {
      ASSERT_TRUE(train.count(id));
      EXPECT_EQ(train[id]->task, w.test[i].task);
    }
  }
  EXPECT_THROW(evaluate(w.prepared, w.memory, policy(Policy::zero_shot), nullptr, w.resources), Error);
}

TEST(External, ScoringContract) {
  const auto& w = world();
  std::vector<BenchItem> items(w.test.begin(), w.test.begin() + 100);
  std::map<std::string, int> gold;
  for (const auto& it : items) gold[it.item_id] = it.gold_index;
  EXPECT_DOUBLE_EQ(score_external_predictions(items, gold).overall.accuracy(), 1.0);

  auto partial = gold;
  for (std::size_t i = 0; i < 10; ++i) partial.erase(items[i].item_id);
  const auto r = score_external_predictions(items, partial);
  EXPECT_EQ(r.overall.total, 100u);
  EXPECT_EQ(r.overall.correct, 90u);
  EXPECT_EQ(r.flagged, 10u);

  auto extra = gold;
  extra["nobody"] = 0;
  try {
    score_external_predictions(items, extra);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::unknown_item_id);
  }

  // gold shifted by a seeded random offset: about a quarter correct
  std::map<std::string, int> shuffled;
  Rng rng(4);
  for (const auto& it : w.test) shuffled[it.item_id] = static_cast<int>(rng.index(4));
  EXPECT_NEAR(score_external_predictions(w.test, shuffled).overall.accuracy(), 0.25, 0.06);
}

TEST(External, ReadFormats) {
  testsupport::TempDir dir("pred");
  std::ofstream(dir.file("a.json")) << R"({"x": 2, "y": "B"})";
  EXPECT_EQ(read_predictions(dir.file("a.json")), (std::map<std::string, int>{{"x", 2}, {"y", 1}}));
  std::ofstream(dir.file("b.json")) << R"([{"item_id": "x", "answer": "C"}])";
  EXPECT_EQ(read_predictions(dir.file("b.json")), (std::map<std::string, int>{{"x", 2}}));
  std::ofstream(dir.file("c.jsonl")) << "{\"format\": \"predictions\", \"version\": 1}\n{\"item_id\": \"z\", \"answer\": 0}\n";
  EXPECT_EQ(read_predictions(dir.file("c.jsonl")), (std::map<std::string, int>{{"z", 0}}));
}

TEST(Ablation, DefaultGridShape) {
  const auto rows = default_ablation_grid(policy(Policy::provmind_llm));
  std::map<std::string, int> groups;
  for (const auto& r : rows) ++groups[r.group];
  EXPECT_EQ(groups["Modules"], 4);
  EXPECT_EQ(groups["Scoring"], 5);
  EXPECT_EQ(groups["Retrieval"], 7);
  EXPECT_EQ(groups["Fusion"], 4);
  EXPECT_EQ(groups["Top-k"], 5);
  std::set<double> lambdas;
  for (const auto& r : rows) {
    if (r.group == "Scoring") lambdas.insert(r.config.lambda);
  }
  EXPECT_EQ(lambdas, (std::set<double>{0.0, 0.3, 0.5, 0.7, 1.0}));
  EXPECT_THROW(default_ablation_grid(policy(Policy::provmind_llm), {"bogus"}), Error);
}

TEST(Ablation, JsonGrids) {
  const auto base = policy(Policy::argmax_hybrid);
  EXPECT_EQ(ablation_grid_from_json(json{{"k", {1, 2, 4, 8, 16}}}, base).size(), 5u);
  EXPECT_EQ(ablation_grid_from_json(
                json{{"views", {"text", "structure", "heuristic", "text+structure", "text+heuristic",
                                "structure+heuristic", "full"}}},
                base)
                .size(),
            7u);
  EXPECT_EQ(ablation_grid_from_json(json{{"lambda", {0.0, 1.0}}, {"k", {4, 8}}}, base).size(), 4u);
  try {
    ablation_grid_from_json(json{{"temperature", {0.1}}}, base);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::invalid_grid_axis);
  }
  const auto s = view_subset_weights("text+heuristic");
  EXPECT_NEAR(s.alpha, 0.4 / 0.7, 1e-12);
  EXPECT_DOUBLE_EQ(s.beta, 0.0);
  EXPECT_NEAR(s.gamma, 0.3 / 0.7, 1e-12);
  EXPECT_EQ(fusion_preset("default"), RetrievalWeights{});
}

TEST(Ablation, RunAndRoundTrip) {
  const auto& w = world();
  const MockChatClient mock;
  const auto rows = ablation_grid_from_json(json{{"k", {1, 8}}}, policy(Policy::argmax_hybrid));
  const auto result = run_ablation(rows, w.prepared, w.memory, &mock, w.resources);
  ASSERT_EQ(result.reports.size(), 2u);
  const auto back = ablation_from_json(result.to_json());
  EXPECT_EQ(back.to_text(), result.to_text());
  EXPECT_NE(result.to_text().find("Correct / Total"), std::string::npos);
}

TEST(PolicyConfigTest, JsonAndValidation) {
  auto c = policy(Policy::rag);
  c.lambda = 0.7;
  c.k = 4;
  const auto back = PolicyConfig::from_json(c.to_json());
  EXPECT_EQ(back.to_json(), c.to_json());
  c.lambda = 2.0;
  EXPECT_THROW(c.validate(), Error);
  EXPECT_THROW(policy_from_string("magic"), Error);
  for (auto p : {Policy::argmax_symbolic, Policy::graphrag, Policy::oracle}) EXPECT_EQ(policy_from_string(to_string(p)), p);
  auto off = policy(Policy::provmind_llm);
  off.symbolic_scoring = false;
  EXPECT_DOUBLE_EQ(off.effective_lambda(), 0.0);
}

TEST(Report, TextAndJson) {
  const auto& w = world();
  const auto r = evaluate(w.prepared, w.memory, policy(Policy::oracle), nullptr, w.resources);
  const auto text_table = r.to_text();
  EXPECT_NE(text_table.find("Overall"), std::string::npos);
  EXPECT_NE(text_table.find("100.00"), std::string::npos);
  EXPECT_FALSE(r.to_json(false).contains("wall_clock_seconds"));
  const auto back = eval_report_from_json(r.to_json());
  EXPECT_EQ(back.overall.correct, r.overall.correct);
  EXPECT_EQ(back.per_task.size(), r.per_task.size());
}
