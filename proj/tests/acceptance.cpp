// Acceptance checks on synthetic data. One PASS/FAIL line per criterion;
// exits nonzero if any line fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "oracles.hpp"
#include "provmind/chat.hpp"
#include "provmind/cli.hpp"
#include "provmind/io.hpp"
#include "provmind/memory.hpp"
#include "provmind/retrieval.hpp"
#include "provmind/runner.hpp"
#include "provmind/splitter.hpp"
#include "provmind/synthetic.hpp"
#include "provmind/taskgen.hpp"
#include "test_support.hpp"

using namespace provmind;
using nlohmann::json;

namespace {

int failures = 0;

void line(const std::string& id, bool ok, const std::string& detail) {
  std::printf("%s %-4s %s\n", ok ? "PASS" : "FAIL", id.c_str(), detail.c_str());
  std::fflush(stdout);
  failures += ok ? 0 : 1;
}

std::string pct(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f%%", 100.0 * fraction);
  return buf;
}

PolicyConfig policy(Policy p) {
  PolicyConfig c;
  c.policy = p;
  return c;
}

// --- criterion 4 -----------------------------------------------------------------

struct Synthetic {
  std::vector<ProcessGraph> corpus;
  std::size_t bench_items = 0;
  std::vector<BenchItem> train;
  ProcessMemory memory;
  PreparedSet prepared;
  EvalResources resources;
};

const HashedNgramEmbedder& text() {
  static const HashedNgramEmbedder e;
  return e;
}

Synthetic build_synthetic(std::size_t records, std::uint64_t seed, std::size_t jobs) {
  Synthetic s;
  SyntheticParams p;
  p.n_records = records;
  s.corpus = generate_synthetic_corpus(p, seed);
  const auto bench = generate_benchmark(s.corpus, {}, seed, jobs);
  s.bench_items = bench.items.size();
  const auto split = split_by_year(bench.items);
  s.train = items_in(bench.items, split, Partition::train);
  const auto test = items_in(bench.items, split, Partition::test);
  std::set<std::string> ids;
  for (const auto& it : s.train) ids.insert(it.graph_id);
  std::vector<ProcessGraph> graphs;
  for (const auto& g : s.corpus)
    if (ids.count(g.record_id)) graphs.push_back(g);
  const FrozenGraphAttention gat(MemoryConfig{}.structure_seed);
  s.memory = build_memory(graphs, {}, text(), gat, jobs, &ids);
  s.memory.split_id = "year";
  s.prepared = prepare_items(test, s.memory, text(), gat, jobs);
  s.resources.text = &text();
  s.resources.train_items = s.train;
  s.resources.jobs = jobs;
  s.resources.split_id = "year:test";
  return s;
}

void criterion4(const Synthetic& s, double build_seconds) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto uni = evaluate(s.prepared, s.memory, policy(Policy::uniform_random), nullptr, s.resources);
  const auto orc = evaluate(s.prepared, s.memory, policy(Policy::oracle), nullptr, s.resources);
  const auto sym = evaluate(s.prepared, s.memory, policy(Policy::argmax_symbolic), nullptr, s.resources);
  PolicyConfig flat = policy(Policy::argmax_symbolic);
  flat.symbolic.uniform_transitions = true;
  const auto flat_r = evaluate(s.prepared, s.memory, flat, nullptr, s.resources);
  const double seconds =
      build_seconds + std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const std::size_t n = s.prepared.items.size();
  const std::string scale = std::to_string(s.corpus.size()) + " graphs, " + std::to_string(s.bench_items) +
                            " items, " + std::to_string(n) + " evaluated";
  const bool shape = s.corpus.size() >= 200 && s.bench_items >= 2000;
  line("4", shape && seconds < 300.0, "synthetic corpus " + scale + ", K=4, " + std::to_string(seconds).substr(0, 5) + " s");
  const double u = uni.overall.accuracy();
  line("4a", std::abs(u - 0.25) <= 0.03, "uniform_random " + pct(u) + " (25% +/- 3)");
  line("4b", orc.overall.correct == orc.overall.total && orc.overall.total == n, "oracle " + pct(orc.overall.accuracy()));
  const double a = sym.overall.accuracy();
  line("4c", a >= u + 0.20, "argmax_symbolic " + pct(a) + " vs uniform_random " + pct(u) + " (need +20 points)");
  line("4d", sym.overall.correct > flat_r.overall.correct,
       "argmax_symbolic " + pct(a) + " vs uniform transitions " + pct(flat_r.overall.accuracy()));
}

// --- criterion 5 -------------------------------------------------------------------

// Gold straight from the graph, per task.
bool gold_from_graph(const BenchItem& it, const ProcessGraph& g, std::string& why) {
  const auto route = g.ordered_activity_labels();
  const std::string gold = it.options.at(static_cast<std::size_t>(it.gold_index));
  std::vector<const ActivityNode*> ordered;
  for (const auto& id : g.ordered_activity_ids)
    for (const auto& a : g.activities)
      if (a.id == id) ordered.push_back(&a);
  auto joined = [](const std::vector<std::string>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " -> " : "") + v[i];
    return s;
  };
  const auto step = [&]() -> const ActivityNode& { return *ordered.at(it.question.at("step_index").get<std::size_t>()); };
  switch (it.task) {
    case TaskKind::A1_route_retrieval:
      why = "route";
      return gold == joined(route);
    case TaskKind::A2_missing_step: {
      why = "masked step";
      const auto pos = it.question.at("mask_index").get<std::size_t>();
      return gold == route.at(pos);
    }
    case TaskKind::A3_next_activity: {
      why = "next activity";
      const auto prefix = it.question.at("prefix").get<std::vector<std::string>>();
      return prefix.size() < route.size() && std::equal(prefix.begin(), prefix.end(), route.begin()) &&
             gold == route[prefix.size()];
    }
    case TaskKind::B1_condition_prediction: {
      why = "condition value";
      const auto& c = step().conditions;
      auto v = c.find(it.question.at("condition_key").get<std::string>());
      return v != c.end() && v->second == gold;
    }
    case TaskKind::B2_full_condition_set: {
      why = "condition tuple";
      const auto& c = step().conditions;
      for (const char* key : {"temperature", "duration", "atmosphere"}) {
        auto v = c.find(key);
        if (v == c.end() || gold.find(std::string(key) + "=" + v->second) == std::string::npos) return false;
      }
      return true;
    }
    case TaskKind::C1_tool_selection: {
      why = "tool";
      std::string best;
      for (const auto& u : g.usage_edges) {
        if (u.activity != step().id) continue;
        for (const auto& t : g.tool_entities)
          if (t.id == u.entity && (best.empty() || t.label < best)) best = t.label;
      }
      return gold == best;
    }
    case TaskKind::D_process_ordering: {
      why = "ordering";
      std::map<std::string, std::string> label;
      for (const auto& a : g.activities) label[a.id] = a.label;
      std::set<std::string> valid;
      for (const auto& o : oracles::all_orders(g, oracles::oracle_precedence(g))) {
        std::vector<std::string> l;
        for (const auto& id : o) l.push_back(label[id]);
        valid.insert(joined(l));
      }
      if (!valid.count(gold)) return false;
      for (std::size_t i = 0; i < it.options.size(); ++i)
        if (static_cast<int>(i) != it.gold_index && valid.count(it.options[i])) return false;
      return true;
    }
  }
  return false;
}

void criterion5() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(2024);
  std::size_t graphs = 0, role_bad = 0, order_bad = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 1 + rng.index(8);
    const auto g = assign_roles(oracles::random_dag(rng, n, 2 + rng.index(8)));
    ++graphs;
    for (const auto* list : {&g.material_entities, &g.tool_entities})
      for (const auto& e : *list) role_bad += e.role != oracles::oracle_role(g, e);
    const auto prec = infer_precedence(g);
    if (prec != oracles::oracle_precedence(g)) {
      ++order_bad;
      continue;
    }
    const auto order = order_activities(g, prec);
    const auto valid = oracles::all_orders(g, prec);
    order_bad += std::find(valid.begin(), valid.end(), order) == valid.end();
  }
  line("5a", role_bad == 0, "roles match the edge-list oracle on " + std::to_string(graphs) + " random graphs (" +
                               std::to_string(role_bad) + " mismatches)");
  line("5b", order_bad == 0, "precedence and order valid under permutation enumeration (" + std::to_string(order_bad) +
                                 " bad of " + std::to_string(graphs) + ")");

  SyntheticParams p;
  p.n_records = 150;
  auto corpus = generate_synthetic_corpus(p, 77);
  std::erase_if(corpus, [](const ProcessGraph& g) { return g.activities.size() > 8; });
  std::map<std::string, const ProcessGraph*> by_id;
  for (const auto& g : corpus) by_id[g.record_id] = &g;
  const auto bench = generate_benchmark(corpus, {}, 42);
  std::size_t bad = 0, lib_bad = 0;
  std::map<TaskKind, std::size_t> per_task;
  std::string first;
  for (const auto& it : bench.items) {
    const auto& g = *by_id.at(it.graph_id);
    std::string why;
    ++per_task[it.task];
    if (!gold_from_graph(it, g, why)) {
      if (first.empty()) first = it.item_id + " " + why;
      ++bad;
    }
    lib_bad += !validate_item(it, g).valid;
  }
  line("5c", bad == 0 && lib_bad == 0 && per_task.size() == 7,
       "gold recovered on " + std::to_string(bench.items.size()) + " items over " + std::to_string(per_task.size()) +
           " tasks (oracle misses " + std::to_string(bad) + ", validate_item misses " + std::to_string(lib_bad) + ")" +
           (first.empty() ? "" : " first: " + first));

  const FrozenGraphAttention gat(7);
  const auto memory = build_memory(corpus, {}, text(), gat, 4);
  std::map<std::pair<std::string, std::string>, std::size_t> recount;
  std::size_t steps = 0;
  for (const auto& g : corpus) {
    const auto r = g.ordered_activity_labels();
    steps += r.size();
    for (std::size_t i = 0; i + 1 < r.size(); ++i) ++recount[{r[i], r[i + 1]}];
  }
  line("5d", memory.transition_table == recount && memory.step_library.size() == steps,
       "transition table and step library match a recount (" + std::to_string(recount.size()) + " transitions, " +
           std::to_string(steps) + " steps)");

  // hand fixtures: 0.4 t + 0.3 s + 0.3 h
  auto view = [](std::string id, double t, double s, double h) {
    RetrievedPrecedent r;
    r.graph_id = std::move(id);
    r.s_text = t;
    r.s_struct = s;
    r.s_heur = h;
    return r;
  };
  const auto ranked = fuse_and_rank({view("p1", 0.9, 0.2, 0.5), view("p2", 0.5, 0.9, 0.6), view("p3", 0.4, 0.4, 1.0)}, {}, 8);
  bool fixtures = ranked.size() == 3 && ranked[0].graph_id == "p2" && std::abs(ranked[0].s_ret - 0.65) < 1e-12 &&
                  ranked[1].graph_id == "p3" && std::abs(ranked[1].s_ret - 0.58) < 1e-12 && ranked[2].graph_id == "p1" &&
                  std::abs(ranked[2].s_ret - 0.57) < 1e-12;
  ProcessSummary q, r;
  q.route = {"mill", "sinter"};
  q.route_length = 2;
  q.precursors = {"Li2CO3"};
  r.route = {"mill", "anneal"};
  r.route_length = 2;
  r.precursors = {"CoO"};
  fixtures = fixtures && std::abs(score_heuristic(q, r) - 4.0 / 9.0) < 1e-12;
  // random views: fused top-k equals a brute-force full sort
  Rng vr(5);
  for (int trial = 0; trial < 200 && fixtures; ++trial) {
    std::vector<RetrievedPrecedent> v;
    const std::size_t m = 1 + vr.index(8);
    for (std::size_t i = 0; i < m; ++i) v.push_back(view("g" + std::to_string(i), vr.unit(), vr.unit(), vr.unit()));
    const std::size_t k = 1 + vr.index(8);
    const RetrievalWeights w{0.2, 0.5, 0.3};
    auto brute = v;
    for (auto& x : brute) x.s_ret = 0.2 * x.s_text + 0.5 * x.s_struct + 0.3 * x.s_heur;
    std::sort(brute.begin(), brute.end(), [](const auto& a, const auto& b) {
      return a.s_ret != b.s_ret ? a.s_ret > b.s_ret : a.graph_id < b.graph_id;
    });
    const auto got = fuse_and_rank(v, w, k);
    fixtures = got.size() == std::min(k, m);
    for (std::size_t i = 0; i < got.size() && fixtures; ++i)
      fixtures = got[i].graph_id == brute[i].graph_id && std::abs(got[i].s_ret - brute[i].s_ret) < 1e-12;
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  line("5e", fixtures, "retrieval and fusion hand fixtures plus 200 brute-force rankings (" +
                           std::to_string(secs).substr(0, 4) + " s for criterion 5)");
}

// --- criterion 6 -------------------------------------------------------------------

int cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = dispatch(args, out, err);
  if (code != 0) std::printf("  exit %d: %s%s\n", code, out.str().c_str(), err.str().c_str());
  return code;
}

bool pipeline(const testsupport::TempDir& d, std::size_t jobs) {
  const std::string j = std::to_string(jobs);
  auto f = [&](const std::string& n) { return d.file(n); };
  return cli({"synth", "--records", "200", "--seed", "42", "--out", f("synth.jsonl"), "--prov-out", f("prov.jsonl")}) == 0 &&
         cli({"compile", "--input", f("prov.jsonl"), "--out", f("graphs.jsonl"), "--warnings", f("warnings.jsonl"), "--jobs", j}) == 0 &&
         cli({"genbench", "--graphs", f("graphs.jsonl"), "--out", f("bench.jsonl"), "--skips", f("skips.jsonl"), "--jobs", j}) == 0 &&
         cli({"split", "--bench", f("bench.jsonl"), "--protocol", "dual", "--out", f("split.jsonl"), "--report", f("split.json")}) == 0 &&
         cli({"build-memory", "--graphs", f("graphs.jsonl"), "--bench", f("bench.jsonl"), "--split", f("split.jsonl"),
              "--out", f("memory.json"), "--jobs", j}) == 0 &&
         cli({"eval", "--bench", f("bench.jsonl"), "--split", f("split.jsonl"), "--memory", f("memory.json"), "--policy",
              "provmind_llm", "--mock", "--log", f("eval.jsonl"), "--report", f("eval.json"), "--jobs", j}) == 0;
}

void criterion6() {
  testsupport::TempDir a("accept_a"), b("accept_b");
  if (!pipeline(a, 1) || !pipeline(b, 4)) {
    line("6", false, "pipeline failed");
    return;
  }
  std::size_t files = 0;
  std::vector<std::string> differ;
  for (const auto& entry : std::filesystem::directory_iterator(std::filesystem::path(a.file("")))) {
    const std::string name = entry.path().filename().string();
    ++files;
    if (read_file(a.file(name)) != read_file(b.file(name))) differ.push_back(name);
  }
  std::string detail = std::to_string(files) + " artifacts from synth, compile, genbench, split, build-memory, eval (mock)";
  detail += differ.empty() ? " byte-identical across two runs (1 and 4 jobs)" : ", differing: " + differ.front();
  line("6", files >= 11 && differ.empty(), detail);
}

// --- criterion 7 -------------------------------------------------------------------

void criterion7(const Synthetic& s) {
  testsupport::TempDir d("accept_ablate");
  auto f = [&](const std::string& n) { return d.file(n); };
  bool ok = cli({"synth", "--records", "200", "--seed", "42", "--out", f("graphs.jsonl")}) == 0 &&
            cli({"genbench", "--graphs", f("graphs.jsonl"), "--out", f("bench.jsonl"), "--jobs", "4"}) == 0 &&
            cli({"split", "--bench", f("bench.jsonl"), "--protocol", "dual", "--out", f("split.jsonl")}) == 0 &&
            cli({"build-memory", "--graphs", f("graphs.jsonl"), "--bench", f("bench.jsonl"), "--split", f("split.jsonl"),
                 "--out", f("memory.json")}) == 0 &&
            cli({"ablate", "--bench", f("bench.jsonl"), "--split", f("split.jsonl"), "--memory", f("memory.json"), "--mock",
                 "--report", f("ablate.json"), "--jobs", "4"}) == 0;
  std::map<std::string, std::size_t> groups;
  if (ok) {
    const json doc = json::parse(read_file(f("ablate.json")));
    for (const auto& row : doc.at("rows")) ++groups[row.at("group").get<std::string>()];
  }
  const bool shape = ok && groups["Modules"] == 4 && groups["Scoring"] == 5 && groups["Retrieval"] == 7 &&
                     groups["Fusion"] == 4 && groups["Top-k"] == 5;
  std::string counts;
  for (const auto& [g, n] : groups) counts += (counts.empty() ? "" : ", ") + g + " " + std::to_string(n);
  line("7a", shape, "ablate --mock rows: " + counts);

  PolicyConfig base = policy(Policy::provmind_llm);
  const auto rows = default_ablation_grid(base, {"scoring"});
  std::vector<AblationRow> one;
  for (const auto& r : rows)
    if (r.config.lambda == 1.0) one.push_back(r);
  const MockChatClient mock;
  const auto result = run_ablation(one, s.prepared, s.memory, &mock, s.resources);
  const auto sym = evaluate(s.prepared, s.memory, policy(Policy::argmax_symbolic), nullptr, s.resources);
  bool same = one.size() == 1 && result.reports.size() == 1 && result.reports[0].items.size() == sym.items.size();
  std::size_t mismatched = 0;
  if (same) {
    for (std::size_t i = 0; i < sym.items.size(); ++i) {
      const auto& x = result.reports[0].items[i];
      mismatched += x.item_id != sym.items[i].item_id || x.answer != sym.items[i].answer;
    }
  }
  line("7b", same && mismatched == 0,
       "lambda=1 row vs argmax_symbolic on " + std::to_string(sym.items.size()) + " items: " + std::to_string(mismatched) +
           " differ");
}

}  // namespace

int main() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto world = build_synthetic(800, 42, 4);
  const double build = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  criterion4(world, build);
  criterion5();
  criterion6();
  criterion7(world);
  std::printf("%d failed\n", failures);
  return failures == 0 ? 0 : 1;
}
