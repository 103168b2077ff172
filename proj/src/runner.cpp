#include "provmind/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <set>
#include <sstream>

#include "provmind/common.hpp"
#include "provmind/io.hpp"

namespace provmind {

using nlohmann::json;

namespace {

constexpr std::pair<Policy, std::string_view> kPolicyNames[] = {
    {Policy::argmax_symbolic, "argmax_symbolic"},
    {Policy::argmax_neural, "argmax_neural"},
    {Policy::argmax_hybrid, "argmax_hybrid"},
    {Policy::provmind_llm, "provmind_llm"},
    {Policy::zero_shot, "zero_shot"},
    {Policy::few_shot, "few_shot"},
    {Policy::rag, "rag"},
    {Policy::graphrag, "graphrag"},
    {Policy::external_predictions, "external_predictions"},
    {Policy::uniform_random, "uniform_random"},
    {Policy::oracle, "oracle"},
};

std::string percent(double accuracy) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * accuracy);
  return buf;
}

json tally_json(const Tally& t) {
  return json{{"correct", t.correct}, {"total", t.total}, {"accuracy", t.accuracy()}};
}

std::string fraction(const Tally& t) { return std::to_string(t.correct) + " / " + std::to_string(t.total); }

// Left-aligned first columns, right-aligned numbers.
std::string aligned_table(const std::vector<std::vector<std::string>>& rows, std::size_t left_columns) {
  std::vector<std::size_t> width;
  for (const auto& r : rows) {
    if (width.size() < r.size()) width.resize(r.size(), 0);
    for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], r[c].size());
  }
  std::ostringstream out;
  for (const auto& r : rows) {
    std::string line;
    for (std::size_t c = 0; c < r.size(); ++c) {
      if (c) line += "  ";
      const std::string pad(width[c] - r[c].size(), ' ');
      line += c < left_columns ? r[c] + pad : pad + r[c];
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out << line << "\n";
  }
  return out.str();
}

std::string messages_text(const std::vector<ChatMessage>& messages) {
  std::string text;
  for (const auto& m : messages) text += m.role + ": " + m.text + "\n";
  return text;
}

// nullopt once every attempt timed out.
std::optional<ChatResponse> complete_with_retries(const ChatClient& client, const ChatRequest& request, int retries) {
  for (int attempt = 0; attempt <= std::max(0, retries); ++attempt) {
    try {
      return client.complete(request);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::client_timeout) throw;
    }
  }
  return std::nullopt;
}

json exchange_json(std::string_view mode, const ChatRequest& request, const std::optional<ChatResponse>& response) {
  json j{{"mode", mode}, {"request", to_json(request)}};
  j["response"] = response ? to_json(*response) : json(nullptr);
  return j;
}

std::vector<double> column(const OptionScores& s, double OptionScore::*field) {
  std::vector<double> out;
  for (const auto& o : s.options) out.push_back(o.*field);
  return out;
}

std::vector<RetrievedPrecedent> top_by(std::vector<RetrievedPrecedent> views, double RetrievedPrecedent::*field,
                                       std::size_t n) {
  std::sort(views.begin(), views.end(), [&](const auto& a, const auto& b) {
    if (a.*field != b.*field) return a.*field > b.*field;
    return a.graph_id < b.graph_id;
  });
  if (views.size() > n) views.resize(n);
  return views;
}

}  // namespace

std::string_view to_string(Policy p) {
  for (const auto& [policy, name] : kPolicyNames)
    if (policy == p) return name;
  return "argmax_hybrid";
}

Policy policy_from_string(std::string_view text) {
  for (const auto& [policy, name] : kPolicyNames)
    if (name == text) return policy;
  throw Error(ErrorCode::invalid_params, "unknown policy '" + std::string(text) + "'");
}

bool needs_chat_client(Policy p) {
  return p == Policy::provmind_llm || p == Policy::zero_shot || p == Policy::few_shot || p == Policy::rag ||
         p == Policy::graphrag;
}

void PolicyConfig::validate() const {
  weights.validate();
  if (k == 0) throw Error(ErrorCode::config_conflict, "k must be positive");
  if (lambda < 0.0 || lambda > 1.0) throw Error(ErrorCode::config_conflict, "lambda must lie in [0,1]");
  if (budgets.planning <= 0 || budgets.answer <= 0 || budgets.baseline <= 0)
    throw Error(ErrorCode::config_conflict, "token budgets must be positive");
  if (few_shot_count != kFewShotExemplars || rag_k != kRagRecords || graph_k != kGraphRecords)
    throw Error(ErrorCode::config_conflict, "few_shot_count, rag_k and graph_k are fixed at 3 by the prompt templates");
  if (graph_hops != 1) throw Error(ErrorCode::config_conflict, "only graph_hops = 1 is rendered");
  if (retries < 0) throw Error(ErrorCode::config_conflict, "retries must be non-negative");
  if (max_in_flight == 0) throw Error(ErrorCode::config_conflict, "max_in_flight must be positive");
}

PolicyConfig PolicyConfig::from_json(const json& j) {
  PolicyConfig c;
  if (j.contains("policy")) c.policy = policy_from_string(j.at("policy").get<std::string>());
  if (j.contains("weights")) c.weights = RetrievalWeights::from_json(j.at("weights"));
  c.k = j.value("k", c.k);
  c.lambda = j.value("lambda", c.lambda);
  c.planning = j.value("planning", c.planning);
  c.fallback = j.value("fallback", c.fallback);
  c.symbolic_scoring = j.value("symbolic_scoring", c.symbolic_scoring);
  if (j.contains("budgets")) {
    const json& b = j.at("budgets");
    c.budgets.planning = b.value("planning", c.budgets.planning);
    c.budgets.answer = b.value("answer", c.budgets.answer);
    c.budgets.baseline = b.value("baseline", c.budgets.baseline);
  }
  c.few_shot_count = j.value("few_shot_count", c.few_shot_count);
  c.few_shot_seed = j.value("few_shot_seed", c.few_shot_seed);
  c.rag_k = j.value("rag_k", c.rag_k);
  c.graph_k = j.value("graph_k", c.graph_k);
  c.graph_hops = j.value("graph_hops", c.graph_hops);
  c.temperature = j.value("temperature", c.temperature);
  c.retries = j.value("retries", c.retries);
  c.max_in_flight = j.value("max_in_flight", c.max_in_flight);
  c.log_prompts = j.value("log_prompts", c.log_prompts);
  if (j.contains("symbolic")) c.symbolic = SymbolicConfig::from_json(j.at("symbolic"));
  c.seed = j.value("seed", c.seed);
  c.label = j.value("label", c.label);
  return c;
}

json PolicyConfig::to_json() const {
  return json{{"policy", to_string(policy)},
              {"weights", weights.to_json()},
              {"k", k},
              {"lambda", lambda},
              {"planning", planning},
              {"fallback", fallback},
              {"symbolic_scoring", symbolic_scoring},
              {"budgets", {{"planning", budgets.planning}, {"answer", budgets.answer}, {"baseline", budgets.baseline}}},
              {"few_shot_count", few_shot_count},
              {"few_shot_seed", few_shot_seed},
              {"rag_k", rag_k},
              {"graph_k", graph_k},
              {"graph_hops", graph_hops},
              {"temperature", temperature},
              {"retries", retries},
              {"max_in_flight", max_in_flight},
              {"log_prompts", log_prompts},
              {"symbolic", symbolic.to_json()},
              {"seed", seed},
              {"label", label}};
}

int answer_argmax(const std::vector<double>& scores) {
  if (scores.empty()) return -1;
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i)
    if (scores[i] > scores[best]) best = i;
  return static_cast<int>(best);
}

int answer_argmax(const OptionScores& scores) { return answer_argmax(column(scores, &OptionScore::fused)); }

LlmOutcome llm_answer(const BenchItem& item, const PromptContext& context, const OptionScores& scores,
                      const ChatClient& client, const PolicyConfig& config) {
  LlmOutcome out;
  PromptContext ctx = context;
  ctx.scores = &scores;

  if (config.planning) {
    ChatRequest plan{build_prompt(item, PromptMode::plan, ctx), config.budgets.planning, config.temperature};
    auto response = complete_with_retries(client, plan, config.retries);
    out.exchanges.push_back(exchange_json("plan", plan, response));
    if (response) out.plan = response->text;
    ctx.plan = out.plan;
  }

  ChatRequest answer{build_prompt(item, PromptMode::answer, ctx), config.budgets.answer, config.temperature};
  auto response = complete_with_retries(client, answer, config.retries);
  out.exchanges.push_back(exchange_json("answer", answer, response));
  if (response) out.answer = parse_answer(response->text, item.options.size());
  if (out.answer >= 0) return out;

  out.fallback_reason = response ? "unparseable response" : "client timeout";
  if (!config.fallback) return out;
  out.fallback = true;
  out.answer = config.symbolic_scoring ? answer_argmax(column(scores, &OptionScore::raw_sym))
                                       : answer_argmax(column(scores, &OptionScore::raw_neu));
  if (out.answer < 0) out.answer = 0;
  return out;
}

PreparedSet prepare_items(std::span<const BenchItem> items, const ProcessMemory& memory, const TextEmbedder& text,
                          const FrozenGraphAttention& structure, std::size_t jobs) {
  PreparedSet set;
  set.items.assign(items.begin(), items.end());
  set.prepared.resize(items.size());
  parallel_for(items.size(), jobs, [&](std::size_t i) {
    auto& p = set.prepared[i];
    p.query = query_from_item(set.items[i], text, structure);
    p.views = score_views(p.query, memory);
  });
  return set;
}

json ItemLog::to_json() const {
  json j{{"item_id", item_id},     {"task", task_code(task)},   {"graph_id", graph_id},
         {"gold", gold},           {"answer", answer},          {"correct", correct},
         {"fallback", fallback},   {"precedents", precedents},  {"exemplars", exemplars},
         {"prompts", prompts},     {"responses", responses}};
  if (!flag.empty()) j["flag"] = flag;
  if (scores) j["scores"] = provmind::to_json(*scores);
  return j;
}

json EvalReport::to_json(bool include_wall_clock) const {
  json tasks = json::object();
  for (const auto& [t, tally] : per_task) tasks[std::string(task_code(t))] = tally_json(tally);
  json j{{"label", label},
         {"policy", policy},
         {"split_id", split_id},
         {"memory_split", memory_split},
         {"per_task", tasks},
         {"overall", tally_json(overall)},
         {"flagged", flagged},
         {"fallbacks", fallbacks},
         {"self_precedents", self_precedents}};
  if (include_wall_clock) j["wall_clock_seconds"] = wall_clock_seconds;
  return j;
}

std::string EvalReport::to_text() const {
  std::ostringstream out;
  out << "Policy: " << label;
  if (!split_id.empty()) out << "  split: " << split_id;
  if (!memory_split.empty()) out << "  memory: " << memory_split;
  out << "\n";
  std::vector<std::vector<std::string>> rows{{"Task", "Accuracy (%)", "Correct / Total"}};
  for (const auto& [t, tally] : per_task) rows.push_back({std::string(task_code(t)), percent(tally.accuracy()), fraction(tally)});
  rows.push_back({"Overall", percent(overall.accuracy()), fraction(overall)});
  out << aligned_table(rows, 1);
  if (flagged || fallbacks) out << "flagged: " << flagged << "  fallbacks: " << fallbacks << "\n";
  return out.str();
}

EvalReport eval_report_from_json(const json& j) {
  EvalReport r;
  r.label = j.value("label", "");
  r.policy = j.value("policy", json::object());
  r.split_id = j.value("split_id", "");
  r.memory_split = j.value("memory_split", "");
  auto tally = [](const json& t) { return Tally{t.value("correct", std::size_t{0}), t.value("total", std::size_t{0})}; };
  const json tasks = j.value("per_task", json::object());
  for (const auto& [code, t] : tasks.items()) r.per_task[task_from_string(code)] = tally(t);
  r.overall = tally(j.value("overall", json::object()));
  r.flagged = j.value("flagged", std::size_t{0});
  r.fallbacks = j.value("fallbacks", std::size_t{0});
  r.self_precedents = j.value("self_precedents", std::size_t{0});
  r.wall_clock_seconds = j.value("wall_clock_seconds", 0.0);
  return r;
}

namespace {

void tally_items(EvalReport& report) {
  report.per_task.clear();
  report.overall = {};
  report.flagged = report.fallbacks = report.self_precedents = 0;
  for (const auto& log : report.items) {
    auto& t = report.per_task[log.task];
    ++t.total;
    ++report.overall.total;
    if (log.correct) {
      ++t.correct;
      ++report.overall.correct;
    }
    if (!log.flag.empty()) ++report.flagged;
    if (log.fallback) ++report.fallbacks;
    for (const auto& p : log.precedents)
      if (p == log.graph_id) ++report.self_precedents;
  }
}

std::string prompt_record(const std::vector<ChatMessage>& messages, bool full) {
  const std::string text = messages_text(messages);
  return full ? text : hex64(fnv1a64(text));
}

}  // namespace

EvalReport evaluate(const PreparedSet& set, const ProcessMemory& memory, const PolicyConfig& config,
                    const ChatClient* client, const EvalResources& resources) {
  config.validate();
  if (config.policy == Policy::external_predictions) {
    throw Error(ErrorCode::config_conflict, "external_predictions is scored with score_external_predictions");
  }
  if (needs_chat_client(config.policy) && !client) {
    throw Error(ErrorCode::config_conflict, std::string(to_string(config.policy)) + " needs a chat client");
  }
  const bool scored = config.policy == Policy::argmax_symbolic || config.policy == Policy::argmax_neural ||
                      config.policy == Policy::argmax_hybrid || config.policy == Policy::provmind_llm;
  if (scored && !resources.text) throw Error(ErrorCode::config_conflict, "text embedder missing");
  if (set.items.size() != set.prepared.size()) throw Error(ErrorCode::invalid_params, "prepared set is inconsistent");

  std::map<TaskKind, std::vector<const BenchItem*>> exemplar_pool;
  for (const auto& t : resources.train_items) exemplar_pool[t.task].push_back(&t);

  const auto started = std::chrono::steady_clock::now();
  EvalReport report;
  report.label = config.label.empty() ? std::string(to_string(config.policy)) : config.label;
  report.policy = config.to_json();
  report.split_id = resources.split_id;
  report.memory_split = memory.split_id;
  report.items.resize(set.items.size());

  const double lambda = config.effective_lambda();
  const std::size_t jobs =
      needs_chat_client(config.policy) ? std::min(resources.jobs, config.max_in_flight) : resources.jobs;

  parallel_for(set.items.size(), jobs, [&](std::size_t i) {
    const BenchItem& item = set.items[i];
    const PreparedItem& prep = set.prepared[i];
    ItemLog& log = report.items[i];
    log.item_id = item.item_id;
    log.task = item.task;
    log.graph_id = item.graph_id;
    log.gold = item.gold_index;
    const std::size_t k_options = item.options.size();

    auto ask_baseline = [&](PromptMode mode, const PromptContext& ctx) {
      const auto messages = build_prompt(item, mode, ctx);
      ChatRequest request{messages, config.budgets.baseline, config.temperature};
      log.prompts.push_back(prompt_record(messages, config.log_prompts));
      auto response = complete_with_retries(*client, request, config.retries);
      if (!response) {
        log.flag = "client timeout";
        return;
      }
      log.responses.push_back(response->text);
      log.answer = parse_answer(response->text, k_options);
      if (log.answer < 0) log.flag = "unparseable response";
    };

    try {
      switch (config.policy) {
        case Policy::oracle:
          log.answer = item.gold_index;
          break;
        case Policy::uniform_random: {
          Rng rng(derive_seed(config.seed, "uniform", item.item_id));
          log.answer = static_cast<int>(rng.index(k_options));
          break;
        }
        case Policy::argmax_symbolic:
        case Policy::argmax_neural:
        case Policy::argmax_hybrid:
        case Policy::provmind_llm: {
          const auto precedents = fuse_and_rank(prep.views, config.weights, config.k);
          for (const auto& p : precedents) log.precedents.push_back(p.graph_id);
          const auto sym = score_options_symbolic(item, precedents, memory, config.symbolic);
          const auto neu = score_options_neural(item, precedents, memory, *resources.text);
          log.scores = fuse_scores(sym, neu, lambda);
          if (config.policy == Policy::argmax_symbolic) {
            log.answer = answer_argmax(column(*log.scores, &OptionScore::raw_sym));
          } else if (config.policy == Policy::argmax_neural) {
            log.answer = answer_argmax(column(*log.scores, &OptionScore::raw_neu));
          } else if (config.policy == Policy::argmax_hybrid) {
            log.answer = answer_argmax(*log.scores);
          } else {
            PromptContext ctx;
            ctx.memory = &memory;
            ctx.precedents = precedents;
            auto outcome = llm_answer(item, ctx, *log.scores, *client, config);
            for (const auto& ex : outcome.exchanges) {
              const json& req = ex["request"];
              std::vector<ChatMessage> messages;
              for (const auto& m : req["messages"]) messages.push_back({m["role"], m["content"]});
              log.prompts.push_back(prompt_record(messages, config.log_prompts));
              log.responses.push_back(ex["response"].is_null() ? std::string() : ex["response"].value("text", ""));
            }
            log.answer = outcome.answer;
            log.fallback = outcome.fallback;
            if (outcome.answer < 0) log.flag = outcome.fallback_reason;
          }
          break;
        }
        case Policy::zero_shot:
          ask_baseline(PromptMode::zero_shot, {});
          break;
        case Policy::few_shot: {
          std::vector<const BenchItem*> pool;
          if (auto it = exemplar_pool.find(item.task); it != exemplar_pool.end()) {
            for (const auto* t : it->second)
              if (t->graph_id != item.graph_id) pool.push_back(t);
          }
          Rng rng(derive_seed(config.few_shot_seed, item.item_id));
          rng.shuffle(pool);
          if (pool.size() > config.few_shot_count) pool.resize(config.few_shot_count);
          PromptContext ctx;
          ctx.exemplars = pool;
          for (const auto* e : pool) log.exemplars.push_back(e->item_id);
          ask_baseline(PromptMode::few_shot, ctx);
          break;
        }
        case Policy::rag: {
          PromptContext ctx;
          for (const auto& p : top_by(prep.views, &RetrievedPrecedent::s_text, config.rag_k)) {
            log.precedents.push_back(p.graph_id);
            if (const auto* s = memory.find(p.graph_id)) ctx.records.push_back(linearize(*s));
          }
          ask_baseline(PromptMode::rag, ctx);
          break;
        }
        case Policy::graphrag: {
          PromptContext ctx;
          for (const auto& p : top_by(prep.views, &RetrievedPrecedent::s_struct, config.graph_k)) {
            log.precedents.push_back(p.graph_id);
            ctx.neighbourhoods.push_back(render_neighbourhood(memory, p.graph_id));
          }
          ask_baseline(PromptMode::graphrag, ctx);
          break;
        }
        case Policy::external_predictions:
          break;
      }
    } catch (const std::exception& e) {
      log.answer = -1;
      log.flag = e.what();
    }
    log.correct = log.answer >= 0 && log.answer == item.gold_index;
  });

  tally_items(report);
  report.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return report;
}

std::map<std::string, int> read_predictions(const std::string& path) {
  const std::string content = read_file(path);
  std::vector<json> records;
  json whole = json::parse(content, nullptr, false);
  if (!whole.is_discarded()) {
    if (whole.is_object() && !whole.contains("format")) {
      for (const auto& [id, v] : whole.items()) records.push_back({{"item_id", id}, {"answer", v}});
    } else if (whole.is_array()) {
      records.assign(whole.begin(), whole.end());
    }
  } else {
    // JSONL, with or without an artifact header line
    std::istringstream in(content);
    std::string line;
    while (std::getline(in, line)) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      json r = json::parse(line, nullptr, false);
      if (r.is_discarded()) throw Error(ErrorCode::io_error, path + ": unreadable line in predictions");
      records.push_back(std::move(r));
    }
  }
  std::map<std::string, int> out;
  for (const auto& r : records) {
    if (!r.is_object() || !r.contains("item_id")) continue;
    const std::string id = r["item_id"].get<std::string>();
    const json& a = r.contains("answer") ? r["answer"] : r.value("prediction", json());
    int index = -1;
    if (a.is_number_integer()) {
      index = a.get<int>();
    } else if (a.is_string()) {
      const auto s = a.get<std::string>();
      index = parse_answer(s, 26);
    }
    if (index < 0) throw Error(ErrorCode::invalid_params, "unreadable prediction for item '" + id + "'");
    out[id] = index;
  }
  return out;
}

EvalReport score_external_predictions(std::span<const BenchItem> items, const std::map<std::string, int>& predictions,
                                      const std::string& split_id) {
  std::set<std::string> ids;
  for (const auto& item : items) ids.insert(item.item_id);
  for (const auto& [id, _] : predictions) {
    if (!ids.count(id)) throw Error(ErrorCode::unknown_item_id, id);
  }
  EvalReport report;
  report.label = "external_predictions";
  report.policy = json{{"policy", "external_predictions"}};
  report.split_id = split_id;
  for (const auto& item : items) {
    ItemLog log;
    log.item_id = item.item_id;
    log.task = item.task;
    log.graph_id = item.graph_id;
    log.gold = item.gold_index;
    if (auto it = predictions.find(item.item_id); it != predictions.end()) {
      log.answer = it->second;
      if (log.answer >= static_cast<int>(item.options.size())) log.flag = "prediction out of range";
    } else {
      log.flag = "missing prediction";
    }
    log.correct = log.flag.empty() && log.answer == item.gold_index;
    report.items.push_back(std::move(log));
  }
  tally_items(report);
  return report;
}

RetrievalWeights view_subset_weights(const std::string& subset) {
  const RetrievalWeights d;
  double a = 0.0, b = 0.0, g = 0.0;
  if (subset == "full") return d;
  if (subset == "text") a = d.alpha;
  else if (subset == "structure") b = d.beta;
  else if (subset == "heuristic") g = d.gamma;
  else if (subset == "text+structure") a = d.alpha, b = d.beta;
  else if (subset == "text+heuristic") a = d.alpha, g = d.gamma;
  else if (subset == "structure+heuristic") b = d.beta, g = d.gamma;
  else throw Error(ErrorCode::invalid_grid_axis, "unknown view subset '" + subset + "'");
  const double sum = a + b + g;
  return {a / sum, b / sum, g / sum};
}

RetrievalWeights fusion_preset(const std::string& preset) {
  if (preset == "default") return {};
  if (preset == "equal") return {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
  if (preset == "text_heavy") return {0.6, 0.2, 0.2};
  if (preset == "structure_heavy") return {0.2, 0.6, 0.2};
  if (preset == "heuristic_heavy") return {0.2, 0.2, 0.6};
  throw Error(ErrorCode::invalid_grid_axis, "unknown fusion preset '" + preset + "'");
}

std::vector<AblationRow> default_ablation_grid(const PolicyConfig& base, const std::vector<std::string>& groups) {
  static const std::vector<std::string> kGroups{"reference", "modules", "scoring", "retrieval", "fusion", "topk"};
  for (const auto& g : groups) {
    if (std::find(kGroups.begin(), kGroups.end(), g) == kGroups.end())
      throw Error(ErrorCode::invalid_grid_axis, "unknown ablation group '" + g + "'");
  }
  auto wanted = [&](const std::string& g) {
    return groups.empty() || std::find(groups.begin(), groups.end(), g) != groups.end();
  };

  PolicyConfig hybrid = base;
  hybrid.policy = Policy::provmind_llm;
  hybrid.lambda = 0.5;
  hybrid.planning = hybrid.fallback = hybrid.symbolic_scoring = true;
  hybrid.weights = {};
  hybrid.k = 8;

  std::vector<AblationRow> rows;
  auto add = [&](const std::string& group, const std::string& label, PolicyConfig c) {
    c.label = label;
    rows.push_back({group, label, std::move(c)});
  };

  if (wanted("reference")) {
    PolicyConfig llm_only = hybrid;
    llm_only.policy = Policy::zero_shot;
    add("Reference", "LLM-only", llm_only);
    PolicyConfig symbolic = hybrid;
    symbolic.lambda = 1.0;
    add("Reference", "ProvMind-Symbolic", symbolic);
    add("Reference", "ProvMind-Hybrid", hybrid);
  }
  if (wanted("modules")) {
    PolicyConfig c = hybrid;
    c.planning = false;
    add("Modules", "ProvMind-Hybrid w/o planning", c);
    c = hybrid;
    c.fallback = false;
    add("Modules", "ProvMind-Hybrid w/o symbolic fallback", c);
    c = hybrid;
    c.symbolic_scoring = false;
    add("Modules", "ProvMind-Hybrid w/o symbolic scoring", c);
    c = hybrid;
    c.planning = c.fallback = false;
    add("Modules", "ProvMind-Hybrid w/o planning and symbolic fallback", c);
  }
  if (wanted("scoring")) {
    const std::pair<std::string, double> presets[] = {{"Neural scoring", 0.0},
                                                      {"Symbolic scoring", 1.0},
                                                      {"Hybrid scoring (0.5 sym / 0.5 neu)", 0.5},
                                                      {"Hybrid scoring (0.7 sym / 0.3 neu)", 0.7},
                                                      {"Hybrid scoring (0.3 sym / 0.7 neu)", 0.3}};
    for (const auto& [label, lambda] : presets) {
      PolicyConfig c = hybrid;
      c.lambda = lambda;
      add("Scoring", label, c);
    }
  }
  if (wanted("retrieval")) {
    const std::pair<std::string, std::string> subsets[] = {{"Text only", "text"},
                                                           {"Structure only", "structure"},
                                                           {"Heuristic only", "heuristic"},
                                                           {"Text + structure", "text+structure"},
                                                           {"Text + heuristic", "text+heuristic"},
                                                           {"Structure + heuristic", "structure+heuristic"},
                                                           {"Full default retrieval", "full"}};
    for (const auto& [label, subset] : subsets) {
      PolicyConfig c = hybrid;
      c.weights = view_subset_weights(subset);
      add("Retrieval", label, c);
    }
  }
  if (wanted("fusion")) {
    const std::pair<std::string, std::string> presets[] = {{"Equal fusion", "equal"},
                                                           {"Text-heavy fusion", "text_heavy"},
                                                           {"Structure-heavy fusion", "structure_heavy"},
                                                           {"Heuristic-heavy fusion", "heuristic_heavy"}};
    for (const auto& [label, preset] : presets) {
      PolicyConfig c = hybrid;
      c.weights = fusion_preset(preset);
      add("Fusion", label, c);
    }
  }
  if (wanted("topk")) {
    for (std::size_t k : {1, 2, 4, 8, 16}) {
      PolicyConfig c = hybrid;
      c.k = k;
      add("Top-k", "k = " + std::to_string(k), c);
    }
  }
  return rows;
}

namespace {

using AxisApply = std::function<std::string(PolicyConfig&, const json&)>;

const std::map<std::string, AxisApply>& grid_axes() {
  static const std::map<std::string, AxisApply> axes{
      {"planning",
       [](PolicyConfig& c, const json& v) {
         c.planning = v.get<bool>();
         return std::string("planning=") + (c.planning ? "on" : "off");
       }},
      {"fallback",
       [](PolicyConfig& c, const json& v) {
         c.fallback = v.get<bool>();
         return std::string("fallback=") + (c.fallback ? "on" : "off");
       }},
      {"symbolic_scoring",
       [](PolicyConfig& c, const json& v) {
         c.symbolic_scoring = v.get<bool>();
         return std::string("symbolic_scoring=") + (c.symbolic_scoring ? "on" : "off");
       }},
      {"scoring",
       [](PolicyConfig& c, const json& v) {
         const auto s = v.get<std::string>();
         if (s == "symbolic") c.lambda = 1.0;
         else if (s == "neural") c.lambda = 0.0;
         else if (s == "hybrid") c.lambda = (c.lambda > 0.0 && c.lambda < 1.0) ? c.lambda : 0.5;
         else throw Error(ErrorCode::invalid_grid_axis, "unknown scoring variant '" + s + "'");
         return "scoring=" + s;
       }},
      {"lambda",
       [](PolicyConfig& c, const json& v) {
         c.lambda = v.get<double>();
         if (c.lambda < 0.0 || c.lambda > 1.0) throw Error(ErrorCode::invalid_grid_axis, "lambda outside [0,1]");
         char buf[32];
         std::snprintf(buf, sizeof buf, "lambda=%.2f", c.lambda);
         return std::string(buf);
       }},
      {"views",
       [](PolicyConfig& c, const json& v) {
         const auto s = v.get<std::string>();
         c.weights = view_subset_weights(s);
         return "views=" + s;
       }},
      {"fusion",
       [](PolicyConfig& c, const json& v) {
         const auto s = v.get<std::string>();
         c.weights = fusion_preset(s);
         return "fusion=" + s;
       }},
      {"k",
       [](PolicyConfig& c, const json& v) {
         const auto k = v.get<long long>();
         if (k <= 0) throw Error(ErrorCode::invalid_grid_axis, "k must be positive");
         c.k = static_cast<std::size_t>(k);
         return "k=" + std::to_string(k);
       }},
  };
  return axes;
}

}  // namespace

std::vector<AblationRow> ablation_grid_from_json(const json& grid, const PolicyConfig& base) {
  if (!grid.is_object() || grid.empty()) throw Error(ErrorCode::invalid_grid_axis, "grid must be a non-empty object");
  const auto& axes = grid_axes();
  std::vector<AblationRow> rows{{"Grid", "", base}};
  for (const auto& [axis, values] : grid.items()) {
    auto it = axes.find(axis);
    if (it == axes.end()) throw Error(ErrorCode::invalid_grid_axis, "unknown axis '" + axis + "'");
    if (!values.is_array() || values.empty())
      throw Error(ErrorCode::invalid_grid_axis, "axis '" + axis + "' needs a non-empty list");
    std::vector<AblationRow> next;
    for (const auto& row : rows) {
      for (const auto& v : values) {
        AblationRow r = row;
        std::string part;
        try {
          part = it->second(r.config, v);
        } catch (const json::exception& e) {
          throw Error(ErrorCode::invalid_grid_axis, "axis '" + axis + "': " + e.what());
        }
        r.label = r.label.empty() ? part : r.label + ", " + part;
        next.push_back(std::move(r));
      }
    }
    rows = std::move(next);
  }
  for (auto& r : rows) r.config.label = r.label;
  return rows;
}

AblationResult run_ablation(const std::vector<AblationRow>& rows, const PreparedSet& set, const ProcessMemory& memory,
                            const ChatClient* client, const EvalResources& resources) {
  AblationResult result;
  result.rows = rows;
  for (const auto& row : rows) result.reports.push_back(evaluate(set, memory, row.config, client, resources));
  return result;
}

json AblationResult::to_json() const {
  json out = json::array();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.push_back({{"group", rows[i].group}, {"label", rows[i].label}, {"report", reports[i].to_json()}});
  }
  return out;
}

AblationResult ablation_from_json(const json& j) {
  AblationResult r;
  for (const auto& row : j) {
    AblationRow a;
    a.group = row.value("group", "");
    a.label = row.value("label", "");
    r.rows.push_back(a);
    r.reports.push_back(eval_report_from_json(row.value("report", json::object())));
  }
  return r;
}

std::string AblationResult::to_text() const {
  std::vector<std::vector<std::string>> table{{"Group", "Configuration", "Accuracy (%)", "Correct / Total"}};
  std::string last;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    table.push_back({rows[i].group == last ? "" : rows[i].group, rows[i].label, percent(reports[i].overall.accuracy()),
                     fraction(reports[i].overall)});
    last = rows[i].group;
  }
  return aligned_table(table, 2);
}

void write_item_log(const std::string& path, const EvalReport& report, const json& header_extra) {
  json extra = header_extra;
  extra["report"] = report.to_json();
  std::vector<json> records;
  records.reserve(report.items.size());
  for (const auto& item : report.items) records.push_back(item.to_json());
  write_jsonl(path, artifact_header("provmind-eval-log", 1, extra), records);
}

}  // namespace provmind
