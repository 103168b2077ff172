#include "provmind/cli.hpp"

#include <cstdio>
#include <iostream>
#include <memory>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "provmind/chat.hpp"
#include "provmind/config.hpp"
#include "provmind/embedding.hpp"
#include "provmind/io.hpp"
#include "provmind/memory.hpp"
#include "provmind/provgraph.hpp"
#include "provmind/runner.hpp"
#include "provmind/splitter.hpp"
#include "provmind/synthetic.hpp"
#include "provmind/taskgen.hpp"

namespace provmind {

using nlohmann::json;

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::unknown_command:
    case ErrorCode::config_conflict:
    case ErrorCode::invalid_params:
    case ErrorCode::invalid_grid_axis:
    case ErrorCode::missing_context:
      return kExitUsage;
    case ErrorCode::client_timeout:
    case ErrorCode::embedder_unavailable:
      return kExitEndpoint;
    default:
      return kExitData;
  }
}

namespace {

const std::set<std::string> kCommands{"synth", "compile", "genbench",   "split", "audit",
                                      "build-memory", "eval", "ablate", "report"};

// Flags shared by every subcommand plus the JSON patch explicit flags produce.
struct Options {
  std::string config_path;
  std::size_t jobs = 1;
  std::vector<std::pair<CLI::Option*, std::function<void(json&)>>> setters;

  template <typename T>
  CLI::Option* bind(CLI::App* app, const std::string& name, T& var, const std::string& help,
                    std::function<void(json&, const T&)> put) {
    CLI::Option* opt = app->add_option(name, var, help);
    setters.emplace_back(opt, [&var, put](json& j) { put(j, var); });
    return opt;
  }

  CLI::Option* flag(CLI::App* app, const std::string& name, const std::string& help, std::function<void(json&)> put) {
    CLI::Option* opt = app->add_flag(name, help);
    setters.emplace_back(opt, std::move(put));
    return opt;
  }

  RunConfig resolve() const {
    json merged = json::object();
    if (!config_path.empty()) {
      merged = json::parse(read_file(config_path), nullptr, false);
      if (merged.is_discarded()) throw Error(ErrorCode::config_conflict, config_path + " is not valid JSON");
    }
    json patch = json::object();
    for (const auto& [opt, put] : setters)
      if (opt->count() > 0) put(patch);
    merged.merge_patch(patch);
    return RunConfig::from_json(merged);
  }
};

struct Session {
  RunConfig config;
  std::size_t jobs = 1;
  std::ostream& out;
  std::ostream& err;

  json stamp(json extra = json::object()) const {
    const json fields = provenance_fields(config);
    for (const auto& [k, v] : fields.items()) extra[k] = v;
    return extra;
  }
};

std::unique_ptr<TextEmbedder> text_embedder(const RunConfig& config) {
  if (!config.embed_url.empty()) {
    const char* token = std::getenv("PROVMIND_EMBED_TOKEN");
    return std::make_unique<EndpointEmbedder>(config.embed_url, token ? token : "");
  }
  return make_text_embedder_from_env();
}

std::unique_ptr<ChatClient> chat_client(const RunConfig& config, bool mock, const std::string& mock_rules) {
  if (!mock_rules.empty()) return std::make_unique<MockChatClient>(MockChatClient::from_json(json::parse(read_file(mock_rules))));
  if (mock) return std::make_unique<MockChatClient>();
  if (!config.chat_url.empty()) {
    const char* token = std::getenv("PROVMIND_CHAT_TOKEN");
    return std::make_unique<HttpChatClient>(config.chat_url, token ? token : "", config.chat_model);
  }
  return make_chat_client_from_env();
}

std::string fixed(double v, int digits) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

void write_json_artifact(const std::string& path, std::string_view format, const json& header_extra,
                         const std::string& key, const json& body) {
  json doc{{"header", artifact_header(format, 1, header_extra)}, {key, body}};
  write_file(path, doc.dump(2) + "\n");
}

std::vector<BenchItem> partition_items(const std::vector<BenchItem>& items, const std::string& split_path,
                                       const std::string& partition) {
  if (split_path.empty()) return items;
  return items_in(items, read_assignment(split_path), partition_from_string(partition));
}

// --- subcommands --------------------------------------------------------------

struct SynthArgs {
  std::string out;
  std::string prov_out;
};

int run_synth(const Session& s, const SynthArgs& a) {
  const auto graphs = generate_synthetic_corpus(s.config.synth, s.config.seed);
  write_graph_store(a.out, graphs, s.stamp({{"stage", "synth"}, {"corpus_hash", corpus_hash(graphs)}}));
  if (!a.prov_out.empty()) {
    std::string lines;
    for (const auto& g : graphs) {
      json doc = to_prov_jsonld(g);
      doc["provmind:run_config_hash"] = s.config.hash();
      lines += doc.dump() + "\n";
    }
    write_file(a.prov_out, lines);
  }
  s.out << "synth: " << graphs.size() << " graphs -> " << a.out << "\n";
  return kExitOk;
}

struct CompileArgs {
  std::string input;
  std::string out;
  std::string warnings;
};

int run_compile(const Session& s, const CompileArgs& a) {
  const auto docs = read_documents(a.input);
  const auto result = compile_documents(docs, FieldMap{}, s.jobs);
  const json extra = s.stamp({{"stage", "compile"}, {"documents", result.documents}});
  write_graph_store(a.out, result.graphs, extra);
  if (!a.warnings.empty()) write_warnings(a.warnings, result.warnings, extra);
  std::size_t excluded = 0;
  for (const auto& w : result.warnings)
    if (w.kind == WarningKind::excluded_record) ++excluded;
  s.out << "compile: " << result.documents << " documents, " << result.graphs.size() << " graphs, " << excluded
        << " excluded, " << result.warnings.size() << " warnings -> " << a.out << "\n";
  if (result.graphs.empty()) {
    s.err << "compile: no graph survived\n";
    return kExitData;
  }
  return kExitOk;
}

struct GenbenchArgs {
  std::string graphs;
  std::string out;
  std::string skips;
};

int run_genbench(const Session& s, const GenbenchArgs& a) {
  const auto graphs = read_graph_store(a.graphs);
  const auto bench = generate_benchmark(graphs, s.config.taskgen, s.config.seed, s.jobs);
  const json extra = s.stamp({{"stage", "genbench"},
                              {"corpus_hash", corpus_hash(graphs)},
                              {"filtered_graphs", bench.filtered_graphs}});
  write_benchmark(a.out, bench.items, extra);
  if (!a.skips.empty()) {
    std::vector<json> records;
    for (const auto& skip : bench.skips) records.push_back(to_json(skip));
    write_jsonl(a.skips, artifact_header("provmind-skips", 1, extra), records);
  }
  std::map<TaskKind, std::size_t> counts;
  for (const auto& item : bench.items) ++counts[item.task];
  s.out << "genbench: " << bench.items.size() << " items from " << graphs.size() << " graphs ("
        << bench.skips.size() << " skipped slots)\n";
  for (const auto& [task, n] : counts) {
    s.out << "  " << task_code(task) << "  " << n << "  "
          << fixed(100.0 * static_cast<double>(n) / static_cast<double>(bench.items.size()), 2) << "%\n";
  }
  return kExitOk;
}

struct SplitArgs {
  std::string bench;
  std::string out;
  std::string report;
};

int run_split(const Session& s, const SplitArgs& a) {
  const auto items = read_benchmark(a.bench);
  const auto assignment = make_split(s.config.protocol, items, s.config.split);
  write_assignment(a.out, assignment, s.stamp({{"stage", "split"}}));
  const auto report = split_report(assignment, items);
  if (!a.report.empty()) write_json_artifact(a.report, "provmind-split-report", s.stamp(), "report", report.to_json());
  s.out << report.to_text();
  for (const auto& w : assignment.warnings) s.err << "warning: " << w << "\n";
  return kExitOk;
}

struct AuditArgs {
  std::string bench;
  std::vector<std::string> splits;
  std::vector<std::string> pairs;
  std::string graphs;
  std::string out;
};

int run_audit(const Session& s, const AuditArgs& a) {
  const auto items = read_benchmark(a.bench);
  int status = kExitOk;
  if (!a.splits.empty()) {
    std::vector<SplitAssignment> assignments;
    for (const auto& path : a.splits) assignments.push_back(read_assignment(path));
    auto find = [&](const std::string& label) -> const SplitAssignment& {
      for (const auto& as : assignments)
        if (to_string(as.protocol) == label) return as;
      throw Error(ErrorCode::invalid_params, "no split file for protocol '" + label + "'");
    };
    json entries = json::array();
    if (a.pairs.empty()) {
      const auto matrix = contamination_matrix(assignments, items);
      for (Eigen::Index r = 0; r < matrix.values.rows(); ++r) {
        for (Eigen::Index c = 0; c < matrix.values.cols(); ++c) {
          const auto& row = matrix.row_labels[static_cast<std::size_t>(r)];
          const auto& col = matrix.col_labels[static_cast<std::size_t>(c)];
          s.out << "contamination(" << row << ", " << col << ") = " << fixed(matrix.values(r, c), 3) << "\n";
          entries.push_back({{"train", row}, {"test", col}, {"value", matrix.values(r, c)}});
        }
      }
    } else {
      for (const auto& pair : a.pairs) {
        const auto colon = pair.find(':');
        if (colon == std::string::npos) throw Error(ErrorCode::invalid_params, "pair must look like train:test");
        const std::string train = pair.substr(0, colon);
        const std::string test = pair.substr(colon + 1);
        const double v = contamination(find(train), find(test), items);
        s.out << "contamination(" << train << "-train, " << test << "-test) = " << fixed(v, 3) << "\n";
        entries.push_back({{"train", train + "-train"}, {"test", test + "-test"}, {"value", v}});
      }
    }
    if (!a.out.empty()) write_json_artifact(a.out, "provmind-audit", s.stamp(), "contamination", entries);
  }
  if (!a.graphs.empty()) {
    const auto graphs = read_graph_store(a.graphs);
    std::map<std::string, const ProcessGraph*> by_id;
    for (const auto& g : graphs) by_id[g.record_id] = &g;
    std::size_t invalid = 0;
    for (const auto& item : items) {
      auto it = by_id.find(item.graph_id);
      if (it == by_id.end()) {
        ++invalid;
        s.err << item.item_id << ": graph '" << item.graph_id << "' not found\n";
        continue;
      }
      const auto report = validate_item(item, *it->second);
      if (!report.valid) {
        ++invalid;
        s.err << item.item_id << ": " << report.detail << "\n";
      }
    }
    s.out << "validity: " << items.size() - invalid << " / " << items.size() << " items recover their gold\n";
    if (invalid) status = kExitData;
  }
  return status;
}

struct MemoryArgs {
  std::string graphs;
  std::string bench;
  std::string split;
  std::string out;
};

int run_build_memory(const Session& s, const MemoryArgs& a) {
  const auto graphs = read_graph_store(a.graphs);
  const auto items = read_benchmark(a.bench);
  const auto assignment = read_assignment(a.split);
  std::set<std::string> train_ids;
  for (const auto& item : items_in(items, assignment, Partition::train)) train_ids.insert(item.graph_id);
  std::vector<ProcessGraph> train;
  for (const auto& g : graphs)
    if (train_ids.count(g.record_id)) train.push_back(g);
  auto embedder = text_embedder(s.config);
  FrozenGraphAttention structure(s.config.memory.structure_seed);
  auto memory = build_memory(train, s.config.memory, *embedder, structure, s.jobs, &train_ids);
  memory.split_id = std::string(to_string(assignment.protocol));
  save_memory(a.out, memory, s.stamp({{"stage", "build-memory"}}));
  s.out << "build-memory: " << memory.processes.size() << " processes, " << memory.step_library.size() << " steps, "
        << memory.transition_table.size() << " transitions, split " << memory.split_id << " -> " << a.out << "\n";
  return kExitOk;
}

struct EvalArgs {
  std::string bench;
  std::string split;
  std::string train_split;
  std::string partition = "test";
  std::string memory;
  std::string predictions;
  std::string log;
  std::string report;
  std::string out;
  std::string grid;
  std::vector<std::string> groups;
  std::string mock_rules;
  bool mock = false;
  bool wall_clock = false;
};

struct EvalSetup {
  std::vector<BenchItem> all;
  std::vector<BenchItem> items;
  std::vector<BenchItem> train;
  ProcessMemory memory;
  std::unique_ptr<TextEmbedder> embedder;
  std::unique_ptr<ChatClient> client;
  std::string split_id;
};

EvalSetup load_eval(const Session& s, const EvalArgs& a, bool needs_memory) {
  EvalSetup e;
  e.all = read_benchmark(a.bench);
  e.items = partition_items(e.all, a.split, a.partition);
  if (!a.split.empty()) e.split_id = std::string(to_string(read_assignment(a.split).protocol)) + ":" + a.partition;
  const std::string train_split = a.train_split.empty() ? a.split : a.train_split;
  if (!train_split.empty()) e.train = items_in(e.all, read_assignment(train_split), Partition::train);
  if (needs_memory) {
    if (a.memory.empty()) throw Error(ErrorCode::config_conflict, "--memory is required for this policy");
    e.memory = load_memory(a.memory);
    e.embedder = text_embedder(s.config);
    if (e.embedder->name() != e.memory.text_embedder) {
      throw Error(ErrorCode::config_conflict, "memory was built with '" + e.memory.text_embedder +
                                                  "' but the active text embedder is '" + e.embedder->name() + "'");
    }
  }
  e.client = chat_client(s.config, a.mock, a.mock_rules);
  return e;
}

int run_eval(const Session& s, const EvalArgs& a) {
  const PolicyConfig& policy = s.config.policy;
  const bool memory_needed = policy.policy != Policy::external_predictions && policy.policy != Policy::oracle &&
                             policy.policy != Policy::uniform_random && policy.policy != Policy::zero_shot &&
                             policy.policy != Policy::few_shot;
  auto e = load_eval(s, a, memory_needed);
  if (needs_chat_client(policy.policy) && !e.client) {
    throw Error(ErrorCode::config_conflict,
                std::string(to_string(policy.policy)) + " needs a chat endpoint (PROVMIND_CHAT_URL) or --mock");
  }
  EvalReport report;
  if (policy.policy == Policy::external_predictions) {
    if (a.predictions.empty()) throw Error(ErrorCode::config_conflict, "--predictions is required");
    report = score_external_predictions(e.items, read_predictions(a.predictions), e.split_id);
  } else {
    EvalResources resources{e.embedder.get(), e.train, s.jobs, e.split_id};
    PreparedSet prepared;
    if (memory_needed) {
      FrozenGraphAttention structure(e.memory.config.structure_seed);
      prepared = prepare_items(e.items, e.memory, *e.embedder, structure, s.jobs);
    } else {
      prepared.items = e.items;
      prepared.prepared.resize(e.items.size());
    }
    report = evaluate(prepared, e.memory, policy, e.client.get(), resources);
  }
  const json extra = s.stamp({{"stage", "eval"}, {"split", e.split_id}});
  if (!a.log.empty()) write_item_log(a.log, report, extra);
  if (!a.report.empty()) write_json_artifact(a.report, "provmind-eval-report", extra, "report", report.to_json(a.wall_clock));
  s.out << report.to_text();
  if (a.wall_clock) s.out << "wall clock: " << fixed(report.wall_clock_seconds, 2) << " s\n";
  return kExitOk;
}

int run_ablate(const Session& s, const EvalArgs& a, bool policy_given) {
  auto e = load_eval(s, a, true);
  PolicyConfig base = s.config.policy;
  if (!policy_given) base.policy = Policy::provmind_llm;
  std::vector<AblationRow> rows;
  if (!a.grid.empty()) {
    const json grid = json::parse(read_file(a.grid), nullptr, false);
    if (grid.is_discarded()) throw Error(ErrorCode::invalid_grid_axis, a.grid + " is not valid JSON");
    rows = ablation_grid_from_json(grid, base);
  } else {
    rows = default_ablation_grid(base, a.groups);
  }
  for (const auto& r : rows) {
    if (needs_chat_client(r.config.policy) && !e.client) {
      throw Error(ErrorCode::config_conflict, "row '" + r.label + "' needs a chat endpoint (PROVMIND_CHAT_URL) or --mock");
    }
  }
  FrozenGraphAttention structure(e.memory.config.structure_seed);
  const auto prepared = prepare_items(e.items, e.memory, *e.embedder, structure, s.jobs);
  EvalResources resources{e.embedder.get(), e.train, s.jobs, e.split_id};
  const auto result = run_ablation(rows, prepared, e.memory, e.client.get(), resources);
  const std::string table = result.to_text();
  const json extra = s.stamp({{"stage", "ablate"}, {"split", e.split_id}});
  if (!a.out.empty()) write_file(a.out, table);
  if (!a.report.empty()) write_json_artifact(a.report, "provmind-ablation", extra, "rows", result.to_json());
  s.out << table;
  return kExitOk;
}

struct ReportArgs {
  std::string input;
  std::string bench;
};

int run_report(const Session& s, const ReportArgs& a) {
  const std::string content = read_file(a.input);
  const json whole = json::parse(content, nullptr, false);
  if (!whole.is_discarded() && whole.is_object() && whole.contains("header")) {
    const std::string format = whole["header"].value("format", "");
    if (format == "provmind-ablation") {
      s.out << ablation_from_json(whole.at("rows")).to_text();
      return kExitOk;
    }
    if (format == "provmind-eval-report") {
      s.out << eval_report_from_json(whole.at("report")).to_text();
      return kExitOk;
    }
    if (format == "provmind-split-report" || format == "provmind-audit") {
      s.out << whole.dump(2) << "\n";
      return kExitOk;
    }
  }
  if (!whole.is_discarded() && whole.is_object() && whole.value("format", "") == kMemoryFormat) {
    const auto memory = memory_from_json(whole);
    s.out << "memory: split " << memory.split_id << ", " << memory.processes.size() << " processes, "
          << memory.step_library.size() << " steps, " << memory.transition_table.size() << " transitions, "
          << memory.prefix_index.size() << " prefix keys\n";
    return kExitOk;
  }
  const auto file = read_jsonl(a.input);
  const std::string format = file.header.value("format", "");
  if (format == "provmind-eval-log") {
    s.out << eval_report_from_json(file.header.at("report")).to_text();
  } else if (format == std::string(kSplitFormat)) {
    if (a.bench.empty()) throw Error(ErrorCode::config_conflict, "--bench is needed to report a split");
    const auto items = read_benchmark(a.bench);
    s.out << split_report(read_assignment(a.input), items).to_text();
  } else if (format == "provmind-bench") {
    std::map<std::string, std::size_t> counts;
    for (const auto& r : file.records) ++counts[r.value("task", "?")];
    s.out << "benchmark: " << file.records.size() << " items\n";
    for (const auto& [t, n] : counts) s.out << "  " << t << "  " << n << "\n";
  } else {
    s.out << format << ": " << file.records.size() << " records\n";
  }
  return kExitOk;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  if (!args.empty() && args[0].rfind("-", 0) != 0 && !kCommands.count(args[0])) {
    err << "unknown_command: '" << args[0] << "'\n";
    return kExitUsage;
  }

  CLI::App app{"provenance process benchmark and reasoning toolkit", "provmind"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolVersion));

  // Values the option setters point into; they must outlive parsing.
  struct Values {
    std::uint64_t seed = 42;
    std::size_t records = 0;
    double regularity = 0.0;
    int k_options = 4;
    std::string protocol;
    std::string granularity;
    double dev_ratio = 0.1;
    std::uint64_t split_seed = 42;
    std::string policy;
    double lambda = 0.5;
    std::size_t k = 8;
    double alpha = 0.4;
    double beta = 0.3;
    double gamma = 0.3;
    int retries = 1;
    std::size_t in_flight = 4;
  } v;

  std::map<std::string, Options> opts;
  std::map<std::string, CLI::App*> subs;
  auto make = [&](const std::string& name, const std::string& help) {
    CLI::App* sub = app.add_subcommand(name, help);
    Options& o = opts[name];
    sub->add_option("--config", o.config_path, "JSON run config; explicit flags win");
    sub->add_option("--jobs", o.jobs, "worker threads")->check(CLI::PositiveNumber);
    o.bind<std::uint64_t>(sub, "--seed", v.seed, "global seed", [](json& j, const std::uint64_t& x) { j["seed"] = x; });
    subs[name] = sub;
    return sub;
  };

  SynthArgs synth;
  {
    auto* sub = make("synth", "generate a synthetic provenance corpus");
    sub->add_option("--out", synth.out, "graph store to write")->required();
    sub->add_option("--prov-out", synth.prov_out, "also write PROV-JSONLD documents (one per line)");
    auto& o = opts["synth"];
    o.bind<std::size_t>(sub, "--records", v.records, "number of records",
                        [](json& j, const std::size_t& x) { j["synth"]["n_records"] = x; });
    o.bind<double>(sub, "--regularity", v.regularity, "strength of planted regularities in [0,1]",
                   [](json& j, const double& x) { j["synth"]["regularity"] = x; });
  }

  CompileArgs compile;
  {
    auto* sub = make("compile", "compile PROV-JSONLD records into process graphs");
    sub->add_option("--input", compile.input, "file or directory of records")->required();
    sub->add_option("--out", compile.out, "graph store to write")->required();
    sub->add_option("--warnings", compile.warnings, "parse warnings log");
  }

  GenbenchArgs genbench;
  {
    auto* sub = make("genbench", "generate the multiple-choice benchmark");
    sub->add_option("--graphs", genbench.graphs, "graph store")->required();
    sub->add_option("--out", genbench.out, "benchmark file to write")->required();
    sub->add_option("--skips", genbench.skips, "skipped slots log");
    opts["genbench"].bind<int>(sub, "--k", v.k_options, "options per item",
                               [](json& j, const int& x) { j["taskgen"]["k_options"] = x; });
  }

  SplitArgs split;
  auto add_protocol = [&](const std::string& name) {
    auto* sub = subs[name];
    auto& o = opts[name];
    o.bind<std::string>(sub, "--protocol", v.protocol, "random | year | type | dual",
                        [](json& j, const std::string& x) { j["protocol"] = x; });
    o.bind<std::string>(sub, "--granularity", v.granularity, "type-split dev draw: doi | item",
                        [](json& j, const std::string& x) { j["split"]["granularity"] = x; });
    o.bind<double>(sub, "--dev-ratio", v.dev_ratio, "type-split dev fraction",
                   [](json& j, const double& x) { j["split"]["dev_ratio"] = x; });
    o.bind<std::uint64_t>(sub, "--split-seed", v.split_seed, "split seed",
                          [](json& j, const std::uint64_t& x) { j["split"]["seed"] = x; });
  };
  {
    auto* sub = make("split", "assign benchmark items to train/dev/test");
    sub->add_option("--bench", split.bench, "benchmark file")->required();
    sub->add_option("--out", split.out, "split assignment to write")->required();
    sub->add_option("--report", split.report, "split statistics as JSON");
    add_protocol("split");
  }

  AuditArgs audit;
  {
    auto* sub = make("audit", "DOI contamination between splits and gold recoverability");
    sub->add_option("--bench", audit.bench, "benchmark file")->required();
    sub->add_option("--splits", audit.splits, "split assignment files")->delimiter(',');
    sub->add_option("--pairs", audit.pairs, "train:test protocol pairs, e.g. dual:type")->delimiter(',');
    sub->add_option("--graphs", audit.graphs, "graph store; validates every item against its graph");
    sub->add_option("--out", audit.out, "contamination entries as JSON");
  }

  MemoryArgs memory;
  {
    auto* sub = make("build-memory", "build process memory from the train partition");
    sub->add_option("--graphs", memory.graphs, "graph store")->required();
    sub->add_option("--bench", memory.bench, "benchmark file")->required();
    sub->add_option("--split", memory.split, "split assignment whose train partition feeds memory")->required();
    sub->add_option("--out", memory.out, "memory file to write")->required();
  }

  EvalArgs eval;
  EvalArgs ablate;
  auto add_eval = [&](const std::string& name, EvalArgs& e) {
    auto* sub = subs[name];
    auto& o = opts[name];
    sub->add_option("--bench", e.bench, "benchmark file")->required();
    sub->add_option("--split", e.split, "split assignment selecting the evaluated partition");
    sub->add_option("--partition", e.partition, "train | dev | test")->capture_default_str();
    sub->add_option("--train-split", e.train_split, "split whose train partition supplies exemplars");
    sub->add_option("--memory", e.memory, "process memory file");
    sub->add_option("--report", e.report, "machine-readable report");
    sub->add_option("--mock-rules", e.mock_rules, "pattern/response table for the mock chat client");
    sub->add_flag("--mock", e.mock, "use the built-in mock chat client");
    sub->add_flag("--wall-clock", e.wall_clock, "record wall-clock time in the report");
    o.bind<std::string>(sub, "--policy", v.policy, "answer policy",
                        [](json& j, const std::string& x) { j["policy"]["policy"] = x; });
    o.bind<double>(sub, "--lambda", v.lambda, "symbolic share of the fused score",
                   [](json& j, const double& x) { j["policy"]["lambda"] = x; });
    o.bind<std::size_t>(sub, "--k", v.k, "retrieved precedents",
                        [](json& j, const std::size_t& x) { j["policy"]["k"] = x; });
    o.bind<double>(sub, "--alpha", v.alpha, "text view weight",
                   [](json& j, const double& x) { j["policy"]["weights"]["alpha"] = x; });
    o.bind<double>(sub, "--beta", v.beta, "structure view weight",
                   [](json& j, const double& x) { j["policy"]["weights"]["beta"] = x; });
    o.bind<double>(sub, "--gamma", v.gamma, "heuristic view weight",
                   [](json& j, const double& x) { j["policy"]["weights"]["gamma"] = x; });
    o.bind<int>(sub, "--retries", v.retries, "chat retries after a timeout",
                [](json& j, const int& x) { j["policy"]["retries"] = x; });
    o.bind<std::size_t>(sub, "--max-in-flight", v.in_flight, "concurrent chat requests",
                        [](json& j, const std::size_t& x) { j["policy"]["max_in_flight"] = x; });
    o.flag(sub, "--no-planning", "skip the plan call", [](json& j) { j["policy"]["planning"] = false; });
    o.flag(sub, "--no-fallback", "disable the symbolic fallback", [](json& j) { j["policy"]["fallback"] = false; });
    o.flag(sub, "--no-symbolic-scoring", "neural evidence only",
           [](json& j) { j["policy"]["symbolic_scoring"] = false; });
    o.flag(sub, "--uniform-transitions", "replace the transition table with a uniform one",
           [](json& j) { j["policy"]["symbolic"]["uniform_transitions"] = true; });
    o.flag(sub, "--log-prompts", "full prompt text in the item log", [](json& j) { j["policy"]["log_prompts"] = true; });
    return sub;
  };
  {
    make("eval", "evaluate an answer policy");
    auto* sub = add_eval("eval", eval);
    sub->add_option("--log", eval.log, "per-item log (JSONL)");
    sub->add_option("--predictions", eval.predictions, "predictions for the external_predictions policy");
  }
  {
    make("ablate", "run the ablation grid");
    auto* sub = add_eval("ablate", ablate);
    sub->add_option("--out", ablate.out, "aligned table to write");
    sub->add_option("--grid", ablate.grid, "JSON grid of axes; default is the full row set");
    sub->add_option("--groups", ablate.groups, "reference, modules, scoring, retrieval, fusion, topk")->delimiter(',');
  }

  ReportArgs report;
  {
    auto* sub = make("report", "render a stored artifact as text");
    sub->add_option("--input", report.input, "artifact file")->required();
    sub->add_option("--bench", report.bench, "benchmark file (for split reports)");
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    for (const auto& [name, sub] : subs) {
      if (!sub->parsed()) continue;
      const Options& o = opts[name];
      Session s{o.resolve(), o.jobs, out, err};
      if (name == "synth") return run_synth(s, synth);
      if (name == "compile") return run_compile(s, compile);
      if (name == "genbench") return run_genbench(s, genbench);
      if (name == "split") return run_split(s, split);
      if (name == "audit") return run_audit(s, audit);
      if (name == "build-memory") return run_build_memory(s, memory);
      if (name == "eval") return run_eval(s, eval);
      if (name == "ablate") return run_ablate(s, ablate, sub->count("--policy") > 0);
      if (name == "report") return run_report(s, report);
    }
  } catch (const Error& e) {
    err << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const nlohmann::json::exception& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  err << "unknown_command\n";
  return kExitUsage;
}

int dispatch(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return dispatch(args, std::cout, std::cerr);
}

}  // namespace provmind
