#include <gtest/gtest.h>

#include <sstream>

#include <nlohmann/json.hpp>

#include "provmind/cli.hpp"
#include "provmind/io.hpp"
#include "provmind/provgraph.hpp"
#include "provmind/splitter.hpp"
#include "test_support.hpp"

using namespace provmind;
using nlohmann::json;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = dispatch(args, out, err);
  return {code, out.str(), err.str()};
}

// One small pipeline shared by the tests below.
class Pipeline : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir = new testsupport::TempDir("cli");
    ASSERT_EQ(run({"synth", "--records", "120", "--seed", "42", "--out", f("graphs.jsonl"), "--prov-out", f("prov.jsonl")}).code, 0);
    ASSERT_EQ(run({"genbench", "--graphs", f("graphs.jsonl"), "--out", f("bench.jsonl"), "--jobs", "2"}).code, 0);
    for (const std::string p : {"random", "year", "type", "dual"}) {
      ASSERT_EQ(run({"split", "--bench", f("bench.jsonl"), "--protocol", p, "--out", f(p + ".jsonl")}).code, 0);
    }
    ASSERT_EQ(run({"build-memory", "--graphs", f("graphs.jsonl"), "--bench", f("bench.jsonl"), "--split", f("year.jsonl"),
                   "--out", f("memory.json")})
                  .code,
              0);
  }
  static void TearDownTestSuite() {
    delete dir;
    dir = nullptr;
  }
  static std::string f(const std::string& name) { return dir->file(name); }
  static testsupport::TempDir* dir;
};

testsupport::TempDir* Pipeline::dir = nullptr;

}  // namespace

TEST(Dispatch, UnknownCommand) {
  const auto r = run({"frobnicate"});
  EXPECT_EQ(r.code, kExitUsage);
  EXPECT_NE(r.err.find("unknown_command"), std::string::npos);
  EXPECT_EQ(run({}).code, kExitUsage);
}

TEST(Dispatch, ExitCodes) {
  EXPECT_EQ(exit_code_for(ErrorCode::config_conflict), kExitUsage);
  EXPECT_EQ(exit_code_for(ErrorCode::invalid_grid_axis), kExitUsage);
  EXPECT_EQ(exit_code_for(ErrorCode::io_error), kExitData);
  EXPECT_EQ(exit_code_for(ErrorCode::gold_mismatch), kExitData);
  EXPECT_EQ(exit_code_for(ErrorCode::client_timeout), kExitEndpoint);
  EXPECT_EQ(exit_code_for(ErrorCode::embedder_unavailable), kExitEndpoint);
}

TEST(Dispatch, MissingRequiredOption) {
  EXPECT_EQ(run({"synth"}).code, kExitUsage);
  EXPECT_EQ(run({"genbench", "--graphs", "/nonexistent/g.jsonl", "--out", "/tmp/x"}).code, kExitData);
}

TEST(Dispatch, ConfigFile) {
  testsupport::TempDir d("cfg");
  write_file(d.file("bad.json"), R"({"seed": 1, "colour": "blue"})");
  const auto bad = run({"synth", "--config", d.file("bad.json"), "--out", d.file("g.jsonl")});
  EXPECT_EQ(bad.code, kExitUsage);
  EXPECT_NE(bad.err.find("colour"), std::string::npos);

  // explicit flags win over the file
  write_file(d.file("ok.json"), R"({"seed": 5, "synth": {"n_records": 10}})");
  ASSERT_EQ(run({"synth", "--config", d.file("ok.json"), "--records", "12", "--out", d.file("g.jsonl")}).code, 0);
  EXPECT_EQ(read_graph_store(d.file("g.jsonl")).size(), 12u);
}

TEST_F(Pipeline, ArtifactsCarryProvenance) {
  for (const std::string name : {"graphs.jsonl", "bench.jsonl", "year.jsonl"}) {
    const auto file = read_jsonl(f(name));
    EXPECT_EQ(file.header.value("tool_version", ""), std::string(kToolVersion)) << name;
    EXPECT_EQ(file.header.value("run_config_hash", "").size(), 16u) << name;
  }
  const json mem = json::parse(read_file(f("memory.json")));
  EXPECT_EQ(mem.dump().find("run_config_hash") != std::string::npos, true);
}

TEST_F(Pipeline, CompileRoundTripsProvExport) {
  ASSERT_EQ(run({"compile", "--input", f("prov.jsonl"), "--out", f("compiled.jsonl"), "--warnings", f("w.jsonl")}).code, 0);
  const auto original = read_graph_store(f("graphs.jsonl"));
  const auto compiled = read_graph_store(f("compiled.jsonl"));
  ASSERT_EQ(compiled.size(), original.size());
  for (std::size_t i = 0; i < original.size(); ++i) {
    EXPECT_EQ(compiled[i].record_id, original[i].record_id);
    EXPECT_EQ(compiled[i].activities.size(), original[i].activities.size());
  }
}

TEST_F(Pipeline, EvalOfflinePolicies) {
  // symbolic policies need no endpoint
  const auto sym = run({"eval", "--bench", f("bench.jsonl"), "--split", f("year.jsonl"), "--memory", f("memory.json"),
                        "--policy", "argmax_hybrid", "--report", f("report.json"), "--log", f("log.jsonl")});
  ASSERT_EQ(sym.code, 0) << sym.err;
  EXPECT_NE(sym.out.find("Overall"), std::string::npos) << sym.out;
  const json rep = json::parse(read_file(f("report.json")));
  EXPECT_EQ(rep["header"]["format"], "provmind-eval-report");
  EXPECT_FALSE(rep["header"].contains("wall_clock_seconds"));

  const auto shown = run({"report", "--input", f("report.json")});
  EXPECT_EQ(shown.code, 0);
  const auto from_log = run({"report", "--input", f("log.jsonl")});
  EXPECT_EQ(from_log.code, 0);
  EXPECT_EQ(shown.out, from_log.out);
}

TEST_F(Pipeline, LlmPolicyNeedsClient) {
  const auto r = run({"eval", "--bench", f("bench.jsonl"), "--split", f("year.jsonl"), "--memory", f("memory.json"),
                      "--policy", "provmind_llm"});
  if (std::getenv("PROVMIND_CHAT_URL")) GTEST_SKIP() << "a chat endpoint is configured";
  EXPECT_EQ(r.code, kExitUsage);
  const auto mocked = run({"eval", "--bench", f("bench.jsonl"), "--split", f("year.jsonl"), "--memory", f("memory.json"),
                           "--policy", "provmind_llm", "--mock", "--jobs", "3"});
  EXPECT_EQ(mocked.code, 0) << mocked.err;
}

TEST_F(Pipeline, BadLambdaIsUsageError) {
  const auto r = run({"eval", "--bench", f("bench.jsonl"), "--split", f("year.jsonl"), "--memory", f("memory.json"),
                      "--policy", "argmax_hybrid", "--lambda", "1.5"});
  EXPECT_EQ(r.code, kExitUsage);
}

TEST_F(Pipeline, AuditPairs) {
  const auto r = run({"audit", "--bench", f("bench.jsonl"), "--splits",
                      f("random.jsonl") + "," + f("year.jsonl") + "," + f("type.jsonl") + "," + f("dual.jsonl"), "--pairs",
                      "dual:dual,dual:type,dual:year", "--out", f("audit.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("contamination(dual-train, dual-test) = 0.000"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("contamination(dual-train, type-test) = 0.000"), std::string::npos);
  EXPECT_NE(r.out.find("contamination(dual-train, year-test) = 0.000"), std::string::npos);
  const json doc = json::parse(read_file(f("audit.json")));
  for (const auto& e : doc["contamination"]) EXPECT_DOUBLE_EQ(e["value"].get<double>(), 0.0);

  const auto matrix = run({"audit", "--bench", f("bench.jsonl"), "--splits", f("random.jsonl") + "," + f("dual.jsonl")});
  EXPECT_EQ(matrix.code, 0);
  EXPECT_NE(matrix.out.find("contamination(random-train, random-test)"), std::string::npos);

  const auto validity = run({"audit", "--bench", f("bench.jsonl"), "--graphs", f("graphs.jsonl")});
  EXPECT_EQ(validity.code, 0) << validity.err;
  EXPECT_NE(validity.out.find("validity:"), std::string::npos);
}

TEST_F(Pipeline, ExternalPredictions) {
  const auto items = read_benchmark(f("bench.jsonl"));
  std::string lines;
  for (const auto& it : items) lines += json{{"item_id", it.item_id}, {"answer", it.gold_index}}.dump() + "\n";
  write_file(f("preds.jsonl"), lines);
  const auto r = run({"eval", "--bench", f("bench.jsonl"), "--policy", "external_predictions", "--predictions",
                      f("preds.jsonl"), "--report", f("ext.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  const json rep = json::parse(read_file(f("ext.json")));
  EXPECT_DOUBLE_EQ(rep["report"]["overall"]["accuracy"].get<double>(), 1.0);
}

TEST_F(Pipeline, AblateWithMock) {
  const auto r = run({"ablate", "--bench", f("bench.jsonl"), "--split", f("year.jsonl"), "--memory", f("memory.json"),
                      "--mock", "--groups", "scoring", "--report", f("ablate.json"), "--out", f("ablate.txt")});
  ASSERT_EQ(r.code, 0) << r.err;
  const json doc = json::parse(read_file(f("ablate.json")));
  EXPECT_EQ(doc["rows"].size(), 5u);
  EXPECT_EQ(read_file(f("ablate.txt")), r.out);
  EXPECT_EQ(run({"report", "--input", f("ablate.json")}).out, r.out);

  testsupport::TempDir d("grid");
  write_file(d.file("grid.json"), R"({"bogus": [1, 2]})");
  EXPECT_EQ(run({"ablate", "--bench", f("bench.jsonl"), "--split", f("year.jsonl"), "--memory", f("memory.json"), "--mock",
                 "--grid", d.file("grid.json")})
                .code,
            kExitUsage);
}

TEST_F(Pipeline, ReportOnBenchAndSplit) {
  const auto b = run({"report", "--input", f("bench.jsonl")});
  EXPECT_EQ(b.code, 0);
  EXPECT_NE(b.out.find("benchmark:"), std::string::npos);
  EXPECT_EQ(run({"report", "--input", f("year.jsonl")}).code, kExitUsage);
  EXPECT_EQ(run({"report", "--input", f("year.jsonl"), "--bench", f("bench.jsonl")}).code, 0);
  const auto m = run({"report", "--input", f("memory.json")});
  EXPECT_NE(m.out.find("memory: split year"), std::string::npos) << m.out;
}
