#include "latentkg/corpus.hpp"
#include "latentkg/kgraph.hpp"
#include "latentkg/metrics.hpp"
#include "latentkg/patching.hpp"
#include "latentkg/pipeline.hpp"
#include "latentkg/text.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <map>
#include <sstream>

namespace latentkg {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using testing::fixture;
using testing::lines_of;
using testing::slurp;
using testing::TempDir;

struct CliResult {
  int code = 0;
  std::string out;
  std::string err;
};

CliResult cli(std::vector<std::string> args) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

// Relative path -> content hash of every file below `root`.
std::map<std::string, std::uint64_t> tree(const fs::path& root) {
  std::map<std::string, std::uint64_t> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) {
      out[fs::relative(e.path(), root).generic_string()] = fnv1a64(slurp(e.path()));
    }
  }
  return out;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

Verdict verdict_from(const std::string& s) {
  return s == "true" ? Verdict::kTrue : s == "false" ? Verdict::kFalse : Verdict::kInvalid;
}

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(cli({}).code, 2);
  EXPECT_EQ(cli({"no-such-stage"}).code, 2);
  TempDir dir("cli-usage");
  EXPECT_EQ(cli({"ingest", "--out", dir.path().string()}).code, 2);  // no --dataset
  EXPECT_EQ(cli({"graph", "--out", dir.path().string(), "--quantile", "0"}).code, 2);
  EXPECT_EQ(cli({"graph", "--out", dir.path().string(), "--model", "gpt"}).code, 2);
  EXPECT_EQ(cli({"plan", "--out", dir.path().string(), "--model", "external-trace"}).code, 2);
  EXPECT_EQ(cli({"--help"}).code, 0);
}

TEST(Cli, MissingArtifactNamesProducer) {
  TempDir dir("cli-missing");
  const CliResult r = cli({"graph", "--out", dir.path().string()});
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("run `latentkg decode` first"), std::string::npos) << r.err;
  const CliResult p = cli({"prompts", "--out", dir.path().string()});
  EXPECT_EQ(p.code, 3);
  EXPECT_NE(p.err.find("run `latentkg ingest` first"), std::string::npos) << p.err;
}

TEST(Cli, NoUsableClaimsExitFour) {
  TempDir dir("cli-degenerate");
  std::ofstream(dir / "claims.jsonl")
      << R"({"id": "a", "claim": "Too short.", "label": "SUPPORTS"})" << "\n";
  const CliResult r = cli({"run-all", "--dataset", (dir / "claims.jsonl").string(), "--out",
                     (dir / "out").string()});
  EXPECT_EQ(r.code, 4) << r.err;
}

TEST(Cli, ConfigFilePrecedence) {
  TempDir dir("cli-config");
  std::ofstream(dir / "cfg.json") << R"({"quantile": 0.5, "seed": 3, "feature": "mean"})";
  const CliResult r = cli({"ingest", "--config", (dir / "cfg.json").string(), "--seed", "9",
                     "--dataset", fixture("claims10.jsonl").string(), "--out",
                     (dir / "out").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const json c = json::parse(slurp(dir / "out/config.json"));
  EXPECT_EQ(c["quantile"], 0.5);
  EXPECT_EQ(c["seed"], 9);
  EXPECT_EQ(c["feature"], "mean");
  EXPECT_EQ(c["layers"], 4);

  std::ofstream(dir / "bad.json") << R"({"quantle": 0.5})";
  const CliResult bad = cli({"ingest", "--config", (dir / "bad.json").string(), "--dataset",
                       fixture("claims10.jsonl").string(), "--out", (dir / "out").string()});
  EXPECT_EQ(bad.code, 3);
  EXPECT_NE(bad.err.find("'quantle'"), std::string::npos) << bad.err;
}

class ToyRun : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new TempDir("cli-toy");
    first_ = cli({"run-all", "--dataset", fixture("claims10.jsonl").string(), "--out",
                  (*dir_ / "a").string()});
  }
  static void TearDownTestSuite() { delete dir_; }

  static fs::path out() { return *dir_ / "a"; }

  static TempDir* dir_;
  static CliResult first_;
};

TempDir* ToyRun::dir_ = nullptr;
CliResult ToyRun::first_;

TEST_F(ToyRun, ProducesEveryArtifact) {
  ASSERT_EQ(first_.code, 0) << first_.err;
  for (const char* p : {"config.json", "claims.jsonl", "prompts", "traces", "plans", "outputs",
                        "decoded/summary.csv", "graphs", "similarity/series.csv",
                        "cluster/clusters.csv", "cluster/summary.json",
                        "metrics/predictions.csv", "metrics/report.csv", "metrics/table.txt",
                        "report.txt"}) {
    EXPECT_TRUE(fs::exists(out() / p)) << p;
  }
  EXPECT_EQ(lines_of(out() / "claims.jsonl").size(), 10u);
  // One output record for inference plus one per layer 1..L.
  EXPECT_EQ(lines_of(out() / "outputs/c01.jsonl").size(), 5u);
  EXPECT_EQ(lines_of(out() / "decoded/summary.csv").front(), "claim_id,layer,valid,reason,label");
  EXPECT_EQ(lines_of(out() / "similarity/series.csv").front(), "claim_id,layer,value");
  EXPECT_EQ(lines_of(out() / "cluster/clusters.csv").front(),
            "layer,cluster_id,mean_similarity,std_similarity");
}

TEST_F(ToyRun, RerunIsIdempotent) {
  ASSERT_EQ(first_.code, 0) << first_.err;
  const auto before = tree(out());
  const CliResult again = cli({"run-all", "--dataset", fixture("claims10.jsonl").string(), "--out",
                         out().string()});
  ASSERT_EQ(again.code, 0) << again.err;
  for (const char* stage : {"ingest", "prompts", "trace", "plan", "patch-sweep", "decode",
                            "graph", "similarity", "cluster", "metrics", "report"}) {
    EXPECT_NE(again.out.find(std::string(stage) + ": up to date"), std::string::npos) << stage;
  }
  EXPECT_EQ(tree(out()), before);
}

TEST_F(ToyRun, DeterministicAcrossJobCounts) {
  ASSERT_EQ(first_.code, 0) << first_.err;
  const CliResult b = cli({"run-all", "--dataset", fixture("claims10.jsonl").string(), "--out",
                     (*dir_ / "b").string(), "--jobs", "3"});
  ASSERT_EQ(b.code, 0) << b.err;
  EXPECT_EQ(tree(*dir_ / "b"), tree(out()));
}

TEST_F(ToyRun, ConfigChangeInvalidatesDownstreamOnly) {
  ASSERT_EQ(first_.code, 0) << first_.err;
  fs::copy(out(), *dir_ / "c", fs::copy_options::recursive);
  const CliResult r = cli({"run-all", "--dataset", fixture("claims10.jsonl").string(), "--out",
                     (*dir_ / "c").string(), "--quantile", "0.5"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("similarity: up to date"), std::string::npos);
  EXPECT_EQ(r.out.find("cluster: up to date"), std::string::npos);
}

TEST_F(ToyRun, ReportMatchesRecomputedMetrics) {
  ASSERT_EQ(first_.code, 0) << first_.err;
  std::map<std::string, bool> gold;
  for (const auto& c : load_claims(fixture("claims10.jsonl"))) {
    gold[c.id] = c.gold == GoldLabel::kSupported;
  }
  std::vector<LabeledPrediction> inference;
  std::vector<LabeledPrediction> latent;
  std::vector<RunLabels> runs;
  for (const auto& [id, g] : gold) {
    RunLabels run{id, Verdict::kInvalid, {}};
    for (const auto& r : read_output_records(out() / "outputs" / (id + ".jsonl"))) {
      const Verdict v = verdict_of(parse_structured(r.text));
      if (r.layer == kInferenceLayer) {
        run.inference = v;
      } else {
        run.layers[r.layer] = v;
      }
    }
    inference.push_back({id, g, run.inference, std::nullopt});
    latent.push_back({id, g, majority_label(run.layers), std::nullopt});
    runs.push_back(run);
  }
  const std::string want = report_csv_header() +
                           report_csv_row("inference", compute_report(inference, runs)) +
                           report_csv_row("latent", compute_report(latent, runs));
  EXPECT_EQ(slurp(out() / "metrics/report.csv"), want);

  const auto rows = lines_of(out() / "metrics/predictions.csv");
  ASSERT_EQ(rows.size(), 11u);
  EXPECT_EQ(rows[0], "claim_id,gold,inference,latent,self_consistency");
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto cells = split(rows[i]);
    ASSERT_EQ(cells.size(), 5u) << rows[i];
    EXPECT_EQ(cells[1] == "true", gold.at(cells[0]));
    EXPECT_EQ(verdict_from(cells[2]), inference[i - 1].predicted);
    EXPECT_EQ(verdict_from(cells[3]), latent[i - 1].predicted);
  }
}

// Writes the fixture generations as per-claim output files.
void write_fixture_outputs(const fs::path& out) {
  std::map<std::string, std::vector<OutputRecord>> by_claim;
  for (const auto& line : lines_of(fixture("layer_outputs_3claims.jsonl"))) {
    const json j = json::parse(line);
    by_claim[std::to_string(j["claim"].get<int>())].push_back(
        {j["layer"].get<int>(), j["text"].get<std::string>(), std::nullopt});
  }
  fs::create_directories(out / "outputs");
  for (const auto& [id, records] : by_claim) {
    write_output_records(out / "outputs" / (id + ".jsonl"), records);
  }
}

TEST(Cli, DecodeAndGraphLayerFixture) {
  TempDir dir("cli-layers");
  write_fixture_outputs(dir.path());
  const std::string out = dir.path().string();
  ASSERT_EQ(cli({"decode", "--out", out}).code, 0);
  const CliResult g = cli({"graph", "--out", out});
  ASSERT_EQ(g.code, 0) << g.err;
  ASSERT_EQ(cli({"similarity", "--out", out}).code, 0);

  std::map<std::string, int> valid_rows;
  for (const auto& line : lines_of(dir / "decoded/summary.csv")) {
    const auto cells = split(line);
    if (cells[2] == "true") valid_rows[cells[0]]++;
  }
  EXPECT_EQ(valid_rows["1"], 21);
  EXPECT_EQ(valid_rows["2"], 17);
  EXPECT_EQ(valid_rows["3"], 16);

  const TemporalKG tkg = temporal_from_json(slurp(dir / "graphs/1.json"));
  EXPECT_EQ(tkg.per_layer.size(), 21u);
  EXPECT_EQ(tkg.gaps.size(), 12u);
  EXPECT_TRUE(fs::exists(dir / "graphs/1.dot"));
  EXPECT_TRUE(fs::exists(dir / "similarity/matrix_1.csv"));
}

TEST(Cli, DecodeExporterOutputsInExternalMode) {
  TempDir dir("cli-exporter");
  fs::create_directories(dir / "outputs");
  fs::copy_file(fixture("exporter_outputs.jsonl"), dir / "outputs/claim7.jsonl");
  const CliResult r = cli({"decode", "--out", dir.path().string(), "--model", "external-trace",
                     "--traces", fixture("exporter_trace").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(lines_of(dir / "decoded/summary.csv"),
            (std::vector<std::string>{"claim_id,layer,valid,reason,label",
                                      "claim7,inference,true,,true",
                                      "claim7,1,false,no-object,",
                                      "claim7,2,true,,true"}));
  const auto decoded = read_output_records(dir / "decoded/claim7.jsonl");
  ASSERT_EQ(decoded.size(), 3u);
  EXPECT_EQ(decoded[1].valid, false);
  EXPECT_EQ(decoded[2].valid, true);
  EXPECT_EQ(cli({"patch-sweep", "--out", dir.path().string(), "--model", "external-trace",
                 "--traces", fixture("exporter_trace").string()})
                .code,
            2);
}

}  // namespace
}  // namespace latentkg
