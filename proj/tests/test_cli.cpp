// Drives the riskpath executable end to end and checks exit codes, written
// artifacts and printed output.

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <cstdlib>

#include "riskpath/discovery.hpp"
#include "riskpath/json_io.hpp"
#include "riskpath/snapshot.hpp"
#include "riskpath/syngen.hpp"
#include "riskpath/workflow.hpp"
#include "support.hpp"

using namespace riskpath;
using namespace riskpath::testing;

namespace {

struct Outcome {
  int code = -1;
  std::string out;
  std::string err;
};

std::string quote(const std::string& s) {
  std::string q = "'";
  for (char c : s) q += c == '\'' ? std::string("'\\''") : std::string(1, c);
  return q + "'";
}

class CliTest : public ::testing::Test {
 protected:
  Outcome cli(const std::vector<std::string>& args, const std::string& env = "") {
    std::string cmd = env.empty() ? "" : env + " ";
    cmd += quote(RISKPATH_CLI_PATH);
    for (const auto& a : args) cmd += " " + quote(a);
    cmd += " 2>" + quote((dir_ / "stderr.txt").string());
    Outcome o;
    FILE* pipe = ::popen(cmd.c_str(), "r");
    if (!pipe) return o;
    std::array<char, 4096> buf{};
    std::size_t n;
    while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) o.out.append(buf.data(), n);
    const int status = ::pclose(pipe);
    o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    o.err = read_file(dir_ / "stderr.txt");
    return o;
  }

  // Writes a small synthetic corpus and ingests it into `wd`.
  void ingest_corpus(const std::filesystem::path& wd) {
    GenSpec spec;
    spec.n_docs = 200;
    spec.seed = 5;
    spec.entities_per_layer = 50;
    const GeneratedCorpus corpus = generate(spec);
    write_file_atomic(dir_ / "triples.jsonl", corpus.triples_jsonl);
    write_file_atomic(dir_ / "entities.jsonl", corpus.entities_jsonl);
    Outcome o = cli({"ingest", "--triples", (dir_ / "triples.jsonl").string(), "--entities",
                     (dir_ / "entities.jsonl").string(), "--out", wd.string()});
    ASSERT_EQ(o.code, 0) << o.err;
  }

  TempDir dir_{"rp-cli"};
};

const char* kMeta =
    R"({"name":"heatwave","layer":"physical","severity":0.8})"
    "\n"
    R"({"name":"water demand","layer":"social","severity":0.6})"
    "\n"
    R"({"name":"crop prices","layer":"economic","severity":0.7})"
    "\n";

std::string valid_triples(int n) {
  std::string s;
  for (int i = 0; i < n; ++i) {
    s += R"({"s":"heatwave","p":"increases","o":"water demand","doc":"d)" + std::to_string(i) + "\"}\n";
    s += R"({"s":"water demand","p":"raises","o":"crop prices","doc":"d)" + std::to_string(i) + "\"}\n";
  }
  return s;
}

}  // namespace

TEST_F(CliTest, IngestValidFixture) {
  write_file_atomic(dir_ / "t.jsonl", valid_triples(3));
  write_file_atomic(dir_ / "e.jsonl", kMeta);
  Outcome o = cli({"ingest", "--triples", (dir_ / "t.jsonl").string(), "--entities", (dir_ / "e.jsonl").string(),
                   "--out", (dir_ / "wd").string(), "--format", "json"});
  ASSERT_EQ(o.code, 0) << o.err;
  json summary = json::parse(o.out);
  EXPECT_EQ(summary["stats"]["relations"], 2);
  EXPECT_EQ(summary["rejected_records"], 0);
  EXPECT_TRUE(std::filesystem::exists(dir_ / "wd" / files::kSnapshot));
  EXPECT_EQ(load_snapshot(dir_ / "wd" / files::kSnapshot).doc_count(), 3u);
}

TEST_F(CliTest, TooManyMalformedLinesFailsWithRejectionReport) {
  // 3 malformed lines out of 20 is 15%.
  std::string t = valid_triples(8) + valid_triples(1).substr(0, valid_triples(1).find('\n') + 1);
  t += "{broken\nnot json\n{\"s\":\"x\"}\n";
  write_file_atomic(dir_ / "t.jsonl", t);
  write_file_atomic(dir_ / "e.jsonl", kMeta);
  Outcome o = cli({"ingest", "--triples", (dir_ / "t.jsonl").string(), "--entities", (dir_ / "e.jsonl").string(),
                   "--out", (dir_ / "wd").string()});
  EXPECT_EQ(o.code, 1);
  const std::string rejections = read_file(dir_ / "wd" / files::kRejections);
  EXPECT_EQ(std::count(rejections.begin(), rejections.end(), '\n'), 3);
  EXPECT_FALSE(std::filesystem::exists(dir_ / "wd" / files::kSnapshot));
}

TEST_F(CliTest, StrictRejectsUnregisteredEntity) {
  write_file_atomic(dir_ / "t.jsonl", valid_triples(1) + R"({"s":"heatwave","p":"hits","o":"tourism","doc":"d9"})" "\n");
  write_file_atomic(dir_ / "e.jsonl", kMeta);
  const std::vector<std::string> base = {"ingest", "--triples", (dir_ / "t.jsonl").string(), "--entities",
                                         (dir_ / "e.jsonl").string(), "--out", (dir_ / "wd").string()};
  std::vector<std::string> strict = base;
  strict.push_back("--strict");
  Outcome o = cli(strict);
  EXPECT_EQ(o.code, 1);
  EXPECT_NE(read_file(dir_ / "wd" / files::kRejections).find("tourism"), std::string::npos);
  EXPECT_EQ(cli(base).code, 0);
}

TEST_F(CliTest, UsageErrorsExitTwo) {
  EXPECT_EQ(cli({"discover", "--no-such-flag"}).code, 2);
  EXPECT_EQ(cli({"frobnicate"}).code, 2);
  EXPECT_EQ(cli({"discover", "--fmax-mode", "sideways"}).code, 2);
  EXPECT_EQ(cli({"--help"}).code, 0);
}

TEST_F(CliTest, MissingWorkdirArtifactsGiveHint) {
  Outcome o = cli({"discover", "--workdir", (dir_ / "nowhere").string()});
  EXPECT_EQ(o.code, 1);
  EXPECT_NE(o.err.find("riskpath ingest"), std::string::npos) << o.err;
}

TEST_F(CliTest, DiscoverMatchesLibraryAndHonorsFlags) {
  const auto wd = dir_ / "wd";
  ingest_corpus(wd);
  Outcome o = cli({"discover", "-w", wd.string(), "--format", "json"});
  ASSERT_EQ(o.code, 0) << o.err;
  KnowledgeGraph g = load_snapshot(wd / files::kSnapshot);
  ScoringConfig c;
  const json direct = to_json(discover(g, corpus_stats(g), pagerank(g, c), c, {}), g);
  EXPECT_EQ(read_file(wd / files::kPathways), direct.dump(2) + "\n");
  EXPECT_EQ(json::parse(o.out), direct);

  Outcome none = cli({"discover", "-w", wd.string(), "--theta", "1.0", "--format", "json"});
  ASSERT_EQ(none.code, 0) << none.err;
  EXPECT_TRUE(json::parse(none.out)["pathways"].empty());

  Outcome all = cli({"discover", "-w", wd.string(), "--theta", "0", "--top-k", "100000", "--format", "json"});
  Outcome five = cli({"discover", "-w", wd.string(), "--theta", "0", "--top-k", "5", "--format", "json"});
  ASSERT_EQ(five.code, 0) << five.err;
  const json full = json::parse(all.out)["pathways"];
  const json top = json::parse(five.out)["pathways"];
  ASSERT_GT(full.size(), 5u);
  ASSERT_EQ(top.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(top[i], full[i]);
  for (std::size_t i = 5; i < full.size(); ++i) EXPECT_LE(full[i]["score"].get<double>(), top[4]["score"].get<double>());

  Outcome table = cli({"discover", "-w", wd.string(), "--theta", "0", "--top-k", "3"});
  EXPECT_EQ(table.code, 0);
  EXPECT_NE(table.out.find(full[0]["entities"][0].get<std::string>()), std::string::npos);
}

TEST_F(CliTest, JsonOutputsAreSingleDocuments) {
  const auto wd = dir_ / "wd";
  ingest_corpus(wd);
  for (const auto& args : std::vector<std::vector<std::string>>{{"stats"}, {"pagerank"}, {"report", "layers"},
                                                               {"report", "temporal", "--side", "source"}}) {
    std::vector<std::string> full = args;
    for (const char* extra : {"-w", "", "--format", "json"}) full.push_back(extra);
    full[args.size() + 1] = wd.string();
    Outcome o = cli(full);
    ASSERT_EQ(o.code, 0) << args[0] << ": " << o.err;
    EXPECT_TRUE(json::accept(o.out)) << args[0];
  }
}

TEST_F(CliTest, EnvironmentSuppliesDefaultWorkdir) {
  const auto wd = dir_ / "wd";
  ingest_corpus(wd);
  Outcome o = cli({"stats", "--format", "json"}, "RISKPATH_WORKDIR=" + quote(wd.string()));
  ASSERT_EQ(o.code, 0) << o.err;
  EXPECT_EQ(json::parse(o.out)["relations"], load_snapshot(wd / files::kSnapshot).relation_count());
}

TEST_F(CliTest, ExportWithEmptyPathwaySetHasNodesOnly) {
  const auto wd = dir_ / "wd";
  ingest_corpus(wd);
  ASSERT_EQ(cli({"discover", "-w", wd.string(), "--theta", "1.0"}).code, 0);
  Outcome o = cli({"export", "-w", wd.string(), "--format", "dot", "--pathways", (wd / files::kPathways).string()});
  ASSERT_EQ(o.code, 0) << o.err;
  const std::size_t nodes = load_snapshot(wd / files::kSnapshot).entity_count();
  EXPECT_EQ(o.out.rfind("digraph", 0), 0u);
  EXPECT_EQ(o.out.find("->"), std::string::npos);
  std::size_t labels = 0;
  for (std::size_t at = o.out.find("[label="); at != std::string::npos; at = o.out.find("[label=", at + 1)) ++labels;
  EXPECT_EQ(labels, nodes);
}

TEST_F(CliTest, TemporalReportShowsReferenceCells) {
  const auto wd = dir_ / "wd";
  std::filesystem::create_directories(wd);
  save_snapshot(temporal_fixture(kTemporalTable), wd / files::kSnapshot);
  Outcome o = cli({"report", "temporal", "-w", wd.string()});
  ASSERT_EQ(o.code, 0) << o.err;
  for (const char* cell : {"78.0%", "45.0%", "23.0%", "52.0%", "71.0%", "58.0%", "31.0%", "63.0%", "82.0%"})
    EXPECT_NE(o.out.find(cell), std::string::npos) << cell;
}

TEST_F(CliTest, SyngenWritesCorpusAndManifest) {
  Outcome o = cli({"syngen", "--n-docs", "50", "--entities-per-layer", "30", "--plant", "P,S,E:2", "--out",
                   (dir_ / "gen").string()});
  ASSERT_EQ(o.code, 0) << o.err;
  json manifest = parse_json_file(dir_ / "gen" / "manifest.json");
  EXPECT_EQ(manifest["chains"].size(), 1u);
  EXPECT_EQ(manifest["chains"][0]["attestation"], 2);
  EXPECT_TRUE(std::filesystem::exists(dir_ / "gen" / "triples.jsonl"));
  EXPECT_EQ(cli({"syngen", "--plant", "P,X", "--out", (dir_ / "bad").string()}).code, 2);
}

TEST_F(CliTest, PipelineRunThenResumeIsNoOp) {
  GenSpec spec;
  spec.n_docs = 100;
  spec.entities_per_layer = 40;
  GeneratedCorpus corpus = generate(spec);
  write_file_atomic(dir_ / "triples.jsonl", corpus.triples_jsonl);
  write_file_atomic(dir_ / "entities.jsonl", corpus.entities_jsonl);
  write_file_atomic(dir_ / "pipeline.json", R"({"triples":"triples.jsonl","entities":"entities.jsonl"})");
  const auto wd = dir_ / "wd";
  Outcome first = cli({"pipeline", "run", "--config", (dir_ / "pipeline.json").string(), "-w", wd.string(), "--format", "json"});
  ASSERT_EQ(first.code, 0) << first.err;
  EXPECT_EQ(json::parse(first.out)["executed"].size(), 5u);
  const std::string pathways = read_file(wd / files::kPathways);
  Outcome second = cli({"pipeline", "resume", "-w", wd.string(), "--format", "json"});
  ASSERT_EQ(second.code, 0) << second.err;
  EXPECT_TRUE(json::parse(second.out)["executed"].empty());
  EXPECT_EQ(read_file(wd / files::kPathways), pathways);
  EXPECT_EQ(cli({"pipeline", "resume", "-w", (dir_ / "fresh").string()}).code, 1);
}
