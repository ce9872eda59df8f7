#pragma once

// Checkpointed batch pipeline: ingest -> build -> pagerank -> discover ->
// report. Each stage records a fingerprint of exactly the inputs it reads;
// a stage is skipped when its record is done, the fingerprint matches and
// every output still hashes to the recorded value.

#include <chrono>
#include <csignal>
#include <ctime>
#include <fcntl.h>
#include <filesystem>
#include <functional>
#include <ios>
#include <thread>
#include <unistd.h>

#include "riskpath/analysis.hpp"
#include "riskpath/discovery.hpp"
#include "riskpath/json_io.hpp"
#include "riskpath/snapshot.hpp"
#include "riskpath/workflow.hpp"

namespace riskpath {

namespace fs = std::filesystem;

struct RetryConfig {
  int max_retries = 3;
  std::chrono::milliseconds base_delay{50};
  bool operator==(const RetryConfig&) const = default;
};

struct PipelineConfig {
  fs::path triples;
  fs::path entities;
  std::optional<fs::path> aliases;
  std::optional<fs::path> lexicon;
  TripleFormat format = TripleFormat::Jsonl;
  double max_malformed_fraction = 0.10;
  bool strict = false;
  ImpactSide impact_side = ImpactSide::Target;
  ScoringConfig scoring;
  unsigned workers = 0;
  RetryConfig retry;
};

inline json to_json(const PipelineConfig& c) {
  json j = {{"triples", c.triples.string()},
            {"entities", c.entities.string()},
            {"format", c.format == TripleFormat::Jsonl ? "jsonl" : "tsv"},
            {"max_malformed_fraction", c.max_malformed_fraction},
            {"strict", c.strict},
            {"impact_side", c.impact_side == ImpactSide::Target ? "target" : "source"},
            {"scoring", to_json(c.scoring)},
            {"workers", c.workers},
            {"retry", {{"max_retries", c.retry.max_retries}, {"base_delay_ms", c.retry.base_delay.count()}}}};
  if (c.aliases) j["aliases"] = c.aliases->string();
  if (c.lexicon) j["lexicon"] = c.lexicon->string();
  return j;
}

/// Relative input paths are resolved against `base_dir`.
inline PipelineConfig pipeline_config_from_json(const json& j, const fs::path& base_dir) {
  PipelineConfig c;
  auto resolve = [&](const std::string& p) {
    fs::path path(p);
    return path.is_absolute() ? path : fs::absolute(base_dir / path).lexically_normal();
  };
  try {
    c.triples = resolve(j.at("triples").get<std::string>());
    c.entities = resolve(j.at("entities").get<std::string>());
    if (j.contains("aliases")) c.aliases = resolve(j["aliases"].get<std::string>());
    if (j.contains("lexicon")) c.lexicon = resolve(j["lexicon"].get<std::string>());
    std::string format = j.value("format", "jsonl");
    if (format == "jsonl") c.format = TripleFormat::Jsonl;
    else if (format == "tsv") c.format = TripleFormat::Tsv;
    else throw ConfigError("unknown triple format '" + format + "'");
    c.max_malformed_fraction = j.value("max_malformed_fraction", 0.10);
    c.strict = j.value("strict", false);
    std::string side = j.value("impact_side", "target");
    if (side != "target" && side != "source") throw ConfigError("impact_side must be target or source");
    c.impact_side = side == "target" ? ImpactSide::Target : ImpactSide::Source;
    if (j.contains("scoring")) c.scoring = scoring_config_from_json(j["scoring"]);
    c.workers = j.value("workers", 0u);
    if (j.contains("retry")) {
      c.retry.max_retries = j["retry"].value("max_retries", 3);
      c.retry.base_delay = std::chrono::milliseconds(j["retry"].value("base_delay_ms", 50));
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("pipeline config: ") + e.what());
  }
  if (c.retry.max_retries < 0) throw ConfigError("pipeline config: max_retries must be >= 0");
  return c;
}

// ---------------------------------------------------------------------------
// Retry policy

enum class ErrorClass { Transient, Permanent };

/// I/O failures are transient; validation, configuration and everything
/// else is permanent.
inline ErrorClass classify(const std::exception& e) {
  if (dynamic_cast<const TransientError*>(&e) || dynamic_cast<const fs::filesystem_error*>(&e) ||
      dynamic_cast<const std::ios_base::failure*>(&e))
    return ErrorClass::Transient;
  return ErrorClass::Permanent;
}

struct RetryDecision {
  bool retry = false;
  std::chrono::milliseconds delay{0};
};

/// `attempts` is the number of attempts already made, including the one that
/// just failed.
inline RetryDecision retry_policy(ErrorClass error, int attempts, const RetryConfig& config) {
  if (error == ErrorClass::Permanent || attempts > config.max_retries) return {};
  return {true, config.base_delay * (1LL << std::min(attempts - 1, 20))};
}

// ---------------------------------------------------------------------------
// Manifest

enum class StageStatus { Pending, Done, Failed };

inline std::string_view to_string(StageStatus s) {
  switch (s) {
    case StageStatus::Pending: return "pending";
    case StageStatus::Done: return "done";
    case StageStatus::Failed: return "failed";
  }
  return "?";
}

struct StageRecord {
  std::string stage_name;
  std::string input_fingerprint;
  std::vector<std::string> output_paths;  // relative to the workdir
  std::vector<std::string> output_fingerprints;
  StageStatus status = StageStatus::Pending;
  int attempts = 0;
  std::string error;

  bool operator==(const StageRecord&) const = default;
};

inline constexpr std::array<const char*, 5> kStages = {"ingest", "build", "pagerank", "discover", "report"};

inline json to_json(const StageRecord& r) {
  json j = {{"stage_name", r.stage_name},
            {"input_fingerprint", r.input_fingerprint},
            {"output_paths", r.output_paths},
            {"output_fingerprints", r.output_fingerprints},
            {"status", std::string(to_string(r.status))},
            {"attempts", r.attempts}};
  if (!r.error.empty()) j["error"] = r.error;
  return j;
}

inline std::vector<StageRecord> manifest_from_json(const json& j) {
  std::vector<StageRecord> records;
  try {
    for (const auto& item : j) {
      StageRecord r;
      r.stage_name = item.at("stage_name").get<std::string>();
      r.input_fingerprint = item.at("input_fingerprint").get<std::string>();
      r.output_paths = item.at("output_paths").get<std::vector<std::string>>();
      r.output_fingerprints = item.at("output_fingerprints").get<std::vector<std::string>>();
      const auto status = item.at("status").get<std::string>();
      r.status = status == "done" ? StageStatus::Done : status == "failed" ? StageStatus::Failed : StageStatus::Pending;
      r.attempts = item.at("attempts").get<int>();
      r.error = item.value("error", "");
      records.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    throw LoadError(std::string("manifest: ") + e.what());
  }
  return records;
}

inline std::string file_fingerprint(const fs::path& path) { return fnv1a_hex(read_file(path)); }

// ---------------------------------------------------------------------------
// Lock file

/// Holds `pipeline.lock` for the lifetime of the object. A lock left behind
/// by a process that no longer exists is taken over.
class WorkdirLock {
 public:
  explicit WorkdirLock(const fs::path& workdir, std::vector<std::string>* warnings = nullptr)
      : path_(workdir / files::kLock) {
    for (int attempt = 0; attempt < 2; ++attempt) {
      int fd = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_EXCL, 0644);
      if (fd >= 0) {
        const std::string body =
            json{{"pid", static_cast<long>(::getpid())}, {"started", static_cast<long long>(std::time(nullptr))}}.dump() + "\n";
        [[maybe_unused]] auto n = ::write(fd, body.data(), body.size());
        ::close(fd);
        return;
      }
      if (errno != EEXIST) throw TransientError("cannot create lock file '" + path_.string() + "'");
      long holder = -1;
      try {
        holder = parse_json_file(path_).at("pid").get<long>();
      } catch (const std::exception&) {
        holder = -1;  // unreadable lock: treat as stale
      }
      if (holder > 0 && holder != static_cast<long>(::getpid()) &&
          (::kill(static_cast<pid_t>(holder), 0) == 0 || errno == EPERM))
        throw ConfigError("workdir is locked by running process " + std::to_string(holder));
      if (warnings) warnings->push_back("removed stale lock left by process " + std::to_string(holder));
      fs::remove(path_);
    }
    throw ConfigError("could not acquire workdir lock");
  }
  ~WorkdirLock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }
  WorkdirLock(const WorkdirLock&) = delete;
  WorkdirLock& operator=(const WorkdirLock&) = delete;

 private:
  fs::path path_;
};

// ---------------------------------------------------------------------------
// Orchestration

struct PipelineHooks {
  /// Called before every stage attempt; may throw to inject faults.
  std::function<void(std::string_view stage, int attempt)> before_attempt;
  /// Called at named points ("<stage>:computed", "<stage>:written");
  /// used to simulate crashes.
  std::function<void(std::string_view point)> checkpoint;
};

struct PipelineSummary {
  std::vector<StageRecord> stages;
  std::vector<std::string> executed;
  std::vector<std::string> skipped;
  std::vector<std::string> warnings;
  bool ok = true;
  std::string failed_stage;
  std::string error;
};

namespace detail {

class PipelineRunner {
 public:
  PipelineRunner(PipelineConfig config, fs::path workdir, PipelineHooks hooks)
      : config_(std::move(config)), dir_(std::move(workdir)), hooks_(std::move(hooks)) {}

  PipelineSummary run() {
    fs::create_directories(dir_);
    WorkdirLock lock(dir_, &summary_.warnings);
    write_if_changed(files::kConfig, to_json(config_).dump(2) + "\n");
    load_manifest();

    // Once a stage executes, every later stage executes too, even if its
    // inputs come out byte-identical.
    bool upstream_ran = false;
    for (const char* stage : kStages) {
      StageRecord& record = record_for(stage);
      const std::string fingerprint = input_fingerprint(stage);
      if (record.status == StageStatus::Done) {
        if (!upstream_ran && record.input_fingerprint == fingerprint && outputs_intact(record)) {
          summary_.skipped.push_back(stage);
          continue;
        }
        if (!upstream_ran && record.input_fingerprint == fingerprint)
          summary_.warnings.push_back(std::string("stage ") + stage + ": outputs missing or modified, demoted to pending");
        record.status = StageStatus::Pending;
      }
      upstream_ran = true;
      if (!execute_with_retry(stage, record, fingerprint)) break;
    }
    summary_.stages = records_;
    return std::move(summary_);
  }

 private:
  StageRecord& record_for(const std::string& stage) {
    for (auto& r : records_)
      if (r.stage_name == stage) return r;
    records_.push_back(StageRecord{stage, "", {}, {}, StageStatus::Pending, 0, ""});
    return records_.back();
  }

  void load_manifest() {
    records_.clear();
    const fs::path path = dir_ / files::kManifest;
    if (fs::exists(path)) {
      try {
        records_ = manifest_from_json(parse_json_file(path));
      } catch (const LoadError& e) {
        summary_.warnings.push_back(std::string("unreadable manifest ignored: ") + e.what());
        records_.clear();
      }
    }
    // Keep manifest order equal to stage order.
    std::vector<StageRecord> ordered;
    for (const char* stage : kStages) {
      auto it = std::find_if(records_.begin(), records_.end(), [&](const StageRecord& r) { return r.stage_name == stage; });
      ordered.push_back(it != records_.end() ? *it : StageRecord{stage, "", {}, {}, StageStatus::Pending, 0, ""});
    }
    records_ = std::move(ordered);
  }

  void save_manifest() {
    json j = json::array();
    for (const auto& r : records_) j.push_back(to_json(r));
    write_if_changed(files::kManifest, j.dump(2) + "\n");
  }

  void write_if_changed(const char* name, const std::string& bytes) {
    const fs::path path = dir_ / name;
    if (fs::exists(path)) {
      try {
        if (read_file(path) == bytes) return;
      } catch (const LoadError&) {
      }
    }
    write_file_atomic(path, bytes);
  }

  bool outputs_intact(const StageRecord& r) const {
    if (r.output_paths.size() != r.output_fingerprints.size()) return false;
    for (std::size_t i = 0; i < r.output_paths.size(); ++i) {
      const fs::path p = dir_ / r.output_paths[i];
      if (!fs::exists(p) || file_fingerprint(p) != r.output_fingerprints[i]) return false;
    }
    return true;
  }

  std::string input_fingerprint(const std::string& stage) const {
    Fnv1a64 h;
    auto field = [&](std::string_view key, const std::string& value) {
      h.update(key);
      h.update("=");
      h.update(value);
      h.update("\n");
    };
    auto file = [&](std::string_view key, const fs::path& p) {
      field(key, fs::exists(p) ? file_fingerprint(p) : std::string("missing"));
    };
    auto num = [](double v) { return json(v).dump(); };
    const ScoringConfig& s = config_.scoring;
    field("stage", stage);
    if (stage == "ingest") {
      file("triples", config_.triples);
      file("entities", config_.entities);
      if (config_.aliases) file("aliases", *config_.aliases);
      if (config_.lexicon) file("lexicon", *config_.lexicon);
      field("format", config_.format == TripleFormat::Jsonl ? "jsonl" : "tsv");
      field("max_malformed_fraction", num(config_.max_malformed_fraction));
      field("strict", config_.strict ? "1" : "0");
    } else if (stage == "build") {
      file("ingest", dir_ / files::kIngest);
    } else if (stage == "pagerank") {
      file("snapshot", dir_ / files::kSnapshot);
      field("damping", num(s.damping));
      field("pr_tolerance", num(s.pr_tolerance));
      field("pr_max_iters", std::to_string(s.pr_max_iters));
    } else if (stage == "discover") {
      file("snapshot", dir_ / files::kSnapshot);
      file("pagerank", dir_ / files::kPagerank);
      json scoring = to_json(s);
      for (const char* k : {"damping", "pr_tolerance", "pr_max_iters"}) scoring.erase(k);
      field("scoring", scoring.dump());
    } else if (stage == "report") {
      file("snapshot", dir_ / files::kSnapshot);
      file("pathways", dir_ / files::kPathways);
      field("impact_side", config_.impact_side == ImpactSide::Target ? "target" : "source");
    }
    return h.hex();
  }

  void checkpoint(const std::string& point) {
    if (hooks_.checkpoint) hooks_.checkpoint(point);
  }

  bool execute_with_retry(const std::string& stage, StageRecord& record, const std::string& fingerprint) {
    record.attempts = 0;
    record.error.clear();
    while (true) {
      ++record.attempts;
      try {
        if (hooks_.before_attempt) hooks_.before_attempt(stage, record.attempts);
        std::vector<std::string> outputs = execute(stage);
        record.output_paths = outputs;
        record.output_fingerprints.clear();
        for (const auto& o : outputs) record.output_fingerprints.push_back(file_fingerprint(dir_ / o));
        record.input_fingerprint = fingerprint;
        record.status = StageStatus::Done;
        save_manifest();
        summary_.executed.push_back(stage);
        return true;
      } catch (const std::exception& e) {
        RetryDecision decision = retry_policy(classify(e), record.attempts, config_.retry);
        if (decision.retry) {
          summary_.warnings.push_back("stage " + stage + " attempt " + std::to_string(record.attempts) +
                                      " failed (transient): " + e.what());
          std::this_thread::sleep_for(decision.delay);
          continue;
        }
        record.status = StageStatus::Failed;
        record.error = e.what();
        record.input_fingerprint = fingerprint;
        record.output_paths.clear();
        record.output_fingerprints.clear();
        save_manifest();
        summary_.ok = false;
        summary_.failed_stage = stage;
        summary_.error = e.what();
        return false;
      }
    }
  }

  std::vector<std::string> execute(const std::string& stage) {
    if (stage == "ingest") return run_ingest();
    if (stage == "build") return run_build();
    if (stage == "pagerank") return run_pagerank();
    if (stage == "discover") return run_discover();
    return run_report();
  }

  std::vector<std::string> run_ingest() {
    IngestInputs in;
    in.triples = config_.triples;
    in.entities = config_.entities;
    in.aliases = config_.aliases;
    in.lexicon = config_.lexicon;
    in.format = config_.format;
    in.parse.max_malformed_fraction = config_.max_malformed_fraction;
    in.strict = config_.strict;
    IngestOutcome outcome = ingest_files(in);
    json entities = json::array(), relations = json::array();
    for (const auto& e : outcome.aggregate.entities) entities.push_back(to_json(e));
    for (const auto& r : outcome.aggregate.relations) relations.push_back(to_json(r));
    json doc = {{"entities", entities},
                {"relations", relations},
                {"doc_count", outcome.aggregate.stats.doc_count},
                {"unregistered", outcome.unregistered},
                {"warnings", outcome.aggregate.warnings}};
    checkpoint("ingest:computed");
    write_file_atomic(dir_ / files::kRejections, report_to_jsonl(outcome.report()));
    write_file_atomic(dir_ / files::kIngest, doc.dump(1) + "\n");
    checkpoint("ingest:written");
    return {files::kIngest, files::kRejections};
  }

  std::vector<std::string> run_build() {
    const json doc = parse_json_file(dir_ / files::kIngest);
    std::vector<Entity> entities;
    std::vector<Relation> relations;
    try {
      for (const auto& e : doc.at("entities")) entities.push_back(entity_from_json(e));
      for (const auto& r : doc.at("relations")) relations.push_back(relation_from_json(r));
    } catch (const json::exception& e) {
      throw LoadError(std::string("ingest output: ") + e.what());
    }
    KnowledgeGraph g = build_graph(std::move(entities), std::move(relations));
    checkpoint("build:computed");
    save_snapshot(g, dir_ / files::kSnapshot);
    checkpoint("build:written");
    return {files::kSnapshot};
  }

  std::vector<std::string> run_pagerank() {
    KnowledgeGraph g = load_snapshot(dir_ / files::kSnapshot);
    CentralityScores scores = pagerank(g, config_.scoring);
    checkpoint("pagerank:computed");
    write_file_atomic(dir_ / files::kPagerank, to_json(scores, g, config_.scoring).dump(1) + "\n");
    checkpoint("pagerank:written");
    return {files::kPagerank};
  }

  std::vector<std::string> run_discover() {
    KnowledgeGraph g = load_snapshot(dir_ / files::kSnapshot);
    CentralityScores centrality = centrality_from_json(parse_json_file(dir_ / files::kPagerank), g);
    DiscoveryOptions options;
    options.workers = config_.workers;
    DiscoveryResult result = discover(g, corpus_stats(g), centrality, config_.scoring, options);
    checkpoint("discover:computed");
    write_file_atomic(dir_ / files::kPathways, to_json(result, g).dump(2) + "\n");
    checkpoint("discover:written");
    return {files::kPathways};
  }

  std::vector<std::string> run_report() {
    KnowledgeGraph g = load_snapshot(dir_ / files::kSnapshot);
    const json pathways = parse_json_file(dir_ / files::kPathways);
    TemporalReport temporal = temporal_distribution(g, config_.impact_side);
    LayerDistribution layers = layer_distribution(g);
    json report = {{"stats", to_json(graph_stats(g))},
                   {"temporal", to_json(temporal)},
                   {"layers", to_json(layers)},
                   {"pathway_count", pathways.at("pathways").size()}};
    std::string text = format_temporal_table(temporal) + "\n" + format_layer_table(layers) + "\n";
    for (const auto& p : pathways.at("pathways")) {
      std::string chain;
      for (const auto& name : p.at("entities")) chain += (chain.empty() ? "" : " -> ") + name.get<std::string>();
      char score[32];
      std::snprintf(score, sizeof score, "%.4f  ", p.at("score").get<double>());
      text += score + chain + "\n";
    }
    checkpoint("report:computed");
    write_file_atomic(dir_ / files::kReport, report.dump(2) + "\n");
    write_file_atomic(dir_ / files::kReportText, text);
    checkpoint("report:written");
    return {files::kReport, files::kReportText};
  }

  PipelineConfig config_;
  fs::path dir_;
  PipelineHooks hooks_;
  std::vector<StageRecord> records_;
  PipelineSummary summary_;
};

}  // namespace detail

inline PipelineSummary run(const PipelineConfig& config, const fs::path& workdir, const PipelineHooks& hooks = {}) {
  config.scoring.validate();
  return detail::PipelineRunner(config, workdir, hooks).run();
}

/// Continues a previous run using the config stored in the workdir.
inline PipelineSummary resume(const fs::path& workdir, const PipelineHooks& hooks = {}) {
  if (!fs::exists(workdir / files::kManifest) && !fs::exists(workdir / files::kConfig))
    throw ConfigError("nothing to resume in '" + workdir.string() + "': no manifest");
  if (!fs::exists(workdir / files::kConfig))
    throw ConfigError("cannot resume '" + workdir.string() + "': config.json missing");
  PipelineConfig config = pipeline_config_from_json(parse_json_file(workdir / files::kConfig), workdir);
  return run(config, workdir, hooks);
}

}  // namespace riskpath
