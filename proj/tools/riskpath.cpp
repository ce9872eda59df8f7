// riskpath command-line tool. Every subcommand is a thin binding over the
// library; exit status is 0 on success, 1 on data or validation failure and
// 2 on usage errors.

#include <cstdio>
#include <cstdlib>
#include <numeric>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "riskpath/dot_export.hpp"
#include "riskpath/pipeline.hpp"
#include "riskpath/syngen.hpp"

namespace fs = std::filesystem;
using namespace riskpath;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitData = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string default_workdir() {
  const char* env = std::getenv("RISKPATH_WORKDIR");
  return env && *env ? env : ".";
}

void note(const std::string& msg) { std::cerr << "riskpath: " << msg << '\n'; }

void emit_json(const json& j) { std::cout << j.dump(2) << '\n'; }

fs::path require_artifact(const fs::path& workdir, const char* name, const char* hint) {
  fs::path p = workdir / name;
  if (!fs::exists(p)) throw LoadError("missing " + p.string() + " (" + hint + ")");
  return p;
}

KnowledgeGraph load_workdir_graph(const fs::path& workdir) {
  return load_snapshot(require_artifact(workdir, files::kSnapshot, "run `riskpath ingest --out <workdir>` first"));
}

std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

// Scoring flags shared by pagerank and discover. Unset flags leave the base
// configuration (defaults or --config file) untouched.
struct ScoringFlags {
  std::string config_file;
  std::optional<double> alpha, beta, gamma, theta, damping, tolerance;
  std::optional<int> d_max, top_k, max_iters;
  std::string fmax_mode, freq_mode;
  bool no_prune = false;
  bool undirected = false;

  void add_pagerank(CLI::App* app) {
    app->add_option("--damping", damping, "PageRank damping factor");
    app->add_option("--tolerance", tolerance, "PageRank L1 convergence tolerance");
    app->add_option("--max-iters", max_iters, "PageRank iteration cap");
  }

  void add_discovery(CLI::App* app) {
    app->add_option("--config", config_file, "JSON scoring config; flags override it");
    app->add_option("--alpha", alpha, "weight of literature frequency");
    app->add_option("--beta", beta, "weight of cross-layer connectivity");
    app->add_option("--gamma", gamma, "weight of impact potential");
    app->add_option("--theta", theta, "novelty threshold (strict)");
    app->add_option("--d-max", d_max, "maximum pathway length in relations");
    app->add_option("--top-k", top_k, "number of pathways to keep");
    app->add_option("--fmax-mode", fmax_mode, "pathway-max or edge-max")->check(CLI::IsMember({"pathway-max", "edge-max"}));
    app->add_option("--freq-mode", freq_mode, "relations or entities")->check(CLI::IsMember({"relations", "entities"}));
    app->add_flag("--no-prune", no_prune, "disable bound-based pruning in edge-max mode");
    app->add_flag("--undirected", undirected, "traverse relations in both directions");
    add_pagerank(app);
  }

  ScoringConfig resolve() const {
    ScoringConfig c = config_file.empty() ? ScoringConfig{} : load_scoring_config(config_file);
    if (alpha) c.alpha = *alpha;
    if (beta) c.beta = *beta;
    if (gamma) c.gamma = *gamma;
    if (theta) c.theta_novelty = *theta;
    if (d_max) c.d_max = *d_max;
    if (top_k) c.top_k = *top_k;
    if (damping) c.damping = *damping;
    if (tolerance) c.pr_tolerance = *tolerance;
    if (max_iters) c.pr_max_iters = *max_iters;
    if (!fmax_mode.empty()) c.fmax_mode = *parse_fmax_mode(fmax_mode);
    if (!freq_mode.empty()) c.freq_mode = *parse_freq_mode(freq_mode);
    if (no_prune) c.prune = false;
    if (undirected) c.undirected = true;
    try {
      c.validate();
    } catch (const ConfigError& e) {
      throw UsageError(e.what());
    }
    return c;
  }
};

/// Reuses pagerank.json when it was produced with the same parameters.
CentralityScores centrality_for(const KnowledgeGraph& g, const fs::path& workdir, const ScoringConfig& c) {
  const fs::path p = workdir / files::kPagerank;
  if (fs::exists(p)) {
    json j = parse_json_file(p);
    if (j.value("damping", -1.0) == c.damping && j.value("tolerance", -1.0) == c.pr_tolerance &&
        j.value("max_iters", -1) == c.pr_max_iters) {
      try {
        return centrality_from_json(j, g);
      } catch (const LoadError& e) {
        note(std::string("ignoring stale pagerank.json: ") + e.what());
      }
    }
  }
  return pagerank(g, c);
}

std::string chain_text(const json& p) {
  std::string out;
  for (const auto& name : p.at("entities")) {
    if (!out.empty()) out += " → ";
    out += name.get<std::string>();
  }
  return out;
}

void print_pathway_table(const json& doc) {
  const auto& pathways = doc.at("pathways");
  if (pathways.empty()) {
    std::cout << "no pathways above threshold\n";
    return;
  }
  std::printf("%-4s %-8s %-8s %-8s %-8s %-4s  %s\n", "rank", "score", "LF", "CLC", "IP", "f", "chain");
  int rank = 1;
  for (const auto& p : pathways) {
    std::printf("%-4d %-8s %-8s %-8s %-8s %-4lld  %s\n", rank++, fixed(p.at("score").get<double>()).c_str(),
                fixed(p.at("lf").get<double>()).c_str(), fixed(p.at("clc").get<double>()).c_str(),
                fixed(p.at("ip").get<double>()).c_str(), static_cast<long long>(p.at("f").get<std::int64_t>()),
                chain_text(p).c_str());
  }
}

std::optional<TripleFormat> parse_format(const std::string& s) {
  if (s == "jsonl") return TripleFormat::Jsonl;
  if (s == "tsv") return TripleFormat::Tsv;
  return std::nullopt;
}

PlantedChainSpec parse_plant(const std::string& text) {
  // LAYERS[:ATTESTATION], e.g. "P,S,E,S,E:1"
  PlantedChainSpec spec;
  std::string layers = text;
  if (auto colon = text.find(':'); colon != std::string::npos) {
    layers = text.substr(0, colon);
    try {
      spec.attestation = std::stoi(text.substr(colon + 1));
    } catch (const std::exception&) {
      throw UsageError("bad attestation count in --plant '" + text + "'");
    }
  }
  std::stringstream ss(layers);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::optional<Layer> l;
    if (item == "P") l = Layer::Physical;
    else if (item == "S") l = Layer::Social;
    else if (item == "E") l = Layer::Economic;
    else l = parse_layer(item);
    if (!l) throw UsageError("unknown layer '" + item + "' in --plant");
    spec.layers.push_back(*l);
  }
  return spec;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cross-layer risk pathway discovery over document-derived knowledge graphs", "riskpath"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "show help for every subcommand");

  std::string workdir = default_workdir();
  std::string out_format = "table";
  unsigned workers = 0;
  auto add_workdir = [&](CLI::App* sub) {
    sub->add_option("--workdir,-w", workdir, "artifact directory (default: $RISKPATH_WORKDIR or .)");
  };
  auto add_format = [&](CLI::App* sub) {
    sub->add_option("--format", out_format, "output format")->check(CLI::IsMember({"json", "table"}));
  };

  // ingest
  IngestInputs ingest_in;
  std::string triples_path, entities_path, aliases_path, lexicon_path, input_format = "jsonl";
  auto* ingest = app.add_subcommand("ingest", "parse triples, build the graph snapshot and corpus statistics");
  ingest->add_option("--triples", triples_path, "triples file (JSONL or TSV)")->required();
  ingest->add_option("--entities", entities_path, "entity metadata JSONL")->required();
  ingest->add_option("--aliases", aliases_path, "extra alias JSONL");
  ingest->add_option("--layer-lexicon", lexicon_path, "keyword-to-layer JSONL for unregistered names");
  ingest->add_option("--input-format", input_format, "jsonl or tsv")->check(CLI::IsMember({"jsonl", "tsv"}));
  ingest->add_option("--max-malformed", ingest_in.parse.max_malformed_fraction,
                     "tolerated fraction of malformed lines");
  ingest->add_flag("--strict", ingest_in.strict, "fail on any entity missing from the metadata");
  ingest->add_option("--out,--workdir,-w", workdir, "output workdir (default: $RISKPATH_WORKDIR or .)");
  add_format(ingest);

  auto* stats = app.add_subcommand("stats", "graph size, layer mix and degree");
  add_workdir(stats);
  add_format(stats);

  ScoringFlags scoring_flags;
  auto* pr = app.add_subcommand("pagerank", "compute PageRank centrality and write pagerank.json");
  add_workdir(pr);
  add_format(pr);
  scoring_flags.add_pagerank(pr);
  int pr_show = 10;
  pr->add_option("--show", pr_show, "entities listed in table output");

  auto* disc = app.add_subcommand("discover", "rank novel cross-layer risk pathways");
  add_workdir(disc);
  add_format(disc);
  scoring_flags.add_discovery(disc);
  std::string disc_out;
  disc->add_option("--out", disc_out, "result file (default: <workdir>/pathways.json)");
  disc->add_option("--workers", workers, "discovery worker threads (0: available parallelism)");

  auto* report = app.add_subcommand("report", "temporal or layer distribution report");
  add_workdir(report);
  add_format(report);
  std::string report_kind, side = "target";
  report->add_option("kind", report_kind, "temporal or layers")->required()->check(CLI::IsMember({"temporal", "layers"}));
  report->add_option("--side", side, "relation endpoint whose layer is counted")->check(CLI::IsMember({"target", "source"}));

  auto* exp = app.add_subcommand("export", "render the graph or selected pathways as Graphviz DOT");
  add_workdir(exp);
  std::string export_format = "dot", export_pathways, export_out;
  exp->add_option("--format", export_format, "export format")->check(CLI::IsMember({"dot"}));
  exp->add_option("--pathways", export_pathways, "discovery JSON; only its relations become edges");
  exp->add_option("--out", export_out, "output file (default: stdout)");

  GenSpec gen;
  std::vector<std::string> plants;
  std::string gen_out;
  auto* sg = app.add_subcommand("syngen", "generate a synthetic corpus with planted chains");
  sg->add_option("--n-docs", gen.n_docs, "documents");
  sg->add_option("--seed", gen.seed, "random seed");
  sg->add_option("--entities-per-layer", gen.entities_per_layer, "entities per layer");
  sg->add_option("--relations-min", gen.relations_min, "minimum relations per document");
  sg->add_option("--relations-max", gen.relations_max, "maximum relations per document");
  sg->add_option("--background-noise", gen.background_noise, "background relations per entity");
  sg->add_option("--cross-layer-bias", gen.cross_layer_bias, "chance a background relation crosses layers");
  sg->add_option("--hot-chains", gen.hot_chains, "well-attested background cross-layer chains");
  sg->add_option("--hot-chain-rate", gen.hot_chain_rate, "chance a document mentions a hot chain");
  sg->add_option("--planted-severity", gen.planted_severity, "severity of planted entities");
  sg->add_option("--alias-rate", gen.alias_rate, "chance a mention uses an alias");
  sg->add_option("--phase-rate", gen.phase_rate, "chance a triple carries phase tags");
  sg->add_option("--malformed-rate", gen.malformed_rate, "extra malformed lines per document line");
  sg->add_option("--plant", plants, "planted chain LAYERS[:DOCS], e.g. P,S,E,S,E:1 (repeatable)");
  sg->add_option("--out", gen_out, "output directory")->required();
  add_format(sg);

  auto* pipe = app.add_subcommand("pipeline", "checkpointed ingest-to-report pipeline");
  pipe->require_subcommand(1);
  std::string pipe_config;
  auto* pipe_run = pipe->add_subcommand("run", "run all stages, skipping up-to-date ones");
  pipe_run->add_option("--config", pipe_config, "pipeline config JSON")->required();
  add_workdir(pipe_run);
  add_format(pipe_run);
  auto* pipe_resume = pipe->add_subcommand("resume", "continue a previous run in the workdir");
  add_workdir(pipe_resume);
  add_format(pipe_resume);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  const bool as_json = out_format == "json";
  const fs::path wd(workdir);

  try {
    if (*ingest) {
      ingest_in.triples = triples_path;
      ingest_in.entities = entities_path;
      if (!aliases_path.empty()) ingest_in.aliases = fs::path(aliases_path);
      if (!lexicon_path.empty()) ingest_in.lexicon = fs::path(lexicon_path);
      ingest_in.format = *parse_format(input_format);
      for (const fs::path& p : {fs::path(triples_path), fs::path(entities_path)})
        if (!fs::exists(p)) throw LoadError("input file " + p.string() + " does not exist");
      fs::create_directories(wd);
      IngestOutcome outcome;
      try {
        outcome = ingest_files(ingest_in);
      } catch (const ReportedFailure& failure) {
        write_file_atomic(wd / files::kRejections, report_to_jsonl(failure.report()));
        note("rejection report written to " + (wd / files::kRejections).string());
        throw;
      }
      KnowledgeGraph g = build_graph(outcome.aggregate.entities, outcome.aggregate.relations);
      save_snapshot(g, wd / files::kSnapshot);
      write_file_atomic(wd / files::kCorpusStats, corpus_stats_to_json(outcome.aggregate.stats).dump(1) + "\n");
      const auto rejected = outcome.report();
      write_file_atomic(wd / files::kRejections, report_to_jsonl(rejected));
      for (const auto& w : outcome.aggregate.warnings) note("warning: " + w);
      json summary = {{"workdir", wd.string()},
                      {"stats", to_json(graph_stats(g))},
                      {"rejected_records", rejected.size()},
                      {"unregistered", outcome.unregistered}};
      if (as_json) {
        emit_json(summary);
      } else {
        std::cout << "ingested " << g.entity_count() << " entities, " << g.relation_count() << " relations from "
                  << g.doc_count() << " documents; " << rejected.size() << " records rejected\n";
      }
      return kExitOk;
    }

    if (*stats) {
      KnowledgeGraph g = load_workdir_graph(wd);
      GraphStats s = graph_stats(g);
      if (as_json) {
        emit_json(to_json(s));
      } else {
        std::cout << "entities        " << s.entity_count << "\n"
                  << "  physical      " << s.per_layer[0] << "\n"
                  << "  social        " << s.per_layer[1] << "\n"
                  << "  economic      " << s.per_layer[2] << "\n"
                  << "relations       " << s.relation_count << "\n"
                  << "documents       " << s.doc_count << "\n"
                  << "avg out-degree  " << fixed(s.avg_out_degree) << "\n";
      }
      return kExitOk;
    }

    if (*pr) {
      KnowledgeGraph g = load_workdir_graph(wd);
      ScoringConfig c = scoring_flags.resolve();
      CentralityScores s = pagerank(g, c);
      json doc = to_json(s, g, c);
      write_file_atomic(wd / files::kPagerank, doc.dump(1) + "\n");
      if (!s.converged) note("warning: PageRank did not converge within " + std::to_string(c.pr_max_iters) + " iterations");
      if (as_json) {
        emit_json(doc);
      } else {
        std::vector<KnowledgeGraph::Index> order(g.entity_count());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return s.raw[a] > s.raw[b]; });
        std::cout << "iterations " << s.iterations_used << (s.converged ? " (converged)\n" : " (not converged)\n");
        for (int i = 0; i < pr_show && i < static_cast<int>(order.size()); ++i) {
          const Entity& e = g.entity(order[i]);
          std::printf("%-10s %-10s %s\n", fixed(s.raw[order[i]], 6).c_str(), std::string(to_string(e.layer)).c_str(),
                      e.canonical_name.c_str());
        }
      }
      return kExitOk;
    }

    if (*disc) {
      KnowledgeGraph g = load_workdir_graph(wd);
      ScoringConfig c = scoring_flags.resolve();
      CentralityScores centrality = centrality_for(g, wd, c);
      DiscoveryOptions options;
      options.workers = workers;
      DiscoveryResult result = discover(g, corpus_stats(g), centrality, c, options);
      json doc = to_json(result, g);
      const fs::path out = disc_out.empty() ? wd / files::kPathways : fs::path(disc_out);
      write_file_atomic(out, doc.dump(2) + "\n");
      if (as_json) emit_json(doc);
      else print_pathway_table(doc);
      return kExitOk;
    }

    if (*report) {
      KnowledgeGraph g = load_workdir_graph(wd);
      if (report_kind == "temporal") {
        TemporalReport r = temporal_distribution(g, side == "target" ? ImpactSide::Target : ImpactSide::Source);
        if (as_json) emit_json(to_json(r));
        else std::cout << format_temporal_table(r);
      } else {
        LayerDistribution d = layer_distribution(g);
        if (as_json) emit_json(to_json(d));
        else std::cout << format_layer_table(d);
      }
      return kExitOk;
    }

    if (*exp) {
      KnowledgeGraph g = load_workdir_graph(wd);
      std::string dot;
      if (!export_pathways.empty()) {
        std::vector<ScoredPathway> selected = pathways_from_json(parse_json_file(export_pathways));
        dot = to_dot(g, &selected);
      } else {
        dot = to_dot(g);
      }
      if (export_out.empty()) std::cout << dot;
      else write_file_atomic(export_out, dot);
      return kExitOk;
    }

    if (*sg) {
      for (const auto& p : plants) gen.planted_chains.push_back(parse_plant(p));
      GeneratedCorpus corpus = generate(gen);
      const fs::path out(gen_out);
      fs::create_directories(out);
      write_file_atomic(out / "triples.jsonl", corpus.triples_jsonl);
      write_file_atomic(out / "entities.jsonl", corpus.entities_jsonl);
      write_file_atomic(out / "manifest.json", corpus.manifest.dump(2) + "\n");
      if (as_json) {
        emit_json(corpus.manifest);
      } else {
        const auto& counts = corpus.manifest.at("counts");
        std::cout << "wrote " << counts.at("docs") << " documents, " << counts.at("relations") << " relations, "
                  << counts.at("entities") << " entities to " << out.string() << "\n";
      }
      return kExitOk;
    }

    if (*pipe) {
      PipelineSummary summary;
      if (*pipe_run) {
        const fs::path cfg_path(pipe_config);
        PipelineConfig cfg = pipeline_config_from_json(parse_json_file(cfg_path), cfg_path.parent_path());
        summary = run(cfg, wd);
      } else {
        summary = resume(wd);
      }
      for (const auto& w : summary.warnings) note("warning: " + w);
      json stages = json::array();
      for (const auto& r : summary.stages) stages.push_back(to_json(r));
      json doc = {{"ok", summary.ok},     {"executed", summary.executed}, {"skipped", summary.skipped},
                  {"stages", stages},     {"failed_stage", summary.failed_stage}, {"error", summary.error}};
      if (as_json) {
        emit_json(doc);
      } else {
        for (const auto& r : summary.stages) {
          const bool ran = std::find(summary.executed.begin(), summary.executed.end(), r.stage_name) != summary.executed.end();
          std::printf("%-9s %-8s %-9s attempts=%d\n", r.stage_name.c_str(), std::string(to_string(r.status)).c_str(),
                      ran ? "executed" : "reused", r.attempts);
        }
      }
      if (!summary.ok) {
        note("stage " + summary.failed_stage + " failed: " + summary.error);
        return kExitData;
      }
      return kExitOk;
    }
  } catch (const UsageError& e) {
    note(e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    note(e.what());
    return kExitData;
  }
  return kExitUsage;
}
