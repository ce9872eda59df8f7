#pragma once

// File-level steps shared by the CLI and the pipeline: reading ingest inputs
// and the fixed artifact names used inside a workdir.

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include "riskpath/ingest.hpp"
#include "riskpath/json_io.hpp"

namespace riskpath {

namespace files {
inline constexpr const char* kIngest = "ingest.json";
inline constexpr const char* kRejections = "rejections.jsonl";
inline constexpr const char* kSnapshot = "graph.rpkg";
inline constexpr const char* kCorpusStats = "corpus_stats.json";
inline constexpr const char* kPagerank = "pagerank.json";
inline constexpr const char* kPathways = "pathways.json";
inline constexpr const char* kReport = "report.json";
inline constexpr const char* kReportText = "report.txt";
inline constexpr const char* kManifest = "manifest.json";
inline constexpr const char* kConfig = "config.json";
inline constexpr const char* kLock = "pipeline.lock";
}  // namespace files

struct IngestInputs {
  std::filesystem::path triples;
  std::filesystem::path entities;
  std::optional<std::filesystem::path> aliases;
  std::optional<std::filesystem::path> lexicon;
  TripleFormat format = TripleFormat::Jsonl;
  ParseOptions parse;
  bool strict = false;
};

struct IngestOutcome {
  AggregateResult aggregate;
  std::vector<RecordError> parse_errors;
  std::vector<std::string> unregistered;

  /// Parse errors followed by aggregation rejections.
  std::vector<RecordError> report() const {
    std::vector<RecordError> all = parse_errors;
    all.insert(all.end(), aggregate.rejections.begin(), aggregate.rejections.end());
    return all;
  }
};

inline IngestOutcome ingest_files(const IngestInputs& in) {
  IngestOutcome out;
  std::istringstream triples(read_file(in.triples));
  ParseResult parsed = parse_triples(triples, in.format, in.parse);
  out.parse_errors = std::move(parsed.errors);

  std::istringstream meta_stream(read_file(in.entities));
  const std::vector<EntityMeta> meta = parse_entity_meta(meta_stream);
  std::vector<AliasEntry> extra;
  if (in.aliases) {
    std::istringstream s(read_file(*in.aliases));
    extra = parse_aliases(s);
  }
  std::optional<LayerLexicon> lexicon;
  if (in.lexicon) {
    std::istringstream s(read_file(*in.lexicon));
    lexicon = parse_lexicon(s);
  }

  CanonicalizeResult canon = canonicalize(std::move(parsed.triples), AliasMap(meta, extra));
  out.unregistered = std::move(canon.unregistered);
  AggregateOptions options;
  options.lexicon = lexicon ? &*lexicon : nullptr;
  options.strict = in.strict;
  try {
    out.aggregate = aggregate(canon.triples, meta, options);
  } catch (const ReportedFailure& failure) {
    std::vector<RecordError> report = out.parse_errors;
    report.insert(report.end(), failure.report().begin(), failure.report().end());
    throw ReportedFailure(failure.what(), std::move(report));
  }
  return out;
}

inline json corpus_stats_to_json(const CorpusStats& stats) {
  json index = json::object();
  for (const auto& [rid, docs] : stats.edge_doc_index) index[rid.str()] = docs;
  return json{{"doc_count", stats.doc_count}, {"edge_doc_index", index}};
}

}  // namespace riskpath
