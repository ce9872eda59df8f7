#pragma once

// JSON encodings of the library's value types. Field names here are the
// stable on-disk contract used by the CLI and the pipeline.

#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "riskpath/analysis.hpp"
#include "riskpath/discovery.hpp"
#include "riskpath/graph.hpp"
#include "riskpath/ingest.hpp"
#include "riskpath/scoring.hpp"

namespace riskpath {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Files

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Writes through a temporary file and rename, so readers never observe a
/// partially written file.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw TransientError("cannot open '" + tmp.string() + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw TransientError("short write to '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw TransientError("cannot move '" + tmp.string() + "' into place: " + ec.message());
}

inline json parse_json_file(const std::filesystem::path& path) {
  auto j = json::parse(read_file(path), nullptr, false);
  if (j.is_discarded()) throw LoadError("'" + path.string() + "' is not valid JSON");
  return j;
}

// ---------------------------------------------------------------------------
// ScoringConfig

inline json to_json(const ScoringConfig& c) {
  return json{{"alpha", c.alpha},
              {"beta", c.beta},
              {"gamma", c.gamma},
              {"theta", c.theta_novelty},
              {"d_max", c.d_max},
              {"top_k", c.top_k},
              {"fmax_mode", std::string(to_string(c.fmax_mode))},
              {"freq_mode", std::string(to_string(c.freq_mode))},
              {"damping", c.damping},
              {"pr_tolerance", c.pr_tolerance},
              {"pr_max_iters", c.pr_max_iters},
              {"prune", c.prune},
              {"undirected", c.undirected}};
}

/// Starts from the defaults and overrides any field present in `j`.
inline ScoringConfig scoring_config_from_json(const json& j, ScoringConfig c = {}) {
  if (!j.is_object()) throw ConfigError("scoring config must be a JSON object");
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "alpha") c.alpha = value.get<double>();
      else if (key == "beta") c.beta = value.get<double>();
      else if (key == "gamma") c.gamma = value.get<double>();
      else if (key == "theta" || key == "theta_novelty") c.theta_novelty = value.get<double>();
      else if (key == "d_max") c.d_max = value.get<int>();
      else if (key == "top_k") c.top_k = value.get<int>();
      else if (key == "damping") c.damping = value.get<double>();
      else if (key == "pr_tolerance") c.pr_tolerance = value.get<double>();
      else if (key == "pr_max_iters") c.pr_max_iters = value.get<int>();
      else if (key == "prune") c.prune = value.get<bool>();
      else if (key == "undirected") c.undirected = value.get<bool>();
      else if (key == "fmax_mode") {
        auto m = parse_fmax_mode(value.get<std::string>());
        if (!m) throw ConfigError("unknown fmax_mode '" + value.get<std::string>() + "'");
        c.fmax_mode = *m;
      } else if (key == "freq_mode") {
        auto m = parse_freq_mode(value.get<std::string>());
        if (!m) throw ConfigError("unknown freq_mode '" + value.get<std::string>() + "'");
        c.freq_mode = *m;
      } else {
        throw ConfigError("unknown scoring config field '" + key + "'");
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("scoring config: ") + e.what());
  }
  c.validate();
  return c;
}

inline ScoringConfig load_scoring_config(const std::filesystem::path& path) {
  return scoring_config_from_json(parse_json_file(path));
}

// ---------------------------------------------------------------------------
// Centrality

inline json to_json(const CentralityScores& s, const KnowledgeGraph& graph, const ScoringConfig& c) {
  json scores = json::object();
  for (std::size_t i = 0; i < s.raw.size(); ++i) scores[graph.entity(static_cast<KnowledgeGraph::Index>(i)).id.str()] = s.raw[i];
  return json{{"damping", c.damping},       {"tolerance", c.pr_tolerance}, {"max_iters", c.pr_max_iters},
              {"iterations_used", s.iterations_used}, {"converged", s.converged}, {"scores", scores}};
}

inline CentralityScores centrality_from_json(const json& j, const KnowledgeGraph& graph) {
  CentralityScores s;
  try {
    s.iterations_used = j.at("iterations_used").get<int>();
    s.converged = j.at("converged").get<bool>();
    const auto& scores = j.at("scores");
    if (scores.size() != graph.entity_count()) throw LoadError("pagerank scores do not match the graph");
    s.raw.resize(graph.entity_count());
    for (KnowledgeGraph::Index i = 0; i < graph.entity_count(); ++i)
      s.raw[i] = scores.at(graph.entity(i).id.str()).get<double>();
  } catch (const json::exception& e) {
    throw LoadError(std::string("pagerank file: ") + e.what());
  }
  double max = 0.0;
  for (double v : s.raw) max = std::max(max, v);
  s.normalized.resize(s.raw.size());
  for (std::size_t i = 0; i < s.raw.size(); ++i) s.normalized[i] = s.raw[i] / max;
  return s;
}

// ---------------------------------------------------------------------------
// Discovery results

inline json to_json(const DiscoveryResult& r, const KnowledgeGraph& graph) {
  json pathways = json::array();
  for (const auto& sp : r.pathways) {
    json names = json::array(), ids = json::array(), layers = json::array(), preds = json::array(),
         rids = json::array();
    for (const auto& id : sp.pathway.entities) {
      const Entity& e = graph.entity(id);
      names.push_back(e.canonical_name);
      ids.push_back(id.str());
      layers.push_back(std::string(to_string(e.layer)));
    }
    for (const auto& id : sp.pathway.relations) {
      preds.push_back(graph.relation(id).predicate);
      rids.push_back(id.str());
    }
    pathways.push_back(json{{"entities", names},
                            {"predicates", preds},
                            {"layers", layers},
                            {"entity_ids", ids},
                            {"relation_ids", rids},
                            {"f", sp.score.f},
                            {"lf", sp.score.lf},
                            {"clc", sp.score.clc},
                            {"ip", sp.score.ip},
                            {"score", sp.score.total}});
  }
  json meta = {{"alpha", r.config.alpha},
               {"beta", r.config.beta},
               {"gamma", r.config.gamma},
               {"theta", r.config.theta_novelty},
               {"d_max", r.config.d_max},
               {"top_k", r.config.top_k},
               {"fmax_mode", std::string(to_string(r.config.fmax_mode))},
               {"freq_mode", std::string(to_string(r.config.freq_mode))},
               {"undirected", r.config.undirected},
               {"damping", r.config.damping},
               {"f_max_used", r.f_max_used},
               {"candidates_enumerated", r.candidates_enumerated},
               {"sources_processed", r.sources_processed}};
  return json{{"metadata", meta}, {"pathways", pathways}};
}

/// Pathways (ids and scores) back from a discovery JSON document.
inline std::vector<ScoredPathway> pathways_from_json(const json& j) {
  std::vector<ScoredPathway> out;
  try {
    for (const auto& p : j.at("pathways")) {
      ScoredPathway sp;
      for (const auto& id : p.at("entity_ids")) sp.pathway.entities.emplace_back(id.get<std::string>());
      for (const auto& id : p.at("relation_ids")) sp.pathway.relations.emplace_back(id.get<std::string>());
      sp.score.f = p.at("f").get<std::int64_t>();
      sp.score.lf = p.at("lf").get<double>();
      sp.score.clc = p.at("clc").get<double>();
      sp.score.ip = p.at("ip").get<double>();
      sp.score.total = p.at("score").get<double>();
      out.push_back(std::move(sp));
    }
  } catch (const json::exception& e) {
    throw LoadError(std::string("pathways file: ") + e.what());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Entities and relations

inline json to_json(const Entity& e) {
  return json{{"id", e.id.str()},
              {"name", e.canonical_name},
              {"layer", std::string(to_string(e.layer))},
              {"severity", e.severity},
              {"aliases", e.aliases}};
}

inline json phases_to_json(PhaseSet phases) {
  json a = json::array();
  for (Phase p : kAllPhases)
    if (phases.contains(p)) a.push_back(std::string(to_string(p)));
  return a;
}

inline json to_json(const Relation& r) {
  return json{{"id", r.id.str()},         {"source", r.source.str()}, {"predicate", r.predicate},
              {"target", r.target.str()}, {"docs", r.doc_ids},        {"phases", phases_to_json(r.phases)}};
}

inline Entity entity_from_json(const json& j) {
  Entity e;
  e.id = EntityId(j.at("id").get<std::string>());
  e.canonical_name = j.at("name").get<std::string>();
  auto layer = parse_layer(j.at("layer").get<std::string>());
  if (!layer) throw LoadError("bad layer in entity record");
  e.layer = *layer;
  e.severity = j.at("severity").get<double>();
  e.aliases = j.at("aliases").get<std::vector<std::string>>();
  return e;
}

inline Relation relation_from_json(const json& j) {
  Relation r;
  r.id = RelationId(j.at("id").get<std::string>());
  r.source = EntityId(j.at("source").get<std::string>());
  r.predicate = j.at("predicate").get<std::string>();
  r.target = EntityId(j.at("target").get<std::string>());
  r.doc_ids = j.at("docs").get<std::vector<std::string>>();
  for (const auto& p : j.at("phases")) {
    auto phase = parse_phase(p.get<std::string>());
    if (!phase) throw LoadError("bad phase in relation record");
    r.phases.insert(*phase);
  }
  return r;
}

inline std::string report_to_jsonl(const std::vector<RecordError>& report) {
  std::string out;
  for (const auto& e : report) out += json{{"line", e.line}, {"reason", e.reason}}.dump() + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Reports

inline json to_json(const GraphStats& s) {
  return json{{"entities", s.entity_count},
              {"relations", s.relation_count},
              {"layers", {{"physical", s.per_layer[0]}, {"social", s.per_layer[1]}, {"economic", s.per_layer[2]}}},
              {"doc_count", s.doc_count},
              {"avg_out_degree", s.avg_out_degree}};
}

inline json to_json(const TemporalReport& r) {
  json cells = json::object();
  for (Phase p : kAllPhases) {
    json row = json::object();
    for (Layer l : kAllLayers) {
      auto v = r.percent(p, l);
      row[std::string(to_string(l))] = v ? json(*v) : json("n/a");
    }
    cells[std::string(to_string(p))] = row;
  }
  return json{{"layer_of_relation", r.side == ImpactSide::Target ? "target" : "source"},
              {"percent", cells},
              {"denominators",
               {{"physical", r.denominators[0]}, {"social", r.denominators[1]}, {"economic", r.denominators[2]}}}};
}

inline json to_json(const LayerDistribution& d) {
  json out = json::object();
  for (Layer l : kAllLayers)
    out[std::string(to_string(l))] = {{"count", d.counts[layer_index(l)]}, {"fraction", d.fractions[layer_index(l)]}};
  out["total"] = d.total;
  return out;
}

}  // namespace riskpath
