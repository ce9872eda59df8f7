#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "riskpath/graph.hpp"
#include "riskpath/ingest.hpp"

namespace riskpath {

/// How F_max is obtained for literature frequency normalization.
enum class FmaxMode {
  PathwayMax,  // max f over all structurally valid candidates (two passes)
  EdgeMax,     // max single-edge document frequency; fixed before traversal
};

/// What a pathway's co-occurrence frequency counts.
enum class FreqMode {
  Relations,  // documents attesting every relation on the path
  Entities,   // documents mentioning every entity on the path
};

inline std::string_view to_string(FmaxMode m) { return m == FmaxMode::PathwayMax ? "pathway-max" : "edge-max"; }
inline std::string_view to_string(FreqMode m) { return m == FreqMode::Relations ? "relations" : "entities"; }

inline std::optional<FmaxMode> parse_fmax_mode(std::string_view s) {
  if (s == "pathway-max") return FmaxMode::PathwayMax;
  if (s == "edge-max") return FmaxMode::EdgeMax;
  return std::nullopt;
}
inline std::optional<FreqMode> parse_freq_mode(std::string_view s) {
  if (s == "relations") return FreqMode::Relations;
  if (s == "entities") return FreqMode::Entities;
  return std::nullopt;
}

struct ScoringConfig {
  static constexpr double kDefaultAlpha = 0.5;
  static constexpr double kDefaultBeta = 0.3;
  static constexpr double kDefaultGamma = 0.2;
  static constexpr double kDefaultTheta = 0.7;
  static constexpr int kDefaultMaxDepth = 5;

  double alpha = kDefaultAlpha;
  double beta = kDefaultBeta;
  double gamma = kDefaultGamma;
  double theta_novelty = kDefaultTheta;
  int d_max = kDefaultMaxDepth;
  int top_k = 10;
  FmaxMode fmax_mode = FmaxMode::PathwayMax;
  FreqMode freq_mode = FreqMode::Relations;
  double damping = 0.85;
  double pr_tolerance = 1e-10;
  int pr_max_iters = 200;
  bool prune = true;        // bound-based early termination; edge-max mode only
  bool undirected = false;  // traverse relations in both directions

  bool operator==(const ScoringConfig&) const = default;

  void validate() const {
    auto bad = [](const std::string& why) { throw ConfigError("scoring config: " + why); };
    if (!(alpha >= 0 && beta >= 0 && gamma >= 0)) bad("alpha, beta, gamma must be non-negative");
    if (std::abs(alpha + beta + gamma - 1.0) > 1e-12) bad("alpha + beta + gamma must equal 1");
    if (!(theta_novelty >= 0.0 && theta_novelty <= 1.0)) bad("theta_novelty must lie in [0,1]");
    if (d_max < 1) bad("d_max must be >= 1");
    if (top_k < 1) bad("top_k must be >= 1");
    if (!(damping > 0.0 && damping < 1.0)) bad("damping must lie in (0,1)");
    if (!(pr_tolerance > 0.0)) bad("pr_tolerance must be > 0");
    if (pr_max_iters < 1) bad("pr_max_iters must be >= 1");
  }
};

// ---------------------------------------------------------------------------
// PageRank

struct CentralityScores {
  std::vector<double> raw;         // indexed like graph.entities()
  std::vector<double> normalized;  // raw / max(raw)
  int iterations_used = 0;
  bool converged = false;

  bool operator==(const CentralityScores&) const = default;
};

/// Power iteration with uniform teleport; the mass of nodes without outgoing
/// relations is spread uniformly. Each relation is one link, so parallel
/// relations between the same pair carry proportionally more weight.
inline CentralityScores pagerank(const KnowledgeGraph& graph, const ScoringConfig& config) {
  const std::size_t n = graph.entity_count();
  if (n == 0) throw ScoringError("pagerank: graph has no entities");
  const double nd = static_cast<double>(n);
  const double d = config.damping;

  std::vector<double> inv_out(n, 0.0);
  for (KnowledgeGraph::Index v = 0; v < n; ++v) {
    auto deg = graph.out_relations(v).size();
    if (deg > 0) inv_out[v] = 1.0 / static_cast<double>(deg);
  }

  CentralityScores s;
  std::vector<double> x(n, 1.0 / nd), y(n);
  while (s.iterations_used < config.pr_max_iters) {
    double dangling = 0.0;
    for (std::size_t v = 0; v < n; ++v)
      if (inv_out[v] == 0.0) dangling += x[v];
    const double base = (1.0 - d) / nd + d * dangling / nd;
    for (KnowledgeGraph::Index v = 0; v < n; ++v) {
      double acc = 0.0;
      for (auto r : graph.in_relations(v)) {
        auto u = graph.source_of(r);
        acc += x[u] * inv_out[u];
      }
      y[v] = base + d * acc;
    }
    double delta = 0.0;
    for (std::size_t v = 0; v < n; ++v) delta += std::abs(y[v] - x[v]);
    x.swap(y);
    ++s.iterations_used;
    if (delta < config.pr_tolerance) {
      s.converged = true;
      break;
    }
  }

  s.raw = x;
  const double max = *std::max_element(x.begin(), x.end());
  s.normalized.resize(n);
  for (std::size_t v = 0; v < n; ++v) s.normalized[v] = x[v] / max;
  return s;
}

// ---------------------------------------------------------------------------
// Pathways and score components

struct Pathway {
  std::vector<EntityId> entities;
  std::vector<RelationId> relations;

  std::size_t size() const { return entities.size(); }
  bool operator==(const Pathway&) const = default;
};

struct ScoreBreakdown {
  std::int64_t f = 0;
  double lf = 0.0;
  double clc = 0.0;
  double ip = 0.0;
  double total = 0.0;

  bool operator==(const ScoreBreakdown&) const = default;
};

namespace detail {

inline std::vector<std::string> intersect_sorted(const std::vector<std::string>& a,
                                                 const std::vector<std::string>& b) {
  std::vector<std::string> out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

}  // namespace detail

/// f(P): number of documents attesting every relation of the pathway.
inline std::int64_t pathway_frequency(const Pathway& pathway, const CorpusStats& stats) {
  if (pathway.relations.empty()) throw ScoringError("pathway_frequency: pathway has no relations");
  std::vector<std::string> common;
  for (std::size_t i = 0; i < pathway.relations.size(); ++i) {
    auto it = stats.edge_doc_index.find(pathway.relations[i]);
    if (it == stats.edge_doc_index.end())
      throw LookupError("pathway_frequency: relation '" + pathway.relations[i].str() + "' not in corpus stats");
    std::vector<std::string> docs = it->second;
    std::sort(docs.begin(), docs.end());
    common = i == 0 ? std::move(docs) : detail::intersect_sorted(common, docs);
  }
  return static_cast<std::int64_t>(common.size());
}

/// Documents mentioning an entity: union over its incident relations.
inline std::vector<std::string> entity_documents(const KnowledgeGraph& graph, const CorpusStats& stats,
                                                 const EntityId& id) {
  const auto e = graph.entity_index(id);
  std::vector<std::string> docs;
  auto add = [&](KnowledgeGraph::Index r) {
    const auto& d = stats.edge_doc_index.at(graph.relation(r).id);
    docs.insert(docs.end(), d.begin(), d.end());
  };
  for (auto r : graph.out_relations(e)) add(r);
  for (auto r : graph.in_relations(e)) add(r);
  detail::sort_unique(docs);
  return docs;
}

/// Entity-level alternative to pathway_frequency: documents mentioning every
/// entity of the pathway.
inline std::int64_t entity_cooccurrence_frequency(const Pathway& pathway, const KnowledgeGraph& graph,
                                                  const CorpusStats& stats) {
  if (pathway.relations.empty()) throw ScoringError("entity_cooccurrence_frequency: pathway has no relations");
  std::vector<std::string> common;
  for (std::size_t i = 0; i < pathway.entities.size(); ++i) {
    auto docs = entity_documents(graph, stats, pathway.entities[i]);
    common = i == 0 ? std::move(docs) : detail::intersect_sorted(common, docs);
  }
  return static_cast<std::int64_t>(common.size());
}

/// LF = 1 - f / f_max, with LF = 1 when f_max is 0.
inline double literature_frequency(std::int64_t f, std::int64_t f_max) {
  if (f < 0 || f_max < 0) throw ScoringError("literature_frequency: negative frequency");
  if (f_max == 0) return 1.0;
  if (f > f_max)
    throw ScoringError("literature_frequency: f=" + std::to_string(f) + " exceeds f_max=" + std::to_string(f_max));
  return 1.0 - static_cast<double>(f) / static_cast<double>(f_max);
}

/// Number of consecutive entity pairs on different layers.
inline int cross_layer_count(std::span<const Layer> layers) {
  int count = 0;
  for (std::size_t i = 1; i < layers.size(); ++i)
    if (layers[i] != layers[i - 1]) ++count;
  return count;
}

inline double cross_layer_connectivity(std::span<const Layer> layers) {
  if (layers.size() < 2) throw ScoringError("cross_layer_connectivity: pathway needs at least 2 entities");
  return static_cast<double>(cross_layer_count(layers)) / static_cast<double>(layers.size() - 1);
}

inline std::vector<Layer> pathway_layers(const Pathway& pathway, const KnowledgeGraph& graph) {
  std::vector<Layer> layers;
  layers.reserve(pathway.entities.size());
  for (const auto& id : pathway.entities) layers.push_back(graph.entity(id).layer);
  return layers;
}

inline int cross_layer_count(const Pathway& pathway, const KnowledgeGraph& graph) {
  return cross_layer_count(pathway_layers(pathway, graph));
}

inline double cross_layer_connectivity(const Pathway& pathway, const KnowledgeGraph& graph) {
  return cross_layer_connectivity(pathway_layers(pathway, graph));
}

/// IP = mean over entities of normalized centrality x severity.
inline double impact_potential(const Pathway& pathway, const CentralityScores& centrality,
                               const KnowledgeGraph& graph) {
  if (pathway.entities.empty()) throw ScoringError("impact_potential: empty pathway");
  double sum = 0.0;
  for (const auto& id : pathway.entities) {
    auto i = graph.entity_index(id);
    if (i >= centrality.normalized.size()) throw LookupError("impact_potential: no centrality for '" + id.str() + "'");
    sum += centrality.normalized[i] * graph.entity(i).severity;
  }
  return sum / static_cast<double>(pathway.entities.size());
}

struct ScoreInputs {
  std::int64_t f = 0;
  double lf = 0.0;
  double clc = 0.0;
  double ip = 0.0;
};

inline ScoreBreakdown novelty_score(const ScoreInputs& in, const ScoringConfig& config) {
  auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!in_unit(in.lf) || !in_unit(in.clc) || !in_unit(in.ip))
    throw ScoringError("novelty_score: components must lie in [0,1]");
  ScoreBreakdown b;
  b.f = in.f;
  b.lf = in.lf;
  b.clc = in.clc;
  b.ip = in.ip;
  b.total = config.alpha * in.lf + config.beta * in.clc + config.gamma * in.ip;
  return b;
}

}  // namespace riskpath
