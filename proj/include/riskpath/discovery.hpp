#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <map>
#include <mutex>
#include <thread>
#include <unordered_map>
#include <vector>

#include "riskpath/graph.hpp"
#include "riskpath/ingest.hpp"
#include "riskpath/scoring.hpp"

namespace riskpath {

struct ScoredPathway {
  Pathway pathway;
  ScoreBreakdown score;
  bool operator==(const ScoredPathway&) const = default;
};

struct DiscoveryResult {
  std::vector<ScoredPathway> pathways;
  ScoringConfig config;
  std::int64_t f_max_used = 0;
  // Candidates (Physical start, simple, cross-layer count >= 2) that were
  // scored. Subtrees cut by bound pruning are not counted.
  std::uint64_t candidates_enumerated = 0;
  std::size_t sources_processed = 0;

  bool operator==(const DiscoveryResult&) const = default;
};

struct DiscoveryOptions {
  unsigned workers = 0;  // 0: hardware concurrency
};

/// Ranking order: total desc, then fewer entities, then entity id sequence,
/// then relation id sequence (parallel relations yield distinct pathways).
inline bool ranks_before(const ScoredPathway& a, const ScoredPathway& b) {
  if (a.score.total != b.score.total) return a.score.total > b.score.total;
  if (a.pathway.entities.size() != b.pathway.entities.size())
    return a.pathway.entities.size() < b.pathway.entities.size();
  if (a.pathway.entities != b.pathway.entities) return a.pathway.entities < b.pathway.entities;
  return a.pathway.relations < b.pathway.relations;
}

/// Keeps candidates strictly above theta, sorted by ranks_before, first top_k.
inline std::vector<ScoredPathway> rank_top_k(std::vector<ScoredPathway> scored, const ScoringConfig& config) {
  std::erase_if(scored, [&](const ScoredPathway& s) { return !(s.score.total > config.theta_novelty); });
  std::sort(scored.begin(), scored.end(), ranks_before);
  if (scored.size() > static_cast<std::size_t>(config.top_k)) scored.resize(static_cast<std::size_t>(config.top_k));
  return scored;
}

/// Summary of a partial path used by the pruning bound.
struct PartialPathState {
  std::size_t entities = 1;
  int cross_layer_count = 0;
  double impact_sum = 0.0;   // sum of normalized centrality x severity so far
  double max_impact = 1.0;   // max of normalized centrality x severity over the graph
};

inline constexpr double kPruneSlack = 1e-9;

/// True when no extension of the partial path (one or more further edges,
/// within d_max) can score above theta. LF is bounded by 1; CLC and IP are
/// bounded using the transitions and impact already on the path. Only valid
/// when F_max is fixed before traversal (edge-max).
inline bool upper_bound_prune(const PartialPathState& state, const ScoringConfig& config) {
  if (config.fmax_mode != FmaxMode::EdgeMax)
    throw ConfigError("upper_bound_prune requires edge-max F_max mode");
  const int edges = static_cast<int>(state.entities) - 1;
  const int remaining = config.d_max - edges;
  if (remaining <= 0) return true;
  double best = 0.0;
  for (int m = 1; m <= remaining; ++m) {
    double clc = std::min(1.0, static_cast<double>(state.cross_layer_count + m) / static_cast<double>(edges + m));
    double ip = std::min(1.0, (state.impact_sum + m * state.max_impact) /
                                  static_cast<double>(state.entities + static_cast<std::size_t>(m)));
    best = std::max(best, config.alpha + config.beta * clc + config.gamma * ip);
  }
  return best <= config.theta_novelty - kPruneSlack;
}

namespace detail {

using Index = KnowledgeGraph::Index;

struct IndexCandidate {
  std::vector<Index> entities;
  std::vector<Index> relations;
  ScoreBreakdown score;
};

inline bool index_ranks_before(const IndexCandidate& a, const IndexCandidate& b) {
  if (a.score.total != b.score.total) return a.score.total > b.score.total;
  if (a.entities.size() != b.entities.size()) return a.entities.size() < b.entities.size();
  if (a.entities != b.entities) return a.entities < b.entities;
  return a.relations < b.relations;
}

/// Read-only data shared by all workers.
struct SearchContext {
  const KnowledgeGraph& graph;
  const ScoringConfig& config;
  std::vector<std::size_t> hop_offsets{0};
  std::vector<Hop> hops;
  std::vector<Layer> layer;
  std::vector<double> impact;  // normalized centrality x severity
  double max_impact = 0.0;
  std::vector<std::vector<std::uint32_t>> relation_docs;
  std::vector<std::vector<std::uint32_t>> entity_docs;  // entities freq mode only
  std::int64_t edge_max = 0;

  SearchContext(const KnowledgeGraph& g, const CorpusStats& stats, const CentralityScores& centrality,
                const ScoringConfig& cfg)
      : graph(g), config(cfg) {
    const std::size_t n = g.entity_count();
    if (centrality.normalized.size() != n)
      throw ConfigError("discover: centrality scores do not match the graph");
    const Traversal mode = cfg.undirected ? Traversal::Undirected : Traversal::Directed;
    for (Index v = 0; v < n; ++v) {
      auto hv = g.hops(v, mode);
      hops.insert(hops.end(), hv.begin(), hv.end());
      hop_offsets.push_back(hops.size());
      layer.push_back(g.entity(v).layer);
      impact.push_back(centrality.normalized[v] * g.entity(v).severity);
      max_impact = std::max(max_impact, impact.back());
    }

    std::unordered_map<std::string, std::uint32_t> doc_index;
    for (const auto& [rid, docs] : stats.edge_doc_index)
      for (const auto& d : docs) doc_index.emplace(d, 0);
    {
      std::vector<std::string> names;
      names.reserve(doc_index.size());
      for (const auto& [d, _] : doc_index) names.push_back(d);
      std::sort(names.begin(), names.end());
      for (std::uint32_t i = 0; i < names.size(); ++i) doc_index[names[i]] = i;
    }
    relation_docs.resize(g.relation_count());
    for (Index r = 0; r < g.relation_count(); ++r) {
      auto it = stats.edge_doc_index.find(g.relation(r).id);
      if (it == stats.edge_doc_index.end())
        throw LookupError("discover: relation '" + g.relation(r).id.str() + "' missing from corpus stats");
      auto& docs = relation_docs[r];
      for (const auto& d : it->second) docs.push_back(doc_index.at(d));
      std::sort(docs.begin(), docs.end());
      docs.erase(std::unique(docs.begin(), docs.end()), docs.end());
      if (cfg.freq_mode == FreqMode::Relations) edge_max = std::max<std::int64_t>(edge_max, static_cast<std::int64_t>(docs.size()));
    }
    if (cfg.freq_mode == FreqMode::Entities) {
      entity_docs.resize(n);
      for (Index v = 0; v < n; ++v) {
        auto& docs = entity_docs[v];
        for (auto r : g.out_relations(v)) docs.insert(docs.end(), relation_docs[r].begin(), relation_docs[r].end());
        for (auto r : g.in_relations(v)) docs.insert(docs.end(), relation_docs[r].begin(), relation_docs[r].end());
        std::sort(docs.begin(), docs.end());
        docs.erase(std::unique(docs.begin(), docs.end()), docs.end());
        edge_max = std::max<std::int64_t>(edge_max, static_cast<std::int64_t>(docs.size()));
      }
    }
  }

  std::span<const Hop> hops_of(Index v) const {
    return {hops.data() + hop_offsets[v], hops.data() + hop_offsets[v + 1]};
  }
};

/// BFS frontier entry. Paths are stored as parent links into a per-source arena.
struct FrontierNode {
  std::int32_t parent;
  Index entity;
  Index relation;
  int depth;
  int cross;
  double impact_sum;
  std::size_t docs_begin;
  std::size_t docs_len;
  bool docs_unconstrained;  // root in relations mode: no edge seen yet
};

enum class Pass { MaxFrequency, Score };

struct WorkerOutput {
  std::vector<IndexCandidate> kept;
  std::uint64_t candidates = 0;
  std::int64_t max_f = 0;
};

/// Breadth-first enumeration of simple paths from one source. Every path is
/// produced exactly once: a child extends its parent by one (relation,
/// entity) hop, so distinct arena entries are distinct sequences.
class SourceExplorer {
 public:
  SourceExplorer(const SearchContext& ctx, Pass pass, std::int64_t f_max, bool prune)
      : ctx_(ctx), pass_(pass), f_max_(f_max), prune_(prune) {}

  void explore(Index source, WorkerOutput& out) {
    arena_.clear();
    docs_.clear();
    FrontierNode root{-1, source, 0, 0, 0, ctx_.impact[source], 0, 0, true};
    if (ctx_.config.freq_mode == FreqMode::Entities) {
      const auto& d = ctx_.entity_docs[source];
      docs_.insert(docs_.end(), d.begin(), d.end());
      root.docs_len = d.size();
      root.docs_unconstrained = false;
    }
    arena_.push_back(root);

    for (std::size_t head = 0; head < arena_.size(); ++head) {
      const FrontierNode node = arena_[head];
      if (node.depth >= ctx_.config.d_max) continue;
      if (prune_ && upper_bound_prune({static_cast<std::size_t>(node.depth) + 1, node.cross, node.impact_sum,
                                       ctx_.max_impact},
                                      ctx_.config))
        continue;
      for (const Hop& hop : ctx_.hops_of(node.entity)) {
        if (on_path(static_cast<std::int32_t>(head), hop.entity)) continue;
        FrontierNode child{static_cast<std::int32_t>(head),
                           hop.entity,
                           hop.relation,
                           node.depth + 1,
                           node.cross + (ctx_.layer[hop.entity] != ctx_.layer[node.entity] ? 1 : 0),
                           node.impact_sum + ctx_.impact[hop.entity],
                           docs_.size(),
                           0,
                           false};
        const auto& step_docs = ctx_.config.freq_mode == FreqMode::Relations ? ctx_.relation_docs[hop.relation]
                                                                             : ctx_.entity_docs[hop.entity];
        if (node.docs_unconstrained) {
          docs_.insert(docs_.end(), step_docs.begin(), step_docs.end());
        } else if (node.docs_len > 0) {
          const auto first = docs_.begin() + static_cast<std::ptrdiff_t>(node.docs_begin);
          std::vector<std::uint32_t> tmp;
          std::set_intersection(first, first + static_cast<std::ptrdiff_t>(node.docs_len), step_docs.begin(),
                                step_docs.end(), std::back_inserter(tmp));
          docs_.insert(docs_.end(), tmp.begin(), tmp.end());
        }
        child.docs_len = docs_.size() - child.docs_begin;
        arena_.push_back(child);
        if (child.cross >= 2) visit_candidate(arena_.size() - 1, out);
      }
    }
  }

 private:
  bool on_path(std::int32_t at, Index entity) const {
    for (std::int32_t i = at; i >= 0; i = arena_[static_cast<std::size_t>(i)].parent)
      if (arena_[static_cast<std::size_t>(i)].entity == entity) return true;
    return false;
  }

  void visit_candidate(std::size_t at, WorkerOutput& out) {
    const FrontierNode& node = arena_[at];
    const auto f = static_cast<std::int64_t>(node.docs_len);
    ++out.candidates;
    if (pass_ == Pass::MaxFrequency) {
      out.max_f = std::max(out.max_f, f);
      return;
    }
    const std::size_t n = static_cast<std::size_t>(node.depth) + 1;
    ScoreInputs in;
    in.f = f;
    in.lf = literature_frequency(f, f_max_);
    in.clc = static_cast<double>(node.cross) / static_cast<double>(n - 1);
    in.ip = node.impact_sum / static_cast<double>(n);
    ScoreBreakdown score = novelty_score(in, ctx_.config);
    if (!(score.total > ctx_.config.theta_novelty)) return;

    IndexCandidate c;
    c.score = score;
    c.entities.resize(n);
    c.relations.resize(n - 1);
    std::size_t pos = n;
    for (std::int32_t i = static_cast<std::int32_t>(at); i >= 0; i = arena_[static_cast<std::size_t>(i)].parent) {
      --pos;
      c.entities[pos] = arena_[static_cast<std::size_t>(i)].entity;
      if (pos > 0) c.relations[pos - 1] = arena_[static_cast<std::size_t>(i)].relation;
    }
    out.kept.push_back(std::move(c));
    const auto k = static_cast<std::size_t>(ctx_.config.top_k);
    if (out.kept.size() >= 2 * k + 1024) trim(out.kept, k);
  }

  static void trim(std::vector<IndexCandidate>& v, std::size_t k) {
    if (v.size() <= k) return;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end(), index_ranks_before);
    v.resize(k);
  }

  const SearchContext& ctx_;
  Pass pass_;
  std::int64_t f_max_;
  bool prune_;
  std::vector<FrontierNode> arena_;
  std::vector<std::uint32_t> docs_;
};

/// Fans sources out over a bounded worker pool. Each worker owns its
/// explorer and output; outputs are merged after join, so the combined result
/// does not depend on scheduling.
inline WorkerOutput run_pass(const SearchContext& ctx, const std::vector<Index>& sources, Pass pass,
                             std::int64_t f_max, bool prune, unsigned workers) {
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(sources.size(), 1))));
  std::vector<WorkerOutput> outputs(workers);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto work = [&](unsigned w) {
    try {
      SourceExplorer explorer(ctx, pass, f_max, prune);
      for (std::size_t i = next++; i < sources.size(); i = next++) explorer.explore(sources[i], outputs[w]);
    } catch (...) {
      std::lock_guard lock(failure_mutex);
      if (!failure) failure = std::current_exception();
    }
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work, w);
  }
  if (failure) std::rethrow_exception(failure);

  WorkerOutput merged;
  for (auto& o : outputs) {
    merged.candidates += o.candidates;
    merged.max_f = std::max(merged.max_f, o.max_f);
    std::move(o.kept.begin(), o.kept.end(), std::back_inserter(merged.kept));
  }
  return merged;
}

}  // namespace detail

/// Enumerates simple pathways of 1..d_max edges from every Physical entity,
/// scores those with at least two layer transitions and returns the top_k
/// strictly above theta.
inline DiscoveryResult discover(const KnowledgeGraph& graph, const CorpusStats& stats,
                                const CentralityScores& centrality, const ScoringConfig& config,
                                const DiscoveryOptions& options = {}) {
  config.validate();
  DiscoveryResult result;
  result.config = config;

  std::vector<detail::Index> sources;
  for (detail::Index v = 0; v < graph.entity_count(); ++v)
    if (graph.entity(v).layer == Layer::Physical) sources.push_back(v);
  result.sources_processed = sources.size();
  if (sources.empty()) return result;

  const detail::SearchContext ctx(graph, stats, centrality, config);
  unsigned workers = options.workers ? options.workers : std::max(1u, std::thread::hardware_concurrency());

  std::int64_t f_max = ctx.edge_max;
  bool prune = false;
  if (config.fmax_mode == FmaxMode::PathwayMax) {
    f_max = detail::run_pass(ctx, sources, detail::Pass::MaxFrequency, 0, false, workers).max_f;
  } else {
    prune = config.prune;
  }
  result.f_max_used = f_max;

  detail::WorkerOutput scored = detail::run_pass(ctx, sources, detail::Pass::Score, f_max, prune, workers);
  result.candidates_enumerated = scored.candidates;
  std::sort(scored.kept.begin(), scored.kept.end(), detail::index_ranks_before);
  if (scored.kept.size() > static_cast<std::size_t>(config.top_k)) scored.kept.resize(static_cast<std::size_t>(config.top_k));

  for (const auto& c : scored.kept) {
    ScoredPathway sp;
    for (auto e : c.entities) sp.pathway.entities.push_back(graph.entity(e).id);
    for (auto r : c.relations) sp.pathway.relations.push_back(graph.relation(r).id);
    sp.score = c.score;
    result.pathways.push_back(std::move(sp));
  }
  return result;
}

/// Exhaustive reference for discover(): depth-first enumeration of every
/// simple path, scored from scratch through the public formula functions,
/// with no pruning and no parallelism.
inline DiscoveryResult enumerate_oracle(const KnowledgeGraph& graph, const CorpusStats& stats,
                                        const CentralityScores& centrality, const ScoringConfig& config) {
  config.validate();
  DiscoveryResult result;
  result.config = config;

  // Adjacency from a plain scan of the relation list.
  std::map<EntityId, std::vector<std::pair<RelationId, EntityId>>> adjacency;
  for (const Relation& r : graph.relations()) {
    adjacency[r.source].emplace_back(r.id, r.target);
    if (config.undirected && r.source != r.target) adjacency[r.target].emplace_back(r.id, r.source);
  }

  std::vector<Pathway> candidates;
  Pathway path;
  auto dfs = [&](auto&& self) -> void {
    if (path.relations.size() >= 2 && cross_layer_count(path, graph) >= 2) candidates.push_back(path);
    if (static_cast<int>(path.relations.size()) >= config.d_max) return;
    auto it = adjacency.find(path.entities.back());
    if (it == adjacency.end()) return;
    for (const auto& [rid, next] : it->second) {
      if (std::find(path.entities.begin(), path.entities.end(), next) != path.entities.end()) continue;
      path.entities.push_back(next);
      path.relations.push_back(rid);
      self(self);
      path.entities.pop_back();
      path.relations.pop_back();
    }
  };
  for (const Entity& e : graph.entities()) {
    if (e.layer != Layer::Physical) continue;
    ++result.sources_processed;
    path = Pathway{{e.id}, {}};
    dfs(dfs);
  }

  auto frequency = [&](const Pathway& p) {
    return config.freq_mode == FreqMode::Relations ? pathway_frequency(p, stats)
                                                   : entity_cooccurrence_frequency(p, graph, stats);
  };
  std::vector<std::int64_t> freqs;
  freqs.reserve(candidates.size());
  for (const auto& p : candidates) freqs.push_back(frequency(p));

  std::int64_t f_max = 0;
  if (config.fmax_mode == FmaxMode::PathwayMax) {
    for (auto f : freqs) f_max = std::max(f_max, f);
  } else if (config.freq_mode == FreqMode::Relations) {
    for (const auto& [rid, docs] : stats.edge_doc_index) {
      std::vector<std::string> d = docs;
      detail::sort_unique(d);
      f_max = std::max<std::int64_t>(f_max, static_cast<std::int64_t>(d.size()));
    }
  } else {
    for (const Entity& e : graph.entities())
      f_max = std::max<std::int64_t>(f_max, static_cast<std::int64_t>(entity_documents(graph, stats, e.id).size()));
  }
  result.f_max_used = f_max;
  result.candidates_enumerated = candidates.size();

  std::vector<ScoredPathway> scored;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    ScoreInputs in;
    in.f = freqs[i];
    in.lf = literature_frequency(freqs[i], f_max);
    in.clc = cross_layer_connectivity(candidates[i], graph);
    in.ip = impact_potential(candidates[i], centrality, graph);
    scored.push_back({candidates[i], novelty_score(in, config)});
  }
  result.pathways = rank_top_k(std::move(scored), config);
  return result;
}

}  // namespace riskpath
