#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "riskpath/common.hpp"

namespace riskpath {

struct Entity {
  EntityId id;
  std::string canonical_name;
  Layer layer = Layer::Physical;
  double severity = 0.0;
  std::vector<std::string> aliases;

  bool operator==(const Entity&) const = default;
};

struct Relation {
  RelationId id;
  EntityId source;
  std::string predicate;
  EntityId target;
  std::vector<std::string> doc_ids;
  PhaseSet phases;

  bool operator==(const Relation&) const = default;
};

/// One traversal step: the relation taken and the entity reached.
struct Hop {
  std::uint32_t relation;
  std::uint32_t entity;
  bool operator==(const Hop&) const = default;
};

struct Neighbor {
  RelationId relation;
  EntityId entity;
  bool operator==(const Neighbor&) const = default;
};

enum class Traversal { Directed, Undirected };

class KnowledgeGraph;
KnowledgeGraph build_graph(std::vector<Entity> entities, std::vector<Relation> relations);

/// Immutable entity/relation store. Entities and relations are kept sorted by
/// id, so a dense index order is the same as id order.
class KnowledgeGraph {
 public:
  using Index = std::uint32_t;

  KnowledgeGraph() = default;

  std::size_t entity_count() const { return entities_.size(); }
  std::size_t relation_count() const { return relations_.size(); }
  std::size_t doc_count() const { return doc_ids_.size(); }

  std::span<const Entity> entities() const { return entities_; }
  std::span<const Relation> relations() const { return relations_; }
  /// Distinct document ids across all relations, sorted.
  std::span<const std::string> doc_ids() const { return doc_ids_; }

  const Entity& entity(Index i) const { return entities_[i]; }
  const Relation& relation(Index i) const { return relations_[i]; }

  std::optional<Index> find_entity(const EntityId& id) const {
    auto it = entity_index_.find(id.str());
    if (it == entity_index_.end()) return std::nullopt;
    return it->second;
  }
  Index entity_index(const EntityId& id) const {
    if (auto i = find_entity(id)) return *i;
    throw LookupError("unknown entity id '" + id.str() + "'");
  }
  const Entity& entity(const EntityId& id) const { return entities_[entity_index(id)]; }

  std::optional<Index> find_relation(const RelationId& id) const {
    auto it = relation_index_.find(id.str());
    if (it == relation_index_.end()) return std::nullopt;
    return it->second;
  }
  Index relation_index(const RelationId& id) const {
    if (auto i = find_relation(id)) return *i;
    throw LookupError("unknown relation id '" + id.str() + "'");
  }
  const Relation& relation(const RelationId& id) const { return relations_[relation_index(id)]; }

  Index source_of(Index relation) const { return endpoints_[relation].first; }
  Index target_of(Index relation) const { return endpoints_[relation].second; }

  /// Relation indices leaving `e`, ordered by (target id, predicate, relation id).
  std::span<const Index> out_relations(Index e) const {
    return {out_.data() + out_offsets_[e], out_.data() + out_offsets_[e + 1]};
  }
  /// Relation indices entering `e`, ordered by (source id, predicate, relation id).
  std::span<const Index> in_relations(Index e) const {
    return {in_.data() + in_offsets_[e], in_.data() + in_offsets_[e + 1]};
  }

  /// Sorted indices into doc_ids() attesting relation `r`.
  std::span<const std::uint32_t> relation_docs(Index r) const {
    return {docs_.data() + doc_offsets_[r], docs_.data() + doc_offsets_[r + 1]};
  }

  /// Steps available from `e`. Undirected mode merges out and in relations,
  /// ordered by (neighbor id, predicate, relation id), one entry per relation.
  std::vector<Hop> hops(Index e, Traversal mode = Traversal::Directed) const {
    std::vector<Hop> result;
    for (Index r : out_relations(e)) result.push_back({r, target_of(r)});
    if (mode == Traversal::Directed) return result;
    for (Index r : in_relations(e)) {
      if (source_of(r) == e && target_of(r) == e) continue;  // self loop already listed
      result.push_back({r, source_of(r)});
    }
    std::sort(result.begin(), result.end(), [this](const Hop& a, const Hop& b) {
      return std::tie(a.entity, relations_[a.relation].predicate, a.relation) <
             std::tie(b.entity, relations_[b.relation].predicate, b.relation);
    });
    return result;
  }

  bool operator==(const KnowledgeGraph& other) const {
    return entities_ == other.entities_ && relations_ == other.relations_;
  }

 private:
  friend KnowledgeGraph build_graph(std::vector<Entity>, std::vector<Relation>);

  std::vector<Entity> entities_;
  std::vector<Relation> relations_;
  std::vector<std::string> doc_ids_;
  std::unordered_map<std::string, Index> entity_index_;
  std::unordered_map<std::string, Index> relation_index_;
  std::vector<std::pair<Index, Index>> endpoints_;
  std::vector<std::size_t> out_offsets_{0}, in_offsets_{0}, doc_offsets_{0};
  std::vector<Index> out_, in_;
  std::vector<std::uint32_t> docs_;
};

namespace detail {

inline void sort_unique(std::vector<std::string>& v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
}

}  // namespace detail

/// Validates and indexes the inputs. Relations sharing a (source, predicate,
/// target) triple are merged: doc ids and phases are unioned and the smallest
/// relation id is kept.
inline KnowledgeGraph build_graph(std::vector<Entity> entities, std::vector<Relation> relations) {
  using Index = KnowledgeGraph::Index;
  KnowledgeGraph g;

  std::sort(entities.begin(), entities.end(),
            [](const Entity& a, const Entity& b) { return a.id < b.id; });
  for (std::size_t i = 0; i < entities.size(); ++i) {
    Entity& e = entities[i];
    if (e.id.empty()) throw BuildError("entity with empty id");
    if (i > 0 && entities[i - 1].id == e.id)
      throw BuildError("duplicate entity id '" + e.id.str() + "'");
    if (e.canonical_name.empty())
      throw BuildError("entity '" + e.id.str() + "' has an empty canonical name");
    if (!std::isfinite(e.severity) || e.severity < 0.0 || e.severity > 1.0)
      throw BuildError("entity '" + e.id.str() + "' severity outside [0,1]");
    detail::sort_unique(e.aliases);
    g.entity_index_.emplace(e.id.str(), static_cast<Index>(i));
  }

  // Merge duplicate triples.
  std::map<std::tuple<Index, std::string, Index>, Relation> by_triple;
  for (Relation& r : relations) {
    if (r.id.empty()) throw BuildError("relation with empty id");
    auto src = g.entity_index_.find(r.source.str());
    if (src == g.entity_index_.end())
      throw BuildError("relation '" + r.id.str() + "' has dangling source '" + r.source.str() + "'");
    auto dst = g.entity_index_.find(r.target.str());
    if (dst == g.entity_index_.end())
      throw BuildError("relation '" + r.id.str() + "' has dangling target '" + r.target.str() + "'");
    if (r.predicate.empty()) throw BuildError("relation '" + r.id.str() + "' has an empty predicate");
    if (r.doc_ids.empty()) throw BuildError("relation '" + r.id.str() + "' has no document ids");
    auto key = std::make_tuple(src->second, r.predicate, dst->second);
    auto [it, inserted] = by_triple.try_emplace(std::move(key), r);
    if (!inserted) {
      Relation& kept = it->second;
      kept.doc_ids.insert(kept.doc_ids.end(), r.doc_ids.begin(), r.doc_ids.end());
      kept.phases |= r.phases;
      if (r.id < kept.id) kept.id = r.id;
    }
  }

  std::vector<Relation> merged;
  merged.reserve(by_triple.size());
  for (auto& [key, r] : by_triple) {
    detail::sort_unique(r.doc_ids);
    merged.push_back(std::move(r));
  }
  std::sort(merged.begin(), merged.end(),
            [](const Relation& a, const Relation& b) { return a.id < b.id; });
  for (std::size_t i = 1; i < merged.size(); ++i) {
    if (merged[i - 1].id == merged[i].id)
      throw BuildError("relation id '" + merged[i].id.str() + "' used by two different triples");
  }

  // Document table.
  for (const Relation& r : merged) g.doc_ids_.insert(g.doc_ids_.end(), r.doc_ids.begin(), r.doc_ids.end());
  detail::sort_unique(g.doc_ids_);

  g.endpoints_.reserve(merged.size());
  for (std::size_t i = 0; i < merged.size(); ++i) {
    const Relation& r = merged[i];
    g.relation_index_.emplace(r.id.str(), static_cast<Index>(i));
    g.endpoints_.emplace_back(g.entity_index_.at(r.source.str()), g.entity_index_.at(r.target.str()));
    for (const std::string& d : r.doc_ids) {
      auto pos = std::lower_bound(g.doc_ids_.begin(), g.doc_ids_.end(), d);
      g.docs_.push_back(static_cast<std::uint32_t>(pos - g.doc_ids_.begin()));
    }
    g.doc_offsets_.push_back(g.docs_.size());
  }

  // Adjacency in CSR form.
  const std::size_t n = entities.size();
  std::vector<std::vector<Index>> out(n), in(n);
  for (std::size_t i = 0; i < merged.size(); ++i) {
    out[g.endpoints_[i].first].push_back(static_cast<Index>(i));
    in[g.endpoints_[i].second].push_back(static_cast<Index>(i));
  }
  for (std::size_t e = 0; e < n; ++e) {
    std::sort(out[e].begin(), out[e].end(), [&](Index a, Index b) {
      return std::tie(g.endpoints_[a].second, merged[a].predicate, a) <
             std::tie(g.endpoints_[b].second, merged[b].predicate, b);
    });
    std::sort(in[e].begin(), in[e].end(), [&](Index a, Index b) {
      return std::tie(g.endpoints_[a].first, merged[a].predicate, a) <
             std::tie(g.endpoints_[b].first, merged[b].predicate, b);
    });
    g.out_.insert(g.out_.end(), out[e].begin(), out[e].end());
    g.out_offsets_.push_back(g.out_.size());
    g.in_.insert(g.in_.end(), in[e].begin(), in[e].end());
    g.in_offsets_.push_back(g.in_.size());
  }

  g.entities_ = std::move(entities);
  g.relations_ = std::move(merged);
  return g;
}

/// Neighbors of `id` as (relation id, entity id) pairs in traversal order.
inline std::vector<Neighbor> out_neighbors(const KnowledgeGraph& graph, const EntityId& id,
                                           Traversal mode = Traversal::Directed) {
  std::vector<Neighbor> result;
  for (const Hop& h : graph.hops(graph.entity_index(id), mode))
    result.push_back({graph.relation(h.relation).id, graph.entity(h.entity).id});
  return result;
}

/// Relation ids listed in an adjacency list, in stored order.
inline std::vector<RelationId> out_adjacency(const KnowledgeGraph& graph, const EntityId& id) {
  std::vector<RelationId> ids;
  for (auto r : graph.out_relations(graph.entity_index(id))) ids.push_back(graph.relation(r).id);
  return ids;
}

inline std::vector<RelationId> in_adjacency(const KnowledgeGraph& graph, const EntityId& id) {
  std::vector<RelationId> ids;
  for (auto r : graph.in_relations(graph.entity_index(id))) ids.push_back(graph.relation(r).id);
  return ids;
}

struct GraphStats {
  std::size_t entity_count = 0;
  std::size_t relation_count = 0;
  std::array<std::size_t, 3> per_layer{};
  std::size_t doc_count = 0;
  double avg_out_degree = 0.0;
};

inline GraphStats graph_stats(const KnowledgeGraph& graph) {
  GraphStats s;
  s.entity_count = graph.entity_count();
  s.relation_count = graph.relation_count();
  for (const Entity& e : graph.entities()) ++s.per_layer[layer_index(e.layer)];
  s.doc_count = graph.doc_count();
  if (s.entity_count > 0)
    s.avg_out_degree = static_cast<double>(s.relation_count) / static_cast<double>(s.entity_count);
  return s;
}

}  // namespace riskpath
