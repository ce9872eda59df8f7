#pragma once

// Fixtures shared by the unit suites and the acceptance binary.

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <random>
#include <string>
#include <unistd.h>
#include <vector>

#include "riskpath/graph.hpp"
#include "riskpath/ingest.hpp"

namespace riskpath::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "rp") {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            (tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline Entity entity(const std::string& id, Layer layer, double severity = 0.5, const std::string& name = "") {
  return Entity{EntityId(id), name.empty() ? id : name, layer, severity, {}};
}

inline Relation relation(const std::string& id, const std::string& s, const std::string& t,
                         std::vector<std::string> docs = {"d1"}, const std::string& predicate = "affects",
                         PhaseSet phases = {}) {
  return Relation{RelationId(id), EntityId(s), predicate, EntityId(t), std::move(docs), phases};
}

inline std::string pad(std::size_t v, int width = 4) {
  std::string s = std::to_string(v);
  if (static_cast<int>(s.size()) < width) s.insert(0, static_cast<std::size_t>(width) - s.size(), '0');
  return s;
}

struct RandomGraphSpec {
  std::size_t nodes = 50;
  std::size_t edges = 150;
  std::size_t doc_pool = 12;
  int max_docs_per_edge = 4;
  int predicates = 2;
};

/// Seeded random multigraph with mixed layers and quantized severities.
/// Every entity gets a small home set of documents and each relation cites
/// documents from its endpoints' home sets, so consecutive relations share
/// documents and pathway frequencies above one are common.
inline KnowledgeGraph random_graph(std::uint64_t seed, const RandomGraphSpec& spec) {
  std::mt19937_64 rng(seed);
  auto below = [&](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };
  std::vector<Entity> entities;
  std::vector<std::vector<std::string>> home(spec.nodes);
  for (std::size_t i = 0; i < spec.nodes; ++i) {
    const auto layer = static_cast<Layer>(below(3));
    // Quantized severities make score ties, and so tie-breaks, common.
    const double severity = static_cast<double>(below(5)) / 4.0;
    entities.push_back(entity("e" + pad(i), layer, severity));
    for (int d = 0; d < 2; ++d) home[i].push_back("doc" + pad(below(spec.doc_pool), 3));
  }
  std::vector<Relation> relations;
  for (std::size_t i = 0; i < spec.edges && spec.nodes > 0; ++i) {
    const std::size_t s = below(spec.nodes), t = below(spec.nodes);
    std::vector<std::string> docs;
    const int k = 1 + static_cast<int>(below(static_cast<std::size_t>(spec.max_docs_per_edge)));
    for (int d = 0; d < k; ++d) {
      const auto& pool = below(2) ? home[s] : home[t];
      docs.push_back(below(8) ? pool[below(pool.size())] : "doc" + pad(below(spec.doc_pool), 3));
    }
    relations.push_back(relation("r" + pad(i, 5), entities[s].id.str(), entities[t].id.str(), docs,
                                 "p" + std::to_string(below(static_cast<std::size_t>(spec.predicates)))));
  }
  return build_graph(std::move(entities), std::move(relations));
}

/// Dense power iteration built straight from the relation list.
inline std::vector<double> dense_pagerank(const KnowledgeGraph& g, double damping, int iterations = 2000) {
  const std::size_t n = g.entity_count();
  std::vector<std::vector<double>> m(n, std::vector<double>(n, 0.0));
  std::vector<double> outdeg(n, 0.0);
  for (const Relation& r : g.relations()) outdeg[g.entity_index(r.source)] += 1.0;
  for (const Relation& r : g.relations()) {
    const auto u = g.entity_index(r.source), v = g.entity_index(r.target);
    m[v][u] += 1.0 / outdeg[u];
  }
  for (std::size_t u = 0; u < n; ++u)
    if (outdeg[u] == 0.0)
      for (std::size_t v = 0; v < n; ++v) m[v][u] = 1.0 / static_cast<double>(n);
  std::vector<double> x(n, 1.0 / static_cast<double>(n)), y(n);
  for (int it = 0; it < iterations; ++it) {
    for (std::size_t v = 0; v < n; ++v) {
      double acc = 0.0;
      for (std::size_t u = 0; u < n; ++u) acc += m[v][u] * x[u];
      y[v] = (1.0 - damping) / static_cast<double>(n) + damping * acc;
    }
    x.swap(y);
  }
  return x;
}

/// Relations whose target layers carry the given per-phase counts out of
/// `per_layer` tagged relations each. Counts are [phase][layer].
inline KnowledgeGraph temporal_fixture(const std::array<std::array<int, 3>, 3>& counts, int per_layer = 100) {
  std::vector<Entity> entities = {entity("src", Layer::Physical)};
  std::vector<Relation> relations;
  int next = 0;
  for (Layer layer : kAllLayers) {
    const std::size_t li = layer_index(layer);
    // Place the two largest phases at opposite ends so their union covers
    // every relation, then the third from the front.
    std::array<int, 3> order = {0, 1, 2};
    std::sort(order.begin(), order.end(), [&](int a, int b) { return counts[a][li] > counts[b][li]; });
    std::vector<PhaseSet> tags(static_cast<std::size_t>(per_layer));
    auto mark = [&](int phase, int from, int to) {
      for (int i = from; i < to; ++i) tags[static_cast<std::size_t>(i)].insert(static_cast<Phase>(phase));
    };
    mark(order[0], 0, counts[order[0]][li]);
    mark(order[1], per_layer - counts[order[1]][li], per_layer);
    mark(order[2], 0, counts[order[2]][li]);
    for (int i = 0; i < per_layer; ++i) {
      const std::string target = std::string(to_string(layer)) + "-" + pad(static_cast<std::size_t>(i));
      entities.push_back(entity(target, layer));
      relations.push_back(relation("r" + pad(static_cast<std::size_t>(next++), 5), "src", target, {"d1"}, "impacts",
                                   tags[static_cast<std::size_t>(i)]));
    }
  }
  return build_graph(std::move(entities), std::move(relations));
}

/// Reference temporal distribution percentages, [phase][layer].
inline constexpr std::array<std::array<int, 3>, 3> kTemporalTable = {{{78, 45, 23}, {52, 71, 58}, {31, 63, 82}}};

}  // namespace riskpath::testing
