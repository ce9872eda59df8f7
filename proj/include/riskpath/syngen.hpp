#pragma once

// Deterministic synthetic corpus: per-document triple sets over three layers
// of entities, with optional planted rare cross-layer chains and a manifest
// recording the ground truth.

#include <algorithm>
#include <cstdio>
#include <map>
#include <random>
#include <set>
#include <tuple>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "riskpath/common.hpp"

namespace riskpath {

class GenerationError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

struct PlantedChainSpec {
  std::vector<Layer> layers;
  int attestation = 1;
  /// Optional explicit entity names; generated names are used when empty.
  std::vector<std::string> entities;
};

struct GenSpec {
  std::size_t n_docs = 1000;
  std::uint64_t seed = 1;
  std::size_t entities_per_layer = 400;
  int relations_min = 8;
  int relations_max = 15;
  std::vector<PlantedChainSpec> planted_chains;
  double background_noise = 1.5;      // distinct background relations per entity
  double cross_layer_bias = 0.02;     // chance a background relation crosses layers
  double topical_continuation = 0.8;  // chance the next relation in a document continues the walk
  int hot_chains = 4;                 // well-studied Physical->Social->Economic background chains
  double hot_chain_rate = 0.1;        // chance a document discusses one of the hot chains
  double planted_severity = 0.9;
  double alias_rate = 0.05;      // mentions written through an alias surface form
  double phase_rate = 0.5;       // triples carrying phase tags
  double malformed_rate = 0.0;   // extra malformed lines for ingest testing
  int d_max = 5;

  void validate() const {
    auto bad = [](const std::string& why) { throw GenerationError("generator spec: " + why); };
    if (relations_min < 1 || relations_max > 100 || relations_min > relations_max)
      bad("relations per document must satisfy 1 <= min <= max <= 100");
    if (n_docs > 0 && entities_per_layer < 2) bad("entities_per_layer must be >= 2");
    if (!(background_noise > 0.0)) bad("background_noise must be > 0");
    if (hot_chains < 0) bad("hot_chains must be >= 0");
    if (hot_chains > 0 && relations_max < 2) bad("hot chains need relations_max >= 2");
    auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (!unit(cross_layer_bias) || !unit(topical_continuation) || !unit(hot_chain_rate) || !unit(planted_severity) || !unit(alias_rate) ||
        !unit(phase_rate) || !unit(malformed_rate))
      bad("probabilities and severities must lie in [0,1]");
    for (const auto& c : planted_chains) {
      if (c.layers.size() < 2) bad("planted chain needs at least 2 entities");
      if (static_cast<int>(c.layers.size()) > d_max + 1) bad("planted chain longer than d_max + 1 entities");
      if (c.attestation < 1) bad("planted chain attestation must be >= 1");
      if (static_cast<std::size_t>(c.attestation) > n_docs) bad("planted chain attestation exceeds n_docs");
      if (!c.entities.empty() && c.entities.size() != c.layers.size()) bad("planted chain names/layers mismatch");
      if (static_cast<int>(c.layers.size()) - 1 > relations_max) bad("planted chain has more relations than a document may hold");
    }
  }
};

struct GeneratedCorpus {
  std::string triples_jsonl;
  std::string entities_jsonl;
  nlohmann::json manifest;
};

namespace detail {

/// Platform-independent draws on top of mt19937_64 (the standard
/// distributions are implementation-defined).
class GenRng {
 public:
  explicit GenRng(std::uint64_t seed) : engine_(seed) {}
  std::uint64_t next() { return engine_(); }
  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  bool chance(double p) { return uniform01() < p; }
  std::size_t below(std::size_t n) {
    const std::uint64_t bound = n;
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
    std::uint64_t x;
    do x = next();
    while (x >= limit);
    return static_cast<std::size_t>(x % bound);
  }
  int between(int lo, int hi) { return lo + static_cast<int>(below(static_cast<std::size_t>(hi - lo + 1))); }

 private:
  std::mt19937_64 engine_;
};

inline std::string padded(std::size_t v, int width) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%0*zu", width, v);
  return buf;
}

inline constexpr const char* kLayerPrefix[3] = {"phys", "soc", "econ"};
inline constexpr const char* kPredicates[] = {"increases", "reduces",   "disrupts", "triggers",
                                              "strains",   "amplifies", "delays",   "drives"};
inline constexpr const char* kPlantedPredicate = "propagates to";

}  // namespace detail

inline GeneratedCorpus generate(const GenSpec& spec) {
  using nlohmann::json;
  spec.validate();
  detail::GenRng rng(spec.seed);
  GeneratedCorpus out;

  json spec_echo = {{"n_docs", spec.n_docs},
                    {"seed", spec.seed},
                    {"entities_per_layer", spec.entities_per_layer},
                    {"relations_per_doc_range", {spec.relations_min, spec.relations_max}},
                    {"background_noise", spec.background_noise},
                    {"cross_layer_bias", spec.cross_layer_bias},
                    {"topical_continuation", spec.topical_continuation},
                    {"hot_chains", spec.hot_chains},
                    {"hot_chain_rate", spec.hot_chain_rate},
                    {"planted_severity", spec.planted_severity},
                    {"alias_rate", spec.alias_rate},
                    {"phase_rate", spec.phase_rate},
                    {"malformed_rate", spec.malformed_rate},
                    {"d_max", spec.d_max}};
  json chains_echo = json::array();
  for (const auto& c : spec.planted_chains) {
    json layers = json::array();
    for (Layer l : c.layers) layers.push_back(std::string(to_string(l)));
    chains_echo.push_back({{"layers", layers}, {"attestation", c.attestation}, {"entities", c.entities}});
  }
  spec_echo["planted_chains"] = chains_echo;

  if (spec.n_docs == 0) {
    out.manifest = {{"chains", json::array()},
                    {"counts", {{"entities", 0}, {"relations", 0}, {"docs", 0}, {"triples", 0}, {"malformed_lines", 0}}},
                    {"seed", spec.seed},
                    {"spec_echo", spec_echo}};
    return out;
  }

  // Entities -----------------------------------------------------------------
  struct GenEntity {
    std::string name;
    std::string alias;
    Layer layer;
    double severity;
  };
  std::vector<GenEntity> entities;
  std::map<std::string, std::size_t> by_name;
  std::array<std::vector<std::size_t>, 3> layer_members;
  for (Layer l : kAllLayers) {
    for (std::size_t i = 0; i < spec.entities_per_layer; ++i) {
      GenEntity e;
      e.name = std::string(detail::kLayerPrefix[layer_index(l)]) + "-" + detail::padded(i, 4);
      e.alias = std::string(detail::kLayerPrefix[layer_index(l)]) + " " + detail::padded(i, 4);
      e.layer = l;
      e.severity = rng.uniform01();
      by_name.emplace(e.name, entities.size());
      layer_members[layer_index(l)].push_back(entities.size());
      entities.push_back(std::move(e));
    }
  }
  const std::size_t background_entities = entities.size();

  // Planted chains -------------------------------------------------------------
  using Triple = std::tuple<std::size_t, std::string, std::size_t>;
  std::vector<std::vector<Triple>> chain_edges(spec.planted_chains.size());
  std::set<Triple> planted;
  for (std::size_t c = 0; c < spec.planted_chains.size(); ++c) {
    const auto& chain = spec.planted_chains[c];
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < chain.layers.size(); ++i) {
      std::string name = chain.entities.empty() ? "planted-" + detail::padded(c, 2) + "-" + std::to_string(i)
                                                : chain.entities[i];
      auto it = by_name.find(name);
      if (it == by_name.end()) {
        GenEntity e{name, "", chain.layers[i], spec.planted_severity};
        it = by_name.emplace(name, entities.size()).first;
        entities.push_back(std::move(e));
      } else if (entities[it->second].layer != chain.layers[i]) {
        throw GenerationError("planted chain entity '" + name + "' already exists on another layer");
      }
      members.push_back(it->second);
    }
    for (std::size_t i = 0; i + 1 < members.size(); ++i) {
      Triple t{members[i], detail::kPlantedPredicate, members[i + 1]};
      if (!planted.insert(t).second)
        throw GenerationError("planted chain " + std::to_string(c) + " reuses an edge of another planted chain");
      chain_edges[c].push_back(t);
    }
  }

  // Background relation pool ----------------------------------------------------
  const auto pool_size = static_cast<std::size_t>(
      std::max<double>(static_cast<double>(spec.relations_max), spec.background_noise * static_cast<double>(background_entities)));
  std::vector<Triple> pool;
  std::set<Triple> pool_set;
  std::vector<std::vector<std::size_t>> pool_out(entities.size());
  const std::size_t n_predicates = std::size(detail::kPredicates);
  while (pool.size() < pool_size) {
    const std::size_t s = rng.below(background_entities);
    std::size_t layer = layer_index(entities[s].layer);
    if (rng.chance(spec.cross_layer_bias)) layer = (layer + 1 + rng.below(2)) % 3;
    const auto& candidates = layer_members[layer];
    const std::size_t o = candidates[rng.below(candidates.size())];
    if (o == s) continue;
    Triple t{s, detail::kPredicates[rng.below(n_predicates)], o};
    if (planted.count(t) || !pool_set.insert(t).second) continue;
    pool_out[s].push_back(pool.size());
    pool.push_back(t);
  }

  // Well-studied chains: cross-layer background paths that many documents attest.
  std::vector<std::vector<Triple>> hot_edges(static_cast<std::size_t>(spec.hot_chains));
  for (auto& chain : hot_edges) {
    std::size_t prev = layer_members[0][rng.below(layer_members[0].size())];
    for (std::size_t layer = 1; layer < 3; ++layer) {
      const std::size_t next = layer_members[layer][rng.below(layer_members[layer].size())];
      Triple t{prev, detail::kPredicates[rng.below(n_predicates)], next};
      if (pool_set.insert(t).second) {
        pool_out[prev].push_back(pool.size());
        pool.push_back(t);
      }
      chain.push_back(t);
      prev = next;
    }
  }

  // Attestation documents per chain -----------------------------------------------
  std::vector<std::vector<std::size_t>> doc_chains(spec.n_docs);
  std::vector<std::vector<std::string>> chain_docs(spec.planted_chains.size());
  for (std::size_t c = 0; c < spec.planted_chains.size(); ++c) {
    std::set<std::size_t> chosen;
    while (chosen.size() < static_cast<std::size_t>(spec.planted_chains[c].attestation))
      chosen.insert(rng.below(spec.n_docs));
    for (auto d : chosen) doc_chains[d].push_back(c);
  }

  // Documents -------------------------------------------------------------------
  auto surface = [&](std::size_t e) -> const std::string& {
    const GenEntity& ent = entities[e];
    if (!ent.alias.empty() && rng.chance(spec.alias_rate)) return ent.alias;
    return ent.name;
  };
  auto draw_phases = [&]() {
    json phases = json::array();
    if (!rng.chance(spec.phase_rate)) return phases;
    const std::size_t mask = 1 + rng.below(7);
    for (Phase p : kAllPhases)
      if (mask & (std::size_t{1} << static_cast<unsigned>(p))) phases.push_back(std::string(to_string(p)));
    return phases;
  };

  std::set<Triple> used;
  std::set<std::size_t> used_entities;
  std::size_t triple_lines = 0, malformed_lines = 0;
  json per_doc_counts = json::array();
  for (std::size_t d = 0; d < spec.n_docs; ++d) {
    const std::string doc = "doc-" + detail::padded(d, 6);
    int count = rng.between(spec.relations_min, spec.relations_max);
    std::vector<Triple> rels;
    std::set<Triple> in_doc;
    for (std::size_t c : doc_chains[d]) {
      for (const auto& t : chain_edges[c]) {
        rels.push_back(t);
        in_doc.insert(t);
        chain_docs[c].push_back(doc);
      }
    }
    if (!hot_edges.empty() && rng.chance(spec.hot_chain_rate)) {
      for (const auto& t : hot_edges[rng.below(hot_edges.size())])
        if (in_doc.insert(t).second) rels.push_back(t);
    }
    if (static_cast<int>(rels.size()) > spec.relations_max)
      throw GenerationError("document " + doc + " must carry more planted relations than relations_max");
    count = std::max(count, static_cast<int>(rels.size()));

    // Topical walk over the background pool.
    std::size_t current = rng.below(pool.size());
    int stalls = 0;
    while (static_cast<int>(rels.size()) < count) {
      const Triple& t = pool[current];
      if (in_doc.insert(t).second) {
        rels.push_back(t);
        stalls = 0;
      } else {
        ++stalls;
      }
      const auto& next = pool_out[std::get<2>(pool[current])];
      if (stalls < 8 && !next.empty() && rng.chance(spec.topical_continuation)) current = next[rng.below(next.size())];
      else current = rng.below(pool.size());
    }

    per_doc_counts.push_back(rels.size());
    for (const auto& t : rels) {
      json line = {{"s", surface(std::get<0>(t))}, {"p", std::get<1>(t)}, {"o", surface(std::get<2>(t))}, {"doc", doc}};
      json phases = planted.count(t) ? json::array() : draw_phases();
      if (!phases.empty()) line["phases"] = phases;
      out.triples_jsonl += line.dump() + "\n";
      ++triple_lines;
      used.insert(t);
      used_entities.insert(std::get<0>(t));
      used_entities.insert(std::get<2>(t));
      if (spec.malformed_rate > 0.0 && rng.chance(spec.malformed_rate)) {
        out.triples_jsonl += json{{"s", std::get<0>(t) < entities.size() ? entities[std::get<0>(t)].name : ""},
                                  {"p", std::get<1>(t)},
                                  {"doc", doc}}
                                 .dump() +
                             "\n";
        ++malformed_lines;
      }
    }
  }

  for (const auto& e : entities) {
    json m = {{"name", e.name}, {"layer", std::string(to_string(e.layer))}, {"severity", e.severity}};
    m["aliases"] = e.alias.empty() ? json::array() : json::array({e.alias});
    out.entities_jsonl += m.dump() + "\n";
  }

  json chains = json::array();
  for (std::size_t c = 0; c < spec.planted_chains.size(); ++c) {
    json names = json::array(), layers = json::array(), preds = json::array();
    for (std::size_t i = 0; i < chain_edges[c].size(); ++i) {
      if (i == 0) {
        names.push_back(entities[std::get<0>(chain_edges[c][i])].name);
        layers.push_back(std::string(to_string(entities[std::get<0>(chain_edges[c][i])].layer)));
      }
      names.push_back(entities[std::get<2>(chain_edges[c][i])].name);
      layers.push_back(std::string(to_string(entities[std::get<2>(chain_edges[c][i])].layer)));
      preds.push_back(std::get<1>(chain_edges[c][i]));
    }
    chains.push_back({{"entities", names},
                      {"layers", layers},
                      {"predicates", preds},
                      {"attestation", spec.planted_chains[c].attestation},
                      {"attestation_docs", chain_docs[c]}});
  }

  out.manifest = {{"chains", chains},
                  {"counts",
                   {{"entities", used_entities.size()},
                    {"relations", used.size()},
                    {"docs", spec.n_docs},
                    {"triples", triple_lines},
                    {"malformed_lines", malformed_lines}}},
                  {"relations_per_doc", per_doc_counts},
                  {"seed", spec.seed},
                  {"spec_echo", spec_echo}};
  return out;
}

}  // namespace riskpath
