#pragma once

#include <algorithm>
#include <cctype>
#include <istream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "riskpath/graph.hpp"

namespace riskpath {

struct RawTriple {
  std::string subject;
  std::string predicate;
  std::string object;
  std::string doc_id;
  PhaseSet phases;
  std::size_t line = 0;  // 1-based source line, 0 when synthesized

  bool operator==(const RawTriple&) const = default;
};

struct EntityMeta {
  std::string name;
  Layer layer = Layer::Physical;
  double severity = 0.0;
  std::vector<std::string> aliases;
};

struct RecordError {
  std::size_t line = 0;
  std::string reason;
  bool operator==(const RecordError&) const = default;
};

/// Validation failure that carries the per-record report which caused it.
class ReportedFailure : public ValidationError {
 public:
  ReportedFailure(const std::string& what, std::vector<RecordError> report)
      : ValidationError(what), report_(std::move(report)) {}
  const std::vector<RecordError>& report() const { return report_; }

 private:
  std::vector<RecordError> report_;
};

/// Documents attesting each relation. Mirrors the provenance stored in the
/// graph and feeds pathway frequency.
struct CorpusStats {
  std::size_t doc_count = 0;
  std::map<RelationId, std::vector<std::string>> edge_doc_index;

  bool operator==(const CorpusStats&) const = default;
};

inline CorpusStats corpus_stats(const KnowledgeGraph& graph) {
  CorpusStats s;
  s.doc_count = graph.doc_count();
  for (const Relation& r : graph.relations()) s.edge_doc_index.emplace(r.id, r.doc_ids);
  return s;
}

// ---------------------------------------------------------------------------
// Name normalization

inline bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

inline std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return std::string(s.substr(b, e - b));
}

/// lowercase -> trim -> collapse internal whitespace runs to one space.
/// Non-ASCII bytes pass through untouched.
inline std::string normalize_name(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  bool pending_space = false;
  for (char c : raw) {
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Parsing

enum class TripleFormat { Jsonl, Tsv };

struct ParseOptions {
  /// Parsing fails when malformed / records exceeds this fraction.
  double max_malformed_fraction = 0.10;
};

struct ParseResult {
  std::vector<RawTriple> triples;
  std::vector<RecordError> errors;
  std::size_t records = 0;  // non-blank lines seen
};

namespace detail {

inline bool parse_phase_list(const std::vector<std::string>& names, PhaseSet& out, std::string& why) {
  for (const auto& n : names) {
    auto p = parse_phase(normalize_name(n));
    if (!p) {
      why = "unknown phase '" + n + "'";
      return false;
    }
    out.insert(*p);
  }
  return true;
}

inline std::optional<RawTriple> parse_jsonl_triple(const std::string& line, std::string& why) {
  nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    why = "not a JSON object";
    return std::nullopt;
  }
  RawTriple t;
  const std::pair<const char*, std::string*> fields[] = {
      {"s", &t.subject}, {"p", &t.predicate}, {"o", &t.object}, {"doc", &t.doc_id}};
  for (auto [key, dst] : fields) {
    auto it = j.find(key);
    if (it == j.end()) {
      why = std::string("missing field '") + key + "'";
      return std::nullopt;
    }
    if (!it->is_string()) {
      why = std::string("field '") + key + "' is not a string";
      return std::nullopt;
    }
    *dst = trim(it->get_ref<const std::string&>());
    if (dst->empty()) {
      why = std::string("field '") + key + "' is empty";
      return std::nullopt;
    }
  }
  if (auto it = j.find("phases"); it != j.end() && !it->is_null()) {
    if (!it->is_array()) {
      why = "field 'phases' is not an array";
      return std::nullopt;
    }
    std::vector<std::string> names;
    for (const auto& p : *it) {
      if (!p.is_string()) {
        why = "field 'phases' contains a non-string";
        return std::nullopt;
      }
      names.push_back(p.get<std::string>());
    }
    if (!parse_phase_list(names, t.phases, why)) return std::nullopt;
  }
  return t;
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = s.find(sep, start);
    parts.emplace_back(s.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

inline std::optional<RawTriple> parse_tsv_triple(const std::string& line, std::string& why) {
  std::string_view view = line;
  if (!view.empty() && view.back() == '\r') view.remove_suffix(1);
  auto cols = split(view, '\t');
  if (cols.size() < 4 || cols.size() > 5) {
    why = "expected 4 or 5 tab-separated columns, got " + std::to_string(cols.size());
    return std::nullopt;
  }
  RawTriple t;
  t.subject = trim(cols[0]);
  t.predicate = trim(cols[1]);
  t.object = trim(cols[2]);
  t.doc_id = trim(cols[3]);
  const char* names[] = {"subject", "predicate", "object", "doc"};
  const std::string* vals[] = {&t.subject, &t.predicate, &t.object, &t.doc_id};
  for (int i = 0; i < 4; ++i) {
    if (vals[i]->empty()) {
      why = std::string("column '") + names[i] + "' is empty";
      return std::nullopt;
    }
  }
  if (cols.size() == 5 && !trim(cols[4]).empty()) {
    std::vector<std::string> phase_names;
    for (auto& p : split(trim(cols[4]), ',')) phase_names.push_back(trim(p));
    if (!parse_phase_list(phase_names, t.phases, why)) return std::nullopt;
  }
  return t;
}

}  // namespace detail

/// Parses a triple stream. Malformed records are collected with their line
/// numbers; if they exceed the tolerated fraction a ReportedFailure is thrown.
inline ParseResult parse_triples(std::istream& in, TripleFormat format, const ParseOptions& options = {}) {
  ParseResult result;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    ++result.records;
    std::string why;
    auto t = format == TripleFormat::Jsonl ? detail::parse_jsonl_triple(line, why)
                                           : detail::parse_tsv_triple(line, why);
    if (!t) {
      result.errors.push_back({lineno, why});
      continue;
    }
    t->line = lineno;
    result.triples.push_back(std::move(*t));
  }
  if (result.records > 0) {
    double fraction = static_cast<double>(result.errors.size()) / static_cast<double>(result.records);
    if (fraction > options.max_malformed_fraction) {
      throw ReportedFailure(std::to_string(result.errors.size()) + " of " + std::to_string(result.records) +
                                " records malformed, above the tolerated " +
                                std::to_string(options.max_malformed_fraction * 100.0) + "%",
                            result.errors);
    }
  }
  return result;
}

/// Entity metadata JSONL. Any malformed line is a hard failure: metadata is
/// configuration, not bulk data.
inline std::vector<EntityMeta> parse_entity_meta(std::istream& in) {
  std::vector<EntityMeta> out;
  std::vector<RecordError> errors;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto j = nlohmann::json::parse(line, nullptr, false);
    auto fail = [&](std::string why) { errors.push_back({lineno, std::move(why)}); };
    if (j.is_discarded() || !j.is_object()) {
      fail("not a JSON object");
      continue;
    }
    EntityMeta m;
    if (!j.contains("name") || !j["name"].is_string() || trim(j["name"].get<std::string>()).empty()) {
      fail("missing or empty 'name'");
      continue;
    }
    m.name = j["name"].get<std::string>();
    if (!j.contains("layer") || !j["layer"].is_string()) {
      fail("missing 'layer'");
      continue;
    }
    auto layer = parse_layer(normalize_name(j["layer"].get<std::string>()));
    if (!layer) {
      fail("unknown layer '" + j["layer"].get<std::string>() + "'");
      continue;
    }
    m.layer = *layer;
    if (!j.contains("severity") || !j["severity"].is_number()) {
      fail("missing numeric 'severity'");
      continue;
    }
    m.severity = j["severity"].get<double>();
    if (!(m.severity >= 0.0 && m.severity <= 1.0)) {
      fail("severity outside [0,1]");
      continue;
    }
    if (j.contains("aliases")) {
      if (!j["aliases"].is_array()) {
        fail("'aliases' is not an array");
        continue;
      }
      bool ok = true;
      for (const auto& a : j["aliases"]) {
        if (!a.is_string()) ok = false;
        else m.aliases.push_back(a.get<std::string>());
      }
      if (!ok) {
        fail("'aliases' contains a non-string");
        continue;
      }
    }
    out.push_back(std::move(m));
  }
  if (!errors.empty())
    throw ReportedFailure("entity metadata has " + std::to_string(errors.size()) + " malformed line(s)",
                          std::move(errors));
  return out;
}

struct AliasEntry {
  std::string alias;
  std::string name;
};

/// Alias JSONL: {"alias": "...", "name": "..."} per line.
inline std::vector<AliasEntry> parse_aliases(std::istream& in) {
  std::vector<AliasEntry> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("alias") || !j.contains("name") ||
        !j["alias"].is_string() || !j["name"].is_string())
      throw ConfigError("alias file line " + std::to_string(lineno) + ": expected {\"alias\",\"name\"}");
    out.push_back({j["alias"].get<std::string>(), j["name"].get<std::string>()});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Layer fallback lexicon

struct LexiconRule {
  std::string keyword;  // normalized
  Layer layer;
};

/// Keyword rules assigning a layer to entities without metadata. A rule
/// matches when its keyword appears as a whole-word run inside the name;
/// the longest matching keyword wins, then the earliest rule.
class LayerLexicon {
 public:
  LayerLexicon() = default;
  explicit LayerLexicon(std::vector<LexiconRule> rules) : rules_(std::move(rules)) {
    for (auto& r : rules_) r.keyword = normalize_name(r.keyword);
  }

  std::optional<Layer> classify(std::string_view normalized_name) const {
    const std::string padded = " " + std::string(normalized_name) + " ";
    const LexiconRule* best = nullptr;
    for (const auto& r : rules_) {
      if (r.keyword.empty()) continue;
      if (padded.find(" " + r.keyword + " ") == std::string::npos) continue;
      if (!best || r.keyword.size() > best->keyword.size()) best = &r;
    }
    if (!best) return std::nullopt;
    return best->layer;
  }

  bool empty() const { return rules_.empty(); }

 private:
  std::vector<LexiconRule> rules_;
};

/// Lexicon JSONL: {"keyword": "...", "layer": "physical"|"social"|"economic"}.
inline LayerLexicon parse_lexicon(std::istream& in) {
  std::vector<LexiconRule> rules;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto j = nlohmann::json::parse(line, nullptr, false);
    std::optional<Layer> layer;
    if (!j.is_discarded() && j.is_object() && j.contains("layer") && j["layer"].is_string())
      layer = parse_layer(normalize_name(j["layer"].get<std::string>()));
    if (!layer || !j.contains("keyword") || !j["keyword"].is_string())
      throw ConfigError("lexicon line " + std::to_string(lineno) + ": expected {\"keyword\",\"layer\"}");
    rules.push_back({j["keyword"].get<std::string>(), *layer});
  }
  return LayerLexicon(std::move(rules));
}

// ---------------------------------------------------------------------------
// Canonicalization

/// Normalized surface form -> canonical name. Canonical names map to
/// themselves, which makes resolution idempotent.
class AliasMap {
 public:
  AliasMap() = default;

  AliasMap(const std::vector<EntityMeta>& meta, const std::vector<AliasEntry>& extra = {}) {
    for (const auto& m : meta) {
      std::string canon = normalize_name(m.name);
      if (!registered_.insert(canon).second)
        throw ConfigError("duplicate entity metadata for '" + canon + "'");
      add(canon, canon);
    }
    for (const auto& a : extra) add(normalize_name(a.name), normalize_name(a.name));
    for (const auto& m : meta) {
      std::string canon = normalize_name(m.name);
      for (const auto& alias : m.aliases) add(normalize_name(alias), canon);
    }
    for (const auto& a : extra) add(normalize_name(a.alias), normalize_name(a.name));
  }

  /// Canonical form of a surface name (normalized even when no entry exists).
  std::string resolve(std::string_view surface) const {
    std::string norm = normalize_name(surface);
    auto it = map_.find(norm);
    return it == map_.end() ? norm : it->second;
  }

  bool is_registered(const std::string& canonical) const { return registered_.count(canonical) > 0; }

 private:
  void add(const std::string& key, const std::string& canonical) {
    if (key.empty()) throw ConfigError("empty alias or entity name");
    auto [it, inserted] = map_.emplace(key, canonical);
    if (!inserted && it->second != canonical)
      throw ConfigError("alias collision: '" + key + "' maps to both '" + it->second + "' and '" +
                        canonical + "'");
  }

  std::unordered_map<std::string, std::string> map_;
  std::set<std::string> registered_;
};

struct CanonicalizeResult {
  std::vector<RawTriple> triples;
  /// Canonical names that have no metadata entry, sorted.
  std::vector<std::string> unregistered;
};

inline CanonicalizeResult canonicalize(std::vector<RawTriple> raw, const AliasMap& aliases) {
  CanonicalizeResult result;
  std::set<std::string> unregistered;
  for (RawTriple& t : raw) {
    t.subject = aliases.resolve(t.subject);
    t.object = aliases.resolve(t.object);
    if (!aliases.is_registered(t.subject)) unregistered.insert(t.subject);
    if (!aliases.is_registered(t.object)) unregistered.insert(t.object);
  }
  result.triples = std::move(raw);
  result.unregistered.assign(unregistered.begin(), unregistered.end());
  return result;
}

inline CanonicalizeResult canonicalize(std::vector<RawTriple> raw, const std::vector<EntityMeta>& meta) {
  return canonicalize(std::move(raw), AliasMap(meta));
}

// ---------------------------------------------------------------------------
// Aggregation

struct AggregateOptions {
  const LayerLexicon* lexicon = nullptr;
  bool strict = false;
  double unregistered_severity = 0.5;
};

struct AggregateResult {
  std::vector<Entity> entities;
  std::vector<Relation> relations;
  CorpusStats stats;
  std::vector<RecordError> rejections;
  std::vector<std::string> warnings;
};

inline std::string relation_id_for_rank(std::size_t rank) {
  std::string digits = std::to_string(rank);
  if (digits.size() < 8) digits.insert(0, 8 - digits.size(), '0');
  return "r" + digits;
}

/// Builds one entity per canonical name and one relation per distinct
/// (subject, predicate, object). Relation ids follow the sorted triple order,
/// so the output does not depend on input order.
inline AggregateResult aggregate(const std::vector<RawTriple>& triples, const std::vector<EntityMeta>& meta,
                                 const AggregateOptions& options = {}) {
  AggregateResult result;
  std::map<std::string, const EntityMeta*> meta_by_name;
  for (const auto& m : meta) meta_by_name.emplace(normalize_name(m.name), &m);

  std::set<std::string> names;
  for (const auto& t : triples) {
    names.insert(t.subject);
    names.insert(t.object);
  }

  std::map<std::string, Entity> accepted;
  std::map<std::string, std::string> rejected;  // name -> reason
  std::vector<std::string> unregistered;
  for (const auto& name : names) {
    Entity e;
    e.id = EntityId(name);
    e.canonical_name = name;
    if (auto it = meta_by_name.find(name); it != meta_by_name.end()) {
      e.layer = it->second->layer;
      e.severity = it->second->severity;
      for (const auto& a : it->second->aliases) {
        std::string norm = normalize_name(a);
        if (norm != name) e.aliases.push_back(norm);
      }
      detail::sort_unique(e.aliases);
      accepted.emplace(name, std::move(e));
      continue;
    }
    unregistered.push_back(name);
    std::optional<Layer> layer = options.lexicon ? options.lexicon->classify(name) : std::nullopt;
    if (!layer) {
      rejected.emplace(name, "unregistered entity '" + name + "' matches no layer rule");
      continue;
    }
    e.layer = *layer;
    e.severity = options.unregistered_severity;
    result.warnings.push_back("unregistered entity '" + name + "' assigned layer " +
                              std::string(to_string(*layer)) + " from lexicon, default severity");
    accepted.emplace(name, std::move(e));
  }

  struct Acc {
    std::set<std::string> docs;
    PhaseSet phases;
  };
  std::map<std::tuple<std::string, std::string, std::string>, Acc> grouped;
  std::set<std::string> docs;
  for (const auto& t : triples) {
    auto bad = rejected.find(t.subject);
    if (bad == rejected.end()) bad = rejected.find(t.object);
    if (bad != rejected.end()) {
      result.rejections.push_back({t.line, bad->second});
      continue;
    }
    Acc& acc = grouped[{t.subject, t.predicate, t.object}];
    acc.docs.insert(t.doc_id);
    acc.phases |= t.phases;
    docs.insert(t.doc_id);
  }
  std::sort(result.rejections.begin(), result.rejections.end(),
            [](const RecordError& a, const RecordError& b) { return std::tie(a.line, a.reason) < std::tie(b.line, b.reason); });

  if (options.strict && !unregistered.empty()) {
    std::vector<RecordError> report = result.rejections;
    for (const auto& name : unregistered)
      if (!rejected.count(name)) report.push_back({0, "unregistered entity '" + name + "' (strict mode)"});
    throw ReportedFailure(std::to_string(unregistered.size()) + " unregistered entit" +
                              (unregistered.size() == 1 ? "y" : "ies") + " in strict mode",
                          std::move(report));
  }

  // Entities that only occur in rejected triples still exist; keep all accepted.
  for (auto& [name, e] : accepted) result.entities.push_back(std::move(e));

  std::size_t rank = 0;
  for (auto& [key, acc] : grouped) {
    Relation r;
    r.id = RelationId(relation_id_for_rank(rank++));
    r.source = EntityId(std::get<0>(key));
    r.predicate = std::get<1>(key);
    r.target = EntityId(std::get<2>(key));
    r.doc_ids.assign(acc.docs.begin(), acc.docs.end());
    r.phases = acc.phases;
    result.stats.edge_doc_index.emplace(r.id, r.doc_ids);
    result.relations.push_back(std::move(r));
  }
  result.stats.doc_count = docs.size();
  return result;
}

}  // namespace riskpath
