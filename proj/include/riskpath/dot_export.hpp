#pragma once

#include <optional>
#include <set>
#include <sstream>
#include <string>

#include "riskpath/discovery.hpp"
#include "riskpath/graph.hpp"

namespace riskpath {

inline std::string_view layer_color(Layer layer) {
  switch (layer) {
    case Layer::Physical: return "#f4a261";
    case Layer::Social: return "#8ecae6";
    case Layer::Economic: return "#b7e4c7";
  }
  return "#ffffff";
}

inline std::string dot_quote(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

/// Graphviz rendering. Nodes are filled by layer; edges carry the predicate
/// and the number of attesting documents. When `pathways` is given, all
/// entities are still emitted but only relations on those pathways become
/// edges.
inline std::string to_dot(const KnowledgeGraph& graph, const std::vector<ScoredPathway>* pathways = nullptr) {
  std::ostringstream out;
  out << "digraph riskpath {\n";
  out << "  rankdir=LR;\n";
  out << "  node [shape=box, style=\"rounded,filled\", fontname=\"Helvetica\"];\n";
  out << "  edge [fontname=\"Helvetica\", fontsize=10];\n";
  for (const Entity& e : graph.entities()) {
    out << "  " << dot_quote(e.id.str()) << " [label=" << dot_quote(e.canonical_name)
        << ", fillcolor=" << dot_quote(layer_color(e.layer)) << ", layer=" << dot_quote(to_string(e.layer)) << "];\n";
  }

  std::set<KnowledgeGraph::Index> edges;
  if (pathways) {
    for (const auto& sp : *pathways)
      for (const auto& rid : sp.pathway.relations) edges.insert(graph.relation_index(rid));
  } else {
    for (KnowledgeGraph::Index r = 0; r < graph.relation_count(); ++r) edges.insert(r);
  }
  for (auto r : edges) {
    const Relation& rel = graph.relation(r);
    const std::size_t docs = rel.doc_ids.size();
    out << "  " << dot_quote(rel.source.str()) << " -> " << dot_quote(rel.target.str())
        << " [label=" << dot_quote(rel.predicate + " (" + std::to_string(docs) + ")") << ", weight=" << docs
        << "];\n";
  }
  out << "}\n";
  return out.str();
}

}  // namespace riskpath
