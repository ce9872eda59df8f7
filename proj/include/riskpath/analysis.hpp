#pragma once

#include <array>
#include <cstdio>
#include <optional>
#include <sstream>
#include <string>

#include "riskpath/graph.hpp"

namespace riskpath {

/// Which endpoint decides the layer a relation's impact is attributed to.
enum class ImpactSide { Target, Source };

struct TemporalReport {
  // [phase][layer]
  std::array<std::array<std::size_t, 3>, 3> tagged{};
  std::array<std::size_t, 3> denominators{};  // phase-tagged relations per layer
  ImpactSide side = ImpactSide::Target;

  /// Percentage of tagged relations landing on `layer` that carry `phase`;
  /// empty when no tagged relation lands on that layer.
  std::optional<double> percent(Phase phase, Layer layer) const {
    const std::size_t den = denominators[layer_index(layer)];
    if (den == 0) return std::nullopt;
    return 100.0 * static_cast<double>(tagged[static_cast<std::size_t>(phase)][layer_index(layer)]) /
           static_cast<double>(den);
  }
};

inline TemporalReport temporal_distribution(const KnowledgeGraph& graph, ImpactSide side = ImpactSide::Target) {
  TemporalReport report;
  report.side = side;
  for (const Relation& r : graph.relations()) {
    if (r.phases.empty()) continue;
    const Layer layer = graph.entity(side == ImpactSide::Target ? r.target : r.source).layer;
    ++report.denominators[layer_index(layer)];
    for (Phase p : kAllPhases)
      if (r.phases.contains(p)) ++report.tagged[static_cast<std::size_t>(p)][layer_index(layer)];
  }
  return report;
}

inline std::string_view phase_label(Phase p) {
  switch (p) {
    case Phase::Acute: return "Acute (0-3 days)";
    case Phase::Subacute: return "Subacute (3-14 days)";
    case Phase::Chronic: return "Chronic (14+ days)";
  }
  return "?";
}

/// Aligned plain-text table: one row per phase, one column per layer.
inline std::string format_temporal_table(const TemporalReport& report) {
  std::ostringstream out;
  char buf[128];
  std::snprintf(buf, sizeof buf, "%-22s %18s %18s %18s\n", "Risk Phase", "Physical Impacts", "Social Impacts",
                "Economic Impacts");
  out << buf;
  for (Phase p : kAllPhases) {
    std::snprintf(buf, sizeof buf, "%-22s", std::string(phase_label(p)).c_str());
    out << buf;
    for (Layer l : kAllLayers) {
      auto v = report.percent(p, l);
      if (v) std::snprintf(buf, sizeof buf, " %17.1f%%", *v);
      else std::snprintf(buf, sizeof buf, " %18s", "n/a");
      out << buf;
    }
    out << '\n';
  }
  std::snprintf(buf, sizeof buf, "%-22s %18zu %18zu %18zu\n", "Tagged relations", report.denominators[0],
                report.denominators[1], report.denominators[2]);
  out << buf;
  return out.str();
}

struct LayerDistribution {
  std::array<std::size_t, 3> counts{};
  std::array<double, 3> fractions{};
  std::size_t total = 0;
};

inline LayerDistribution layer_distribution(const KnowledgeGraph& graph) {
  LayerDistribution d;
  for (const Entity& e : graph.entities()) ++d.counts[layer_index(e.layer)];
  d.total = graph.entity_count();
  if (d.total > 0)
    for (std::size_t i = 0; i < 3; ++i) d.fractions[i] = static_cast<double>(d.counts[i]) / static_cast<double>(d.total);
  return d;
}

inline std::string format_layer_table(const LayerDistribution& d) {
  std::ostringstream out;
  char buf[128];
  std::snprintf(buf, sizeof buf, "%-10s %10s %10s\n", "Layer", "Entities", "Fraction");
  out << buf;
  for (Layer l : kAllLayers) {
    std::snprintf(buf, sizeof buf, "%-10s %10zu %10.4f\n", std::string(to_string(l)).c_str(),
                  d.counts[layer_index(l)], d.fractions[layer_index(l)]);
    out << buf;
  }
  std::snprintf(buf, sizeof buf, "%-10s %10zu\n", "total", d.total);
  out << buf;
  return out.str();
}

}  // namespace riskpath
