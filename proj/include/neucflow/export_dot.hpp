#pragma once

// Query-dependent subgraph export: DOT for rendering, JSON for tooling.
// Node importance is the mass-weighted mean step index, mapped yellow
// (early) to red (late); nodes with negligible total mass render grey.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "neucflow/controller.hpp"
#include "neucflow/kg.hpp"

namespace neucflow {

struct ExportNode {
  int32_t id = 0;
  std::string label;
  std::vector<double> mass_per_step;  // index 0 is the initial one-hot

  double total_mass() const {
    double s = 0.0;
    for (double m : mass_per_step) s += m;
    return s;
  }
};

struct ExportEdge {
  int32_t src = 0;
  int32_t rel = 0;
  int32_t dst = 0;
  int32_t step = 0;  // 1-based flow step that selected the edge
  std::string rel_label;
};

struct SubgraphExport {
  int32_t head = 0;
  int32_t tail = -1;
  int32_t n_steps = 0;
  std::vector<ExportNode> nodes;  // ascending id
  std::vector<ExportEdge> edges;  // ordered by (step, src, rel, dst)
};

// Names self-loop and inverse relations, which live outside the base vocab.
inline std::string relation_label(const Graph& g, const Vocab& relations, int32_t rel) {
  int64_t base = g.num_base_relations();
  if (rel >= 0 && rel < base) return relations.name(rel);
  if (g.has_inverse() && rel >= base && rel < 2 * base)
    return relations.name(rel - static_cast<int32_t>(base)) + "_inv";
  if (rel == static_cast<int32_t>(g.self_loop_relation())) return "_self";
  detail::fail("relation_label", "relation id out of range");
}

inline SubgraphExport build_subgraph_export(const FlowTrace& trace, const Graph& g,
                                            const Vocab& entities, const Vocab& relations) {
  SubgraphExport out;
  out.head = trace.head;
  out.tail = trace.tail;
  out.n_steps = static_cast<int32_t>(trace.steps.size());

  std::vector<int32_t> ids = trace.visited;
  std::sort(ids.begin(), ids.end());
  std::unordered_map<int32_t, size_t> row;
  out.nodes.reserve(ids.size());
  for (int32_t v : ids) {
    row.emplace(v, out.nodes.size());
    ExportNode n;
    n.id = v;
    n.label = entities.name(v);
    n.mass_per_step.assign(static_cast<size_t>(out.n_steps) + 1, 0.0);
    out.nodes.push_back(std::move(n));
  }
  if (auto it = row.find(trace.head); it != row.end())
    out.nodes[it->second].mass_per_step[0] = 1.0;

  for (size_t t = 0; t < trace.steps.size(); ++t) {
    for (const auto& [node, mass] : trace.steps[t].attention) {
      auto it = row.find(node);
      if (it == row.end()) continue;  // attended but never seen, holds no state
      out.nodes[it->second].mass_per_step[t + 1] = mass;
    }
    for (int64_t e : trace.steps[t].message_edge_ids) {
      ExportEdge ed;
      ed.src = g.src(e);
      ed.rel = g.rel(e);
      ed.dst = g.dst(e);
      ed.step = static_cast<int32_t>(t) + 1;
      ed.rel_label = relation_label(g, relations, ed.rel);
      out.edges.push_back(std::move(ed));
    }
  }
  std::sort(out.edges.begin(), out.edges.end(), [](const ExportEdge& a, const ExportEdge& b) {
    return std::tie(a.step, a.src, a.rel, a.dst) < std::tie(b.step, b.src, b.rel, b.dst);
  });
  return out;
}

// Drops nodes whose summed attention mass falls below `threshold` and keeps
// only edges with both endpoints surviving. The head always survives: its
// initial one-hot contributes mass 1.
inline SubgraphExport prune_export(const SubgraphExport& full, double threshold) {
  SubgraphExport out;
  out.head = full.head;
  out.tail = full.tail;
  out.n_steps = full.n_steps;
  std::unordered_set<int32_t> kept;
  for (const ExportNode& n : full.nodes)
    if (n.total_mass() >= threshold) {
      kept.insert(n.id);
      out.nodes.push_back(n);
    }
  for (const ExportEdge& e : full.edges)
    if (kept.count(e.src) && kept.count(e.dst)) out.edges.push_back(e);
  return out;
}

namespace detail {

inline std::string dot_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    if (c == '\\' || c == '"') out.push_back('\\');
    out.push_back(c);
  }
  return out;
}

}  // namespace detail

// Mass-weighted mean step in [0,1] after dividing by the step count.
inline double node_importance(const ExportNode& n, int32_t n_steps) {
  double total = 0.0, weighted = 0.0;
  for (size_t t = 0; t < n.mass_per_step.size(); ++t) {
    total += n.mass_per_step[t];
    weighted += static_cast<double>(t) * n.mass_per_step[t];
  }
  if (total <= 0.0 || n_steps <= 0) return 0.0;
  return weighted / (total * static_cast<double>(n_steps));
}

inline std::string node_color(const ExportNode& n, int32_t n_steps) {
  if (n.total_mass() < 1e-3) return "#c0c0c0";
  double x = std::min(1.0, std::max(0.0, node_importance(n, n_steps)));
  int green = static_cast<int>(std::lround(255.0 * (1.0 - x)));
  char buf[8];
  std::snprintf(buf, sizeof(buf), "#ff%02x00", green);
  return buf;
}

inline void write_dot(std::ostream& os, const SubgraphExport& sg) {
  os << "digraph query_flow {\n";
  os << "  rankdir=LR;\n";
  os << "  node [style=filled, fontname=\"Helvetica\"];\n";
  for (const ExportNode& n : sg.nodes) {
    os << "  \"" << detail::dot_escape(n.label) << "\" [fillcolor=\"" << node_color(n, sg.n_steps)
       << "\"";
    if (n.id == sg.head || n.id == sg.tail) os << ", shape=doublecircle";
    os << "];\n";
  }
  std::unordered_map<int32_t, const ExportNode*> by_id;
  for (const ExportNode& n : sg.nodes) by_id.emplace(n.id, &n);
  for (const ExportEdge& e : sg.edges) {
    os << "  \"" << detail::dot_escape(by_id.at(e.src)->label) << "\" -> \""
       << detail::dot_escape(by_id.at(e.dst)->label) << "\" [label=\""
       << detail::dot_escape(e.rel_label) << " [t=" << e.step << "]\", fontsize=10];\n";
  }
  os << "}\n";
}

inline void write_subgraph_json(std::ostream& os, const SubgraphExport& sg) {
  nlohmann::ordered_json j;
  j["head"] = sg.head;
  j["tail"] = sg.tail;
  j["n_steps"] = sg.n_steps;
  j["nodes"] = nlohmann::ordered_json::array();
  for (const ExportNode& n : sg.nodes) {
    nlohmann::ordered_json jn;
    jn["id"] = n.id;
    jn["label"] = n.label;
    jn["mass_per_step"] = n.mass_per_step;
    j["nodes"].push_back(std::move(jn));
  }
  j["edges"] = nlohmann::ordered_json::array();
  for (const ExportEdge& e : sg.edges) {
    nlohmann::ordered_json je;
    je["src"] = e.src;
    je["rel"] = e.rel;
    je["rel_label"] = e.rel_label;
    je["dst"] = e.dst;
    je["step"] = e.step;
    j["edges"].push_back(std::move(je));
  }
  os << j.dump(2) << "\n";
}

}  // namespace neucflow
