#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "neucflow/rng.hpp"
#include "neucflow/tensor.hpp"

namespace neucflow {

struct Triple {
  int32_t head = 0;
  int32_t rel = 0;
  int32_t tail = 0;
  bool operator==(const Triple&) const = default;
};

struct Vocab {
  std::vector<std::string> names;
  std::unordered_map<std::string, int32_t> ids;

  int32_t get_or_add(const std::string& s) {
    auto it = ids.find(s);
    if (it != ids.end()) return it->second;
    int32_t id = static_cast<int32_t>(names.size());
    names.push_back(s);
    ids.emplace(s, id);
    return id;
  }

  int32_t find(const std::string& s) const {
    auto it = ids.find(s);
    return it == ids.end() ? -1 : it->second;
  }

  const std::string& name(int32_t id) const { return names[static_cast<size_t>(id)]; }
  int64_t size() const { return static_cast<int64_t>(names.size()); }
};

// Parse "head<TAB>relation<TAB>tail" lines, extending the vocabs in
// first-appearance order. Blank lines are skipped; anything else malformed is
// an error naming the file and line.
inline std::vector<Triple> load_triples(std::istream& in, const std::string& origin, Vocab& entities,
                                        Vocab& relations) {
  std::vector<Triple> out;
  std::string line;
  int64_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    size_t a = line.find('\t');
    size_t b = a == std::string::npos ? std::string::npos : line.find('\t', a + 1);
    size_t c = b == std::string::npos ? std::string::npos : line.find('\t', b + 1);
    if (a == std::string::npos || b == std::string::npos || c != std::string::npos || a == 0 ||
        b == a + 1 || b + 1 == line.size())
      detail::fail("load_triples", origin + ":" + std::to_string(lineno) + ": expected head<TAB>relation<TAB>tail");
    Triple t;
    t.head = entities.get_or_add(line.substr(0, a));
    t.rel = relations.get_or_add(line.substr(a + 1, b - a - 1));
    t.tail = entities.get_or_add(line.substr(b + 1));
    out.push_back(t);
  }
  return out;
}

inline std::vector<Triple> load_triples_file(const std::string& path, Vocab& entities, Vocab& relations) {
  std::ifstream f(path);
  if (!f) detail::fail_missing("load_triples", path);
  return load_triples(f, path, entities, relations);
}

// Static KG with optional inverse and self-loop augmentation.
//
// Edge ids: forward triples keep file order in [0, n); inverses live in
// [n, 2n) with inverse(e) = e +- n; self-loops follow, one per entity.
// Relation ids: base r in [0, R); inverse of r is r + R; the self-loop
// relation takes the next id. Per-node adjacency is over outgoing edges,
// sorted by (relation, destination, edge id).
class Graph {
 public:
  static Graph build(int64_t n_entities, int64_t n_base_relations, const std::vector<Triple>& triples,
                     bool add_inverse, bool add_self_loops) {
    if (n_entities <= 0 || n_base_relations <= 0) detail::fail("Graph::build", "empty vocab");
    Graph g;
    g.n_entities_ = n_entities;
    g.n_base_relations_ = n_base_relations;
    g.has_inverse_ = add_inverse;
    g.has_self_loops_ = add_self_loops;
    g.n_raw_ = static_cast<int64_t>(triples.size());
    int64_t total = g.n_raw_ * (add_inverse ? 2 : 1) + (add_self_loops ? n_entities : 0);
    g.src_.reserve(total);
    g.rel_.reserve(total);
    g.dst_.reserve(total);
    for (const Triple& t : triples) {
      if (t.head < 0 || t.head >= n_entities || t.tail < 0 || t.tail >= n_entities ||
          t.rel < 0 || t.rel >= n_base_relations)
        detail::fail("Graph::build", "triple ids out of range");
      g.src_.push_back(t.head);
      g.rel_.push_back(t.rel);
      g.dst_.push_back(t.tail);
    }
    if (add_inverse)
      for (const Triple& t : triples) {
        g.src_.push_back(t.tail);
        g.rel_.push_back(t.rel + static_cast<int32_t>(n_base_relations));
        g.dst_.push_back(t.head);
      }
    if (add_self_loops) {
      int32_t loop_rel = static_cast<int32_t>(g.self_loop_relation());
      for (int64_t v = 0; v < n_entities; ++v) {
        g.src_.push_back(static_cast<int32_t>(v));
        g.rel_.push_back(loop_rel);
        g.dst_.push_back(static_cast<int32_t>(v));
      }
    }
    g.build_csr();
    return g;
  }

  int64_t num_entities() const { return n_entities_; }
  int64_t num_base_relations() const { return n_base_relations_; }
  // total relation id space: base + inverses + self-loop
  int64_t num_relations() const {
    return n_base_relations_ * (has_inverse_ ? 2 : 1) + (has_self_loops_ ? 1 : 0);
  }
  int64_t self_loop_relation() const { return n_base_relations_ * (has_inverse_ ? 2 : 1); }
  bool has_inverse() const { return has_inverse_; }
  bool has_self_loops() const { return has_self_loops_; }

  int64_t num_edges() const { return static_cast<int64_t>(src_.size()); }
  int64_t num_raw_edges() const { return n_raw_; }

  int32_t src(int64_t e) const { return src_[static_cast<size_t>(e)]; }
  int32_t rel(int64_t e) const { return rel_[static_cast<size_t>(e)]; }
  int32_t dst(int64_t e) const { return dst_[static_cast<size_t>(e)]; }
  bool is_self_loop_edge(int64_t e) const { return has_self_loops_ && e >= n_raw_ * (has_inverse_ ? 2 : 1); }

  // paired inverse edge; -1 for self-loops or unaugmented graphs
  int64_t inverse_of(int64_t e) const {
    if (!has_inverse_ || is_self_loop_edge(e)) return -1;
    return e < n_raw_ ? e + n_raw_ : e - n_raw_;
  }

  const std::vector<int64_t>& row(int32_t v) const {
    if (v < 0 || v >= n_entities_) detail::fail("Graph::row", "node out of range");
    return rows_[static_cast<size_t>(v)];
  }

  int64_t out_degree(int32_t v) const { return static_cast<int64_t>(row(v).size()); }

  // first edge matching (h,r,t) in file order; -1 if absent
  int64_t find_edge(int32_t h, int32_t r, int32_t t) const {
    if (h < 0 || h >= n_entities_) return -1;
    const auto& rw = rows_[static_cast<size_t>(h)];
    auto lo = std::lower_bound(rw.begin(), rw.end(), std::make_pair(r, t), [this](int64_t e, std::pair<int32_t, int32_t> key) {
      return std::make_pair(rel_[e], dst_[e]) < key;
    });
    if (lo == rw.end() || rel_[*lo] != r || dst_[*lo] != t) return -1;
    return *lo;
  }

 private:
  void build_csr() {
    rows_.assign(static_cast<size_t>(n_entities_), {});
    for (int64_t e = 0; e < num_edges(); ++e) rows_[static_cast<size_t>(src_[e])].push_back(e);
    for (auto& rw : rows_)
      std::sort(rw.begin(), rw.end(), [this](int64_t a, int64_t b) {
        return std::make_tuple(rel_[a], dst_[a], a) < std::make_tuple(rel_[b], dst_[b], b);
      });
  }

  int64_t n_entities_ = 0;
  int64_t n_base_relations_ = 0;
  int64_t n_raw_ = 0;
  bool has_inverse_ = false;
  bool has_self_loops_ = false;
  std::vector<int32_t> src_, rel_, dst_;
  std::vector<std::vector<int64_t>> rows_;
};

// Graph minus a (typically small) set of masked edge ids. Sampling and edge
// enumeration never see masked edges.
class GraphView {
 public:
  explicit GraphView(const Graph& g) : g_(&g) {}
  GraphView(const Graph& g, const std::vector<int64_t>& masked) : g_(&g) {
    for (int64_t e : masked) {
      if (e < 0 || e >= g.num_edges()) detail::fail("GraphView", "masked edge id out of range");
      masked_.insert(e);
    }
  }

  const Graph& graph() const { return *g_; }
  bool is_masked(int64_t e) const { return !masked_.empty() && masked_.count(e) > 0; }
  int64_t num_masked() const { return static_cast<int64_t>(masked_.size()); }

  std::vector<int64_t> masked_sorted() const {
    std::vector<int64_t> v(masked_.begin(), masked_.end());
    std::sort(v.begin(), v.end());
    return v;
  }

 private:
  const Graph* g_;
  std::unordered_set<int64_t> masked_;
};

enum class MaskMode { Standard, Cutoff };

// Hide the batch triples from the graph before running flows on them.
// Standard removes each triple's own edge and its inverse. Cutoff also
// removes every other edge joining the same endpoint pair, in either
// direction, regardless of relation (self-loops stay).
inline GraphView mask_batch_edges(const Graph& g, const std::vector<Triple>& batch, MaskMode mode) {
  std::unordered_set<int64_t> masked;
  auto mask_pair = [&](int64_t e) {
    masked.insert(e);
    int64_t inv = g.inverse_of(e);
    if (inv >= 0) masked.insert(inv);
  };
  for (const Triple& t : batch) {
    int64_t e = g.find_edge(t.head, t.rel, t.tail);
    if (e < 0)
      detail::fail("mask_batch_edges", "batch triple (" + std::to_string(t.head) + "," + std::to_string(t.rel) +
                                           "," + std::to_string(t.tail) + ") is not a graph edge");
    mask_pair(e);
  }
  if (mode == MaskMode::Cutoff) {
    std::unordered_set<uint64_t> pairs;
    for (const Triple& t : batch) {
      int32_t a = std::min(t.head, t.tail), b = std::max(t.head, t.tail);
      uint64_t key = (static_cast<uint64_t>(static_cast<uint32_t>(a)) << 32) | static_cast<uint32_t>(b);
      if (!pairs.insert(key).second) continue;
      for (int32_t v : {a, b}) {
        int32_t other = (v == a) ? b : a;
        for (int64_t e : g.row(v))
          if (g.dst(e) == other && !g.is_self_loop_edge(e)) mask_pair(e);
        if (a == b) break;
      }
    }
  }
  std::vector<int64_t> ids(masked.begin(), masked.end());
  return GraphView(g, ids);
}

// A drawn edge set. Global samples have one block; per-node samples keep one
// block per requested source, each block ascending by edge id.
struct EdgeSample {
  bool per_node = false;
  std::vector<int64_t> edges;
  std::vector<int32_t> sources;   // per-node mode only
  std::vector<int64_t> offsets;   // per-node mode: sources.size()+1 block bounds

  int64_t size() const { return static_cast<int64_t>(edges.size()); }
};

namespace detail {

// take k of the candidates uniformly without replacement (partial
// Fisher-Yates), then restore ascending order
inline void partial_sample(std::vector<int64_t>& cand, int64_t k, SplitRng& rng) {
  int64_t n = static_cast<int64_t>(cand.size());
  if (k >= n) return;
  for (int64_t i = 0; i < k; ++i) {
    int64_t j = i + static_cast<int64_t>(rng.next_below(static_cast<uint64_t>(n - i)));
    std::swap(cand[i], cand[j]);
  }
  cand.resize(static_cast<size_t>(k));
  std::sort(cand.begin(), cand.end());
}

}  // namespace detail

// Up to max_edges unmasked edges drawn uniformly from the whole view.
inline EdgeSample sample_edges_global(const GraphView& view, int64_t max_edges, SplitRng& rng) {
  if (max_edges < 0) detail::fail("sample_edges_global", "negative budget");
  EdgeSample s;
  const Graph& g = view.graph();
  s.edges.reserve(static_cast<size_t>(g.num_edges()));
  for (int64_t e = 0; e < g.num_edges(); ++e)
    if (!view.is_masked(e)) s.edges.push_back(e);
  detail::partial_sample(s.edges, max_edges, rng);
  return s;
}

// Up to max_per_node unmasked outgoing edges for each source, drawn
// independently per source, in the given source order.
inline EdgeSample sample_neighbors(const GraphView& view, const std::vector<int32_t>& sources,
                                   int64_t max_per_node, SplitRng& rng) {
  if (max_per_node < 0) detail::fail("sample_neighbors", "negative budget");
  EdgeSample s;
  s.per_node = true;
  s.sources = sources;
  s.offsets.push_back(0);
  std::vector<int64_t> cand;
  for (int32_t v : sources) {
    cand.clear();
    for (int64_t e : view.graph().row(v))
      if (!view.is_masked(e)) cand.push_back(e);
    std::sort(cand.begin(), cand.end());
    detail::partial_sample(cand, max_per_node, rng);
    s.edges.insert(s.edges.end(), cand.begin(), cand.end());
    s.offsets.push_back(static_cast<int64_t>(s.edges.size()));
  }
  return s;
}

// Edges of a per-node sample that run from from_nodes into to_nodes,
// preserving sample order.
inline std::vector<int64_t> edges_between(const GraphView& view, const std::vector<int32_t>& from_nodes,
                                          const std::vector<int32_t>& to_nodes, const EdgeSample& within) {
  std::unordered_set<int32_t> from(from_nodes.begin(), from_nodes.end());
  std::unordered_set<int32_t> to(to_nodes.begin(), to_nodes.end());
  std::vector<int64_t> out;
  const Graph& g = view.graph();
  for (int64_t e : within.edges)
    if (!view.is_masked(e) && from.count(g.src(e)) && to.count(g.dst(e))) out.push_back(e);
  return out;
}

struct DatasetStats {
  int64_t n_entities = 0;
  int64_t n_base_relations = 0;
  int64_t n_edges = 0;          // raw train triples
  int64_t n_eval = 0;
  int64_t multi_edge = 0;       // eval pairs joined by a raw train edge besides themselves
  double pct_multi_edge = 0.0;
  double avg_distance = 0.0;    // BFS hops head->tail on the augmented graph
  int64_t reachable = 0;
  int64_t unreachable = 0;
};

// Corpus statistics over an evaluation split. A query counts as multi-edge
// when its endpoints are joined by at least one raw train edge, in either
// direction, other than the scored triple itself. Distances run on the
// augmented graph; unreachable tails are excluded from the average.
inline DatasetStats dataset_stats(const Graph& g, const std::vector<Triple>& eval_triples) {
  DatasetStats st;
  st.n_entities = g.num_entities();
  st.n_base_relations = g.num_base_relations();
  st.n_edges = g.num_raw_edges();
  st.n_eval = static_cast<int64_t>(eval_triples.size());

  for (const Triple& q : eval_triples) {
    int64_t links = 0;
    for (int64_t e : g.row(q.head))
      if (e < g.num_raw_edges() && g.dst(e) == q.tail) ++links;
    if (q.tail != q.head)
      for (int64_t e : g.row(q.tail))
        if (e < g.num_raw_edges() && g.dst(e) == q.head) ++links;
    int64_t self = g.find_edge(q.head, q.rel, q.tail);
    if (self >= 0 && self < g.num_raw_edges()) --links;
    if (links > 0) ++st.multi_edge;
  }
  if (st.n_eval > 0) st.pct_multi_edge = 100.0 * static_cast<double>(st.multi_edge) / static_cast<double>(st.n_eval);

  std::vector<int32_t> dist(static_cast<size_t>(g.num_entities()));
  std::vector<int64_t> stamp(static_cast<size_t>(g.num_entities()), -1);
  std::deque<int32_t> queue;
  double total = 0.0;
  int64_t qid = 0;
  for (const Triple& q : eval_triples) {
    if (q.head == q.tail) {
      total += 0.0;
      ++st.reachable;
      ++qid;
      continue;
    }
    queue.clear();
    queue.push_back(q.head);
    stamp[static_cast<size_t>(q.head)] = qid;
    dist[static_cast<size_t>(q.head)] = 0;
    bool found = false;
    while (!queue.empty() && !found) {
      int32_t v = queue.front();
      queue.pop_front();
      for (int64_t e : g.row(v)) {
        int32_t w = g.dst(e);
        if (stamp[static_cast<size_t>(w)] == qid) continue;
        stamp[static_cast<size_t>(w)] = qid;
        dist[static_cast<size_t>(w)] = dist[static_cast<size_t>(v)] + 1;
        if (w == q.tail) {
          total += dist[static_cast<size_t>(w)];
          found = true;
          break;
        }
        queue.push_back(w);
      }
    }
    if (found)
      ++st.reachable;
    else
      ++st.unreachable;
    ++qid;
  }
  if (st.reachable > 0) st.avg_distance = total / static_cast<double>(st.reachable);
  return st;
}

}  // namespace neucflow
