#pragma once

#include <algorithm>
#include <cstdint>
#include <unordered_set>
#include <vector>

#include "neucflow/aflow.hpp"
#include "neucflow/cflow.hpp"
#include "neucflow/kg.hpp"
#include "neucflow/model.hpp"
#include "neucflow/rng.hpp"
#include "neucflow/uflow.hpp"

namespace neucflow {

// Per-step budgets and step counts of the sampling-attending loop.
struct Horizons {
  int64_t max_attended = 20;        // N_a: attending-from horizon
  int64_t max_seen = 200;           // N_s: attending-to horizon
  int64_t max_edges_per_node = 200; // N_e: sampled out-edges per attended node
  int32_t c_steps = 6;              // T_c
  int32_t u_steps = 1;              // T_u
  int64_t u_sample_budget = 10000;  // global edges per U-Flow step
  int64_t n_dims = 100;             // D
  int64_t n_dims_att = 50;          // D_a
  bool update_seen_only = false;    // residual update restricted to seen nodes

  void validate() const {
    if (max_attended < 1 || max_seen < 1 || max_edges_per_node < 1)
      detail::fail("Horizons", "budgets must be >= 1");
    if (max_attended > max_seen)
      detail::fail("Horizons", "max_attended_nodes_per_step must not exceed max_seen_nodes_per_step");
    if (c_steps < 2) detail::fail("Horizons", "n_steps_of_c_flow must be >= 2");
    if (u_steps < 0) detail::fail("Horizons", "n_steps_of_u_flow must be >= 0");
    if (u_sample_budget < 0) detail::fail("Horizons", "max_sampled_edges_per_step must be >= 0");
    if (n_dims < 1 || n_dims_att < 1) detail::fail("Horizons", "dims must be >= 1");
  }
};

struct StepTrace {
  std::vector<int32_t> attended;  // rank order
  std::vector<int64_t> sampled_edges;
  std::vector<int32_t> seen;      // rank order
  std::vector<int64_t> message_edge_ids;  // attended->seen edges this step
  // a^{t+1}: (node, mass) ascending by node id
  std::vector<std::pair<int32_t, double>> attention;
  // T^t snapshot: (src, dst, weight), plus the raw pair logits in pair order
  std::vector<std::tuple<int32_t, int32_t, double>> transition;
  std::vector<double> transition_logits;
  int64_t edges_scored = 0;
  int64_t transition_pairs = 0;
  int64_t message_edges = 0;   // C-Flow messages, counting parallel relations
  int64_t message_pairs = 0;   // distinct attended->seen pairs among them
  int64_t visited_added = 0;
};

struct FlowTrace {
  int32_t head = 0, rel = 0, tail = -1;
  std::vector<StepTrace> steps;
  std::vector<int32_t> visited;  // insertion order
  double tail_mass = 0.0;        // final attention on tail; 0 when unknown/absent
  bool tail_visited = false;
};

template <class Real>
struct QueryRun {
  AttentionDist<Real> final_attention;
  FlowTrace trace;
};

struct QueryInput {
  int32_t head = 0;
  int32_t rel = 0;
  int32_t tail = -1;  // optional training target
};

// The per-query loop of the three flows. Each step: pick attended nodes from
// a^t, sample their out-edges, score and build the sparse transition,
// propagate and renormalize attention, pick seen nodes, pass conscious
// messages over attended->seen edges, extend the visited set.
template <class Real>
QueryRun<Real> run_query(TapeT<Real>& tape, const ModelVars<Real>& mv, const GraphView& view,
                         QueryInput q, const Horizons& hz, typename TapeT<Real>::Var ustates,
                         SplitRng rng) {
  hz.validate();
  const Graph& g = view.graph();
  if (q.head < 0 || q.head >= g.num_entities()) detail::fail("run_query", "head out of range");
  if (q.rel < 0 || q.rel >= g.num_relations()) detail::fail("run_query", "relation out of range");

  QueryRun<Real> out;
  out.trace.head = q.head;
  out.trace.rel = q.rel;
  out.trace.tail = q.tail;

  QueryVars<Real> qv = make_query_vars(tape, mv, q.head, q.rel);
  CFlowStates<Real> cstates = init_cflow(tape, ustates, q.head);
  AttentionDist<Real> att = initial_attention<Real>(tape, q.head);

  for (int32_t step = 0; step < hz.c_steps; ++step) {
    StepTrace st;
    std::vector<double> mass = mass_snapshot(tape, att);
    st.attended = select_topk(att.support, mass, hz.max_attended);

    SplitRng step_rng = rng.split(static_cast<uint64_t>(step));
    EdgeSample sample = sample_neighbors(view, st.attended, hz.max_edges_per_node, step_rng);
    st.sampled_edges = sample.edges;

    ScoredPairs<Real> pairs = score_edges(tape, mv, qv, view, sample, cstates, ustates);
    st.edges_scored = pairs.edges_scored;
    st.transition_pairs = static_cast<int64_t>(pairs.src.size());
    TransitionVar<Real> trans = build_transition(tape, pairs, static_cast<int64_t>(st.attended.size()));

    std::vector<int64_t> source_idx(st.attended.size());
    for (size_t i = 0; i < st.attended.size(); ++i) source_idx[i] = att.index_of(st.attended[i]);
    AttentionDist<Real> att_next = propagate_attention(tape, trans, att, source_idx);

    const auto& w = tape.value(trans.weights);
    const auto& lg = tape.value(pairs.logits);
    st.transition.reserve(trans.src.size());
    for (size_t p = 0; p < trans.src.size(); ++p)
      st.transition.emplace_back(trans.src[p], trans.dst[p], static_cast<double>(w.data[p]));
    st.transition_logits.assign(lg.data.begin(), lg.data.end());

    std::vector<double> mass_next = mass_snapshot(tape, att_next);
    st.attention.reserve(att_next.support.size());
    for (size_t i = 0; i < att_next.support.size(); ++i)
      st.attention.emplace_back(att_next.support[i], mass_next[i]);
    st.seen = select_topk(att_next.support, mass_next, hz.max_seen);

    std::vector<int64_t> selected = edges_between(view, st.attended, st.seen, sample);
    st.message_edge_ids = selected;
    st.message_edges = static_cast<int64_t>(selected.size());
    std::unordered_set<uint64_t> pair_keys;
    for (int64_t e : selected)
      pair_keys.insert((static_cast<uint64_t>(static_cast<uint32_t>(g.src(e))) << 32) |
                       static_cast<uint32_t>(g.dst(e)));
    st.message_pairs = static_cast<int64_t>(pair_keys.size());

    std::vector<int32_t> new_nodes;
    for (int32_t v : st.seen)
      if (!cstates.contains(v)) new_nodes.push_back(v);
    st.visited_added = static_cast<int64_t>(new_nodes.size());

    // resolve rows as they will be after the append
    std::unordered_map<int32_t, int64_t> pending_row;
    int64_t n_before = static_cast<int64_t>(cstates.nodes.size());
    for (size_t i = 0; i < new_nodes.size(); ++i)
      pending_row.emplace(new_nodes[i], n_before + static_cast<int64_t>(i));
    auto future_row = [&](int32_t v) -> int64_t {
      int64_t r = cstates.row_of(v);
      if (r >= 0) return r;
      auto it = pending_row.find(v);
      return it == pending_row.end() ? -1 : it->second;
    };

    // attention restricted to visited rows, for the attending function
    std::vector<int64_t> att_rows, att_idx;
    for (size_t i = 0; i < att_next.support.size(); ++i) {
      int64_t r = future_row(att_next.support[i]);
      if (r >= 0) {
        att_rows.push_back(r);
        att_idx.push_back(static_cast<int64_t>(i));
      }
    }
    auto att_on_rows = tape.gather_values(att_next.mass, att_idx);

    std::vector<int64_t> update_rows;
    if (hz.update_seen_only)
      for (int32_t v : st.seen) update_rows.push_back(future_row(v));
    cflow_step(tape, mv, cstates, qv, g, selected, new_nodes, ustates, att_rows, att_on_rows,
               hz.update_seen_only ? &update_rows : nullptr);

    out.trace.steps.push_back(std::move(st));
    att = att_next;
  }

  out.trace.visited = cstates.nodes;
  if (q.tail >= 0) {
    int64_t ti = att.index_of(q.tail);
    out.trace.tail_mass = ti < 0 ? 0.0 : static_cast<double>(tape.value(att.mass).data[static_cast<size_t>(ti)]);
    out.trace.tail_visited = cstates.contains(q.tail);
  }
  out.final_attention = att;
  return out;
}

struct ComplexityReport {
  bool edges_ok = true, messages_ok = true, visited_ok = true;
  int64_t max_edges_scored = 0;
  int64_t max_message_pairs = 0;
  int64_t max_message_edges = 0;
  int64_t max_visited_added = 0;
  double mean_pair_density = 0.0;  // message pairs / (N_a + N_s), averaged over steps

  bool ok() const { return edges_ok && messages_ok && visited_ok; }
};

// Check measured per-step counters against the analytic horizon bounds:
// edges scored <= N_a*N_e; distinct message pairs <= min(N_a*N_s, edges
// scored); visited growth <= N_s + N_a.
inline ComplexityReport complexity_report(const FlowTrace& trace, const Horizons& hz) {
  ComplexityReport r;
  double density_sum = 0.0;
  for (const StepTrace& st : trace.steps) {
    r.max_edges_scored = std::max(r.max_edges_scored, st.edges_scored);
    r.max_message_pairs = std::max(r.max_message_pairs, st.message_pairs);
    r.max_message_edges = std::max(r.max_message_edges, st.message_edges);
    r.max_visited_added = std::max(r.max_visited_added, st.visited_added);
    if (st.edges_scored > hz.max_attended * hz.max_edges_per_node) r.edges_ok = false;
    if (st.message_pairs > std::min(hz.max_attended * hz.max_seen, st.edges_scored)) r.messages_ok = false;
    if (st.message_edges > st.edges_scored) r.messages_ok = false;
    if (st.visited_added > hz.max_seen + hz.max_attended) r.visited_ok = false;
    density_sum += static_cast<double>(st.message_pairs) / static_cast<double>(hz.max_attended + hz.max_seen);
  }
  if (!trace.steps.empty()) r.mean_pair_density = density_sum / static_cast<double>(trace.steps.size());
  return r;
}

}  // namespace neucflow
