#pragma once

#include <cstdint>
#include <unordered_map>
#include <vector>

#include "neucflow/kg.hpp"
#include "neucflow/model.hpp"
#include "neucflow/tape.hpp"

namespace neucflow {

// Query-conditioned flow over the visited subgraph. States exist only for
// visited nodes; everything else is implicitly zero. The attending function
// injects attention-weighted unconscious states each step.

template <class Real>
struct QueryVars {
  int32_t head = 0;
  int32_t rel = 0;
  typename TapeT<Real>::Var q_head;  // (1, D), = e_head
  typename TapeT<Real>::Var q_rel;   // (1, D), = e_rel
};

template <class Real>
QueryVars<Real> make_query_vars(TapeT<Real>& tape, const ModelVars<Real>& mv, int32_t head, int32_t rel) {
  QueryVars<Real> qv;
  qv.head = head;
  qv.rel = rel;
  qv.q_head = tape.gather_rows(mv.ent_emb, {head});
  qv.q_rel = tape.gather_rows(mv.rel_emb, {rel});
  return qv;
}

template <class Real>
struct CFlowStates {
  std::vector<int32_t> nodes;  // insertion order = row order
  std::unordered_map<int32_t, int64_t> row;
  typename TapeT<Real>::Var states;  // (|nodes|, D)

  bool contains(int32_t v) const { return row.count(v) > 0; }

  int64_t row_of(int32_t v) const {
    auto it = row.find(v);
    return it == row.end() ? -1 : it->second;
  }

  void append(int32_t v) {
    if (contains(v)) detail::fail("CFlowStates::append", "node already visited");
    row.emplace(v, static_cast<int64_t>(nodes.size()));
    nodes.push_back(v);
  }
};

// visited = {head}; the head starts from its unconscious state.
template <class Real>
CFlowStates<Real> init_cflow(TapeT<Real>& tape, typename TapeT<Real>::Var ustates, int32_t head) {
  CFlowStates<Real> st;
  st.append(head);
  st.states = tape.gather_rows(ustates, {head});
  return st;
}

// One consciousness step. edges run from attended nodes into seen nodes;
// new_nodes (this step's previously unvisited seen nodes) are appended with
// zero states before messages apply. att_rows/att_mass carry the new
// attention restricted to visited rows for the attending function. When
// update_rows is given only those rows receive the residual update;
// otherwise every visited node updates.
template <class Real>
void cflow_step(TapeT<Real>& tape, const ModelVars<Real>& mv, CFlowStates<Real>& st,
                const QueryVars<Real>& qv, const Graph& g, const std::vector<int64_t>& edges,
                const std::vector<int32_t>& new_nodes, typename TapeT<Real>::Var ustates,
                const std::vector<int64_t>& att_rows, typename TapeT<Real>::Var att_mass,
                const std::vector<int64_t>* update_rows) {
  for (int32_t v : new_nodes) st.append(v);
  int64_t n = static_cast<int64_t>(st.nodes.size());
  auto stacked = tape.pad_rows(st.states, n);

  std::vector<int64_t> src_rows, rel_ids, dst_rows;
  src_rows.reserve(edges.size());
  rel_ids.reserve(edges.size());
  dst_rows.reserve(edges.size());
  for (int64_t e : edges) {
    int64_t sr = st.row_of(g.src(e));
    int64_t dr = st.row_of(g.dst(e));
    if (sr < 0 || dr < 0) detail::fail("cflow_step", "edge endpoints outside the declared horizons");
    src_rows.push_back(sr);
    rel_ids.push_back(g.rel(e));
    dst_rows.push_back(dr);
  }
  int64_t m = static_cast<int64_t>(edges.size());
  auto h_src = tape.gather_rows(stacked, src_rows);
  auto e_rel = tape.gather_rows(mv.rel_emb, rel_ids);
  auto h_dst = tape.gather_rows(stacked, std::vector<int64_t>(dst_rows));
  auto qh_m = tape.tile_rows(qv.q_head, m);
  auto qr_m = tape.tile_rows(qv.q_rel, m);
  auto msgs = mlp2_apply(tape, mv.c_msg, tape.concat_cols({h_src, e_rel, qh_m, qr_m, h_dst}));
  auto agg = tape.segment_sum(msgs, std::move(dst_rows), n, /*inv_sqrt_scale=*/true);

  std::vector<int64_t> node_ids(st.nodes.begin(), st.nodes.end());
  auto anchor = tape.matmul(tape.gather_rows(ustates, node_ids), mv.attend);
  auto weights = tape.scatter_values(att_mass, att_rows, n);
  auto eta = tape.rowwise_scale(anchor, weights);

  auto qh_n = tape.tile_rows(qv.q_head, n);
  auto qr_n = tape.tile_rows(qv.q_rel, n);
  auto delta = mlp2_apply(tape, mv.c_upd, tape.concat_cols({agg, stacked, eta, qh_n, qr_n}));
  if (update_rows) {
    TensorT<Real> mask = TensorT<Real>::zeros({n});
    for (int64_t r : *update_rows) {
      if (r < 0 || r >= n) detail::fail("cflow_step", "update row out of range");
      mask.data[static_cast<size_t>(r)] = Real(1);
    }
    delta = tape.rowwise_scale(delta, tape.constant(std::move(mask)));
  }
  st.states = tape.add(stacked, delta);
}

}  // namespace neucflow
