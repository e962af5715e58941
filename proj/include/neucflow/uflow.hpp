#pragma once

#include <cstdint>
#include <vector>

#include "neucflow/kg.hpp"
#include "neucflow/model.hpp"
#include "neucflow/tape.hpp"

namespace neucflow {

// Query-independent message passing over the whole graph. Each step draws a
// fresh global edge sample; messages aggregate at edge destinations scaled by
// 1/sqrt(#messages); every node takes a residual update. Step 0 states are
// the raw entity embeddings, so steps=0 returns the embedding table itself.

template <class Real>
struct UFlowRun {
  typename TapeT<Real>::Var states;              // (V, D)
  std::vector<std::vector<int64_t>> sampled;     // per step, ascending edge ids
};

template <class Real>
typename TapeT<Real>::Var uflow_step(TapeT<Real>& tape, const ModelVars<Real>& mv,
                                     typename TapeT<Real>::Var states, const GraphView& view,
                                     const EdgeSample& sample) {
  const Graph& g = view.graph();
  int64_t n_nodes = g.num_entities();
  std::vector<int64_t> src, rel, dst;
  src.reserve(sample.edges.size());
  rel.reserve(sample.edges.size());
  dst.reserve(sample.edges.size());
  for (int64_t e : sample.edges) {
    src.push_back(g.src(e));
    rel.push_back(g.rel(e));
    dst.push_back(g.dst(e));
  }
  auto h_src = tape.gather_rows(states, src);
  auto e_rel = tape.gather_rows(mv.rel_emb, rel);
  auto h_dst = tape.gather_rows(states, std::vector<int64_t>(dst));
  auto msgs = mlp2_apply(tape, mv.u_msg, tape.concat_cols({h_src, e_rel, h_dst}));
  auto agg = tape.segment_sum(msgs, std::move(dst), n_nodes, /*inv_sqrt_scale=*/true);
  auto delta = mlp2_apply(tape, mv.u_upd, tape.concat_cols({agg, states, mv.ent_emb}));
  return tape.add(states, delta);
}

template <class Real>
UFlowRun<Real> run_uflow(TapeT<Real>& tape, const ModelVars<Real>& mv, const GraphView& view,
                         int32_t steps, int64_t sample_budget, SplitRng rng) {
  if (steps < 0) detail::fail("run_uflow", "negative step count");
  UFlowRun<Real> run;
  run.states = mv.ent_emb;
  for (int32_t t = 0; t < steps; ++t) {
    SplitRng step_rng = rng.split(static_cast<uint64_t>(t));
    EdgeSample sample = sample_edges_global(view, sample_budget, step_rng);
    run.sampled.push_back(sample.edges);
    run.states = uflow_step(tape, mv, run.states, view, sample);
  }
  return run;
}

}  // namespace neucflow
