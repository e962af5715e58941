#pragma once

#include <algorithm>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "neucflow/cflow.hpp"
#include "neucflow/kg.hpp"
#include "neucflow/model.hpp"
#include "neucflow/tape.hpp"

namespace neucflow {

// Attention flow: bilinear edge scoring in the attention space, per-source
// softmax transitions, renormalized propagation, and top-k selection.

template <class Real>
struct AttentionDist {
  std::vector<int32_t> support;      // ascending node ids
  typename TapeT<Real>::Var mass;    // 1-D, aligned with support

  int64_t index_of(int32_t v) const {
    auto it = std::lower_bound(support.begin(), support.end(), v);
    if (it == support.end() || *it != v) return -1;
    return it - support.begin();
  }
};

template <class Real>
AttentionDist<Real> initial_attention(TapeT<Real>& tape, int32_t head) {
  AttentionDist<Real> a;
  a.support = {head};
  a.mass = tape.constant(TensorT<Real>({1}, {Real(1)}));
  return a;
}

// One logit per distinct (source, target) pair, summing the conscious and
// unconscious bilinear terms over every sampled relation joining the pair.
// Pair order: source blocks in sample order, first appearance within block.
template <class Real>
struct ScoredPairs {
  std::vector<int32_t> src, dst;   // per pair
  std::vector<int64_t> src_seg;    // per pair: index into sample.sources
  typename TapeT<Real>::Var logits;
  int64_t edges_scored = 0;
};

template <class Real>
ScoredPairs<Real> score_edges(TapeT<Real>& tape, const ModelVars<Real>& mv, const QueryVars<Real>& qv,
                              const GraphView& view, const EdgeSample& sample,
                              const CFlowStates<Real>& cstates, typename TapeT<Real>::Var ustates) {
  if (!sample.per_node) detail::fail("score_edges", "per-node edge sample required");
  const Graph& g = view.graph();
  int64_t n_vis = static_cast<int64_t>(cstates.nodes.size());
  int64_t m = sample.size();

  ScoredPairs<Real> out;
  out.edges_scored = m;
  std::vector<int64_t> src_rows(m), dst_rows(m), rel_ids(m), edge_pair(m);
  for (size_t b = 0; b + 1 < sample.offsets.size(); ++b) {
    int32_t source = sample.sources[b];
    int64_t sr = cstates.row_of(source);
    if (sr < 0) detail::fail("score_edges", "attended source not visited");
    std::unordered_map<int32_t, int64_t> pair_of;
    for (int64_t i = sample.offsets[b]; i < sample.offsets[b + 1]; ++i) {
      int64_t e = sample.edges[static_cast<size_t>(i)];
      int32_t d = g.dst(e);
      auto [it, fresh] = pair_of.try_emplace(d, static_cast<int64_t>(out.src.size()));
      if (fresh) {
        out.src.push_back(source);
        out.dst.push_back(d);
        out.src_seg.push_back(static_cast<int64_t>(b));
      }
      src_rows[static_cast<size_t>(i)] = sr;
      int64_t dr = cstates.row_of(d);
      dst_rows[static_cast<size_t>(i)] = dr < 0 ? n_vis : dr;  // zero conscious state row
      rel_ids[static_cast<size_t>(i)] = g.rel(e);
      edge_pair[static_cast<size_t>(i)] = it->second;
    }
  }

  auto padded = tape.pad_rows(cstates.states, n_vis + 1);
  auto h_src = tape.gather_rows(padded, src_rows);
  auto h_dst = tape.gather_rows(padded, dst_rows);
  std::vector<int64_t> dst_ids(m);
  for (int64_t i = 0; i < m; ++i) dst_ids[static_cast<size_t>(i)] = g.dst(sample.edges[static_cast<size_t>(i)]);
  auto u_dst = tape.gather_rows(ustates, dst_ids);
  auto e_rel = tape.gather_rows(mv.rel_emb, rel_ids);
  auto qh = tape.tile_rows(qv.q_head, m);
  auto qr = tape.tile_rows(qv.q_rel, m);

  auto src_feat = tape.concat_cols({h_src, e_rel, qh, qr});
  auto dst_cc_feat = tape.concat_cols({h_dst, e_rel, qh, qr});
  auto dst_cu_feat = tape.concat_cols({u_dst, e_rel, qh, qr});
  auto a_cc = tape.row_dot(tape.matmul(mlp1_apply(tape, mv.a_src_cc, src_feat), mv.theta_cc),
                           mlp1_apply(tape, mv.a_dst_cc, dst_cc_feat));
  auto a_cu = tape.row_dot(tape.matmul(mlp1_apply(tape, mv.a_src_cu, src_feat), mv.theta_cu),
                           mlp1_apply(tape, mv.a_dst_cu, dst_cu_feat));
  auto per_edge = tape.add(a_cc, a_cu);
  out.logits = tape.segment_sum(per_edge, std::move(edge_pair), static_cast<int64_t>(out.src.size()),
                                /*inv_sqrt_scale=*/false);
  return out;
}

// Column-stochastic sparse transition: per-source softmax over its pairs.
template <class Real>
struct TransitionVar {
  std::vector<int32_t> src, dst;
  std::vector<int64_t> src_seg;
  typename TapeT<Real>::Var weights;  // 1-D per pair, sums to 1 per source
  int64_t n_sources = 0;
};

template <class Real>
TransitionVar<Real> build_transition(TapeT<Real>& tape, const ScoredPairs<Real>& pairs, int64_t n_sources) {
  std::vector<int64_t> seen(static_cast<size_t>(n_sources), 0);
  for (int64_t s : pairs.src_seg) ++seen[static_cast<size_t>(s)];
  for (int64_t b = 0; b < n_sources; ++b)
    if (seen[static_cast<size_t>(b)] == 0)
      detail::fail("build_transition", "source with zero sampled targets (self-loops missing?)");
  TransitionVar<Real> t;
  t.src = pairs.src;
  t.dst = pairs.dst;
  t.src_seg = pairs.src_seg;
  t.n_sources = n_sources;
  t.weights = tape.segment_softmax(pairs.logits, std::vector<int64_t>(pairs.src_seg), n_sources);
  return t;
}

// a^{t+1} = T a^t followed by L1 renormalization. Mass on non-attended nodes
// is dropped; the support of the result is exactly the set of transition
// targets, sorted ascending.
template <class Real>
AttentionDist<Real> propagate_attention(TapeT<Real>& tape, const TransitionVar<Real>& trans,
                                        const AttentionDist<Real>& att,
                                        const std::vector<int64_t>& source_support_idx) {
  if (static_cast<int64_t>(source_support_idx.size()) != trans.n_sources)
    detail::fail("propagate_attention", "source index size mismatch");
  int64_t n_pairs = static_cast<int64_t>(trans.src.size());
  std::vector<int64_t> mass_idx(static_cast<size_t>(n_pairs));
  for (int64_t p = 0; p < n_pairs; ++p) {
    int64_t si = source_support_idx[static_cast<size_t>(trans.src_seg[static_cast<size_t>(p)])];
    if (si < 0 || si >= static_cast<int64_t>(att.support.size()))
      detail::fail("propagate_attention", "transition source outside attention support");
    mass_idx[static_cast<size_t>(p)] = si;
  }
  AttentionDist<Real> next;
  next.support = trans.dst;
  std::sort(next.support.begin(), next.support.end());
  next.support.erase(std::unique(next.support.begin(), next.support.end()), next.support.end());
  std::vector<int64_t> dst_seg(static_cast<size_t>(n_pairs));
  for (int64_t p = 0; p < n_pairs; ++p) {
    auto it = std::lower_bound(next.support.begin(), next.support.end(), trans.dst[static_cast<size_t>(p)]);
    dst_seg[static_cast<size_t>(p)] = it - next.support.begin();
  }
  auto src_mass = tape.gather_values(att.mass, std::move(mass_idx));
  auto pair_mass = tape.mul(trans.weights, src_mass);
  auto raw = tape.segment_sum(pair_mass, std::move(dst_seg), static_cast<int64_t>(next.support.size()),
                              /*inv_sqrt_scale=*/false);
  auto total = tape.reduce_sum(raw);
  if (!(static_cast<double>(tape.value(total).data[0]) > 0.0))
    detail::fail("propagate_attention", "degenerate propagation: all mass lost");
  next.mass = tape.div_by_scalar(raw, total);
  return next;
}

// k highest-mass nodes in rank order; ties break toward the smaller id.
inline std::vector<int32_t> select_topk(const std::vector<int32_t>& support,
                                        const std::vector<double>& mass, int64_t k) {
  if (k < 1) detail::fail("select_topk", "k must be >= 1");
  if (support.size() != mass.size()) detail::fail("select_topk", "support/mass size mismatch");
  std::vector<int64_t> idx(support.size());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int64_t>(i);
  std::sort(idx.begin(), idx.end(), [&](int64_t a, int64_t b) {
    if (mass[static_cast<size_t>(a)] != mass[static_cast<size_t>(b)])
      return mass[static_cast<size_t>(a)] > mass[static_cast<size_t>(b)];
    return support[static_cast<size_t>(a)] < support[static_cast<size_t>(b)];
  });
  int64_t n = std::min<int64_t>(k, static_cast<int64_t>(idx.size()));
  std::vector<int32_t> out(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) out[static_cast<size_t>(i)] = support[static_cast<size_t>(idx[static_cast<size_t>(i)])];
  return out;
}

template <class Real>
std::vector<double> mass_snapshot(const TapeT<Real>& tape, const AttentionDist<Real>& att) {
  const auto& v = tape.value(att.mass);
  std::vector<double> out(v.data.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = static_cast<double>(v.data[i]);
  return out;
}

}  // namespace neucflow
