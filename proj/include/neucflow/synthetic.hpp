#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "neucflow/kg.hpp"
#include "neucflow/rng.hpp"

namespace neucflow {

// Compositional toy KG with the planted rule q(x,z) <= r1(x,y) & r2(y,z).
// Entities split into three unlabeled structural classes: a head/answer pool
// X, out_degree disjoint pools of chain intermediates, and a pool of decoy
// sinks. A permutation rho over X fixes one answer per head, so every query
// has a unique completion in both directions; head x reaches rho(x) through
// out_degree parallel chains x -r1-> y_i -r2-> rho(x). Heads also emit r1
// decoys and intermediates r2 decoys into the sink pool; sinks have no
// outgoing r2, so the witness chains stay the only r1/r2 compositions that
// close on a head, and out_degree = 1 plants a single witness. The decoys
// force a model to tell chain hops from dead ends by node context rather
// than by exhaustive reach, and r0 adds uniform noise edges on top.
// Composite facts split into train/test; chain edges all stay in train, so
// held-out queries remain answerable only by composing hops.
struct SyntheticSpec {
  int64_t n_entities = 200;
  int64_t out_degree = 2;       // parallel witness chains per composite fact
  double noise_rate = 0.1;      // noise edges per chain/decoy edge
  double train_fraction = 0.8;  // composite split
  uint64_t seed = 7;

  void validate() const {
    if (out_degree < 1) detail::fail("SyntheticSpec", "out_degree must be >= 1");
    if (n_entities / (out_degree + 3) < 2)
      detail::fail("SyntheticSpec", "need n_entities >= 2*(out_degree+3) for a non-trivial split");
    if (noise_rate < 0.0) detail::fail("SyntheticSpec", "noise_rate must be >= 0");
    if (!(train_fraction > 0.0) || train_fraction >= 1.0)
      detail::fail("SyntheticSpec", "train_fraction must be in (0, 1)");
  }
};

struct SyntheticData {
  Vocab entities, relations;   // relations: r1, r2, r0, q
  std::vector<Triple> train;   // chain + decoy + noise + train composites
  std::vector<Triple> test;    // held-out composites
  std::vector<Triple> composites;  // all q facts (answer map)
};

inline SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  SyntheticData d;
  char buf[24];
  for (int64_t i = 0; i < spec.n_entities; ++i) {
    std::snprintf(buf, sizeof buf, "e%03lld", static_cast<long long>(i));
    d.entities.get_or_add(buf);
  }
  int32_t r1 = d.relations.get_or_add("r1");
  int32_t r2 = d.relations.get_or_add("r2");
  int32_t r0 = d.relations.get_or_add("r0");
  int32_t q = d.relations.get_or_add("q");

  int64_t n = spec.n_entities;
  int64_t k = spec.out_degree;
  int64_t nx = n / (k + 3);            // heads double as answers
  int64_t first_sink = nx * (k + 1);   // ids: heads, k mid pools, sinks
  int64_t n_sinks = n - first_sink;
  // decoy fanouts scale with the sink pool so untrained walks spread thin
  int64_t head_dil = std::max<int64_t>(1, n_sinks / 2);
  int64_t mid_dil = std::max<int64_t>(1, n_sinks / 4);
  SplitRng rng(spec.seed);

  // rho: the designated answer of each head, bijective over the head pool
  SplitRng perm_rng = rng.split(1);
  std::vector<int32_t> rho(static_cast<size_t>(nx));
  for (int64_t i = 0; i < nx; ++i) rho[static_cast<size_t>(i)] = static_cast<int32_t>(i);
  for (int64_t i = nx - 1; i > 0; --i) {
    int64_t j = static_cast<int64_t>(perm_rng.next_below(static_cast<uint64_t>(i + 1)));
    std::swap(rho[static_cast<size_t>(i)], rho[static_cast<size_t>(j)]);
  }

  // witness chains: pool i is a shuffled bijection of the head pool, so every
  // intermediate carries exactly one chain
  SplitRng chain_rng = rng.split(2);
  std::vector<Triple> r1_edges, r2_edges;
  for (int64_t i = 0; i < k; ++i) {
    std::vector<int32_t> mids(static_cast<size_t>(nx));
    for (int64_t x = 0; x < nx; ++x)
      mids[static_cast<size_t>(x)] = static_cast<int32_t>(nx * (i + 1) + x);
    for (int64_t a = nx - 1; a > 0; --a) {
      int64_t b = static_cast<int64_t>(chain_rng.next_below(static_cast<uint64_t>(a + 1)));
      std::swap(mids[static_cast<size_t>(a)], mids[static_cast<size_t>(b)]);
    }
    for (int64_t x = 0; x < nx; ++x) {
      r1_edges.push_back({static_cast<int32_t>(x), r1, mids[static_cast<size_t>(x)]});
      r2_edges.push_back({mids[static_cast<size_t>(x)], r2, rho[static_cast<size_t>(x)]});
    }
  }

  // decoys: each head r1-fans and each intermediate r2-fans into distinct
  // random sinks; sinks have no outgoing r2, so no spurious witness can form
  SplitRng decoy_rng = rng.split(3);
  auto draw_sinks = [&](int32_t src, int32_t rel, int64_t dil, std::vector<Triple>& out) {
    std::unordered_set<int64_t> seen;
    while (static_cast<int64_t>(seen.size()) < dil) {
      int64_t s = first_sink + static_cast<int64_t>(decoy_rng.next_below(static_cast<uint64_t>(n_sinks)));
      if (!seen.insert(s).second) continue;
      out.push_back({src, rel, static_cast<int32_t>(s)});
    }
  };
  for (int64_t x = 0; x < nx; ++x) draw_sinks(static_cast<int32_t>(x), r1, head_dil, r1_edges);
  for (int64_t m = nx; m < first_sink; ++m) draw_sinks(static_cast<int32_t>(m), r2, mid_dil, r2_edges);

  d.train.insert(d.train.end(), r1_edges.begin(), r1_edges.end());
  d.train.insert(d.train.end(), r2_edges.begin(), r2_edges.end());
  int64_t n_core = static_cast<int64_t>(d.train.size());

  SplitRng noise_rng = rng.split(4);
  int64_t n_noise = std::llround(spec.noise_rate * static_cast<double>(n_core));
  std::unordered_set<uint64_t> noise_seen;
  while (static_cast<int64_t>(noise_seen.size()) < n_noise) {
    int64_t a = static_cast<int64_t>(noise_rng.next_below(static_cast<uint64_t>(n)));
    int64_t b = static_cast<int64_t>(noise_rng.next_below(static_cast<uint64_t>(n)));
    if (a == b) continue;
    uint64_t key = (static_cast<uint64_t>(a) << 32) | static_cast<uint64_t>(b);
    if (!noise_seen.insert(key).second) continue;
    d.train.push_back({static_cast<int32_t>(a), r0, static_cast<int32_t>(b)});
  }

  for (int64_t x = 0; x < nx; ++x)
    d.composites.push_back({static_cast<int32_t>(x), q, rho[static_cast<size_t>(x)]});

  std::vector<Triple> comps = d.composites;
  SplitRng split_rng = rng.split(5);
  for (int64_t i = static_cast<int64_t>(comps.size()) - 1; i > 0; --i) {
    int64_t j = static_cast<int64_t>(split_rng.next_below(static_cast<uint64_t>(i + 1)));
    std::swap(comps[static_cast<size_t>(i)], comps[static_cast<size_t>(j)]);
  }
  int64_t n_train_comp = std::llround(spec.train_fraction * static_cast<double>(comps.size()));
  n_train_comp = std::min<int64_t>(std::max<int64_t>(n_train_comp, 1), static_cast<int64_t>(comps.size()) - 1);
  for (int64_t i = 0; i < static_cast<int64_t>(comps.size()); ++i) {
    if (i < n_train_comp)
      d.train.push_back(comps[static_cast<size_t>(i)]);
    else
      d.test.push_back(comps[static_cast<size_t>(i)]);
  }

  // answerability: every test query keeps a full 2-hop witness among train edges
  std::vector<std::vector<int32_t>> r1_adj(static_cast<size_t>(n));
  std::unordered_set<uint64_t> r2_set;
  for (const Triple& t : d.train) {
    if (t.rel == r1) r1_adj[static_cast<size_t>(t.head)].push_back(t.tail);
    if (t.rel == r2)
      r2_set.insert((static_cast<uint64_t>(t.head) << 32) | static_cast<uint64_t>(static_cast<uint32_t>(t.tail)));
  }
  for (const Triple& t : d.test) {
    bool ok = false;
    for (int32_t y : r1_adj[static_cast<size_t>(t.head)])
      if (r2_set.count((static_cast<uint64_t>(y) << 32) | static_cast<uint64_t>(static_cast<uint32_t>(t.tail)))) {
        ok = true;
        break;
      }
    if (!ok) detail::fail("generate_synthetic", "unanswerable test query generated");
  }
  return d;
}

inline void write_triples_tsv(const std::string& path, const std::vector<Triple>& triples,
                              const Vocab& entities, const Vocab& relations) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) detail::fail("write_triples_tsv", "cannot open " + path);
  for (const Triple& t : triples)
    os << entities.name(t.head) << '\t' << relations.name(t.rel) << '\t' << entities.name(t.tail) << '\n';
  if (!os) detail::fail("write_triples_tsv", "write failed for " + path);
}

}  // namespace neucflow
