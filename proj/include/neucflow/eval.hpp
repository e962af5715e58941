#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "neucflow/controller.hpp"
#include "neucflow/kg.hpp"
#include "neucflow/train.hpp"

namespace neucflow {

enum class TieRule { Mean, Pessimistic, Optimistic };

inline TieRule tie_rule_from_string(const std::string& s) {
  if (s == "mean") return TieRule::Mean;
  if (s == "pessimistic") return TieRule::Pessimistic;
  if (s == "optimistic") return TieRule::Optimistic;
  detail::fail("tie_rule", "unknown tie rule " + s);
}

// One tail-ranking instance. Scores are sparse; absent entities score 0.
// Filtered setting: entities in the filter set (other known true tails for
// this query) never compete.
struct RankingCase {
  int64_t n_entities = 0;
  int32_t tail = 0;
  std::unordered_map<int32_t, double> scores;
  std::vector<int32_t> filter;  // excludes the true tail
};

// Rank of the true tail among competitors. Mean tie handling places the tail
// in the middle of its tie block: 1 + above + ceil(ties/2).
inline int64_t filtered_rank(const RankingCase& c, TieRule rule = TieRule::Mean) {
  if (c.n_entities <= 0) detail::fail("filtered_rank", "empty entity set");
  if (c.tail < 0 || c.tail >= c.n_entities) detail::fail("filtered_rank", "tail out of range");
  std::unordered_set<int32_t> filtered(c.filter.begin(), c.filter.end());
  filtered.erase(c.tail);

  auto score_of = [&](int32_t e) {
    auto it = c.scores.find(e);
    return it == c.scores.end() ? 0.0 : it->second;
  };
  double st = score_of(c.tail);
  int64_t above = 0, ties = 0, scored_competitors = 0;
  for (const auto& [e, s] : c.scores) {
    if (e < 0 || e >= c.n_entities) detail::fail("filtered_rank", "scored entity out of range");
    if (e == c.tail || filtered.count(e)) continue;
    ++scored_competitors;
    if (s > st)
      ++above;
    else if (s == st)
      ++ties;
  }
  int64_t filtered_valid = 0;
  for (int32_t e : filtered)
    if (e >= 0 && e < c.n_entities) ++filtered_valid;
  int64_t unscored = c.n_entities - 1 - filtered_valid - scored_competitors;
  if (st == 0.0) ties += unscored;
  switch (rule) {
    case TieRule::Mean: return 1 + above + (ties + 1) / 2;
    case TieRule::Pessimistic: return 1 + above + ties;
    case TieRule::Optimistic: return 1 + above;
  }
  return 1 + above + (ties + 1) / 2;
}

struct RankMetrics {
  double h1 = 0.0, h3 = 0.0, h10 = 0.0, mrr = 0.0;
  int64_t n_cases = 0;
};

inline RankMetrics hits_mrr(const std::vector<int64_t>& ranks) {
  if (ranks.empty()) detail::fail("hits_mrr", "no ranks");
  RankMetrics m;
  m.n_cases = static_cast<int64_t>(ranks.size());
  for (int64_t r : ranks) {
    if (r < 1) detail::fail("hits_mrr", "rank must be >= 1");
    if (r <= 1) m.h1 += 1.0;
    if (r <= 3) m.h3 += 1.0;
    if (r <= 10) m.h10 += 1.0;
    m.mrr += 1.0 / static_cast<double>(r);
  }
  double n = static_cast<double>(m.n_cases);
  m.h1 /= n;
  m.h3 /= n;
  m.h10 /= n;
  m.mrr /= n;
  return m;
}

struct ScoredCandidate {
  int32_t id = 0;
  double score = 0.0;
  bool positive = false;
};

struct MapResult {
  double map = 0.0;
  int64_t used = 0;
  int64_t skipped = 0;  // cases without positives
};

// Mean average precision over candidate lists; candidates ordered by
// descending score, ties broken by ascending id.
inline MapResult map_with_negatives(const std::vector<std::vector<ScoredCandidate>>& cases) {
  MapResult out;
  double acc = 0.0;
  for (std::vector<ScoredCandidate> cands : cases) {
    int64_t n_pos = 0;
    for (const auto& c : cands) n_pos += c.positive ? 1 : 0;
    if (n_pos == 0) {
      ++out.skipped;
      continue;
    }
    std::sort(cands.begin(), cands.end(), [](const ScoredCandidate& a, const ScoredCandidate& b) {
      if (a.score != b.score) return a.score > b.score;
      return a.id < b.id;
    });
    double ap = 0.0;
    int64_t hits = 0;
    for (size_t i = 0; i < cands.size(); ++i)
      if (cands[i].positive) {
        ++hits;
        ap += static_cast<double>(hits) / static_cast<double>(i + 1);
      }
    acc += ap / static_cast<double>(n_pos);
    ++out.used;
  }
  if (out.used > 0) out.map = acc / static_cast<double>(out.used);
  return out;
}

struct AttentionDiagnostics {
  // index t holds the mean over traces at step t; t=0 is the initial one-hot
  std::vector<double> entropy;
  std::vector<double> top1, top3, top5;
};

inline AttentionDiagnostics attention_diagnostics(const std::vector<FlowTrace>& traces) {
  if (traces.empty()) detail::fail("attention_diagnostics", "no traces");
  size_t n_steps = traces[0].steps.size();
  for (const FlowTrace& tr : traces)
    if (tr.steps.size() != n_steps) detail::fail("attention_diagnostics", "traces have differing step counts");
  AttentionDiagnostics d;
  d.entropy.assign(n_steps + 1, 0.0);
  d.top1.assign(n_steps + 1, 0.0);
  d.top3.assign(n_steps + 1, 0.0);
  d.top5.assign(n_steps + 1, 0.0);
  d.top1[0] = d.top3[0] = d.top5[0] = 1.0;  // one-hot start
  std::vector<double> mass;
  for (const FlowTrace& tr : traces) {
    for (size_t t = 0; t < n_steps; ++t) {
      mass.clear();
      double h = 0.0;
      for (const auto& [node, p] : tr.steps[t].attention) {
        if (p > 0.0) h -= p * std::log(p);
        mass.push_back(p);
      }
      std::sort(mass.begin(), mass.end(), std::greater<double>());
      auto share = [&](size_t k) {
        double s = 0.0;
        for (size_t i = 0; i < std::min(k, mass.size()); ++i) s += mass[i];
        return s;
      };
      d.entropy[t + 1] += h;
      d.top1[t + 1] += share(1);
      d.top3[t + 1] += share(3);
      d.top5[t + 1] += share(5);
    }
  }
  double n = static_cast<double>(traces.size());
  for (size_t t = 1; t <= n_steps; ++t) {
    d.entropy[t] /= n;
    d.top1[t] /= n;
    d.top3[t] /= n;
    d.top5[t] /= n;
  }
  return d;
}

// Known true triples indexed by (head, rel) for the filtered protocol.
class KnownTriples {
 public:
  KnownTriples(int64_t n_entities, int64_t n_relations)
      : n_entities_(n_entities), n_relations_(n_relations) {}

  void add(int32_t h, int32_t r, int32_t t) {
    if (h < 0 || h >= n_entities_ || t < 0 || t >= n_entities_ || r < 0 || r >= n_relations_)
      detail::fail("KnownTriples::add", "triple ids out of range");
    by_query_[key(h, r)].push_back(t);
  }

  // register a split; with_inverse also adds (t, r+R, h)
  void add_split(const std::vector<Triple>& triples, bool with_inverse, int64_t n_base_relations) {
    for (const Triple& t : triples) {
      add(t.head, t.rel, t.tail);
      if (with_inverse) add(t.tail, t.rel + static_cast<int32_t>(n_base_relations), t.head);
    }
  }

  void finalize() {
    for (auto& [k, v] : by_query_) {
      std::sort(v.begin(), v.end());
      v.erase(std::unique(v.begin(), v.end()), v.end());
    }
  }

  // known tails for (h, r) except the scored one
  std::vector<int32_t> filter_for(int32_t h, int32_t r, int32_t scored_tail) const {
    std::vector<int32_t> out;
    auto it = by_query_.find(key(h, r));
    if (it == by_query_.end()) return out;
    for (int32_t t : it->second)
      if (t != scored_tail) out.push_back(t);
    return out;
  }

 private:
  uint64_t key(int32_t h, int32_t r) const {
    return static_cast<uint64_t>(h) * static_cast<uint64_t>(n_relations_) + static_cast<uint64_t>(r);
  }

  int64_t n_entities_, n_relations_;
  std::unordered_map<uint64_t, std::vector<int32_t>> by_query_;
};

struct EvalOptions {
  TieRule tie = TieRule::Mean;
  bool both_directions = true;
  int64_t max_queries = 0;  // 0 = all eval triples
  int n_threads = 1;
  uint64_t seed = 7;
};

struct EvalOutput {
  RankMetrics metrics;
  AttentionDiagnostics diag;
  std::vector<int64_t> ranks;
  std::vector<FlowTrace> traces;
};

// Filtered tail ranking over an evaluation split. Each triple yields a
// forward case and, when the graph is augmented and both_directions is set,
// an inverse case. The unmasked graph is used: eval triples are not edges.
template <class Real>
EvalOutput evaluate_ranking(const Graph& g, const std::vector<Triple>& eval_triples,
                            const KnownTriples& known, const ParamStore<Real>& params,
                            const Horizons& hz, const EvalOptions& opt) {
  GraphView view(g);
  std::vector<QueryInput> cases;
  std::vector<int32_t> case_tail;
  int64_t budget = opt.max_queries > 0
                       ? std::min<int64_t>(opt.max_queries, static_cast<int64_t>(eval_triples.size()))
                       : static_cast<int64_t>(eval_triples.size());
  for (int64_t i = 0; i < budget; ++i) {
    const Triple& t = eval_triples[static_cast<size_t>(i)];
    cases.push_back({t.head, t.rel, t.tail});
    case_tail.push_back(t.tail);
    if (opt.both_directions && g.has_inverse()) {
      cases.push_back({t.tail, t.rel + static_cast<int32_t>(g.num_base_relations()), t.head});
      case_tail.push_back(t.head);
    }
  }

  EvalOutput out;
  if (cases.empty()) detail::fail("evaluate_ranking", "no evaluation cases");
  out.ranks.resize(cases.size());
  out.traces.resize(cases.size());

  SplitRng rng(opt.seed);
  TapeT<Real> utape;
  ModelVars<Real> umv = bind_params(utape, params);
  UFlowRun<Real> uflow = run_uflow(utape, umv, view, hz.u_steps, hz.u_sample_budget, rng.split(0));
  const TensorT<Real> ustates_val = utape.value(uflow.states);

  parallel_for(static_cast<int64_t>(cases.size()), opt.n_threads, [&](int64_t i) {
    TapeT<Real> tape;
    ModelVars<Real> mv = bind_params(tape, params);
    auto u_leaf = tape.input(ustates_val);
    QueryRun<Real> qr =
        run_query(tape, mv, view, cases[static_cast<size_t>(i)], hz, u_leaf, rng.split(1000 + i));
    RankingCase rc;
    rc.n_entities = g.num_entities();
    rc.tail = case_tail[static_cast<size_t>(i)];
    const auto& mass = tape.value(qr.final_attention.mass);
    for (size_t k = 0; k < qr.final_attention.support.size(); ++k)
      rc.scores.emplace(qr.final_attention.support[k], static_cast<double>(mass.data[k]));
    rc.filter = known.filter_for(cases[static_cast<size_t>(i)].head, cases[static_cast<size_t>(i)].rel,
                                 rc.tail);
    out.ranks[static_cast<size_t>(i)] = filtered_rank(rc, opt.tie);
    out.traces[static_cast<size_t>(i)] = std::move(qr.trace);
  });

  out.metrics = hits_mrr(out.ranks);
  out.diag = attention_diagnostics(out.traces);
  return out;
}

// Chance baseline: the all-zero scorer ranked by the same filtered protocol
// and tie rule, enumerated over the identical case set (forward plus inverse
// when both_directions holds). Every unfiltered entity ties at score zero.
inline RankMetrics zero_scorer_metrics(const Graph& g, const std::vector<Triple>& eval_triples,
                                       const KnownTriples& known, bool both_directions,
                                       int64_t max_queries, TieRule tie = TieRule::Mean) {
  std::vector<int64_t> ranks;
  int64_t budget = max_queries > 0
                       ? std::min<int64_t>(max_queries, static_cast<int64_t>(eval_triples.size()))
                       : static_cast<int64_t>(eval_triples.size());
  auto rank_of = [&](int32_t h, int32_t r, int32_t t) {
    RankingCase rc;
    rc.n_entities = g.num_entities();
    rc.tail = t;
    rc.filter = known.filter_for(h, r, t);
    return filtered_rank(rc, tie);
  };
  for (int64_t i = 0; i < budget; ++i) {
    const Triple& t = eval_triples[static_cast<size_t>(i)];
    ranks.push_back(rank_of(t.head, t.rel, t.tail));
    if (both_directions && g.has_inverse())
      ranks.push_back(rank_of(t.tail, t.rel + static_cast<int32_t>(g.num_base_relations()), t.head));
  }
  return hits_mrr(ranks);
}

struct NegativesCase {
  int32_t head = 0;
  int32_t rel = 0;
  std::vector<std::pair<int32_t, bool>> candidates;  // (entity, is positive)
};

// "head<TAB>rel<TAB>candidate<TAB>{+,-}" lines grouped by (head, rel) in
// first-appearance order.
inline std::vector<NegativesCase> load_negatives(std::istream& in, const std::string& origin,
                                                 Vocab& entities, Vocab& relations) {
  std::vector<NegativesCase> out;
  std::unordered_map<uint64_t, size_t> index;
  std::string line;
  int64_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cols;
    size_t pos = 0;
    while (true) {
      size_t tab = line.find('\t', pos);
      cols.push_back(line.substr(pos, tab == std::string::npos ? std::string::npos : tab - pos));
      if (tab == std::string::npos) break;
      pos = tab + 1;
    }
    if (cols.size() != 4 || (cols[3] != "+" && cols[3] != "-"))
      detail::fail("load_negatives",
                   origin + ":" + std::to_string(lineno) + ": expected head<TAB>rel<TAB>candidate<TAB>{+,-}");
    int32_t h = entities.get_or_add(cols[0]);
    int32_t r = relations.get_or_add(cols[1]);
    int32_t c = entities.get_or_add(cols[2]);
    uint64_t key = (static_cast<uint64_t>(static_cast<uint32_t>(h)) << 32) | static_cast<uint32_t>(r);
    auto [it, fresh] = index.try_emplace(key, out.size());
    if (fresh) out.push_back({h, r, {}});
    out[it->second].candidates.emplace_back(c, cols[3] == "+");
  }
  return out;
}

// MAP evaluation: one flow run per (head, rel) case, candidates scored by
// final attention mass.
template <class Real>
MapResult evaluate_map(const Graph& g, const std::vector<NegativesCase>& neg_cases,
                       const ParamStore<Real>& params, const Horizons& hz, const EvalOptions& opt) {
  if (neg_cases.empty()) detail::fail("evaluate_map", "no cases");
  GraphView view(g);
  SplitRng rng(opt.seed);
  TapeT<Real> utape;
  ModelVars<Real> umv = bind_params(utape, params);
  UFlowRun<Real> uflow = run_uflow(utape, umv, view, hz.u_steps, hz.u_sample_budget, rng.split(0));
  const TensorT<Real> ustates_val = utape.value(uflow.states);

  std::vector<std::vector<ScoredCandidate>> scored(neg_cases.size());
  parallel_for(static_cast<int64_t>(neg_cases.size()), opt.n_threads, [&](int64_t i) {
    const NegativesCase& nc = neg_cases[static_cast<size_t>(i)];
    TapeT<Real> tape;
    ModelVars<Real> mv = bind_params(tape, params);
    auto u_leaf = tape.input(ustates_val);
    QueryRun<Real> qr =
        run_query(tape, mv, view, {nc.head, nc.rel, -1}, hz, u_leaf, rng.split(1000 + i));
    const auto& mass = tape.value(qr.final_attention.mass);
    auto& dst = scored[static_cast<size_t>(i)];
    for (const auto& [cand, pos] : nc.candidates) {
      int64_t k = qr.final_attention.index_of(cand);
      dst.push_back({cand, k < 0 ? 0.0 : static_cast<double>(mass.data[static_cast<size_t>(k)]), pos});
    }
  });
  return map_with_negatives(scored);
}

}  // namespace neucflow
