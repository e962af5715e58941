#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

#include "neucflow/controller.hpp"
#include "neucflow/kg.hpp"
#include "neucflow/model.hpp"
#include "neucflow/optim.hpp"

namespace neucflow {

// Static-partition parallel map; results are written by index so the outcome
// is independent of scheduling. First thrown exception is rethrown.
inline void parallel_for(int64_t n, int n_threads, const std::function<void(int64_t)>& fn) {
  if (n <= 0) return;
  if (n_threads <= 1 || n == 1) {
    for (int64_t i = 0; i < n; ++i) fn(i);
    return;
  }
  int64_t workers = std::min<int64_t>(n_threads, n);
  std::vector<std::thread> threads;
  std::exception_ptr first_error;
  std::mutex err_mu;
  for (int64_t t = 0; t < workers; ++t) {
    int64_t lo = t * n / workers, hi = (t + 1) * n / workers;
    threads.emplace_back([&, lo, hi]() {
      try {
        for (int64_t i = lo; i < hi; ++i) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lk(err_mu);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& th : threads) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

struct BatchLoss {
  double loss = 0.0;
  std::vector<double> tail_mass;
  int64_t unvisited_tails = 0;
};

// Mean negative log attention on the tail, floored by epsilon so queries that
// never reach their tail stay finite.
inline BatchLoss loss_batch(const std::vector<FlowTrace>& traces) {
  BatchLoss out;
  if (traces.empty()) return out;
  double acc = 0.0;
  for (const FlowTrace& tr : traces) {
    out.tail_mass.push_back(tr.tail_mass);
    acc += -std::log(tr.tail_mass + kLossEpsilon);
    if (!tr.tail_visited) ++out.unvisited_tails;
  }
  out.loss = acc / static_cast<double>(traces.size());
  return out;
}

template <class Real>
struct BatchResult {
  double loss = 0.0;
  std::vector<double> tail_mass;
  int64_t unvisited_tails = 0;
  std::vector<FlowTrace> traces;
  std::vector<std::vector<int64_t>> uflow_sampled;
  GradMap<Real> grads;  // empty unless requested
};

// Forward (and optionally backward) pass for one batch. U-Flow runs once on a
// shared tape; each query runs on its own tape against the U-Flow values and
// feeds its gradient back through the shared tape. Gradients accumulate in
// query order regardless of the thread count.
template <class Real>
BatchResult<Real> run_batch(const GraphView& view, const std::vector<QueryInput>& queries,
                            const ParamStore<Real>& params, const Horizons& hz, SplitRng rng,
                            bool want_grads, int n_threads = 1) {
  BatchResult<Real> out;
  int64_t B = static_cast<int64_t>(queries.size());
  if (B == 0) return out;

  TapeT<Real> batch_tape;
  ModelVars<Real> mv_b = bind_params(batch_tape, params);
  UFlowRun<Real> uflow = run_uflow(batch_tape, mv_b, view, hz.u_steps, hz.u_sample_budget, rng.split(0));
  out.uflow_sampled = uflow.sampled;
  const TensorT<Real> ustates_val = batch_tape.value(uflow.states);

  out.traces.resize(static_cast<size_t>(B));
  std::vector<GradMap<Real>> query_grads(static_cast<size_t>(want_grads ? B : 0));
  std::vector<TensorT<Real>> query_ugrads(static_cast<size_t>(want_grads ? B : 0));

  parallel_for(B, n_threads, [&](int64_t i) {
    TapeT<Real> tape;
    ModelVars<Real> mv = bind_params(tape, params);
    auto u_leaf = tape.input(ustates_val);
    QueryRun<Real> qr =
        run_query(tape, mv, view, queries[static_cast<size_t>(i)], hz, u_leaf, rng.split(1000 + i));
    out.traces[static_cast<size_t>(i)] = std::move(qr.trace);
    if (!want_grads) return;
    const FlowTrace& tr = out.traces[static_cast<size_t>(i)];
    int64_t ti = qr.final_attention.index_of(tr.tail);
    if (ti >= 0) {
      auto mass = tape.gather_values(qr.final_attention.mass, {ti});
      auto lvar = tape.scale(tape.log_(tape.add_const(mass, kLossEpsilon)), -1.0);
      tape.backward_seeded(lvar, TensorT<Real>({1}, {static_cast<Real>(1.0 / static_cast<double>(B))}));
      query_grads[static_cast<size_t>(i)] = collect_param_grads(tape, mv);
      query_ugrads[static_cast<size_t>(i)] = tape.grad(u_leaf);
    }
  });

  BatchLoss bl = loss_batch(out.traces);
  out.loss = bl.loss;
  out.tail_mass = std::move(bl.tail_mass);
  out.unvisited_tails = bl.unvisited_tails;

  if (want_grads) {
    out.grads = zero_grads(params);
    TensorT<Real> useed = TensorT<Real>::zeros(ustates_val.shape);
    for (int64_t i = 0; i < B; ++i) {
      if (query_grads[static_cast<size_t>(i)].empty()) continue;
      accumulate_grads(out.grads, query_grads[static_cast<size_t>(i)]);
      for (size_t j = 0; j < useed.data.size(); ++j)
        useed.data[j] += query_ugrads[static_cast<size_t>(i)].data[j];
    }
    batch_tape.backward_seeded(uflow.states, useed);
    accumulate_grads(out.grads, collect_param_grads(batch_tape, mv_b));
  }
  return out;
}

template <class Real>
struct TrainConfig {
  int64_t batch_size = 100;
  double learning_rate = 1e-3;
  double grad_clipnorm = 1.0;
  int32_t n_epochs = 1;
  double epoch_fraction = 1.0;
  MaskMode masking = MaskMode::Standard;
  Horizons horizons;
  uint64_t seed = 42;
  int n_threads = 1;

  void validate() const {
    if (batch_size < 1) detail::fail("TrainConfig", "batch_size must be >= 1");
    if (!(learning_rate > 0.0)) detail::fail("TrainConfig", "learning_rate must be > 0");
    if (n_epochs < 1) detail::fail("TrainConfig", "n_epochs must be >= 1");
    if (!(epoch_fraction > 0.0) || epoch_fraction > 1.0)
      detail::fail("TrainConfig", "epoch_fraction must be in (0, 1]");
    if (n_threads < 1) detail::fail("TrainConfig", "n_threads must be >= 1");
    horizons.validate();
  }
};

struct BatchEvent {
  int64_t epoch = 0;
  int64_t batch_index = 0;
  int64_t global_step = 0;    // optimizer steps so far
  double epoch_progress = 0;  // in epochs, e.g. 1.3 = 30% into the second
  double loss = 0.0;
  double unvisited_rate = 0.0;
  double grad_norm = 0.0;
  double seconds = 0.0;
  const std::vector<QueryInput>* queries = nullptr;
  const std::vector<FlowTrace>* traces = nullptr;
  const std::vector<std::vector<int64_t>>* uflow_sampled = nullptr;
  const GraphView* view = nullptr;
};

using BatchHook = std::function<void(const BatchEvent&)>;

struct EpochStats {
  double mean_loss = 0.0;
  double unvisited_rate = 0.0;
  int64_t batches = 0;
  int64_t queries = 0;
};

// One pass over the (shuffled) training queries: per batch, mask the batch's
// own edges, run the flows, step Adam. The rng tree is derived from
// (seed, epoch, batch), so any batch can be recomputed without replaying the
// stream; start_batch resumes mid-epoch deterministically.
template <class Real>
EpochStats train_epoch(const Graph& g, const std::vector<QueryInput>& train_queries,
                       ParamStore<Real>& params, AdamState<Real>& opt, const TrainConfig<Real>& cfg,
                       int64_t epoch_index, const BatchHook& hook = nullptr, int64_t start_batch = 0) {
  cfg.validate();
  SplitRng epoch_rng = SplitRng(cfg.seed).split(static_cast<uint64_t>(epoch_index + 1));

  std::vector<QueryInput> order = train_queries;
  SplitRng shuffle_rng = epoch_rng.split(0);
  for (int64_t i = static_cast<int64_t>(order.size()) - 1; i > 0; --i) {
    int64_t j = static_cast<int64_t>(shuffle_rng.next_below(static_cast<uint64_t>(i + 1)));
    std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(j)]);
  }
  int64_t used = std::llround(cfg.epoch_fraction * static_cast<double>(order.size()));
  used = std::max<int64_t>(std::min<int64_t>(used, static_cast<int64_t>(order.size())), 1);
  order.resize(static_cast<size_t>(used));

  EpochStats stats;
  int64_t n_batches = (used + cfg.batch_size - 1) / cfg.batch_size;
  double loss_acc = 0.0, unvis_acc = 0.0;
  for (int64_t b = start_batch; b < n_batches; ++b) {
    auto t0 = std::chrono::steady_clock::now();
    int64_t lo = b * cfg.batch_size, hi = std::min(used, lo + cfg.batch_size);
    std::vector<QueryInput> chunk(order.begin() + lo, order.begin() + hi);
    std::vector<Triple> chunk_triples;
    chunk_triples.reserve(chunk.size());
    for (const QueryInput& q : chunk) chunk_triples.push_back({q.head, q.rel, q.tail});
    GraphView view = mask_batch_edges(g, chunk_triples, cfg.masking);

    SplitRng batch_rng = epoch_rng.split(100 + static_cast<uint64_t>(b));
    BatchResult<Real> res =
        run_batch(view, chunk, params, cfg.horizons, batch_rng, /*want_grads=*/true, cfg.n_threads);
    if (!std::isfinite(res.loss))
      detail::fail("train_epoch", "non-finite loss in epoch " + std::to_string(epoch_index) + " batch " +
                                      std::to_string(b));
    double norm = adam_step(params, std::move(res.grads), opt);

    double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    loss_acc += res.loss * static_cast<double>(chunk.size());
    unvis_acc += static_cast<double>(res.unvisited_tails);
    stats.batches += 1;
    stats.queries += static_cast<int64_t>(chunk.size());
    if (hook) {
      BatchEvent ev;
      ev.epoch = epoch_index;
      ev.batch_index = b;
      ev.global_step = opt.step;
      ev.epoch_progress = static_cast<double>(epoch_index) + static_cast<double>(hi) / static_cast<double>(used);
      ev.loss = res.loss;
      ev.unvisited_rate = static_cast<double>(res.unvisited_tails) / static_cast<double>(chunk.size());
      ev.grad_norm = norm;
      ev.seconds = seconds;
      ev.queries = &chunk;
      ev.traces = &res.traces;
      ev.uflow_sampled = &res.uflow_sampled;
      ev.view = &view;
      hook(ev);
    }
  }
  if (stats.queries > 0) {
    stats.mean_loss = loss_acc / static_cast<double>(stats.queries);
    stats.unvisited_rate = unvis_acc / static_cast<double>(stats.queries);
  }
  return stats;
}

// Training queries are every non-self-loop graph edge as (head, rel, tail),
// i.e. the forward triples plus their inverses when the graph is augmented.
inline std::vector<QueryInput> training_queries(const Graph& g) {
  std::vector<QueryInput> out;
  int64_t n = g.num_raw_edges() * (g.has_inverse() ? 2 : 1);
  out.reserve(static_cast<size_t>(n));
  for (int64_t e = 0; e < n; ++e) out.push_back({g.src(e), g.rel(e), g.dst(e)});
  return out;
}

}  // namespace neucflow
