// End-to-end layers: loss, ranking metrics against a brute-force oracle,
// batch gradients, full training runs, the synthetic corpus, and the CLI
// command implementations driving real files.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "neucflow/neucflow.hpp"

using namespace neucflow;

namespace {

using DTensor = TensorT<double>;

std::string fresh_dir(const std::string& tag) {
  std::string dir = "/tmp/neucflow_pipe_" + tag;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Reference rank: score every entity densely (unscored = 0), drop filtered
// competitors, count strictly-better and tied scores.
int64_t oracle_rank(const RankingCase& c, TieRule rule) {
  std::vector<double> dense(static_cast<size_t>(c.n_entities), 0.0);
  for (const auto& [e, s] : c.scores) dense[static_cast<size_t>(e)] = s;
  std::set<int32_t> filtered(c.filter.begin(), c.filter.end());
  filtered.erase(c.tail);
  double st = dense[static_cast<size_t>(c.tail)];
  int64_t above = 0, ties = 0;
  for (int32_t e = 0; e < c.n_entities; ++e) {
    if (e == c.tail || filtered.count(e)) continue;
    if (dense[static_cast<size_t>(e)] > st) ++above;
    else if (dense[static_cast<size_t>(e)] == st) ++ties;
  }
  switch (rule) {
    case TieRule::Mean: return 1 + above + (ties + 1) / 2;
    case TieRule::Pessimistic: return 1 + above + ties;
    case TieRule::Optimistic: return 1 + above;
  }
  return 0;
}

FlowTrace trace_with_mass(double tail_mass, bool visited) {
  FlowTrace tr;
  tr.tail = 1;
  tr.tail_mass = tail_mass;
  tr.tail_visited = visited;
  return tr;
}

Horizons small_horizons() {
  Horizons hz;
  hz.max_attended = 4;
  hz.max_seen = 12;
  hz.max_edges_per_node = 8;
  hz.c_steps = 3;
  hz.u_steps = 1;
  hz.u_sample_budget = 60;
  hz.n_dims = 8;
  hz.n_dims_att = 4;
  return hz;
}

Graph dense_test_graph(int32_t n, int32_t n_rels, uint64_t seed, int out_deg = 3) {
  SplitRng rng(seed);
  std::vector<Triple> triples;
  std::set<std::tuple<int32_t, int32_t, int32_t>> seen;
  for (int32_t v = 0; v < n; ++v)
    for (int k = 0; k < out_deg; ++k) {
      Triple t{v, static_cast<int32_t>(rng.next_below(static_cast<uint64_t>(n_rels))),
               static_cast<int32_t>(rng.next_below(static_cast<uint64_t>(n)))};
      if (t.tail == v) t.tail = (t.tail + 1) % n;
      if (seen.insert({t.head, t.rel, t.tail}).second) triples.push_back(t);
    }
  return Graph::build(n, n_rels, triples, true, true);
}

}  // namespace

TEST_CASE("batch loss hand values", "[pipeline]") {
  BatchLoss half = loss_batch({trace_with_mass(0.5, true)});
  CHECK(half.loss == Catch::Approx(std::log(2.0)).epsilon(1e-9));
  CHECK(half.unvisited_tails == 0);

  BatchLoss lost = loss_batch({trace_with_mass(0.0, false)});
  CHECK(lost.loss == Catch::Approx(-std::log(1e-12)).epsilon(1e-9));
  CHECK(lost.loss == Catch::Approx(27.631).margin(0.001));
  CHECK(lost.unvisited_tails == 1);

  BatchLoss mixed = loss_batch({trace_with_mass(0.5, true), trace_with_mass(1.0, true)});
  CHECK(mixed.loss == Catch::Approx(0.5 * std::log(2.0)).margin(1e-9));
  CHECK(loss_batch({}).loss == 0.0);
}

TEST_CASE("hits and mrr from fixed ranks", "[pipeline]") {
  RankMetrics m = hits_mrr({1, 2, 4});
  CHECK(m.h1 == Catch::Approx(1.0 / 3.0).margin(1e-6));
  CHECK(m.h3 == Catch::Approx(2.0 / 3.0).margin(1e-6));
  CHECK(m.h10 == Catch::Approx(1.0).margin(1e-6));
  CHECK(m.mrr == Catch::Approx(0.58333).margin(1e-5));
  CHECK(m.n_cases == 3);
  CHECK_THROWS(hits_mrr({}));
  CHECK_THROWS(hits_mrr({0}));
}

TEST_CASE("filtered rank hand cases", "[pipeline]") {
  RankingCase c;
  c.n_entities = 3;
  c.tail = 0;
  c.scores = {{0, 0.3}, {1, 0.5}, {2, 0.3}};
  CHECK(filtered_rank(c, TieRule::Mean) == 3);  // one above, one tie
  CHECK(filtered_rank(c, TieRule::Pessimistic) == 3);
  CHECK(filtered_rank(c, TieRule::Optimistic) == 2);

  c.filter = {1};  // the higher scorer is a known true tail
  CHECK(filtered_rank(c, TieRule::Mean) == 2);

  // zero-scored tail ties with every unscored entity
  RankingCase z;
  z.n_entities = 101;
  z.tail = 7;
  CHECK(filtered_rank(z, TieRule::Mean) == 1 + (100 + 1) / 2);
  CHECK(filtered_rank(z, TieRule::Pessimistic) == 101);
  CHECK(filtered_rank(z, TieRule::Optimistic) == 1);

  CHECK_THROWS(filtered_rank(RankingCase{0, 0, {}, {}}));
  CHECK_THROWS(filtered_rank(RankingCase{5, 9, {}, {}}));
}

TEST_CASE("filtered rank agrees with the dense oracle", "[pipeline]") {
  SplitRng rng(77);
  const std::vector<TieRule> rules = {TieRule::Mean, TieRule::Pessimistic, TieRule::Optimistic};
  for (int trial = 0; trial < 3000; ++trial) {
    RankingCase c;
    c.n_entities = 2 + static_cast<int64_t>(rng.next_below(16));
    c.tail = static_cast<int32_t>(rng.next_below(static_cast<uint64_t>(c.n_entities)));
    int64_t n_scored = static_cast<int64_t>(rng.next_below(static_cast<uint64_t>(c.n_entities + 1)));
    for (int64_t i = 0; i < n_scored; ++i) {
      int32_t e = static_cast<int32_t>(rng.next_below(static_cast<uint64_t>(c.n_entities)));
      // coarse grid forces frequent exact ties
      c.scores[e] = static_cast<double>(rng.next_below(4)) / 4.0;
    }
    int64_t n_filter = static_cast<int64_t>(rng.next_below(static_cast<uint64_t>(c.n_entities)));
    for (int64_t i = 0; i < n_filter; ++i)
      c.filter.push_back(static_cast<int32_t>(rng.next_below(static_cast<uint64_t>(c.n_entities))));
    TieRule rule = rules[trial % 3];
    REQUIRE(filtered_rank(c, rule) == oracle_rank(c, rule));
  }
}

TEST_CASE("filtering more competitors never worsens the rank", "[pipeline]") {
  SplitRng rng(13);
  for (int trial = 0; trial < 200; ++trial) {
    RankingCase c;
    c.n_entities = 20;
    c.tail = 3;
    for (int32_t e = 0; e < 20; ++e)
      if (rng.next_below(2)) c.scores[e] = static_cast<double>(rng.next_below(5)) / 5.0;
    int64_t prev = filtered_rank(c, TieRule::Mean);
    for (int32_t e = 0; e < 20; ++e) {
      if (e == c.tail) continue;
      c.filter.push_back(e);
      int64_t cur = filtered_rank(c, TieRule::Mean);
      REQUIRE(cur <= prev);
      prev = cur;
    }
    CHECK(prev == 1);  // only the tail remains
  }
}

TEST_CASE("zero scorer chance baseline from the enumeration oracle", "[pipeline]") {
  // 6 entities, one relation; known tails shrink the competitor pool
  Graph g = Graph::build(6, 1, {{0, 0, 1}, {0, 0, 2}, {3, 0, 4}}, true, false);
  KnownTriples known(6, g.num_relations());
  known.add_split({{0, 0, 1}, {0, 0, 2}, {3, 0, 4}}, true, 1);
  known.finalize();

  RankMetrics fwd_only = zero_scorer_metrics(g, {{0, 0, 1}}, known, false, 0);
  // competitors: 5 minus 1 filtered (entity 2), all tied at zero -> 1 + ceil(5/2) is wrong;
  // ties = 4, mean rank = 1 + (4 + 1) / 2 = 3
  CHECK(fwd_only.mrr == Catch::Approx(1.0 / 3.0).margin(1e-12));

  RankMetrics both = zero_scorer_metrics(g, {{0, 0, 1}}, known, true, 0);
  // inverse case (1, r_inv, 0): no other known tails, ties = 5, rank = 1 + 3 = 4
  CHECK(both.n_cases == 2);
  CHECK(both.mrr == Catch::Approx(0.5 * (1.0 / 3.0 + 1.0 / 4.0)).margin(1e-12));
}

TEST_CASE("average precision over candidate lists", "[pipeline]") {
  using C = ScoredCandidate;
  MapResult perfect = map_with_negatives({{C{0, 0.9, true}, C{1, 0.5, false}, C{2, 0.1, false}}});
  CHECK(perfect.map == Catch::Approx(1.0).margin(1e-12));

  MapResult second = map_with_negatives({{C{0, 0.9, false}, C{1, 0.5, true}}});
  CHECK(second.map == Catch::Approx(0.5).margin(1e-12));

  // positives at ranks 1 and 3: (1/1 + 2/3) / 2
  MapResult mixed = map_with_negatives({{C{0, 0.9, true}, C{1, 0.5, false}, C{2, 0.1, true}}});
  CHECK(mixed.map == Catch::Approx(0.833333).margin(1e-5));

  MapResult skip = map_with_negatives({{C{0, 0.9, false}}, {C{0, 0.9, true}}});
  CHECK(skip.skipped == 1);
  CHECK(skip.used == 1);
  CHECK(skip.map == Catch::Approx(1.0).margin(1e-12));

  // ties break toward the smaller id: positive id 2 ties with negatives 0, 1
  MapResult tied = map_with_negatives({{C{2, 0.5, true}, C{0, 0.5, false}, C{1, 0.5, false}}});
  CHECK(tied.map == Catch::Approx(1.0 / 3.0).margin(1e-12));
}

TEST_CASE("attention entropy and concentration shares", "[pipeline]") {
  FlowTrace onehot;
  onehot.steps.emplace_back();
  onehot.steps.back().attention = {{3, 1.0}};
  FlowTrace uniform;
  uniform.steps.emplace_back();
  uniform.steps.back().attention = {{0, 0.25}, {1, 0.25}, {2, 0.25}, {3, 0.25}};

  AttentionDiagnostics d1 = attention_diagnostics({onehot});
  CHECK(d1.entropy[0] == 0.0);  // initial one-hot
  CHECK(d1.entropy[1] == Catch::Approx(0.0).margin(1e-12));
  CHECK(d1.top1[1] == Catch::Approx(1.0).margin(1e-12));

  AttentionDiagnostics d2 = attention_diagnostics({uniform});
  CHECK(d2.entropy[1] == Catch::Approx(std::log(4.0)).margin(1e-9));
  CHECK(d2.entropy[1] == Catch::Approx(1.38629).margin(1e-5));
  CHECK(d2.top1[1] == Catch::Approx(0.25).margin(1e-12));
  CHECK(d2.top3[1] == Catch::Approx(0.75).margin(1e-12));
  CHECK(d2.top5[1] == Catch::Approx(1.0).margin(1e-12));

  CHECK_THROWS(attention_diagnostics({}));
}

TEST_CASE("one batch reaches every parameter group with gradient", "[pipeline]") {
  Graph g = dense_test_graph(16, 2, 99, 4);
  GraphView view(g);
  ModelDims dims{16, g.num_relations(), 8, 4};
  ParamStore<double> params = init_model_params<double>(dims, 11);
  Horizons hz = small_horizons();

  std::vector<QueryInput> batch;
  for (int64_t e = 0; e < 8; ++e) batch.push_back({g.src(e), g.rel(e), g.dst(e)});
  BatchResult<double> res = run_batch(view, batch, params, hz, SplitRng(2), true);
  REQUIRE(res.grads.size() == params.size());
  REQUIRE(res.unvisited_tails < static_cast<int64_t>(batch.size()));

  for (size_t i = 0; i < params.size(); ++i) {
    double linf = 0.0;
    for (double x : res.grads[i].data) linf = std::max(linf, std::abs(x));
    INFO("parameter " << params.names[i]);
    CHECK(linf > 0.0);  // a structurally zero gradient means a wiring bug
  }
}

TEST_CASE("batch gradients are deterministic and thread invariant", "[pipeline]") {
  Graph g = dense_test_graph(14, 2, 5, 3);
  GraphView view(g);
  ModelDims dims{14, g.num_relations(), 6, 3};
  ParamStore<double> params = init_model_params<double>(dims, 23);
  Horizons hz = small_horizons();
  hz.n_dims = 6;
  hz.n_dims_att = 3;

  std::vector<QueryInput> batch;
  for (int64_t e = 0; e < 6; ++e) batch.push_back({g.src(e), g.rel(e), g.dst(e)});

  BatchResult<double> a = run_batch(view, batch, params, hz, SplitRng(4), true, 1);
  BatchResult<double> b = run_batch(view, batch, params, hz, SplitRng(4), true, 1);
  BatchResult<double> c = run_batch(view, batch, params, hz, SplitRng(4), true, 2);

  CHECK(a.loss == b.loss);
  CHECK(a.loss == c.loss);
  REQUIRE(a.grads.size() == b.grads.size());
  for (size_t i = 0; i < a.grads.size(); ++i) {
    REQUIRE(a.grads[i].data == b.grads[i].data);
    REQUIRE(a.grads[i].data == c.grads[i].data);  // accumulation order is query order
  }
  CHECK(a.tail_mass == c.tail_mass);
}

TEST_CASE("training lowers the smoothed loss on the planted rule", "[pipeline]") {
  SyntheticSpec spec;
  spec.n_entities = 30;  // per-head fanout stays within the small horizons' reach
  spec.out_degree = 2;
  spec.noise_rate = 0.1;
  spec.train_fraction = 0.8;
  spec.seed = 3;
  SyntheticData data = generate_synthetic(spec);
  Graph g = Graph::build(data.entities.size(), data.relations.size(), data.train, true, true);

  TrainConfig<float> tc;
  tc.batch_size = 3;
  tc.learning_rate = 5e-3;
  tc.grad_clipnorm = 1.0;
  tc.n_epochs = 3;
  tc.seed = 12;
  tc.horizons = small_horizons();

  ModelDims dims{g.num_entities(), g.num_relations(), tc.horizons.n_dims, tc.horizons.n_dims_att};
  ParamStore<float> params = init_model_params<float>(dims, tc.seed);
  AdamState<float> opt = AdamState<float>::init(params, tc.learning_rate, tc.grad_clipnorm);
  std::vector<QueryInput> queries = training_queries(g);

  std::vector<double> losses;
  BatchHook hook = [&](const BatchEvent& ev) { losses.push_back(ev.loss); };
  for (int64_t e = 0; e < tc.n_epochs; ++e) train_epoch(g, queries, params, opt, tc, e, hook);

  // Compare the first and last thirds of the run; single batches are too noisy
  // because an unattended answer costs -log(epsilon) regardless of parameters.
  REQUIRE(losses.size() >= 200);
  auto mean_range = [&](size_t lo, size_t hi) {
    double s = 0.0;
    for (size_t i = lo; i < hi; ++i) s += losses[i];
    return s / static_cast<double>(hi - lo);
  };
  size_t third = losses.size() / 3;
  double head_mean = mean_range(0, third);
  double tail_mean = mean_range(losses.size() - third, losses.size());
  INFO("first third " << head_mean << " last third " << tail_mean);
  CHECK(tail_mean < head_mean);
}

TEST_CASE("mid-epoch resume reproduces the uninterrupted run bit for bit", "[pipeline]") {
  SyntheticSpec spec;
  spec.n_entities = 24;
  spec.out_degree = 2;
  spec.noise_rate = 0.0;
  spec.train_fraction = 0.7;
  spec.seed = 8;
  SyntheticData data = generate_synthetic(spec);
  Graph g = Graph::build(data.entities.size(), data.relations.size(), data.train, true, true);

  TrainConfig<float> tc;
  tc.batch_size = 12;
  tc.learning_rate = 1e-3;
  tc.grad_clipnorm = 1.0;
  tc.seed = 5;
  tc.horizons = small_horizons();
  std::vector<QueryInput> queries = training_queries(g);
  ModelDims dims{g.num_entities(), g.num_relations(), tc.horizons.n_dims, tc.horizons.n_dims_att};

  ParamStore<float> full = init_model_params<float>(dims, 1);
  AdamState<float> full_opt = AdamState<float>::init(full, tc.learning_rate, tc.grad_clipnorm);
  ParamStore<float> snap;
  AdamState<float> snap_opt;
  int64_t snap_batch = -1;
  BatchHook taker = [&](const BatchEvent& ev) {
    if (ev.batch_index == 2) {  // snapshot after the third batch
      snap = full;
      snap_opt = full_opt;
      snap_batch = ev.batch_index;
    }
  };
  EpochStats stats = train_epoch(g, queries, full, full_opt, tc, 0, taker);
  REQUIRE(stats.batches >= 5);
  REQUIRE(snap_batch == 2);

  // resume from the snapshot; per-batch rng comes from (seed, epoch, batch)
  train_epoch(g, queries, snap, snap_opt, tc, 0, nullptr, snap_batch + 1);
  for (size_t i = 0; i < full.size(); ++i) REQUIRE(snap.values[i].data == full.values[i].data);
  for (size_t i = 0; i < full.size(); ++i) {
    REQUIRE(snap_opt.m[i].data == full_opt.m[i].data);
    REQUIRE(snap_opt.v[i].data == full_opt.v[i].data);
  }
  CHECK(snap_opt.step == full_opt.step);
}

TEST_CASE("synthetic corpus is deterministic, split and answerable", "[pipeline]") {
  SyntheticSpec spec;
  spec.n_entities = 40;
  spec.out_degree = 2;
  spec.noise_rate = 0.2;
  spec.train_fraction = 0.8;
  spec.seed = 21;

  SyntheticData a = generate_synthetic(spec);
  SyntheticData b = generate_synthetic(spec);
  CHECK(a.train == b.train);
  CHECK(a.test == b.test);
  CHECK(a.composites == b.composites);

  CHECK(a.relations.name(0) == "r1");
  CHECK(a.relations.name(1) == "r2");
  CHECK(a.relations.name(2) == "r0");
  CHECK(a.relations.name(3) == "q");
  CHECK(a.entities.size() == 40);
  CHECK(a.entities.name(7) == "e007");

  int64_t n_comp = static_cast<int64_t>(a.composites.size());
  int64_t want_train = std::llround(0.8 * static_cast<double>(n_comp));
  CHECK(static_cast<int64_t>(a.test.size()) == n_comp - want_train);

  // every composite in train or test, none duplicated across the split
  std::set<std::tuple<int32_t, int32_t, int32_t>> train_set;
  for (const Triple& t : a.train) train_set.insert({t.head, t.rel, t.tail});
  for (const Triple& t : a.test) CHECK(train_set.count({t.head, t.rel, t.tail}) == 0);

  // base graph alone answers each test query in two hops
  std::set<std::pair<int32_t, int32_t>> r1e, r2e;
  for (const Triple& t : a.train) {
    if (t.rel == 0) r1e.insert({t.head, t.tail});
    if (t.rel == 1) r2e.insert({t.head, t.tail});
  }
  for (const Triple& t : a.test) {
    bool witness = false;
    for (const auto& [x, y] : r1e)
      if (x == t.head && r2e.count({y, t.tail})) witness = true;
    CHECK(witness);
  }

  SyntheticSpec bad = spec;
  bad.n_entities = 2;
  CHECK_THROWS(generate_synthetic(bad));
  bad = spec;
  bad.out_degree = 0;
  CHECK_THROWS(generate_synthetic(bad));
  bad = spec;
  bad.train_fraction = 1.0;
  CHECK_THROWS(generate_synthetic(bad));
}

TEST_CASE("train command writes logs, checkpoints and deterministic metrics", "[pipeline]") {
  std::string corpus = fresh_dir("corpus");
  SyntheticSpec spec;
  spec.n_entities = 24;
  spec.out_degree = 2;
  spec.noise_rate = 0.1;
  spec.train_fraction = 0.75;
  spec.seed = 14;
  SynthOutcome synth = cmd_synth(spec, corpus);
  REQUIRE(std::filesystem::exists(synth.train_path));
  REQUIRE(std::filesystem::exists(synth.test_path));
  REQUIRE(std::filesystem::exists(synth.answers_path));

  auto make_cfg = [&](const std::string& out_dir) {
    RunConfig cfg;
    cfg.train_file = synth.train_path;
    cfg.valid_file = synth.test_path;
    cfg.output_dir = out_dir;
    cfg.seed = 9;
    cfg.batch_size = 16;
    cfg.n_dims = 8;
    cfg.n_dims_att = 4;
    cfg.n_steps_of_u_flow = 1;
    cfg.n_steps_of_c_flow = 3;
    cfg.max_sampled_edges_per_step = 100;
    cfg.max_sampled_edges_per_node = 8;
    cfg.max_attended_nodes_per_step = 4;
    cfg.max_seen_nodes_per_step = 12;
    cfg.learning_rate = 5e-3;
    cfg.n_epochs = 1;
    cfg.checkpoint_fractions = "0.5,1.0";
    cfg.eval_max_queries = 10;
    return cfg;
  };

  std::string out1 = fresh_dir("train1");
  std::ostringstream sink;
  TrainOutcome t1 = cmd_train(make_cfg(out1), sink);

  REQUIRE(std::filesystem::exists(t1.loss_log_path));
  std::istringstream log(slurp(t1.loss_log_path));
  std::string line;
  REQUIRE(std::getline(log, line));
  CHECK(line == "step,loss,unvisited_rate");
  int64_t rows = 0;
  while (std::getline(log, line)) {
    ++rows;
    CHECK(std::count(line.begin(), line.end(), ',') == 2);
  }
  CHECK(rows == t1.last_epoch.batches);

  REQUIRE(t1.checkpoint_files.size() == 3);  // 0.5, 1.0, final
  for (const std::string& f : t1.checkpoint_files) CHECK(std::filesystem::exists(f));
  CHECK(t1.final_checkpoint == out1 + "/model.ckpt");
  CHECK(std::filesystem::exists(out1 + "/ckpt_epoch_0.5.ckpt"));
  CHECK(std::filesystem::exists(out1 + "/ckpt_epoch_1.ckpt"));

  REQUIRE(std::filesystem::exists(out1 + "/metrics.tsv"));
  CHECK(t1.metrics.has("train_loss"));
  CHECK(t1.metrics.has("valid_mrr"));
  CHECK(t1.metrics.has("chance_mrr"));
  CHECK(t1.metrics.has("attn_entropy_t0"));
  CHECK(t1.metrics.value("chance_mrr") > 0.0);
  // no wall-clock values may reach the metrics file
  std::string metrics_text = slurp(out1 + "/metrics.tsv");
  CHECK(metrics_text.find("seconds") == std::string::npos);

  // the identical config in a fresh directory reproduces the metrics bytes
  std::string out2 = fresh_dir("train2");
  cmd_train(make_cfg(out2), sink);
  CHECK(slurp(out1 + "/metrics.tsv") == slurp(out2 + "/metrics.tsv"));
  CHECK(slurp(out1 + "/loss_log.csv") == slurp(out2 + "/loss_log.csv"));

  // resume state in the mid-run checkpoint names the source batch
  Checkpoint mid = load_checkpoint(out1 + "/ckpt_epoch_0.5.ckpt");
  CHECK(mid.meta.next_epoch == 0);
  CHECK(mid.meta.batches_done > 0);
  Checkpoint fin = load_checkpoint(t1.final_checkpoint);
  CHECK(fin.meta.next_epoch == 1);
  CHECK(fin.meta.batches_done == 0);
  CHECK(fin.meta.config_echo == serialize_config(make_cfg(out1)));

  SECTION("evaluate command ranks the held-out split") {
    RunConfig cfg = make_cfg(out1);
    cfg.test_file = synth.test_path;
    cfg.eval_max_queries = 8;
    EvaluateOutcome ev = cmd_evaluate(cfg, t1.final_checkpoint, "test");
    CHECK_FALSE(ev.map_mode);
    int64_t want_cases = 2 * static_cast<int64_t>(synth.data.test.size());  // both directions
    CHECK(ev.ranking.metrics.n_cases == want_cases);
    CHECK(ev.metrics.has("mrr"));
    CHECK(ev.metrics.has("hits10"));
    CHECK(ev.metrics.value("mrr") > 0.0);
    CHECK(ev.metrics.value("mrr") <= 1.0);
    for (int64_t r : ev.ranking.ranks) CHECK(r >= 1);

    EvaluateOutcome ev2 = cmd_evaluate(cfg, t1.final_checkpoint, "test");
    CHECK(ev2.metrics.text() == ev.metrics.text());  // deterministic evaluation
  }

  SECTION("evaluate command switches to MAP when negatives exist") {
    RunConfig cfg = make_cfg(out1);
    std::string neg_path = corpus + "/negatives.tsv";
    {
      std::ofstream neg(neg_path, std::ios::trunc);
      const Triple& t = synth.data.test.front();
      std::string h = synth.data.entities.name(t.head);
      std::string r = synth.data.relations.name(t.rel);
      neg << h << '\t' << r << '\t' << synth.data.entities.name(t.tail) << "\t+\n";
      neg << h << '\t' << r << '\t' << synth.data.entities.name((t.tail + 1) % 24) << "\t-\n";
      neg << h << '\t' << r << '\t' << synth.data.entities.name((t.tail + 2) % 24) << "\t-\n";
    }
    cfg.negatives_file = neg_path;
    EvaluateOutcome ev = cmd_evaluate(cfg, t1.final_checkpoint);
    CHECK(ev.map_mode);
    CHECK(ev.map.used == 1);
    CHECK(ev.metrics.has("map"));
    CHECK(ev.metrics.value("map") >= 0.0);
    CHECK(ev.metrics.value("map") <= 1.0);

    std::ofstream bad(neg_path, std::ios::trunc);
    bad << "nonexistent_entity\tq\te001\t+\n";
    bad.close();
    CHECK_THROWS(cmd_evaluate(cfg, t1.final_checkpoint));
  }

  SECTION("extract command exports a faithful subgraph") {
    RunConfig cfg = make_cfg(out1);
    const Triple& t = synth.data.test.front();
    std::string h = synth.data.entities.name(t.head);
    std::string r = synth.data.relations.name(t.rel);
    std::string tl = synth.data.entities.name(t.tail);
    ExtractOutcome ex = cmd_extract(cfg, t1.final_checkpoint, h, r, tl);

    REQUIRE(ex.files.size() == 4);
    for (const std::string& f : ex.files) REQUIRE(std::filesystem::exists(f));

    // full export covers exactly the visited nodes
    std::vector<int32_t> visited_sorted = ex.trace.visited;
    std::sort(visited_sorted.begin(), visited_sorted.end());
    REQUIRE(ex.full.nodes.size() == visited_sorted.size());
    for (size_t i = 0; i < visited_sorted.size(); ++i) {
      CHECK(ex.full.nodes[i].id == visited_sorted[i]);
      CHECK(ex.full.nodes[i].mass_per_step.size() == static_cast<size_t>(ex.full.n_steps) + 1);
    }
    // initial attention is one point of mass on the head
    for (const ExportNode& n : ex.full.nodes)
      CHECK(n.mass_per_step[0] == (n.id == ex.full.head ? 1.0 : 0.0));

    // pruned nodes and edges are subsets with endpoints inside
    std::set<int32_t> pruned_ids, full_ids;
    for (const ExportNode& n : ex.full.nodes) full_ids.insert(n.id);
    for (const ExportNode& n : ex.pruned.nodes) {
      pruned_ids.insert(n.id);
      CHECK(full_ids.count(n.id) == 1);
      CHECK(n.total_mass() >= cfg.subgraph_prune_threshold);
    }
    CHECK(pruned_ids.count(ex.full.head) == 1);  // head always survives
    for (const ExportEdge& e : ex.pruned.edges) {
      CHECK(pruned_ids.count(e.src) == 1);
      CHECK(pruned_ids.count(e.dst) == 1);
      CHECK(e.step >= 1);
      CHECK(e.step <= ex.pruned.n_steps);
    }

    // DOT output: header, balanced braces and quotes, edges between declared nodes
    std::string dot = slurp(ex.files[0]);
    CHECK(dot.rfind("digraph query_flow {", 0) == 0);
    CHECK(std::count(dot.begin(), dot.end(), '{') == std::count(dot.begin(), dot.end(), '}'));
    CHECK(std::count(dot.begin(), dot.end(), '"') % 2 == 0);
    std::set<std::string> declared;
    std::istringstream ds(dot);
    std::string dline;
    while (std::getline(ds, dline)) {
      if (dline.find("->") == std::string::npos) {
        size_t q1 = dline.find('"');
        size_t q2 = dline.find('"', q1 + 1);
        if (q1 != std::string::npos && q2 != std::string::npos && dline.find('[') != std::string::npos)
          declared.insert(dline.substr(q1 + 1, q2 - q1 - 1));
      } else {
        size_t q1 = dline.find('"');
        size_t q2 = dline.find('"', q1 + 1);
        size_t q3 = dline.find('"', q2 + 1);
        size_t q4 = dline.find('"', q3 + 1);
        REQUIRE(q4 != std::string::npos);
        CHECK(declared.count(dline.substr(q1 + 1, q2 - q1 - 1)) == 1);
        CHECK(declared.count(dline.substr(q3 + 1, q4 - q3 - 1)) == 1);
      }
    }

    // JSON output parses and mirrors the export
    nlohmann::json j = nlohmann::json::parse(slurp(ex.files[1]));
    CHECK(j["head"] == ex.full.head);
    CHECK(j["n_steps"] == ex.full.n_steps);
    REQUIRE(j["nodes"].size() == ex.full.nodes.size());
    CHECK(j["nodes"][0]["mass_per_step"].size() == static_cast<size_t>(ex.full.n_steps) + 1);
    for (const auto& je : j["edges"]) {
      CHECK(je.contains("src"));
      CHECK(je.contains("rel_label"));
      CHECK(je.contains("step"));
    }

    // unknown names fail with suggestions
    CHECK_THROWS_WITH(cmd_extract(cfg, t1.final_checkpoint, "e9999", r),
                      Catch::Matchers::ContainsSubstring("nearest matches"));
  }

  SECTION("sweep command measures each axis value") {
    RunConfig cfg = make_cfg(out1);
    cfg.test_file = synth.test_path;
    cfg.eval_max_queries = 6;
    SweepOutcome sw = cmd_sweep(cfg, "max_attended_nodes_per_step", {2, 4}, t1.final_checkpoint, sink);
    REQUIRE(sw.rows.size() == 2);
    REQUIRE(std::filesystem::exists(sw.csv_path));
    std::string csv = slurp(sw.csv_path);
    CHECK(csv.rfind("axis,value,", 0) == 0);
    for (const SweepRow& row : sw.rows) {
      CHECK(row.axis == "max_attended_nodes_per_step");
      CHECK(row.metrics.n_cases > 0);
      CHECK(row.max_edges_scored <= row.value * cfg.max_sampled_edges_per_node);
      CHECK(row.train_seconds >= 0.0);
    }
    CHECK(sw.rows[0].value == 2);
    CHECK(sw.rows[1].value == 4);

    // metrics come from the fixed starting parameters, so they reproduce
    SweepOutcome sw2 = cmd_sweep(cfg, "max_attended_nodes_per_step", {2, 4}, t1.final_checkpoint, sink);
    for (size_t i = 0; i < sw.rows.size(); ++i) CHECK(sw.rows[i].metrics.mrr == sw2.rows[i].metrics.mrr);

    CHECK_THROWS(cmd_sweep(cfg, "no_such_axis", {1}, t1.final_checkpoint, sink));
  }

  SECTION("stats command reports corpus statistics") {
    RunConfig cfg = make_cfg(out1);
    cfg.test_file = synth.test_path;
    MetricsReport st = cmd_stats(cfg);
    CHECK(st.value("n_entities") == 24.0);
    CHECK(st.value("n_relations") == 4.0);
    CHECK(st.value("n_train") == static_cast<double>(synth.data.train.size()));
    CHECK(st.has("test_pct_multi_edge"));
    CHECK(st.has("test_avg_distance"));
    CHECK(st.value("test_avg_distance") > 0.0);
    // every held-out pair is reachable through its two-hop witness
    CHECK(st.value("test_unreachable") == 0.0);
    REQUIRE(std::filesystem::exists(out1 + "/stats.tsv"));
  }
}
