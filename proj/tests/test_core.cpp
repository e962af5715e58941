// Core layers: rng, tensors, the autodiff tape (finite-difference oracle),
// the optimizer, graph storage and masking, config parsing, checkpoints.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "neucflow/neucflow.hpp"

using namespace neucflow;

namespace {

using DTape = TapeT<double>;
using DTensor = TensorT<double>;

DTensor random_tensor(std::vector<int64_t> shape, SplitRng& rng, double scale = 1.0) {
  DTensor t = DTensor::zeros(std::move(shape));
  for (double& v : t.data) v = (rng.next_double() * 2.0 - 1.0) * scale;
  return t;
}

// Central finite differences against the tape's reverse pass. build() must
// construct the graph from fresh input Vars and return a scalar loss.
template <class Build>
void check_gradients(std::vector<DTensor> inputs, Build build, double tol = 1e-6) {
  DTape tape;
  std::vector<DTape::Var> vars;
  for (const DTensor& t : inputs) vars.push_back(tape.input(t));
  auto loss = build(tape, vars);
  tape.backward(loss);
  std::vector<DTensor> analytic;
  for (auto v : vars) analytic.push_back(tape.grad(v));

  const double h = 1e-6;
  for (size_t i = 0; i < inputs.size(); ++i) {
    for (size_t j = 0; j < inputs[i].data.size(); ++j) {
      auto eval = [&](double x) {
        std::vector<DTensor> shifted = inputs;
        shifted[i].data[j] = x;
        DTape t2;
        std::vector<DTape::Var> vars2;
        for (const DTensor& t : shifted) vars2.push_back(t2.input(t));
        return t2.value(build(t2, vars2)).data[0];
      };
      double x0 = inputs[i].data[j];
      double fd = (eval(x0 + h) - eval(x0 - h)) / (2.0 * h);
      double an = analytic[i].data[j];
      double err = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-8});
      INFO("input " << i << " element " << j << " fd " << fd << " analytic " << an);
      CHECK(err < tol);
    }
  }
}

std::string temp_dir(const std::string& tag) {
  std::string dir = "/tmp/neucflow_test_" + tag;
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("splittable rng streams", "[core]") {
  SplitRng a(42), b(42);
  for (int i = 0; i < 100; ++i) REQUIRE(a.next_u64() == b.next_u64());

  SplitRng parent(7);
  uint64_t before = parent.state();
  SplitRng c1 = parent.split(1);
  SplitRng c2 = parent.split(2);
  CHECK(parent.state() == before);  // split does not advance the parent
  CHECK(c1.next_u64() != c2.next_u64());

  SplitRng d(99);
  for (int i = 0; i < 1000; ++i) {
    uint64_t v = d.next_below(17);
    REQUIRE(v < 17);
  }
  CHECK_THROWS(d.next_below(0));

  SplitRng e(5);
  e.next_u64();
  SplitRng f = SplitRng::from_state(e.state());
  CHECK(e.next_u64() == f.next_u64());
}

TEST_CASE("tensor shape checks", "[core]") {
  DTensor t = DTensor::zeros({2, 3});
  CHECK(t.numel() == 6);
  CHECK(t.rows() == 2);
  CHECK(t.cols() == 3);
  CHECK_THROWS_AS(DTensor({2, 2}, {1.0, 2.0, 3.0}), std::invalid_argument);

  DTensor v = DTensor::vec({1.0, 2.0});
  CHECK(v.rank() == 1);
  CHECK(v.rows() == 2);

  DTensor bad = DTensor::vec({1.0, std::nan("")});
  CHECK_FALSE(bad.all_finite());
}

TEST_CASE("tape elementwise and reduction gradients", "[core]") {
  SplitRng rng(1);
  auto x = random_tensor({3, 4}, rng);
  auto y = random_tensor({3, 4}, rng);

  check_gradients({x, y}, [](DTape& t, const std::vector<DTape::Var>& v) {
    return t.reduce_sum(t.mul(t.add(v[0], v[1]), t.sub(v[0], v[1])));
  });
  check_gradients({x}, [](DTape& t, const std::vector<DTape::Var>& v) {
    return t.reduce_mean(t.tanh_(t.scale(v[0], 0.7)));
  });
  check_gradients({x}, [](DTape& t, const std::vector<DTape::Var>& v) {
    return t.reduce_sum(t.leaky_relu(v[0], 0.2));
  });
  auto pos = random_tensor({5}, rng);
  for (double& d : pos.data) d = std::abs(d) + 0.5;
  check_gradients({pos}, [](DTape& t, const std::vector<DTape::Var>& v) {
    return t.reduce_sum(t.log_(t.add_const(v[0], 0.1)));
  });
}

TEST_CASE("tape matmul and structural op gradients", "[core]") {
  SplitRng rng(2);
  auto a = random_tensor({3, 4}, rng);
  auto b = random_tensor({4, 2}, rng);
  auto bias = random_tensor({2}, rng);
  check_gradients({a, b, bias}, [](DTape& t, const std::vector<DTape::Var>& v) {
    return t.reduce_sum(t.tanh_(t.add_row_bias(t.matmul(v[0], v[1]), v[2])));
  });

  auto row = random_tensor({1, 3}, rng);
  check_gradients({row}, [](DTape& t, const std::vector<DTape::Var>& v) {
    return t.reduce_sum(t.tile_rows(v[0], 4));
  });

  auto c = random_tensor({3, 2}, rng);
  auto d = random_tensor({3, 3}, rng);
  check_gradients({c, d}, [](DTape& t, const std::vector<DTape::Var>& v) {
    return t.reduce_sum(t.concat_cols({v[0], v[1]}));
  });

  auto src = random_tensor({5, 3}, rng);
  check_gradients({src}, [](DTape& t, const std::vector<DTape::Var>& v) {
    return t.reduce_sum(t.gather_rows(v[0], {4, 0, 0, 2}));  // repeats accumulate
  });
  check_gradients({src}, [](DTape& t, const std::vector<DTape::Var>& v) {
    return t.reduce_sum(t.pad_rows(v[0], 8));
  });

  auto vals = random_tensor({4}, rng);
  check_gradients({vals}, [](DTape& t, const std::vector<DTape::Var>& v) {
    return t.reduce_sum(t.gather_values(v[0], {3, 1, 1}));
  });
  check_gradients({vals}, [](DTape& t, const std::vector<DTape::Var>& v) {
    return t.reduce_sum(t.mul(t.scatter_values(v[0], {5, 0, 2, 7}, 9),
                              t.constant(DTensor::vec({1, 2, 3, 4, 5, 6, 7, 8, 9}))));
  });

  auto m = random_tensor({4, 3}, rng);
  auto w = random_tensor({4}, rng);
  check_gradients({m, w}, [](DTape& t, const std::vector<DTape::Var>& v) {
    return t.reduce_sum(t.rowwise_scale(v[0], v[1]));
  });
  auto m2 = random_tensor({4, 3}, rng);
  check_gradients({m, m2}, [](DTape& t, const std::vector<DTape::Var>& v) {
    return t.reduce_sum(t.tanh_(t.row_dot(v[0], v[1])));
  });

  auto s1 = random_tensor({1}, rng);
  auto s2 = random_tensor({1}, rng);
  for (double& x : s2.data) x = std::abs(x) + 1.0;
  check_gradients({s1, s2}, [](DTape& t, const std::vector<DTape::Var>& v) {
    return t.reduce_sum(t.div_by_scalar(t.stack_scalars({v[0], v[1]}), v[1]));
  });
}

TEST_CASE("tape segment op gradients and values", "[core]") {
  SplitRng rng(3);
  auto x = random_tensor({6, 3}, rng);
  check_gradients({x}, [](DTape& t, const std::vector<DTape::Var>& v) {
    return t.reduce_sum(t.tanh_(t.segment_sum(v[0], {0, 0, 2, 1, 2, 2}, 3, true)));
  });
  auto flat = random_tensor({6}, rng);
  check_gradients({flat}, [](DTape& t, const std::vector<DTape::Var>& v) {
    return t.reduce_sum(t.segment_sum(v[0], {0, 1, 0, 1, 0, 1}, 2, false));
  });
  check_gradients({flat}, [](DTape& t, const std::vector<DTape::Var>& v) {
    auto sm = t.segment_softmax(v[0], {0, 0, 0, 1, 1, 1}, 2);
    return t.reduce_sum(t.mul(sm, t.constant(DTensor::vec({1, 2, 3, 4, 5, 6}))));
  });

  // inv-sqrt aggregation: k unit inputs into one segment sum to sqrt(k)
  DTape t;
  auto ones = t.constant(DTensor({4, 1}, {1, 1, 1, 1}));
  auto agg = t.segment_sum(ones, {0, 0, 0, 0}, 1, true);
  CHECK(t.value(agg).data[0] == Catch::Approx(2.0).margin(1e-12));

  // closed-form softmax: logits [0, ln 3] in one segment -> [0.25, 0.75]
  auto sm = t.segment_softmax(t.constant(DTensor::vec({0.0, std::log(3.0)})), {0, 0}, 1);
  CHECK(t.value(sm).data[0] == Catch::Approx(0.25).margin(1e-12));
  CHECK(t.value(sm).data[1] == Catch::Approx(0.75).margin(1e-12));

  // stability: a huge common offset must not overflow
  auto sm2 = t.segment_softmax(t.constant(DTensor::vec({1000.0, 1000.0 + std::log(3.0)})), {0, 0}, 1);
  CHECK(t.value(sm2).data[0] == Catch::Approx(0.25).margin(1e-9));

  CHECK_THROWS(t.log_(t.constant(DTensor::vec({-1.0}))));
}

TEST_CASE("backward_seeded accumulates into leaves only once", "[core]") {
  DTape t;
  auto x = t.input(DTensor::vec({2.0, 3.0}));
  auto y = t.scale(x, 4.0);
  t.backward_seeded(y, DTensor::vec({1.0, 1.0}));
  DTensor g = t.grad(x);
  CHECK(g.data[0] == Catch::Approx(4.0));
  CHECK(g.data[1] == Catch::Approx(4.0));
  // untouched leaf reads as zeros
  auto z = t.input(DTensor::vec({1.0}));
  CHECK(t.grad(z).data[0] == 0.0);
}

TEST_CASE("global norm clip and adam analytic first step", "[core]") {
  GradMap<double> g;
  g.push_back(DTensor::vec({3.0, 4.0}));
  double norm = clip_by_global_norm(g, 1.0);
  CHECK(norm == Catch::Approx(5.0));
  CHECK(g[0].data[0] == Catch::Approx(0.6));
  CHECK(g[0].data[1] == Catch::Approx(0.8));

  GradMap<double> g2;
  g2.push_back(DTensor::vec({3.0, 4.0}));
  CHECK(clip_by_global_norm(g2, 10.0) == Catch::Approx(5.0));
  CHECK(g2[0].data[0] == Catch::Approx(3.0));  // below threshold, untouched

  // first Adam step with clipnorm off moves each weight by ~lr*sign(g)
  ParamStore<double> p;
  p.add("w", DTensor::vec({1.0, -1.0}));
  AdamState<double> st = AdamState<double>::init(p, 0.01, 0.0);
  GradMap<double> grads;
  grads.push_back(DTensor::vec({0.5, -2.0}));
  adam_step(p, grads, st);
  double denom1 = std::sqrt(0.5 * 0.5) + st.eps;
  double denom2 = std::sqrt(2.0 * 2.0) + st.eps;
  CHECK(p.at("w").data[0] == Catch::Approx(1.0 - 0.01 * 0.5 / denom1).epsilon(1e-9));
  CHECK(p.at("w").data[1] == Catch::Approx(-1.0 + 0.01 * 2.0 / denom2).epsilon(1e-9));

  GradMap<double> bad;
  bad.push_back(DTensor::vec({std::nan(""), 0.0}));
  CHECK_THROWS_WITH(adam_step(p, bad, st), Catch::Matchers::ContainsSubstring("w"));
}

TEST_CASE("triple parsing and vocab order", "[core]") {
  std::istringstream in("a\tr\tb\nb\tr\tc\n\na\ts\tc\n");
  Vocab ents, rels;
  auto triples = load_triples(in, "mem", ents, rels);
  REQUIRE(triples.size() == 3);
  CHECK(ents.name(0) == "a");
  CHECK(ents.name(1) == "b");
  CHECK(ents.name(2) == "c");
  CHECK(rels.size() == 2);
  CHECK(triples[2] == Triple{0, 1, 2});

  std::istringstream bad("a\tr\tb\nmalformed line\n");
  Vocab e2, r2;
  CHECK_THROWS_WITH(load_triples(bad, "mem", e2, r2), Catch::Matchers::ContainsSubstring("mem:2"));

  CHECK_THROWS_AS(load_triples_file("/no/such/file.tsv", e2, r2), MissingPathError);
}

TEST_CASE("graph layout, inverses and self-loops", "[core]") {
  // a->b, b->c under r0; c->a under r1
  std::vector<Triple> triples = {{0, 0, 1}, {1, 0, 2}, {2, 1, 0}};
  Graph g = Graph::build(3, 2, triples, /*inverse=*/true, /*loops=*/true);
  CHECK(g.num_raw_edges() == 3);
  CHECK(g.num_edges() == 3 + 3 + 3);
  CHECK(g.num_relations() == 2 * 2 + 1);
  CHECK(g.self_loop_relation() == 4);

  for (int64_t e = 0; e < 6; ++e) REQUIRE(g.inverse_of(g.inverse_of(e)) == e);
  CHECK(g.rel(3) == 2);          // inverse of r0
  CHECK(g.src(3) == 1);          // reversed endpoints
  CHECK(g.dst(3) == 0);
  CHECK(g.is_self_loop_edge(6));
  CHECK(g.find_edge(0, 0, 1) == 0);
  CHECK(g.find_edge(0, 1, 1) == -1);

  // rows sorted by (rel, dst, id)
  for (int32_t v = 0; v < 3; ++v) {
    auto row = g.row(v);
    for (size_t i = 1; i < row.size(); ++i) {
      auto key = [&](int64_t e) { return std::tuple(g.rel(e), g.dst(e), e); };
      REQUIRE(key(row[i - 1]) < key(row[i]));
    }
  }

  // same triples -> identical layout
  Graph g2 = Graph::build(3, 2, triples, true, true);
  for (int64_t e = 0; e < g.num_edges(); ++e) {
    REQUIRE(g.src(e) == g2.src(e));
    REQUIRE(g.rel(e) == g2.rel(e));
    REQUIRE(g.dst(e) == g2.dst(e));
  }
}

TEST_CASE("batch masking standard and cutoff", "[core]") {
  // parallel edges a->b via r0, r1, r2 plus unrelated b->c
  std::vector<Triple> triples = {{0, 0, 1}, {0, 1, 1}, {0, 2, 1}, {1, 0, 2}};
  Graph g = Graph::build(3, 3, triples, true, true);

  GraphView std_view = mask_batch_edges(g, {{0, 0, 1}}, MaskMode::Standard);
  CHECK(std_view.num_masked() == 2);  // the edge and its inverse
  CHECK(std_view.is_masked(g.find_edge(0, 0, 1)));
  CHECK(std_view.is_masked(g.inverse_of(g.find_edge(0, 0, 1))));

  GraphView cut_view = mask_batch_edges(g, {{0, 0, 1}}, MaskMode::Cutoff);
  CHECK(cut_view.num_masked() == 6);  // 3 parallel edges and their inverses
  for (int32_t r = 0; r < 3; ++r) {
    CHECK(cut_view.is_masked(g.find_edge(0, r, 1)));
    CHECK(cut_view.is_masked(g.inverse_of(g.find_edge(0, r, 1))));
  }
  // cutoff degenerates to standard when no parallel edges exist
  GraphView cut2 = mask_batch_edges(g, {{1, 0, 2}}, MaskMode::Cutoff);
  CHECK(cut2.num_masked() == 2);
  // self-loops survive cutoff
  CHECK_FALSE(cut_view.is_masked(g.find_edge(0, static_cast<int32_t>(g.self_loop_relation()), 0)));

  CHECK_THROWS_WITH(mask_batch_edges(g, {{2, 2, 0}}, MaskMode::Standard),
                    Catch::Matchers::ContainsSubstring("not a graph edge"));
}

TEST_CASE("sampling respects caps, masks and seeds", "[core]") {
  SplitRng build_rng(11);
  std::vector<Triple> triples;
  for (int32_t v = 0; v < 12; ++v)
    for (int32_t k = 0; k < 6; ++k)
      triples.push_back({v, static_cast<int32_t>(k % 2), static_cast<int32_t>((v + k + 1) % 12)});
  Graph g = Graph::build(12, 2, triples, true, true);

  std::vector<int64_t> masked = {0, 5, 9};
  GraphView view(g, masked);
  SplitRng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    SplitRng r = rng.split(static_cast<uint64_t>(trial));
    EdgeSample s = sample_neighbors(view, {0, 1, 2, 3}, 4, r);
    REQUIRE(s.per_node);
    for (size_t b = 0; b + 1 < s.offsets.size(); ++b) {
      REQUIRE(s.offsets[b + 1] - s.offsets[b] <= 4);
      for (int64_t i = s.offsets[b]; i < s.offsets[b + 1]; ++i) {
        REQUIRE_FALSE(view.is_masked(s.edges[static_cast<size_t>(i)]));
        REQUIRE(g.src(s.edges[static_cast<size_t>(i)]) == s.sources[b]);
      }
    }
    SplitRng r2 = rng.split(static_cast<uint64_t>(trial));
    EdgeSample s2 = sample_neighbors(view, {0, 1, 2, 3}, 4, r2);
    REQUIRE(s.edges == s2.edges);
  }

  SplitRng gr(4);
  EdgeSample global = sample_edges_global(view, 10, gr);
  CHECK(global.size() == 10);
  for (int64_t e : global.edges) CHECK_FALSE(view.is_masked(e));
}

TEST_CASE("edges_between filters by endpoint sets", "[core]") {
  // chain a->b->c
  std::vector<Triple> triples = {{0, 0, 1}, {1, 0, 2}};
  Graph g = Graph::build(3, 1, triples, false, false);
  GraphView view(g);
  SplitRng rng(1);
  EdgeSample all = sample_neighbors(view, {0, 1}, 10, rng);

  auto saturated = edges_between(view, {0, 1}, {1, 2}, all);
  CHECK(saturated.size() == all.edges.size());
  CHECK(edges_between(view, {0, 1}, {}, all).empty());
  CHECK(edges_between(view, {0}, {2}, all).empty());  // no direct a->c edge
}

TEST_CASE("dataset stats on hand-checked graphs", "[core]") {
  // a->b with a parallel second relation; test triple (a, r0, b)
  Graph g1 = Graph::build(2, 2, {{0, 0, 1}, {0, 1, 1}}, true, false);
  DatasetStats s1 = dataset_stats(g1, {{0, 0, 1}});
  CHECK(s1.multi_edge == 1);
  CHECK(s1.pct_multi_edge == Catch::Approx(100.0));
  CHECK(s1.avg_distance == Catch::Approx(1.0));

  // two-hop pair, no direct edge
  Graph g2 = Graph::build(3, 2, {{0, 0, 1}, {1, 0, 2}}, true, false);
  DatasetStats s2 = dataset_stats(g2, {{0, 1, 2}});
  CHECK(s2.multi_edge == 0);
  CHECK(s2.avg_distance == Catch::Approx(2.0));
  CHECK(s2.reachable == 1);

  // unreachable pair is excluded and counted
  Graph g3 = Graph::build(4, 1, {{0, 0, 1}, {2, 0, 3}}, false, false);
  DatasetStats s3 = dataset_stats(g3, {{0, 0, 3}, {0, 0, 1}});
  CHECK(s3.unreachable == 1);
  CHECK(s3.avg_distance == Catch::Approx(1.0));
}

TEST_CASE("config profiles, overrides and round trip", "[core]") {
  RunConfig wn = load_config("profile = wn18rr\n");
  CHECK(wn.batch_size == 100);
  CHECK(wn.n_dims == 100);
  CHECK(wn.n_dims_att == 50);
  CHECK(wn.n_steps_of_c_flow == 8);
  CHECK(wn.n_steps_of_u_flow == 2);

  RunConfig nell = load_config("profile = nell995\n");
  CHECK(nell.batch_size == 10);
  CHECK(nell.n_dims == 200);
  CHECK(nell.max_sampled_edges_per_node == 1000);
  CHECK(nell.max_seen_nodes_per_step == 1000);
  CHECK(nell.max_attended_nodes_per_step == 100);
  CHECK(nell.n_epochs == 3);
  CHECK_FALSE(nell.add_inverse_relations);

  RunConfig over = load_config("profile = wn18rr\nmax_attended_nodes_per_step = 40\n");
  RunConfig base = load_config("profile = wn18rr\n");
  CHECK(over.max_attended_nodes_per_step == 40);
  over.max_attended_nodes_per_step = base.max_attended_nodes_per_step;
  CHECK(over == base);  // only that field differed

  CHECK_THROWS_WITH(load_config("no_such_key = 1\n"), Catch::Matchers::ContainsSubstring("no_such_key"));
  CHECK_THROWS_WITH(load_config("batch_size = abc\n"), Catch::Matchers::ContainsSubstring("batch_size"));
  CHECK_THROWS_WITH(load_config("masking = sideways\n"), Catch::Matchers::ContainsSubstring("masking"));
  // constraint violation names the key
  CHECK_THROWS_WITH(load_config("max_attended_nodes_per_step = 500\n"),
                    Catch::Matchers::ContainsSubstring("max_attended_nodes_per_step"));

  RunConfig cfg = load_config("profile = fb15k237\nseed = 9\nlearning_rate = 0.00125\n# comment\n");
  RunConfig again = load_config(serialize_config(cfg));
  CHECK(cfg == again);
}

TEST_CASE("checkpoint round trip is bit exact", "[core]") {
  ModelDims dims{7, 5, 6, 3};
  ParamStore<float> params = init_model_params<float>(dims, 123);
  AdamState<float> opt = AdamState<float>::init(params, 2e-3, 0.5);
  // dirty the optimizer state so the round trip is non-trivial
  GradMap<float> g = zero_grads(params);
  for (auto& t : g)
    for (auto& x : t.data) x = 0.01f;
  adam_step(params, g, opt);

  CheckpointMeta meta;
  meta.dims = dims;
  meta.rng_state = 9876543210123456789ull;
  meta.next_epoch = 2;
  meta.batches_done = 17;
  meta.config_echo = "profile = toy\n";

  std::string dir = temp_dir("ckpt");
  std::string path = dir + "/m.ckpt";
  save_checkpoint(path, params, opt, meta);
  Checkpoint ck = load_checkpoint(path);

  REQUIRE(ck.params.size() == params.size());
  for (size_t i = 0; i < params.size(); ++i) {
    REQUIRE(ck.params.names[i] == params.names[i]);
    REQUIRE(ck.params.values[i].shape == params.values[i].shape);
    REQUIRE(ck.params.values[i].data == params.values[i].data);  // bitwise
    REQUIRE(ck.opt.m[i].data == opt.m[i].data);
    REQUIRE(ck.opt.v[i].data == opt.v[i].data);
  }
  CHECK(ck.opt.step == 1);
  CHECK(ck.opt.lr == opt.lr);
  CHECK(ck.meta.rng_state == meta.rng_state);
  CHECK(ck.meta.next_epoch == 2);
  CHECK(ck.meta.batches_done == 17);
  CHECK(ck.meta.config_echo == meta.config_echo);

  // truncation fails the load, no partial model
  std::ifstream in(path, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  std::string bytes = buf.str();
  std::ofstream trunc(dir + "/trunc.ckpt", std::ios::binary | std::ios::trunc);
  trunc.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
  trunc.close();
  CHECK_THROWS_WITH(load_checkpoint(dir + "/trunc.ckpt"), Catch::Matchers::ContainsSubstring("truncated"));

  std::ofstream extra(dir + "/extra.ckpt", std::ios::binary | std::ios::trunc);
  extra.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  extra.put('x');
  extra.close();
  CHECK_THROWS_WITH(load_checkpoint(dir + "/extra.ckpt"), Catch::Matchers::ContainsSubstring("trailing"));

  std::ofstream junk(dir + "/junk.ckpt", std::ios::binary | std::ios::trunc);
  junk << "definitely not a checkpoint";
  junk.close();
  CHECK_THROWS_WITH(load_checkpoint(dir + "/junk.ckpt"), Catch::Matchers::ContainsSubstring("not a checkpoint"));

  CHECK_THROWS_AS(load_checkpoint(dir + "/never_written.ckpt"), MissingPathError);
}

TEST_CASE("checkpoint reload reproduces forward outputs bit-exactly", "[core]") {
  std::vector<Triple> triples = {{0, 0, 1}, {1, 0, 2}, {2, 1, 3}, {3, 0, 0}, {1, 1, 3}};
  Graph g = Graph::build(4, 2, triples, true, true);
  GraphView view(g);
  ModelDims dims{4, g.num_relations(), 8, 4};
  ParamStore<float> params = init_model_params<float>(dims, 7);
  AdamState<float> opt = AdamState<float>::init(params, 1e-3, 1.0);

  Horizons hz;
  hz.max_attended = 4;
  hz.max_seen = 8;
  hz.max_edges_per_node = 8;
  hz.c_steps = 3;
  hz.u_steps = 1;
  hz.u_sample_budget = 16;
  hz.n_dims = 8;
  hz.n_dims_att = 4;

  auto forward = [&](const ParamStore<float>& p) {
    BatchResult<float> r = run_batch(view, {{0, 0, 1}, {1, 0, 2}}, p, hz, SplitRng(5), false);
    return r.tail_mass;
  };
  std::vector<double> before = forward(params);

  std::string path = temp_dir("ckpt") + "/fw.ckpt";
  CheckpointMeta meta;
  meta.dims = dims;
  save_checkpoint(path, params, opt, meta);
  Checkpoint ck = load_checkpoint(path);
  std::vector<double> after = forward(ck.params);
  REQUIRE(before == after);
}
