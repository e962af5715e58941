#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "neucflow/optim.hpp"
#include "neucflow/rng.hpp"
#include "neucflow/tape.hpp"

namespace neucflow {

constexpr double kLeakySlope = 0.2;
constexpr double kLossEpsilon = 1e-12;

struct ModelDims {
  int64_t n_entities = 0;
  int64_t n_relations = 0;  // total, including inverse and self-loop ids
  int64_t n_dims = 0;       // D
  int64_t n_dims_att = 0;   // D_a

  void validate() const {
    if (n_entities <= 0 || n_relations <= 0 || n_dims <= 0 || n_dims_att <= 0)
      detail::fail("ModelDims", "all dims must be positive");
  }
};

namespace detail {

template <class Real>
TensorT<Real> glorot(int64_t fan_in, int64_t fan_out, std::vector<int64_t> shape, SplitRng& rng) {
  double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  TensorT<Real> t = TensorT<Real>::zeros(std::move(shape));
  for (Real& v : t.data) v = static_cast<Real>((rng.next_double() * 2.0 - 1.0) * limit);
  return t;
}

template <class Real>
void add_mlp2(ParamStore<Real>& p, const std::string& prefix, int64_t in, int64_t hidden, int64_t out,
              SplitRng& rng) {
  p.add(prefix + ".w1", glorot<Real>(in, hidden, {in, hidden}, rng));
  p.add(prefix + ".b1", TensorT<Real>::zeros({hidden}));
  p.add(prefix + ".w2", glorot<Real>(hidden, out, {hidden, out}, rng));
  p.add(prefix + ".b2", TensorT<Real>::zeros({out}));
}

template <class Real>
void add_mlp1(ParamStore<Real>& p, const std::string& prefix, int64_t in, int64_t out, SplitRng& rng) {
  p.add(prefix + ".w", glorot<Real>(in, out, {in, out}, rng));
  p.add(prefix + ".b", TensorT<Real>::zeros({out}));
}

}  // namespace detail

// All trainable tensors. Message/update networks are two-layer (leaky ReLU
// then tanh) with hidden width D; attention scorers are single leaky ReLU
// layers into the attention space D_a.
template <class Real>
ParamStore<Real> init_model_params(const ModelDims& dims, uint64_t seed) {
  dims.validate();
  int64_t D = dims.n_dims, Da = dims.n_dims_att;
  SplitRng rng = SplitRng(seed).split(0x9a7a);
  ParamStore<Real> p;
  p.add("ent_emb", detail::glorot<Real>(D, D, {dims.n_entities, D}, rng));
  p.add("rel_emb", detail::glorot<Real>(D, D, {dims.n_relations, D}, rng));
  detail::add_mlp2(p, "uflow.msg", 3 * D, D, D, rng);
  detail::add_mlp2(p, "uflow.upd", 3 * D, D, D, rng);
  detail::add_mlp2(p, "cflow.msg", 5 * D, D, D, rng);
  detail::add_mlp2(p, "cflow.upd", 5 * D, D, D, rng);
  p.add("cflow.attend", detail::glorot<Real>(D, D, {D, D}, rng));
  detail::add_mlp1(p, "aflow.src_cc", 4 * D, Da, rng);
  detail::add_mlp1(p, "aflow.dst_cc", 4 * D, Da, rng);
  detail::add_mlp1(p, "aflow.src_cu", 4 * D, Da, rng);
  detail::add_mlp1(p, "aflow.dst_cu", 4 * D, Da, rng);
  p.add("aflow.theta_cc", detail::glorot<Real>(Da, Da, {Da, Da}, rng));
  p.add("aflow.theta_cu", detail::glorot<Real>(Da, Da, {Da, Da}, rng));
  return p;
}

// Per-tape handles to every parameter, in store order.
template <class Real>
struct ModelVars {
  using Var = typename TapeT<Real>::Var;
  struct Mlp2 {
    Var w1, b1, w2, b2;
  };
  struct Mlp1 {
    Var w, b;
  };
  Var ent_emb, rel_emb;
  Mlp2 u_msg, u_upd, c_msg, c_upd;
  Var attend;
  Mlp1 a_src_cc, a_dst_cc, a_src_cu, a_dst_cu;
  Var theta_cc, theta_cu;
  std::vector<Var> ordered;  // aligned with ParamStore::names
};

template <class Real>
ModelVars<Real> bind_params(TapeT<Real>& tape, const ParamStore<Real>& params) {
  ModelVars<Real> mv;
  mv.ordered.reserve(params.size());
  for (size_t i = 0; i < params.size(); ++i) mv.ordered.push_back(tape.input(params.values[i]));
  auto at = [&](const char* name) {
    size_t i = params.find(name);
    if (i == ParamStore<Real>::npos) detail::fail("bind_params", std::string("missing parameter ") + name);
    return mv.ordered[i];
  };
  mv.ent_emb = at("ent_emb");
  mv.rel_emb = at("rel_emb");
  auto mlp2 = [&](const std::string& pre) {
    return typename ModelVars<Real>::Mlp2{at((pre + ".w1").c_str()), at((pre + ".b1").c_str()),
                                          at((pre + ".w2").c_str()), at((pre + ".b2").c_str())};
  };
  auto mlp1 = [&](const std::string& pre) {
    return typename ModelVars<Real>::Mlp1{at((pre + ".w").c_str()), at((pre + ".b").c_str())};
  };
  mv.u_msg = mlp2("uflow.msg");
  mv.u_upd = mlp2("uflow.upd");
  mv.c_msg = mlp2("cflow.msg");
  mv.c_upd = mlp2("cflow.upd");
  mv.attend = at("cflow.attend");
  mv.a_src_cc = mlp1("aflow.src_cc");
  mv.a_dst_cc = mlp1("aflow.dst_cc");
  mv.a_src_cu = mlp1("aflow.src_cu");
  mv.a_dst_cu = mlp1("aflow.dst_cu");
  mv.theta_cc = at("aflow.theta_cc");
  mv.theta_cu = at("aflow.theta_cu");
  return mv;
}

// Gradients of all bound parameters after a backward pass, in store order.
template <class Real>
GradMap<Real> collect_param_grads(const TapeT<Real>& tape, const ModelVars<Real>& mv) {
  GradMap<Real> g;
  g.reserve(mv.ordered.size());
  for (auto v : mv.ordered) g.push_back(tape.grad(v));
  return g;
}

template <class Real>
typename TapeT<Real>::Var mlp2_apply(TapeT<Real>& tape, const typename ModelVars<Real>::Mlp2& w,
                                     typename TapeT<Real>::Var x) {
  auto h = tape.leaky_relu(tape.add_row_bias(tape.matmul(x, w.w1), w.b1), kLeakySlope);
  return tape.tanh_(tape.add_row_bias(tape.matmul(h, w.w2), w.b2));
}

template <class Real>
typename TapeT<Real>::Var mlp1_apply(TapeT<Real>& tape, const typename ModelVars<Real>::Mlp1& w,
                                     typename TapeT<Real>::Var x) {
  return tape.leaky_relu(tape.add_row_bias(tape.matmul(x, w.w), w.b), kLeakySlope);
}

}  // namespace neucflow
