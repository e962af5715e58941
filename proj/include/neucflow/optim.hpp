#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "neucflow/tensor.hpp"

namespace neucflow {

// Named parameter tensors with a stable iteration order. Order is creation
// order and defines the layout of gradient maps, Adam slots and checkpoints.
template <class Real>
struct ParamStore {
  std::vector<std::string> names;
  std::vector<TensorT<Real>> values;

  size_t add(const std::string& name, TensorT<Real> v) {
    if (find(name) != npos) detail::fail("ParamStore::add", "duplicate parameter " + name);
    names.push_back(name);
    values.push_back(std::move(v));
    return names.size() - 1;
  }

  size_t find(const std::string& name) const {
    for (size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) return i;
    return npos;
  }

  TensorT<Real>& at(const std::string& name) {
    size_t i = find(name);
    if (i == npos) detail::fail("ParamStore::at", "unknown parameter " + name);
    return values[i];
  }

  const TensorT<Real>& at(const std::string& name) const {
    size_t i = find(name);
    if (i == npos) detail::fail("ParamStore::at", "unknown parameter " + name);
    return values[i];
  }

  size_t size() const { return names.size(); }

  static constexpr size_t npos = static_cast<size_t>(-1);
};

// Gradients aligned with a ParamStore's order.
template <class Real>
using GradMap = std::vector<TensorT<Real>>;

template <class Real>
GradMap<Real> zero_grads(const ParamStore<Real>& params) {
  GradMap<Real> g;
  g.reserve(params.size());
  for (const auto& v : params.values) g.push_back(TensorT<Real>::zeros(v.shape));
  return g;
}

template <class Real>
void accumulate_grads(GradMap<Real>& into, const GradMap<Real>& from) {
  if (into.size() != from.size()) detail::fail("accumulate_grads", "grad map size mismatch");
  for (size_t i = 0; i < into.size(); ++i) {
    if (!into[i].same_shape(from[i])) detail::fail("accumulate_grads", "grad shape mismatch");
    for (size_t j = 0; j < into[i].data.size(); ++j) into[i].data[j] += from[i].data[j];
  }
}

template <class Real>
double global_grad_norm(const GradMap<Real>& grads) {
  double acc = 0.0;
  for (const auto& g : grads)
    for (Real v : g.data) acc += static_cast<double>(v) * static_cast<double>(v);
  return std::sqrt(acc);
}

// Scale all gradients by clipnorm/norm when the global norm exceeds clipnorm.
// clipnorm <= 0 disables clipping. Returns the pre-clip norm.
template <class Real>
double clip_by_global_norm(GradMap<Real>& grads, double clipnorm) {
  double norm = global_grad_norm(grads);
  if (clipnorm > 0.0 && norm > clipnorm) {
    double s = clipnorm / norm;
    for (auto& g : grads)
      for (Real& v : g.data) v = static_cast<Real>(static_cast<double>(v) * s);
  }
  return norm;
}

template <class Real>
struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clipnorm = 1.0;
  int64_t step = 0;
  std::vector<TensorT<Real>> m, v;

  static AdamState init(const ParamStore<Real>& params, double lr, double clipnorm) {
    AdamState s;
    s.lr = lr;
    s.clipnorm = clipnorm;
    for (const auto& p : params.values) {
      s.m.push_back(TensorT<Real>::zeros(p.shape));
      s.v.push_back(TensorT<Real>::zeros(p.shape));
    }
    return s;
  }
};

// One Adam update with prior global-norm clipping. Update math runs in
// double; parameters and slots are stored back in Real. Non-finite gradients
// are an error naming the offending parameter.
template <class Real>
double adam_step(ParamStore<Real>& params, GradMap<Real> grads, AdamState<Real>& st) {
  if (grads.size() != params.size() || st.m.size() != params.size())
    detail::fail("adam_step", "state/grad size mismatch");
  for (size_t i = 0; i < grads.size(); ++i)
    if (!grads[i].all_finite())
      detail::fail("adam_step", "non-finite gradient for " + params.names[i]);
  double norm = clip_by_global_norm(grads, st.clipnorm);
  st.step += 1;
  double b1t = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
  double b2t = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
  for (size_t i = 0; i < params.size(); ++i) {
    auto& p = params.values[i];
    auto& m = st.m[i];
    auto& v = st.v[i];
    for (size_t j = 0; j < p.data.size(); ++j) {
      double g = static_cast<double>(grads[i].data[j]);
      double mj = st.beta1 * static_cast<double>(m.data[j]) + (1.0 - st.beta1) * g;
      double vj = st.beta2 * static_cast<double>(v.data[j]) + (1.0 - st.beta2) * g * g;
      m.data[j] = static_cast<Real>(mj);
      v.data[j] = static_cast<Real>(vj);
      double update = st.lr * (mj / b1t) / (std::sqrt(vj / b2t) + st.eps);
      p.data[j] = static_cast<Real>(static_cast<double>(p.data[j]) - update);
    }
  }
  return norm;
}

}  // namespace neucflow
