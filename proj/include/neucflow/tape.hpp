#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <utility>
#include <vector>

#include "neucflow/tensor.hpp"

namespace neucflow {

// Reverse-mode tape over dense tensors. Values are stored in Real; gradient
// buffers and every reduction accumulate in double. Vars are handles into one
// tape; mixing tapes is an error. backward() replays recorded ops once, in
// reverse order, skipping ops that cannot influence the seeded node.
template <class Real>
class TapeT {
 public:
  struct Var {
    int32_t id = -1;
    uint32_t tape = 0;
    bool valid() const { return id >= 0; }
  };

  TapeT() : tape_id_(next_tape_id()) {}
  TapeT(const TapeT&) = delete;
  TapeT& operator=(const TapeT&) = delete;

  uint32_t id() const { return tape_id_; }
  size_t num_nodes() const { return nodes_.size(); }

  const TensorT<Real>& value(Var v) const { return nodes_[check(v, "value")].value; }

  // Gradient of the last backward pass w.r.t. v; zeros if no path reached it.
  TensorT<Real> grad(Var v) const {
    const Node& n = nodes_[check(v, "grad")];
    TensorT<Real> g = TensorT<Real>::zeros(n.value.shape);
    if (!n.grad.empty())
      for (size_t i = 0; i < n.grad.size(); ++i) g.data[i] = static_cast<Real>(n.grad[i]);
    return g;
  }

  Var input(TensorT<Real> v) {
    nodes_.push_back(Node{std::move(v), {}, nullptr});
    return Var{static_cast<int32_t>(nodes_.size() - 1), tape_id_};
  }

  Var constant(TensorT<Real> v) { return input(std::move(v)); }

  // ---- elementwise / broadcast ----

  Var add(Var a, Var b) { return binary_ew("add", a, b, [](double x, double y) { return x + y; }, 1.0, 1.0); }
  Var sub(Var a, Var b) { return binary_ew("sub", a, b, [](double x, double y) { return x - y; }, 1.0, -1.0); }

  Var mul(Var a, Var b) {
    int ia = check(a, "mul"), ib = check(b, "mul");
    const auto& va = nodes_[ia].value;
    const auto& vb = nodes_[ib].value;
    if (!va.same_shape(vb))
      detail::fail("mul", "shape mismatch " + detail::shape_str(va.shape) + " vs " + detail::shape_str(vb.shape));
    TensorT<Real> out = TensorT<Real>::zeros(va.shape);
    for (size_t i = 0; i < out.data.size(); ++i)
      out.data[i] = static_cast<Real>(static_cast<double>(va.data[i]) * static_cast<double>(vb.data[i]));
    int io = push(std::move(out));
    set_back(io, [io, ia, ib](TapeT& t) {
      const auto& go = t.nodes_[io].grad;
      const auto& va2 = t.nodes_[ia].value;
      const auto& vb2 = t.nodes_[ib].value;
      auto& ga = t.grad_buf(ia);
      auto& gb = t.grad_buf(ib);
      for (size_t i = 0; i < go.size(); ++i) {
        ga[i] += go[i] * static_cast<double>(vb2.data[i]);
        gb[i] += go[i] * static_cast<double>(va2.data[i]);
      }
    });
    return mk(io);
  }

  Var scale(Var x, double c) {
    int ix = check(x, "scale");
    const auto& vx = nodes_[ix].value;
    TensorT<Real> out = TensorT<Real>::zeros(vx.shape);
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] = static_cast<Real>(static_cast<double>(vx.data[i]) * c);
    int io = push(std::move(out));
    set_back(io, [ix, io, c](TapeT& t) {
      auto& gx = t.grad_buf(ix);
      const auto& go = t.nodes_[io].grad;
      for (size_t i = 0; i < go.size(); ++i) gx[i] += go[i] * c;
    });
    return mk(io);
  }

  Var add_const(Var x, double c) {
    int ix = check(x, "add_const");
    const auto& vx = nodes_[ix].value;
    TensorT<Real> out = TensorT<Real>::zeros(vx.shape);
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] = static_cast<Real>(static_cast<double>(vx.data[i]) + c);
    int io = push(std::move(out));
    set_back(io, [ix, io](TapeT& t) {
      auto& gx = t.grad_buf(ix);
      const auto& go = t.nodes_[io].grad;
      for (size_t i = 0; i < go.size(); ++i) gx[i] += go[i];
    });
    return mk(io);
  }

  Var leaky_relu(Var x, double slope) {
    int ix = check(x, "leaky_relu");
    const auto& vx = nodes_[ix].value;
    TensorT<Real> out = TensorT<Real>::zeros(vx.shape);
    for (size_t i = 0; i < out.data.size(); ++i) {
      double v = static_cast<double>(vx.data[i]);
      out.data[i] = static_cast<Real>(v >= 0.0 ? v : slope * v);
    }
    int io = push(std::move(out));
    set_back(io, [ix, io, slope](TapeT& t) {
      auto& gx = t.grad_buf(ix);
      const auto& go = t.nodes_[io].grad;
      const auto& vx2 = t.nodes_[ix].value;
      for (size_t i = 0; i < go.size(); ++i)
        gx[i] += go[i] * (static_cast<double>(vx2.data[i]) >= 0.0 ? 1.0 : slope);
    });
    return mk(io);
  }

  Var tanh_(Var x) {
    int ix = check(x, "tanh");
    const auto& vx = nodes_[ix].value;
    TensorT<Real> out = TensorT<Real>::zeros(vx.shape);
    for (size_t i = 0; i < out.data.size(); ++i)
      out.data[i] = static_cast<Real>(std::tanh(static_cast<double>(vx.data[i])));
    int io = push(std::move(out));
    set_back(io, [io, ix](TapeT& t) {
      auto& gx = t.grad_buf(ix);
      const auto& go = t.nodes_[io].grad;
      const auto& vy = t.nodes_[io].value;
      for (size_t i = 0; i < go.size(); ++i) {
        double y = static_cast<double>(vy.data[i]);
        gx[i] += go[i] * (1.0 - y * y);
      }
    });
    return mk(io);
  }

  // natural log; caller guarantees strictly positive input (add an epsilon).
  Var log_(Var x) {
    int ix = check(x, "log");
    const auto& vx = nodes_[ix].value;
    TensorT<Real> out = TensorT<Real>::zeros(vx.shape);
    for (size_t i = 0; i < out.data.size(); ++i) {
      double v = static_cast<double>(vx.data[i]);
      if (!(v > 0.0)) detail::fail("log", "non-positive input " + std::to_string(v));
      out.data[i] = static_cast<Real>(std::log(v));
    }
    int io = push(std::move(out));
    set_back(io, [io, ix](TapeT& t) {
      auto& gx = t.grad_buf(ix);
      const auto& go = t.nodes_[io].grad;
      const auto& vx2 = t.nodes_[ix].value;
      for (size_t i = 0; i < go.size(); ++i) gx[i] += go[i] / static_cast<double>(vx2.data[i]);
    });
    return mk(io);
  }

  // ---- linear algebra ----

  Var matmul(Var a, Var b) {
    int ia = check(a, "matmul"), ib = check(b, "matmul");
    const auto& va = nodes_[ia].value;
    const auto& vb = nodes_[ib].value;
    if (va.rank() != 2 || vb.rank() != 2)
      detail::fail("matmul", "rank-2 operands required, got " + detail::shape_str(va.shape) + " x " + detail::shape_str(vb.shape));
    int64_t m = va.shape[0], k = va.shape[1], k2 = vb.shape[0], n = vb.shape[1];
    if (k != k2)
      detail::fail("matmul", "inner dims differ: " + detail::shape_str(va.shape) + " x " + detail::shape_str(vb.shape));
    TensorT<Real> out = TensorT<Real>::zeros({m, n});
    for (int64_t i = 0; i < m; ++i)
      for (int64_t j = 0; j < n; ++j) {
        double acc = 0.0;
        for (int64_t p = 0; p < k; ++p)
          acc += static_cast<double>(va.data[i * k + p]) * static_cast<double>(vb.data[p * n + j]);
        out.data[i * n + j] = static_cast<Real>(acc);
      }
    int io = push(std::move(out));
    set_back(io, [io, ia, ib, m, k, n](TapeT& t) {
      const auto& go = t.nodes_[io].grad;
      const auto& va2 = t.nodes_[ia].value;
      const auto& vb2 = t.nodes_[ib].value;
      auto& ga = t.grad_buf(ia);
      auto& gb = t.grad_buf(ib);
      for (int64_t i = 0; i < m; ++i)
        for (int64_t p = 0; p < k; ++p) {
          double acc = 0.0;
          for (int64_t j = 0; j < n; ++j) acc += go[i * n + j] * static_cast<double>(vb2.data[p * n + j]);
          ga[i * k + p] += acc;
        }
      for (int64_t p = 0; p < k; ++p)
        for (int64_t j = 0; j < n; ++j) {
          double acc = 0.0;
          for (int64_t i = 0; i < m; ++i) acc += static_cast<double>(va2.data[i * k + p]) * go[i * n + j];
          gb[p * n + j] += acc;
        }
    });
    return mk(io);
  }

  // x (m,n) + bias (n) broadcast over rows
  Var add_row_bias(Var x, Var b) {
    int ix = check(x, "add_row_bias"), ib = check(b, "add_row_bias");
    const auto& vx = nodes_[ix].value;
    const auto& vb = nodes_[ib].value;
    int64_t m = vx.rows(), n = vx.cols();
    if (vb.numel() != n)
      detail::fail("add_row_bias", "bias size " + std::to_string(vb.numel()) + " vs cols " + std::to_string(n));
    TensorT<Real> out = vx;
    for (int64_t i = 0; i < m; ++i)
      for (int64_t j = 0; j < n; ++j) out.data[i * n + j] = static_cast<Real>(static_cast<double>(out.data[i * n + j]) + static_cast<double>(vb.data[j]));
    int io = push(std::move(out));
    set_back(io, [io, ix, ib, m, n](TapeT& t) {
      const auto& go = t.nodes_[io].grad;
      auto& gx = t.grad_buf(ix);
      auto& gb = t.grad_buf(ib);
      for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < n; ++j) {
          gx[i * n + j] += go[i * n + j];
          gb[j] += go[i * n + j];
        }
    });
    return mk(io);
  }

  // repeat a length-n row m times -> (m,n)
  Var tile_rows(Var row, int64_t m) {
    int ir = check(row, "tile_rows");
    const auto& vr = nodes_[ir].value;
    int64_t n = vr.numel();
    if (vr.rank() == 2 && vr.shape[0] != 1) detail::fail("tile_rows", "expects a single row");
    if (m < 0) detail::fail("tile_rows", "negative count");
    TensorT<Real> out = TensorT<Real>::zeros({m, n});
    for (int64_t i = 0; i < m; ++i)
      for (int64_t j = 0; j < n; ++j) out.data[i * n + j] = vr.data[j];
    int io = push(std::move(out));
    set_back(io, [io, ir, m, n](TapeT& t) {
      const auto& go = t.nodes_[io].grad;
      auto& gr = t.grad_buf(ir);
      for (int64_t j = 0; j < n; ++j) {
        double acc = 0.0;
        for (int64_t i = 0; i < m; ++i) acc += go[i * n + j];
        gr[j] += acc;
      }
    });
    return mk(io);
  }

  Var concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) detail::fail("concat_cols", "no inputs");
    std::vector<int> ids;
    int64_t m = -1, total = 0;
    for (Var p : parts) {
      int ip = check(p, "concat_cols");
      const auto& v = nodes_[ip].value;
      if (v.rank() != 2) detail::fail("concat_cols", "rank-2 inputs required");
      if (m < 0) m = v.shape[0];
      if (v.shape[0] != m) detail::fail("concat_cols", "row counts differ");
      total += v.shape[1];
      ids.push_back(ip);
    }
    TensorT<Real> out = TensorT<Real>::zeros({m, total});
    int64_t off = 0;
    for (int ip : ids) {
      const auto& v = nodes_[ip].value;
      int64_t c = v.shape[1];
      for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < c; ++j) out.data[i * total + off + j] = v.data[i * c + j];
      off += c;
    }
    int io = push(std::move(out));
    auto idsp = std::make_shared<const std::vector<int>>(std::move(ids));
    set_back(io, [io, idsp, m, total](TapeT& t) {
      const auto& go = t.nodes_[io].grad;
      int64_t off2 = 0;
      for (int ip : *idsp) {
        const auto& v = t.nodes_[ip].value;
        int64_t c = v.shape[1];
        auto& gp = t.grad_buf(ip);
        for (int64_t i = 0; i < m; ++i)
          for (int64_t j = 0; j < c; ++j) gp[i * c + j] += go[i * total + off2 + j];
        off2 += c;
      }
    });
    return mk(io);
  }

  // ---- gather / scatter ----

  Var gather_rows(Var x, std::vector<int64_t> ids) {
    int ix = check(x, "gather_rows");
    const auto& vx = nodes_[ix].value;
    if (vx.rank() != 2) detail::fail("gather_rows", "rank-2 input required");
    int64_t rows = vx.shape[0], c = vx.shape[1];
    int64_t m = static_cast<int64_t>(ids.size());
    TensorT<Real> out = TensorT<Real>::zeros({m, c});
    for (int64_t i = 0; i < m; ++i) {
      int64_t r = ids[i];
      if (r < 0 || r >= rows)
        detail::fail("gather_rows", "row index " + std::to_string(r) + " out of [0," + std::to_string(rows) + ")");
      for (int64_t j = 0; j < c; ++j) out.data[i * c + j] = vx.data[r * c + j];
    }
    int io = push(std::move(out));
    auto idsp = std::make_shared<const std::vector<int64_t>>(std::move(ids));
    set_back(io, [io, ix, idsp, c](TapeT& t) {
      const auto& go = t.nodes_[io].grad;
      auto& gx = t.grad_buf(ix);
      const auto& v = *idsp;
      for (size_t i = 0; i < v.size(); ++i)
        for (int64_t j = 0; j < c; ++j) gx[v[i] * c + j] += go[static_cast<int64_t>(i) * c + j];
    });
    return mk(io);
  }

  Var gather_values(Var x, std::vector<int64_t> ids) {
    int ix = check(x, "gather_values");
    const auto& vx = nodes_[ix].value;
    int64_t n = vx.numel();
    int64_t m = static_cast<int64_t>(ids.size());
    TensorT<Real> out = TensorT<Real>::zeros({m});
    for (int64_t i = 0; i < m; ++i) {
      int64_t r = ids[i];
      if (r < 0 || r >= n)
        detail::fail("gather_values", "index " + std::to_string(r) + " out of [0," + std::to_string(n) + ")");
      out.data[i] = vx.data[r];
    }
    int io = push(std::move(out));
    auto idsp = std::make_shared<const std::vector<int64_t>>(std::move(ids));
    set_back(io, [io, ix, idsp](TapeT& t) {
      const auto& go = t.nodes_[io].grad;
      auto& gx = t.grad_buf(ix);
      const auto& v = *idsp;
      for (size_t i = 0; i < v.size(); ++i) gx[v[i]] += go[i];
    });
    return mk(io);
  }

  // place x[i] at out[pos[i]] in a zero vector of length size; pos distinct
  Var scatter_values(Var x, std::vector<int64_t> pos, int64_t size) {
    int ix = check(x, "scatter_values");
    const auto& vx = nodes_[ix].value;
    if (static_cast<int64_t>(pos.size()) != vx.numel())
      detail::fail("scatter_values", "positions size mismatch");
    TensorT<Real> out = TensorT<Real>::zeros({size});
    std::vector<char> hit(static_cast<size_t>(size), 0);
    for (size_t i = 0; i < pos.size(); ++i) {
      int64_t p = pos[i];
      if (p < 0 || p >= size)
        detail::fail("scatter_values", "position " + std::to_string(p) + " out of [0," + std::to_string(size) + ")");
      if (hit[p]) detail::fail("scatter_values", "duplicate position " + std::to_string(p));
      hit[p] = 1;
      out.data[p] = vx.data[i];
    }
    int io = push(std::move(out));
    auto posp = std::make_shared<const std::vector<int64_t>>(std::move(pos));
    set_back(io, [io, ix, posp](TapeT& t) {
      const auto& go = t.nodes_[io].grad;
      auto& gx = t.grad_buf(ix);
      const auto& v = *posp;
      for (size_t i = 0; i < v.size(); ++i) gx[i] += go[v[i]];
    });
    return mk(io);
  }

  // append zero rows up to new_rows
  Var pad_rows(Var x, int64_t new_rows) {
    int ix = check(x, "pad_rows");
    const auto& vx = nodes_[ix].value;
    if (vx.rank() != 2) detail::fail("pad_rows", "rank-2 input required");
    int64_t m = vx.shape[0], c = vx.shape[1];
    if (new_rows < m) detail::fail("pad_rows", "cannot shrink");
    TensorT<Real> out = TensorT<Real>::zeros({new_rows, c});
    std::copy(vx.data.begin(), vx.data.end(), out.data.begin());
    int io = push(std::move(out));
    set_back(io, [io, ix, m, c](TapeT& t) {
      const auto& go = t.nodes_[io].grad;
      auto& gx = t.grad_buf(ix);
      for (int64_t i = 0; i < m * c; ++i) gx[i] += go[i];
    });
    return mk(io);
  }

  // out[i,:] = x[i,:] * w[i]
  Var rowwise_scale(Var x, Var w) {
    int ix = check(x, "rowwise_scale"), iw = check(w, "rowwise_scale");
    const auto& vx = nodes_[ix].value;
    const auto& vw = nodes_[iw].value;
    int64_t m = vx.rows(), c = vx.cols();
    if (vw.numel() != m)
      detail::fail("rowwise_scale", "weights size " + std::to_string(vw.numel()) + " vs rows " + std::to_string(m));
    TensorT<Real> out = TensorT<Real>::zeros(vx.shape);
    for (int64_t i = 0; i < m; ++i)
      for (int64_t j = 0; j < c; ++j)
        out.data[i * c + j] = static_cast<Real>(static_cast<double>(vx.data[i * c + j]) * static_cast<double>(vw.data[i]));
    int io = push(std::move(out));
    set_back(io, [io, ix, iw, m, c](TapeT& t) {
      const auto& go = t.nodes_[io].grad;
      const auto& vx2 = t.nodes_[ix].value;
      const auto& vw2 = t.nodes_[iw].value;
      auto& gx = t.grad_buf(ix);
      auto& gw = t.grad_buf(iw);
      for (int64_t i = 0; i < m; ++i) {
        double acc = 0.0;
        for (int64_t j = 0; j < c; ++j) {
          gx[i * c + j] += go[i * c + j] * static_cast<double>(vw2.data[i]);
          acc += go[i * c + j] * static_cast<double>(vx2.data[i * c + j]);
        }
        gw[i] += acc;
      }
    });
    return mk(io);
  }

  // out[i] = sum_j a[i,j] * b[i,j]
  Var row_dot(Var a, Var b) {
    int ia = check(a, "row_dot"), ib = check(b, "row_dot");
    const auto& va = nodes_[ia].value;
    const auto& vb = nodes_[ib].value;
    if (!va.same_shape(vb)) detail::fail("row_dot", "shape mismatch");
    int64_t m = va.rows(), c = va.cols();
    TensorT<Real> out = TensorT<Real>::zeros({m});
    for (int64_t i = 0; i < m; ++i) {
      double acc = 0.0;
      for (int64_t j = 0; j < c; ++j)
        acc += static_cast<double>(va.data[i * c + j]) * static_cast<double>(vb.data[i * c + j]);
      out.data[i] = static_cast<Real>(acc);
    }
    int io = push(std::move(out));
    set_back(io, [io, ia, ib, m, c](TapeT& t) {
      const auto& go = t.nodes_[io].grad;
      const auto& va2 = t.nodes_[ia].value;
      const auto& vb2 = t.nodes_[ib].value;
      auto& ga = t.grad_buf(ia);
      auto& gb = t.grad_buf(ib);
      for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < c; ++j) {
          ga[i * c + j] += go[i] * static_cast<double>(vb2.data[i * c + j]);
          gb[i * c + j] += go[i] * static_cast<double>(va2.data[i * c + j]);
        }
    });
    return mk(io);
  }

  // ---- segment ops (seg maps each input row to a segment id) ----

  // out[s,:] = sum_{i: seg[i]=s} x[i,:], optionally scaled by 1/sqrt(|s|).
  // Segments with no members yield zero rows.
  Var segment_sum(Var x, std::vector<int64_t> seg, int64_t n_segments, bool inv_sqrt_scale) {
    int ix = check(x, "segment_sum");
    const auto& vx = nodes_[ix].value;
    int64_t m = vx.rows(), c = vx.cols();
    if (static_cast<int64_t>(seg.size()) != m) detail::fail("segment_sum", "segment ids size mismatch");
    std::vector<int64_t> count(static_cast<size_t>(n_segments), 0);
    for (int64_t s : seg) {
      if (s < 0 || s >= n_segments) detail::fail("segment_sum", "segment id out of range");
      ++count[s];
    }
    std::vector<double> acc(static_cast<size_t>(n_segments * c), 0.0);
    for (int64_t i = 0; i < m; ++i)
      for (int64_t j = 0; j < c; ++j) acc[seg[i] * c + j] += static_cast<double>(vx.data[i * c + j]);
    std::vector<double> scl(static_cast<size_t>(n_segments), 1.0);
    if (inv_sqrt_scale)
      for (int64_t s = 0; s < n_segments; ++s)
        if (count[s] > 0) scl[s] = 1.0 / std::sqrt(static_cast<double>(count[s]));
    TensorT<Real> out = vx.rank() == 1 ? TensorT<Real>::zeros({n_segments})
                                       : TensorT<Real>::zeros({n_segments, c});
    for (int64_t s = 0; s < n_segments; ++s)
      for (int64_t j = 0; j < c; ++j) out.data[s * c + j] = static_cast<Real>(acc[s * c + j] * scl[s]);
    int io = push(std::move(out));
    auto segp = std::make_shared<const std::vector<int64_t>>(std::move(seg));
    auto sclp = std::make_shared<const std::vector<double>>(std::move(scl));
    set_back(io, [io, ix, segp, sclp, c](TapeT& t) {
      const auto& go = t.nodes_[io].grad;
      auto& gx = t.grad_buf(ix);
      const auto& sg = *segp;
      const auto& sc = *sclp;
      for (size_t i = 0; i < sg.size(); ++i)
        for (int64_t j = 0; j < c; ++j) gx[static_cast<int64_t>(i) * c + j] += go[sg[i] * c + j] * sc[sg[i]];
    });
    return mk(io);
  }

  // per-segment softmax over a vector of logits (max-subtracted, double sums)
  Var segment_softmax(Var logits, std::vector<int64_t> seg, int64_t n_segments) {
    int ix = check(logits, "segment_softmax");
    const auto& vx = nodes_[ix].value;
    if (vx.rank() != 1) detail::fail("segment_softmax", "rank-1 logits required");
    int64_t m = vx.numel();
    if (static_cast<int64_t>(seg.size()) != m) detail::fail("segment_softmax", "segment ids size mismatch");
    std::vector<double> mx(static_cast<size_t>(n_segments), -std::numeric_limits<double>::infinity());
    for (int64_t i = 0; i < m; ++i) {
      if (seg[i] < 0 || seg[i] >= n_segments) detail::fail("segment_softmax", "segment id out of range");
      mx[seg[i]] = std::max(mx[seg[i]], static_cast<double>(vx.data[i]));
    }
    std::vector<double> ex(static_cast<size_t>(m), 0.0), sum(static_cast<size_t>(n_segments), 0.0);
    for (int64_t i = 0; i < m; ++i) {
      ex[i] = std::exp(static_cast<double>(vx.data[i]) - mx[seg[i]]);
      sum[seg[i]] += ex[i];
    }
    TensorT<Real> out = TensorT<Real>::zeros({m});
    for (int64_t i = 0; i < m; ++i) out.data[i] = static_cast<Real>(ex[i] / sum[seg[i]]);
    int io = push(std::move(out));
    auto segp = std::make_shared<const std::vector<int64_t>>(std::move(seg));
    set_back(io, [io, ix, segp, n_segments](TapeT& t) {
      const auto& go = t.nodes_[io].grad;
      const auto& vy = t.nodes_[io].value;
      auto& gx = t.grad_buf(ix);
      const auto& sg = *segp;
      std::vector<double> dot(static_cast<size_t>(n_segments), 0.0);
      for (size_t i = 0; i < sg.size(); ++i) dot[sg[i]] += go[i] * static_cast<double>(vy.data[i]);
      for (size_t i = 0; i < sg.size(); ++i)
        gx[i] += static_cast<double>(vy.data[i]) * (go[i] - dot[sg[i]]);
    });
    return mk(io);
  }

  // ---- reductions / scalars (scalars are shape {1}) ----

  Var reduce_sum(Var x) {
    int ix = check(x, "reduce_sum");
    const auto& vx = nodes_[ix].value;
    double acc = 0.0;
    for (Real v : vx.data) acc += static_cast<double>(v);
    int io = push(TensorT<Real>({1}, {static_cast<Real>(acc)}));
    set_back(io, [io, ix](TapeT& t) {
      const auto& go = t.nodes_[io].grad;
      auto& gx = t.grad_buf(ix);
      for (size_t i = 0; i < gx.size(); ++i) gx[i] += go[0];
    });
    return mk(io);
  }

  Var reduce_mean(Var x) {
    int64_t n = nodes_[check(x, "reduce_mean")].value.numel();
    if (n == 0) detail::fail("reduce_mean", "empty input");
    return scale(reduce_sum(x), 1.0 / static_cast<double>(n));
  }

  // out = x / s with scalar s (shape {1})
  Var div_by_scalar(Var x, Var s) {
    int ix = check(x, "div_by_scalar"), is = check(s, "div_by_scalar");
    const auto& vx = nodes_[ix].value;
    const auto& vs = nodes_[is].value;
    if (vs.numel() != 1) detail::fail("div_by_scalar", "scalar divisor required");
    double sv = static_cast<double>(vs.data[0]);
    if (sv == 0.0) detail::fail("div_by_scalar", "division by zero");
    TensorT<Real> out = TensorT<Real>::zeros(vx.shape);
    for (size_t i = 0; i < out.data.size(); ++i)
      out.data[i] = static_cast<Real>(static_cast<double>(vx.data[i]) / sv);
    int io = push(std::move(out));
    set_back(io, [io, ix, is, sv](TapeT& t) {
      const auto& go = t.nodes_[io].grad;
      const auto& vy = t.nodes_[io].value;
      auto& gx = t.grad_buf(ix);
      auto& gs = t.grad_buf(is);
      double acc = 0.0;
      for (size_t i = 0; i < go.size(); ++i) {
        gx[i] += go[i] / sv;
        acc += go[i] * static_cast<double>(vy.data[i]);
      }
      gs[0] -= acc / sv;
    });
    return mk(io);
  }

  Var stack_scalars(const std::vector<Var>& xs) {
    std::vector<int> ids;
    std::vector<Real> vals;
    for (Var v : xs) {
      int iv = check(v, "stack_scalars");
      if (nodes_[iv].value.numel() != 1) detail::fail("stack_scalars", "scalar inputs required");
      ids.push_back(iv);
      vals.push_back(nodes_[iv].value.data[0]);
    }
    const int64_t n = static_cast<int64_t>(vals.size());
    int io = push(TensorT<Real>({n}, std::move(vals)));
    auto idsp = std::make_shared<const std::vector<int>>(std::move(ids));
    set_back(io, [io, idsp](TapeT& t) {
      const auto& go = t.nodes_[io].grad;
      const auto& v = *idsp;
      for (size_t i = 0; i < v.size(); ++i) t.grad_buf(v[i])[0] += go[i];
    });
    return mk(io);
  }

  // ---- backward ----

  void backward(Var loss) {
    int il = check(loss, "backward");
    if (nodes_[il].value.numel() != 1) detail::fail("backward", "scalar loss required");
    backward_seeded(loss, TensorT<Real>({1}, {Real(1)}));
  }

  // Seed an arbitrary node with an upstream gradient and replay the tape.
  void backward_seeded(Var node, const TensorT<Real>& seed) {
    int in = check(node, "backward_seeded");
    if (!nodes_[in].value.same_shape(seed)) detail::fail("backward_seeded", "seed shape mismatch");
    for (Node& n : nodes_) n.grad.clear();
    auto& g = grad_buf(in);
    for (size_t i = 0; i < seed.data.size(); ++i) g[i] = static_cast<double>(seed.data[i]);
    for (int i = in; i >= 0; --i)
      if (nodes_[i].back && !nodes_[i].grad.empty()) nodes_[i].back(*this);
  }

 private:
  struct Node {
    TensorT<Real> value;
    std::vector<double> grad;  // empty until touched by backward
    std::function<void(TapeT&)> back;
  };

  static uint32_t next_tape_id() {
    static std::atomic<uint32_t> counter{1};
    return counter.fetch_add(1);
  }

  int check(Var v, const char* op) const {
    if (!v.valid() || v.tape != tape_id_ || v.id >= static_cast<int32_t>(nodes_.size()))
      detail::fail(op, "variable does not belong to this tape");
    return v.id;
  }

  int push(TensorT<Real> value) {
    nodes_.push_back(Node{std::move(value), {}, nullptr});
    return static_cast<int>(nodes_.size() - 1);
  }

  void set_back(int id, std::function<void(TapeT&)> fn) { nodes_[id].back = std::move(fn); }

  Var mk(int id) const { return Var{static_cast<int32_t>(id), tape_id_}; }

  std::vector<double>& grad_buf(int id) {
    Node& n = nodes_[id];
    if (n.grad.empty()) n.grad.assign(static_cast<size_t>(n.value.numel()), 0.0);
    return n.grad;
  }

  template <class F>
  Var binary_ew(const char* op, Var a, Var b, F fwd, double da, double db) {
    int ia = check(a, op), ib = check(b, op);
    const auto& va = nodes_[ia].value;
    const auto& vb = nodes_[ib].value;
    if (!va.same_shape(vb))
      detail::fail(op, "shape mismatch " + detail::shape_str(va.shape) + " vs " + detail::shape_str(vb.shape));
    TensorT<Real> out = TensorT<Real>::zeros(va.shape);
    for (size_t i = 0; i < out.data.size(); ++i)
      out.data[i] = static_cast<Real>(fwd(static_cast<double>(va.data[i]), static_cast<double>(vb.data[i])));
    int io = push(std::move(out));
    set_back(io, [io, ia, ib, da, db](TapeT& t) {
      const auto& go = t.nodes_[io].grad;
      auto& ga = t.grad_buf(ia);
      auto& gb = t.grad_buf(ib);
      for (size_t i = 0; i < go.size(); ++i) {
        ga[i] += go[i] * da;
        gb[i] += go[i] * db;
      }
    });
    return mk(io);
  }

  std::vector<Node> nodes_;
  uint32_t tape_id_;
};

using Tape = TapeT<float>;

}  // namespace neucflow
