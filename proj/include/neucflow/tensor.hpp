#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace neucflow {

namespace detail {

inline std::string shape_str(const std::vector<int64_t>& s) {
  std::ostringstream os;
  os << "(";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ")";
  return os.str();
}

[[noreturn]] inline void fail(const std::string& op, const std::string& what) {
  throw std::invalid_argument(op + ": " + what);
}

}  // namespace detail

// A referenced file or directory is absent; the CLI maps this to its own
// exit code so scripts can tell bad paths from bad data.
struct MissingPathError : std::runtime_error {
  explicit MissingPathError(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {

[[noreturn]] inline void fail_missing(const std::string& op, const std::string& path) {
  throw MissingPathError(op + ": cannot open " + path);
}

}  // namespace detail

// Dense row-major tensor. Rank 1 tensors behave as columns of scalars for the
// segment ops and as flat vectors elsewhere; matmul requires rank 2.
template <class Real>
struct TensorT {
  std::vector<int64_t> shape;
  std::vector<Real> data;

  TensorT() = default;
  TensorT(std::vector<int64_t> s, std::vector<Real> d) : shape(std::move(s)), data(std::move(d)) {
    if (numel() != static_cast<int64_t>(data.size()))
      detail::fail("Tensor", "shape " + detail::shape_str(shape) + " does not match data size " +
                                 std::to_string(data.size()));
  }

  static TensorT zeros(std::vector<int64_t> s) {
    int64_t n = 1;
    for (int64_t d : s) {
      if (d < 0) detail::fail("Tensor::zeros", "negative dim in " + detail::shape_str(s));
      n *= d;
    }
    return TensorT(std::move(s), std::vector<Real>(static_cast<size_t>(n), Real(0)));
  }

  static TensorT full(std::vector<int64_t> s, Real v) {
    TensorT t = zeros(std::move(s));
    for (Real& x : t.data) x = v;
    return t;
  }

  static TensorT vec(std::vector<Real> d) {
    int64_t n = static_cast<int64_t>(d.size());
    return TensorT({n}, std::move(d));
  }

  static TensorT matrix(int64_t r, int64_t c, std::vector<Real> d) {
    return TensorT({r, c}, std::move(d));
  }

  int64_t numel() const {
    int64_t n = 1;
    for (int64_t d : shape) n *= d;
    return n;
  }

  int64_t rank() const { return static_cast<int64_t>(shape.size()); }

  // Leading dim; rank-1 tensors are treated as n rows of width 1.
  int64_t rows() const {
    if (shape.empty()) return 1;
    return shape[0];
  }

  int64_t cols() const {
    if (shape.size() <= 1) return shape.empty() ? 1 : 1;
    int64_t c = 1;
    for (size_t i = 1; i < shape.size(); ++i) c *= shape[i];
    return c;
  }

  Real& at(int64_t r, int64_t c) { return data[static_cast<size_t>(r * cols() + c)]; }
  Real at(int64_t r, int64_t c) const { return data[static_cast<size_t>(r * cols() + c)]; }
  Real& operator[](int64_t i) { return data[static_cast<size_t>(i)]; }
  Real operator[](int64_t i) const { return data[static_cast<size_t>(i)]; }

  bool same_shape(const TensorT& o) const { return shape == o.shape; }

  bool all_finite() const {
    for (Real x : data)
      if (!std::isfinite(static_cast<double>(x))) return false;
    return true;
  }
};

using Tensor = TensorT<float>;

template <class Real>
double max_abs_diff(const TensorT<Real>& a, const TensorT<Real>& b) {
  if (!a.same_shape(b)) detail::fail("max_abs_diff", "shape mismatch");
  double m = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i)
    m = std::max(m, std::abs(static_cast<double>(a.data[i]) - static_cast<double>(b.data[i])));
  return m;
}

}  // namespace neucflow
