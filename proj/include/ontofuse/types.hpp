#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>

namespace ontofuse {

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

// Training runs in double precision throughout; row-major storage so that
// row slices (embedding rows, checkpoint payloads) are contiguous.
using Scalar = double;
using Matd = Mat<Scalar>;
using Vecd = Vec<Scalar>;
using BoolGrid = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Additive pre-softmax bias for blocked attention pairs. Large enough that
// the shifted exponent hits the underflow floor below.
inline constexpr Scalar kNegBlock = -1e9;

// exp(z) with entries more than 708 below the row max flushed to exactly 0
// (Eigen's vectorized exp clamps instead of underflowing, which would leave
// blocked attention weights as ~1e-309 denormals and leak tiny gradients
// through them).
inline Scalar exp_floor(Scalar z) { return z < Scalar(-708) ? Scalar(0) : std::exp(z); }

// Row-wise softmax in place, shifted by the row max for stability.
template <typename Derived>
void softmax_rows_inplace(Eigen::MatrixBase<Derived>& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    auto row = m.row(i);
    const auto mx = row.maxCoeff();
    row = (row.array() - mx).unaryExpr([](Scalar z) { return exp_floor(z); });
    row /= row.sum();
  }
}

template <typename Derived>
Mat<typename Derived::Scalar> softmax_rows(const Eigen::MatrixBase<Derived>& m) {
  Mat<typename Derived::Scalar> out = m;
  softmax_rows_inplace(out);
  return out;
}

// Stable softmax of a single vector of logits.
template <typename Derived>
Vec<typename Derived::Scalar> softmax(const Eigen::MatrixBase<Derived>& v) {
  using S = typename Derived::Scalar;
  Vec<S> out = v;
  const S mx = out.maxCoeff();
  out = (out.array() - mx).unaryExpr([](S z) { return exp_floor(z); });
  out /= out.sum();
  return out;
}

inline Scalar gelu(Scalar x) { return Scalar(0.5) * x * (Scalar(1) + std::erf(x * M_SQRT1_2)); }

inline Scalar gelu_grad(Scalar x) {
  const Scalar cdf = Scalar(0.5) * (Scalar(1) + std::erf(x * M_SQRT1_2));
  const Scalar pdf = std::exp(Scalar(-0.5) * x * x) / std::sqrt(Scalar(2) * M_PI);
  return cdf + x * pdf;
}

}  // namespace ontofuse
