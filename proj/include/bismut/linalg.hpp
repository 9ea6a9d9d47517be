#pragma once

#include <Eigen/Dense>

namespace bismut {

// Upper bound on the ambient dimension (embedding dimension n+1 for the
// space forms). Vectors and matrices are dynamically sized but stored inline,
// so the per-step kernels never touch the heap.
inline constexpr int kMaxAmbient = 8;
inline constexpr int kMaxDim = kMaxAmbient - 1;

using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxAmbient, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxAmbient, kMaxAmbient>;

inline Vec make_vec(std::initializer_list<double> xs) {
  Vec v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

} // namespace bismut
