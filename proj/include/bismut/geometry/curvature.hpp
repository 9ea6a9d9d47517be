#pragma once

#include <bismut/geometry/model.hpp>

#include <cmath>
#include <vector>

namespace bismut {

/// Curvature tensors in the coordinates of an orthonormal frame.
///
/// riemann(i,j,k,l) = <R(e_i,e_j)e_k, e_l>, ricci(a,b) = sum_i riemann(i,a,b,i),
/// dstar_nabla(a,b,c) = <(d*R + nabla Ric)^#(e_a,e_b), e_c>.
struct CurvatureData {
  int n = 0;
  std::vector<double> riemann_data;
  Eigen::MatrixXd ricci;
  std::vector<double> dstar_nabla_data;

  double riemann(int i, int j, int k, int l) const {
    return riemann_data[((static_cast<std::size_t>(i) * n + j) * n + k) * n + l];
  }
  double dstar_nabla(int a, int b, int c) const {
    return dstar_nabla_data[(static_cast<std::size_t>(a) * n + b) * n + c];
  }
};

inline CurvatureData expand(const LocalCurvature& lc) {
  const int n = lc.dim;
  CurvatureData cd;
  cd.n = n;
  cd.riemann_data.assign(static_cast<std::size_t>(n) * n * n * n, 0.0);
  cd.dstar_nabla_data.assign(static_cast<std::size_t>(n) * n * n, 0.0);
  cd.ricci = Eigen::MatrixXd::Zero(n, n);
  Vec out(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        lc.riemann(Vec::Unit(n, i), Vec::Unit(n, j), Vec::Unit(n, k), out);
        for (int l = 0; l < n; ++l)
          cd.riemann_data[((static_cast<std::size_t>(i) * n + j) * n + k) * n + l] = out(l);
      }
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += cd.riemann(i, a, b, i);
      cd.ricci(a, b) = s;
      lc.dstar_nabla(Vec::Unit(n, a), Vec::Unit(n, b), out);
      for (int c = 0; c < n; ++c) cd.dstar_nabla_data[(static_cast<std::size_t>(a) * n + b) * n + c] = out(c);
    }
  return cd;
}

inline CurvatureData curvature_at(const ManifoldModel& model, const TangentFrame& frame) {
  const auto& m = *model;
  if (m.constraint_residual(frame.base_point) > 1e-8)
    throw ValidationError("point is not on the manifold");
  return expand(m.curvature(frame.base_point, frame.vectors));
}

/// Finite-difference cross-checks on a conformal plane (test oracles).
namespace fd {

/// (nabla_c Ric)_{ab} in chart coordinates, by central differences of the
/// chart Ricci tensor K e^{2 phi} delta_ab with Christoffel corrections.
inline std::vector<double> nabla_ricci_chart(const ConformalPlane& m, const Vec& p, double step) {
  auto ric_scalar = [&](const Vec& y) { return m.gauss_curvature(y) * std::exp(2.0 * m.phi(y)); };
  auto gamma = [&](int k, int i, int j) {
    const Vec g = m.grad_phi(p);
    return ConformalPlane::christoffel(g, Vec::Unit(2, i), Vec::Unit(2, j))(k);
  };
  const double r0 = ric_scalar(p);
  std::vector<double> out(8, 0.0);
  for (int c = 0; c < 2; ++c) {
    const Vec e = Vec::Unit(2, c) * step;
    const double dr = (ric_scalar(p + e) - ric_scalar(p - e)) / (2.0 * step);
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) {
        double v = a == b ? dr : 0.0;
        for (int d = 0; d < 2; ++d) {
          v -= gamma(d, c, a) * (d == b ? r0 : 0.0);
          v -= gamma(d, c, b) * (a == d ? r0 : 0.0);
        }
        out[(c * 2 + a) * 2 + b] = v;
      }
  }
  return out;
}

/// <(d*R + nabla Ric)^#(e_a, e_b), e_c> in the frame, from FD nabla Ric and
/// <d*R(v1)v2, v3> = (nabla_{v2} Ric)(v3, v1) - (nabla_{v3} Ric)(v1, v2).
inline std::vector<double> dstar_nabla_via_ricci(const ConformalPlane& m, const Vec& p,
                                                 const Mat& frame, double step = 1e-4) {
  const auto nr = nabla_ricci_chart(m, p, step);
  auto nabla = [&](int c, int a, int b) {
    double s = 0.0;
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        for (int k = 0; k < 2; ++k)
          s += frame(i, c) * frame(j, a) * frame(k, b) * nr[(i * 2 + j) * 2 + k];
    return s;
  };
  std::vector<double> out(8);
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      for (int c = 0; c < 2; ++c)
        out[(a * 2 + b) * 2 + c] = nabla(b, c, a) - nabla(c, a, b) + nabla(a, b, c);
  return out;
}

/// Same quantity from the definition d*R(v1)v2 = -tr nabla_. R(., v1)v2,
/// by central differences of the chart Riemann tensor.
inline std::vector<double> dstar_nabla_via_divergence(const ConformalPlane& m, const Vec& p,
                                                      const Mat& frame, double step = 1e-4) {
  // Chart R_{ijkl} = <R(d_i,d_j)d_k, d_l> = K e^{4 phi} (delta_jk delta_il - delta_ik delta_jl).
  auto rchart = [&](const Vec& y, int i, int j, int k, int l) {
    const double s = m.gauss_curvature(y) * std::exp(4.0 * m.phi(y));
    return s * ((j == k && i == l ? 1.0 : 0.0) - (i == k && j == l ? 1.0 : 0.0));
  };
  const Vec g = m.grad_phi(p);
  auto gamma = [&](int k, int i, int j) {
    return ConformalPlane::christoffel(g, Vec::Unit(2, i), Vec::Unit(2, j))(k);
  };
  // nabla_c R_{ijkl}
  auto nabla_r = [&](int c, int i, int j, int k, int l) {
    const Vec e = Vec::Unit(2, c) * step;
    double v = (rchart(p + e, i, j, k, l) - rchart(p - e, i, j, k, l)) / (2.0 * step);
    for (int q = 0; q < 2; ++q) {
      v -= gamma(q, c, i) * rchart(p, q, j, k, l);
      v -= gamma(q, c, j) * rchart(p, i, q, k, l);
      v -= gamma(q, c, k) * rchart(p, i, j, q, l);
      v -= gamma(q, c, l) * rchart(p, i, j, k, q);
    }
    return v;
  };
  const double ginv = std::exp(-2.0 * m.phi(p));
  // Chart components of d*R: D_{jkl} = -g^{ci} nabla_c R_{ijkl}.
  double dstar[2][2][2];
  for (int j = 0; j < 2; ++j)
    for (int k = 0; k < 2; ++k)
      for (int l = 0; l < 2; ++l) {
        double s = 0.0;
        for (int c = 0; c < 2; ++c) s += nabla_r(c, c, j, k, l);
        dstar[j][k][l] = -ginv * s;
      }
  const auto nr = nabla_ricci_chart(m, p, step);
  std::vector<double> out(8);
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      for (int c = 0; c < 2; ++c) {
        double s = 0.0;
        for (int i = 0; i < 2; ++i)
          for (int j = 0; j < 2; ++j)
            for (int k = 0; k < 2; ++k)
              s += frame(i, a) * frame(j, b) * frame(k, c) * (dstar[i][j][k] + nr[(i * 2 + j) * 2 + k]);
        out[(a * 2 + b) * 2 + c] = s;
      }
  return out;
}

} // namespace fd

} // namespace bismut
