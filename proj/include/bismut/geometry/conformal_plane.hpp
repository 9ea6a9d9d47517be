#pragma once

#include <bismut/expression.hpp>
#include <bismut/geometry/manifold.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <string>
#include <vector>

namespace bismut {

/// R^2 with the metric g = e^{2 phi} (dx^2 + dy^2), in the global chart.
///
/// phi is a coordinate expression in x, y; its partial derivatives up to
/// third order are obtained symbolically.
class ConformalPlane final : public Manifold {
public:
  ConformalPlane(const std::string& phi, const std::map<std::string, double>& params = {})
      : Manifold(2, 2), source_(phi) {
    e_[0] = coordinate_expr(phi, 2, params);
    e_[1] = e_[0].diff(0);
    e_[2] = e_[0].diff(1);
    e_[3] = e_[1].diff(0);
    e_[4] = e_[1].diff(1);
    e_[5] = e_[2].diff(1);
    e_[6] = e_[3].diff(0);
    e_[7] = e_[3].diff(1);
    e_[8] = e_[4].diff(1);
    e_[9] = e_[5].diff(1);
  }

  ModelKind kind() const override { return ModelKind::conformal_plane; }
  const std::string& phi_source() const { return source_; }

  double phi(const Vec& p) const { return ev(0, p); }
  Vec grad_phi(const Vec& p) const { return make_vec({ev(1, p), ev(2, p)}); }
  /// phi_xx, phi_xy, phi_yy
  std::array<double, 3> hess_phi(const Vec& p) const { return {ev(3, p), ev(4, p), ev(5, p)}; }
  /// phi_xxx, phi_xxy, phi_xyy, phi_yyy
  std::array<double, 4> third_phi(const Vec& p) const {
    return {ev(6, p), ev(7, p), ev(8, p), ev(9, p)};
  }

  double gauss_curvature(const Vec& p) const {
    return -std::exp(-2.0 * phi(p)) * (ev(3, p) + ev(5, p));
  }
  /// Chart gradient of K.
  Vec grad_gauss_curvature(const Vec& p) const {
    const double lap = ev(3, p) + ev(5, p);
    const Vec g = grad_phi(p);
    const auto t = third_phi(p);
    const double s = -std::exp(-2.0 * phi(p));
    return make_vec({s * (t[0] + t[2] - 2.0 * g(0) * lap), s * (t[1] + t[3] - 2.0 * g(1) * lap)});
  }

  /// Christoffel contraction Gamma(a, b)^k in the chart.
  static Vec christoffel(const Vec& g, const Vec& a, const Vec& b) {
    return a * g.dot(b) + b * g.dot(a) - a.dot(b) * g;
  }

  Vec base_point() const override { return Vec::Zero(2); }
  double inner(const Vec& p, const Vec& a, const Vec& b) const override {
    return std::exp(2.0 * phi(p)) * a.dot(b);
  }
  double constraint_residual(const Vec&) const override { return 0.0; }
  Vec project_tangent(const Vec&, const Vec& v) const override { return v; }

  Vec exp_step(const Vec& p, const Vec& v) const override { return integrate(p, v, 1).first; }

  Vec exp_map(const Vec& p, const Vec& v) const override {
    const double len = norm(p, v);
    const int m = std::max(16, static_cast<int>(std::ceil(64.0 * len)));
    return integrate(p, v, m).first;
  }

  Mat transport(const Vec& p, const Vec& v, const Mat& frame) const override {
    Vec x = p;
    Mat f = frame;
    rk4_frame(x, v, f);
    return f;
  }

  void develop(Vec& p, Mat& frame, const Vec& v) const override {
    rk4_frame(p, v, frame);
    orthonormalize(p, frame);
  }

  /// Geodesic distance by Newton shooting on the exponential map.
  double distance(const Vec& p, const Vec& q) const override {
    Vec w = q - p;
    if (w.norm() == 0.0) return 0.0;
    constexpr int kSub = 96;
    auto resid = [&](const Vec& z) { return Vec(integrate(p, z, kSub).first - q); };
    Vec r = resid(w);
    for (int it = 0; it < 60 && r.norm() > 1e-13 * (1.0 + q.norm()); ++it) {
      Eigen::Matrix2d jac;
      const double step = 1e-7 * std::max(1.0, w.norm());
      for (int j = 0; j < 2; ++j) {
        Vec dp = w, dm = w;
        dp(j) += step;
        dm(j) -= step;
        jac.col(j) = (resid(dp) - resid(dm)) / (2.0 * step);
      }
      const Eigen::Vector2d delta = jac.partialPivLu().solve(-Eigen::Vector2d(r(0), r(1)));
      double t = 1.0;
      for (int ls = 0; ls < 30; ++ls, t *= 0.5) {
        Vec trial = w + t * Vec(delta);
        Vec rt = resid(trial);
        if (rt.norm() < r.norm()) {
          w = trial;
          r = rt;
          break;
        }
      }
      if (t < 1e-8) break;
    }
    return norm(p, w);
  }

  LocalCurvature curvature(const Vec& p, const Mat& frame) const override {
    const Vec gk = grad_gauss_curvature(p);
    return {2, gauss_curvature(p), frame.transpose() * gk, false};
  }

  Mat canonical_frame(const Vec& p) const override {
    return std::exp(-phi(p)) * Mat::Identity(2, 2);
  }

  Mat intrinsic_hessian(const Vec& p, const Mat& frame, const Vec& grad,
                        const Mat& hess) const override {
    Mat h = frame.transpose() * hess * frame;
    const Vec g = grad_phi(p);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) h(i, j) -= christoffel(g, frame.col(i), frame.col(j)).dot(grad);
    return h;
  }

private:
  double ev(int i, const Vec& p) const {
    const double xy[2] = {p(0), p(1)};
    return e_[i].eval(xy);
  }

  std::pair<Vec, Vec> integrate(const Vec& p, const Vec& v, int m) const {
    Vec x = p, u = v;
    const double dt = 1.0 / m;
    for (int s = 0; s < m; ++s) {
      const Vec k1x = u, k1u = -christoffel(grad_phi(x), u, u);
      const Vec x2 = x + 0.5 * dt * k1x, u2 = u + 0.5 * dt * k1u;
      const Vec k2x = u2, k2u = -christoffel(grad_phi(x2), u2, u2);
      const Vec x3 = x + 0.5 * dt * k2x, u3 = u + 0.5 * dt * k2u;
      const Vec k3x = u3, k3u = -christoffel(grad_phi(x3), u3, u3);
      const Vec x4 = x + dt * k3x, u4 = u + dt * k3u;
      const Vec k4x = u4, k4u = -christoffel(grad_phi(x4), u4, u4);
      x += dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
      u += dt / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
    }
    return {x, u};
  }

  // One RK4 step of unit length for (x, x', frame) with frame' = -Gamma(x', e).
  void rk4_frame(Vec& x, const Vec& v, Mat& f) const {
    auto rhs = [&](const Vec& xs, const Vec& us, const Mat& fs, Vec& dx, Vec& du, Mat& df) {
      const Vec g = grad_phi(xs);
      dx = us;
      du = -christoffel(g, us, us);
      df.resize(2, fs.cols());
      for (Eigen::Index j = 0; j < fs.cols(); ++j) df.col(j) = -christoffel(g, us, fs.col(j));
    };
    Vec k1x, k1u, k2x, k2u, k3x, k3u, k4x, k4u;
    Mat k1f, k2f, k3f, k4f;
    rhs(x, v, f, k1x, k1u, k1f);
    rhs(x + 0.5 * k1x, v + 0.5 * k1u, f + 0.5 * k1f, k2x, k2u, k2f);
    rhs(x + 0.5 * k2x, v + 0.5 * k2u, f + 0.5 * k2f, k3x, k3u, k3f);
    rhs(x + k3x, v + k3u, f + k3f, k4x, k4u, k4f);
    x += (k1x + 2.0 * k2x + 2.0 * k3x + k4x) / 6.0;
    f += (k1f + 2.0 * k2f + 2.0 * k3f + k4f) / 6.0;
  }

  std::string source_;
  std::array<Expr, 10> e_;
};

/// Geodesic polar coordinates around a center on a conformal plane.
///
/// Tabulates exp_c(s u(theta)) on a polar grid and inverts it by Newton's
/// method on a cubic Hermite (in s) by 4-point periodic Lagrange (in theta)
/// interpolant. Valid inside the injectivity radius of the center.
class GeodesicPolarTable {
public:
  GeodesicPolarTable(const ConformalPlane& m, const Vec& center, double s_max,
                     int n_theta = 720, int n_s = 513)
      : center_(center), s_max_(s_max), n_theta_(n_theta), n_s_(n_s) {
    ds_ = s_max / (n_s - 1);
    dth_ = 2.0 * std::numbers::pi / n_theta;
    scale_ = std::exp(-m.phi(center));
    pos_.resize(static_cast<std::size_t>(n_theta) * n_s);
    vel_.resize(pos_.size());
    for (int i = 0; i < n_theta; ++i) {
      const double th = i * dth_;
      Eigen::Vector2d x(center(0), center(1));
      Eigen::Vector2d u(scale_ * std::cos(th), scale_ * std::sin(th));
      store(i, 0, x, u);
      for (int j = 1; j < n_s; ++j) {
        step(m, x, u, ds_);
        store(i, j, x, u);
      }
    }
  }

  double s_max() const { return s_max_; }
  const Vec& center() const { return center_; }

  /// Point exp_c(s u(theta)) and its partials.
  void eval(double s, double th, Eigen::Vector2d& p, Eigen::Vector2d& p_s,
            Eigen::Vector2d& p_th) const {
    const double fi = std::floor(th / dth_);
    const double tau = th / dth_ - fi;
    const int i0 = static_cast<int>(fi);
    const double w[4] = {-tau * (tau - 1) * (tau - 2) / 6, (tau + 1) * (tau - 1) * (tau - 2) / 2,
                         -(tau + 1) * tau * (tau - 2) / 2, (tau + 1) * tau * (tau - 1) / 6};
    const double dw[4] = {-(3 * tau * tau - 6 * tau + 2) / 6, (3 * tau * tau - 4 * tau - 1) / 2,
                          -(3 * tau * tau - 2 * tau - 2) / 2, (3 * tau * tau - 1) / 6};
    p.setZero();
    p_s.setZero();
    p_th.setZero();
    for (int k = 0; k < 4; ++k) {
      Eigen::Vector2d h, hs;
      hermite(wrap(i0 - 1 + k), s, h, hs);
      p += w[k] * h;
      p_s += w[k] * hs;
      p_th += (dw[k] / dth_) * h;
    }
  }

  /// Geodesic distance from the center, or +inf if y lies outside the table.
  double distance(const ConformalPlane& m, const Vec& y) const {
    const Eigen::Vector2d d(y(0) - center_(0), y(1) - center_(1));
    const double chart = d.norm();
    double s = chart / scale_;
    if (s < 1e-4 * s_max_) {
      const Vec mid = 0.5 * (center_ + y);
      return std::exp(m.phi(mid)) * chart;
    }
    double th = std::atan2(d(1), d(0));
    if (th < 0) th += 2.0 * std::numbers::pi;
    const Eigen::Vector2d target(y(0), y(1));
    for (int it = 0; it < 40; ++it) {
      Eigen::Vector2d p, ps, pt;
      eval(s, th, p, ps, pt);
      Eigen::Matrix2d jac;
      jac.col(0) = ps;
      jac.col(1) = pt;
      Eigen::Vector2d delta = jac.partialPivLu().solve(target - p);
      if (!delta.allFinite()) return m.distance(center_, y);
      const double shrink = std::min({1.0, 0.25 * s_max_ / std::abs(delta(0)), 0.5 / std::abs(delta(1))});
      delta *= shrink;
      s += delta(0);
      th += delta(1);
      th = std::fmod(th, 2.0 * std::numbers::pi);
      if (th < 0) th += 2.0 * std::numbers::pi;
      if (s > s_max_ * 1.05) return std::numeric_limits<double>::infinity();
      if (s < 0) {
        s = -s;
        th = std::fmod(th + std::numbers::pi, 2.0 * std::numbers::pi);
      }
      if (std::abs(delta(0)) < 1e-12 * s_max_ && std::abs(delta(1)) < 1e-12) return s;
    }
    return m.distance(center_, y);
  }

private:
  int wrap(int i) const { return ((i % n_theta_) + n_theta_) % n_theta_; }

  void store(int i, int j, const Eigen::Vector2d& x, const Eigen::Vector2d& u) {
    pos_[static_cast<std::size_t>(i) * n_s_ + j] = x;
    vel_[static_cast<std::size_t>(i) * n_s_ + j] = u;
  }

  void hermite(int i, double s, Eigen::Vector2d& h, Eigen::Vector2d& hs) const {
    const double q = std::clamp(s / ds_, 0.0, static_cast<double>(n_s_ - 1));
    const int j = std::min(static_cast<int>(q), n_s_ - 2);
    const double t = s / ds_ - j;
    const std::size_t base = static_cast<std::size_t>(i) * n_s_ + j;
    const auto& p0 = pos_[base];
    const auto& p1 = pos_[base + 1];
    const auto& v0 = vel_[base];
    const auto& v1 = vel_[base + 1];
    const double t2 = t * t, t3 = t2 * t;
    h = (2 * t3 - 3 * t2 + 1) * p0 + (t3 - 2 * t2 + t) * ds_ * v0 + (-2 * t3 + 3 * t2) * p1 +
        (t3 - t2) * ds_ * v1;
    hs = ((6 * t2 - 6 * t) * p0 + (3 * t2 - 4 * t + 1) * ds_ * v0 + (-6 * t2 + 6 * t) * p1 +
          (3 * t2 - 2 * t) * ds_ * v1) /
         ds_;
  }

  static void step(const ConformalPlane& m, Eigen::Vector2d& x, Eigen::Vector2d& u, double dt) {
    auto acc = [&](const Eigen::Vector2d& xs, const Eigen::Vector2d& us) {
      const Vec g = m.grad_phi(make_vec({xs(0), xs(1)}));
      const Eigen::Vector2d gg(g(0), g(1));
      return Eigen::Vector2d(-(2.0 * us * gg.dot(us) - us.dot(us) * gg));
    };
    const Eigen::Vector2d k1x = u, k1u = acc(x, u);
    const Eigen::Vector2d k2x = u + 0.5 * dt * k1u, k2u = acc(x + 0.5 * dt * k1x, k2x);
    const Eigen::Vector2d k3x = u + 0.5 * dt * k2u, k3u = acc(x + 0.5 * dt * k2x, k3x);
    const Eigen::Vector2d k4x = u + dt * k3u, k4u = acc(x + dt * k3x, k4x);
    x += dt / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x);
    u += dt / 6.0 * (k1u + 2 * k2u + 2 * k3u + k4u);
  }

  Vec center_;
  double s_max_;
  int n_theta_;
  int n_s_;
  double ds_ = 0;
  double dth_ = 0;
  double scale_ = 1;
  std::vector<Eigen::Vector2d> pos_;
  std::vector<Eigen::Vector2d> vel_;
};

} // namespace bismut
