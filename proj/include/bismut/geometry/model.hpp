#pragma once

#include <bismut/geometry/conformal_plane.hpp>
#include <bismut/geometry/manifold.hpp>
#include <bismut/geometry/space_forms.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <numbers>
#include <string>

namespace bismut {

/// Shared immutable handle to one of the built-in manifolds.
class ManifoldModel {
public:
  static ManifoldModel euclidean(int n) { return ManifoldModel(std::make_shared<Euclidean>(n)); }
  static ManifoldModel sphere(int n, double kappa) {
    return ManifoldModel(std::make_shared<Sphere>(n, kappa));
  }
  static ManifoldModel hyperbolic(int n, double kappa) {
    return ManifoldModel(std::make_shared<Hyperbolic>(n, kappa));
  }
  static ManifoldModel conformal_plane(const std::string& phi,
                                       const std::map<std::string, double>& params = {}) {
    return ManifoldModel(std::make_shared<ConformalPlane>(phi, params));
  }

  const Manifold& operator*() const { return *m_; }
  const Manifold* operator->() const { return m_.get(); }
  ModelKind kind() const { return m_->kind(); }
  int dim() const { return m_->dim(); }

  /// Constant sectional curvature; NaN for conformal_plane.
  double constant_curvature() const {
    switch (kind()) {
      case ModelKind::euclidean: return 0.0;
      case ModelKind::sphere: return static_cast<const Sphere&>(*m_).kappa();
      case ModelKind::hyperbolic: return static_cast<const Hyperbolic&>(*m_).kappa();
      default: return std::numeric_limits<double>::quiet_NaN();
    }
  }
  const ConformalPlane* as_conformal() const {
    return kind() == ModelKind::conformal_plane ? static_cast<const ConformalPlane*>(m_.get())
                                                : nullptr;
  }

private:
  explicit ManifoldModel(std::shared_ptr<const Manifold> m) : m_(std::move(m)) {}
  std::shared_ptr<const Manifold> m_;
};

/// Curvature constants on a domain D, together with the distance from the
/// evaluation point to the boundary of D.
struct GeomBounds {
  int n = 2;
  double K0 = 0.0;
  double K1 = 0.0;
  double K2 = 0.0;
  double delta_x = 1.0;

  double K0_minus() const { return std::max(0.0, -K0); }
};

/// Geodesic ball B(center, radius) with exact distance from the center.
class BallDomain {
public:
  BallDomain(ManifoldModel model, Vec center, double radius)
      : model_(std::move(model)), center_(std::move(center)), radius_(radius) {
    if (!(radius > 0.0) || !std::isfinite(radius))
      throw ValidationError("ball radius must be positive and finite", "estimator.radius");
    if (center_.size() != model_->ambient_dim())
      throw ValidationError("point has wrong number of coordinates", "estimator.x");
    if (model_->constraint_residual(center_) > 1e-8)
      throw ValidationError("point is not on the manifold", "estimator.x");
    if (model_.kind() == ModelKind::sphere) {
      const double r = static_cast<const Sphere&>(*model_).radius();
      if (!(radius < std::numbers::pi * r))
        throw ValidationError("ball radius must be below the sphere's injectivity radius",
                              "estimator.radius");
    }
    frame_ = model_->canonical_frame(center_);
    if (const auto* cp = model_.as_conformal())
      table_ = std::make_shared<GeodesicPolarTable>(*cp, center_, 1.25 * radius);
  }

  /// The whole manifold seen from `center`: never exits, no distance work.
  static BallDomain whole(ManifoldModel model, Vec center) {
    return BallDomain(std::move(model), std::move(center), WholeTag{});
  }
  bool is_whole() const { return whole_; }

  const ManifoldModel& model() const { return model_; }
  const Vec& center() const { return center_; }
  double radius() const { return radius_; }
  /// Orthonormal frame at the center used to express tangent vectors.
  const Mat& center_frame() const { return frame_; }

  double distance_from_center(const Vec& y) const {
    if (whole_) return 0.0;
    if (table_) return table_->distance(*model_.as_conformal(), y);
    return model_->distance(center_, y);
  }
  double dist_to_boundary(const Vec& y) const {
    if (whole_) return std::numeric_limits<double>::infinity();
    return radius_ - distance_from_center(y);
  }
  bool contains(const Vec& y) const { return dist_to_boundary(y) > 0.0; }

  /// exp_center(sum_i w_i e_i) for w given in center-frame coordinates.
  Vec normal_point(const Vec& w) const {
    if (table_) {
      const double s = w.norm();
      if (s == 0.0) return center_;
      if (s <= table_->s_max()) {
        Eigen::Vector2d p, ps, pt;
        double th = std::atan2(w(1), w(0));
        if (th < 0) th += 2.0 * std::numbers::pi;
        table_->eval(s, th, p, ps, pt);
        return make_vec({p(0), p(1)});
      }
    }
    return model_->retract(model_->exp_map(center_, Vec(frame_ * w)));
  }

private:
  struct WholeTag {};
  BallDomain(ManifoldModel model, Vec center, WholeTag)
      : model_(std::move(model)), center_(std::move(center)),
        radius_(std::numeric_limits<double>::infinity()), whole_(true) {
    if (center_.size() != model_->ambient_dim())
      throw ValidationError("point has wrong number of coordinates", "estimator.x");
    frame_ = model_->canonical_frame(center_);
  }

  ManifoldModel model_;
  Vec center_;
  double radius_;
  bool whole_ = false;
  Mat frame_;
  std::shared_ptr<const GeodesicPolarTable> table_;
};

/// Curvature constants on B(center, radius), with delta_x = radius.
///
/// Space forms use closed forms. conformal_plane samples a square grid of
/// pitch radius/64 in normal coordinates over the ball and inflates the
/// extrema by 10%.
inline GeomBounds geom_bounds(const BallDomain& ball) {
  const auto& model = ball.model();
  const int n = model.dim();
  GeomBounds gb;
  gb.n = n;
  gb.delta_x = ball.radius();
  if (model.kind() != ModelKind::conformal_plane) {
    const double k = model.constant_curvature();
    gb.K0 = (n - 1) * k;
    gb.K1 = std::abs(k) * std::sqrt(n - 1.0);
    gb.K2 = 0.0;
    return gb;
  }
  const auto& cp = *model.as_conformal();
  const double r = ball.radius();
  const double pitch = r / 64.0;
  double kmin = std::numeric_limits<double>::infinity();
  double kabs = 0.0;
  double gmax = 0.0;
  for (int i = -64; i <= 64; ++i)
    for (int j = -64; j <= 64; ++j) {
      const Vec w = make_vec({i * pitch, j * pitch});
      if (w.norm() > r) continue;
      const Vec p = ball.normal_point(w);
      const double k = cp.gauss_curvature(p);
      const Vec gk = cp.grad_gauss_curvature(p);
      kmin = std::min(kmin, k);
      kabs = std::max(kabs, std::abs(k));
      gmax = std::max(gmax, std::exp(-cp.phi(p)) * gk.norm());
    }
  constexpr double inflate = 1.1;
  gb.K0 = kmin >= 0.0 ? kmin / inflate : kmin * inflate;
  gb.K1 = kabs * inflate;
  gb.K2 = gmax * inflate;
  return gb;
}

inline GeomBounds geom_bounds(const ManifoldModel& model, const Vec& center, double radius) {
  return geom_bounds(BallDomain(model, center, radius));
}

} // namespace bismut
