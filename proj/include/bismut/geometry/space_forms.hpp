#pragma once

#include <bismut/geometry/manifold.hpp>

#include <cmath>
#include <limits>

namespace bismut {

/// Flat R^n.
class Euclidean final : public Manifold {
public:
  explicit Euclidean(int n) : Manifold(n, n) {}

  ModelKind kind() const override { return ModelKind::euclidean; }
  Vec base_point() const override { return Vec::Zero(dim()); }
  double inner(const Vec&, const Vec& a, const Vec& b) const override { return a.dot(b); }
  double constraint_residual(const Vec&) const override { return 0.0; }
  Vec project_tangent(const Vec&, const Vec& v) const override { return v; }
  Vec exp_step(const Vec& p, const Vec& v) const override { return p + v; }
  Mat transport(const Vec&, const Vec&, const Mat& frame) const override { return frame; }
  void develop(Vec& p, Mat&, const Vec& v) const override { p += v; }
  double distance(const Vec& p, const Vec& q) const override { return (p - q).norm(); }

  LocalCurvature curvature(const Vec&, const Mat&) const override {
    return {dim(), 0.0, Vec::Zero(dim()), true};
  }
  Mat canonical_frame(const Vec&) const override { return Mat::Identity(dim(), dim()); }
  Mat intrinsic_hessian(const Vec&, const Mat& frame, const Vec&, const Mat& hess) const override {
    return frame.transpose() * hess * frame;
  }
};

/// Round sphere of curvature kappa > 0, radius 1/sqrt(kappa), embedded in
/// R^{n+1}. Base point is the north pole (0, ..., 0, R).
class Sphere final : public Manifold {
public:
  Sphere(int n, double kappa) : Manifold(n, n + 1), kappa_(kappa) {
    if (!(kappa > 0.0) || !std::isfinite(kappa))
      throw ValidationError("sphere requires kappa > 0", "model.kappa");
    radius_ = 1.0 / std::sqrt(kappa);
    sqrt_k_ = std::sqrt(kappa);
  }

  ModelKind kind() const override { return ModelKind::sphere; }
  double kappa() const { return kappa_; }
  double radius() const { return radius_; }

  Vec base_point() const override {
    Vec p = Vec::Zero(ambient_dim());
    p(dim()) = radius_;
    return p;
  }
  double inner(const Vec&, const Vec& a, const Vec& b) const override { return a.dot(b); }
  double constraint_residual(const Vec& p) const override { return std::abs(p.norm() - radius_); }
  Vec retract(const Vec& p) const override { return p * (radius_ / p.norm()); }
  Vec project_tangent(const Vec& p, const Vec& v) const override {
    return v - (v.dot(p) / p.squaredNorm()) * p;
  }

  Vec exp_step(const Vec& p, const Vec& v) const override {
    const double speed = v.norm();
    if (speed == 0.0) return p;
    const double th = speed * sqrt_k_;
    return std::cos(th) * p + (std::sin(th) * radius_ / speed) * v;
  }

  Mat transport(const Vec& p, const Vec& v, const Mat& frame) const override {
    const double speed = v.norm();
    if (speed == 0.0) return frame;
    const double th = speed * sqrt_k_;
    const Vec u = v / speed;
    const Vec du = (-std::sin(th) * sqrt_k_) * p + (std::cos(th) - 1.0) * u;
    Mat out = frame;
    for (Eigen::Index j = 0; j < frame.cols(); ++j) out.col(j) += frame.col(j).dot(u) * du;
    return out;
  }

  double distance(const Vec& p, const Vec& q) const override {
    const Vec a = p / p.norm();
    const Vec b = q / q.norm();
    return radius_ * 2.0 * std::atan2((a - b).norm(), (a + b).norm());
  }

  LocalCurvature curvature(const Vec&, const Mat&) const override {
    return {dim(), kappa_, Vec::Zero(dim()), false};
  }

  Mat canonical_frame(const Vec& p) const override { return tangent_basis(p); }

  Mat intrinsic_hessian(const Vec& p, const Mat& frame, const Vec& grad,
                        const Mat& hess) const override {
    Mat h = frame.transpose() * hess * frame;
    h.diagonal().array() -= kappa_ * grad.dot(p);
    return h;
  }

private:
  Mat tangent_basis(const Vec& p) const {
    Mat frame(ambient_dim(), dim());
    int filled = 0;
    for (int i = 0; i < ambient_dim() && filled < dim(); ++i) {
      Vec c = project_tangent(p, Vec::Unit(ambient_dim(), i));
      for (int j = 0; j < filled; ++j) c -= c.dot(frame.col(j)) * frame.col(j);
      const double nrm = c.norm();
      if (nrm < 1e-6) continue;
      frame.col(filled++) = c / nrm;
    }
    return frame;
  }

  double kappa_;
  double radius_;
  double sqrt_k_;
};

/// Hyperbolic space of curvature kappa < 0 as the upper sheet of
/// <p,p>_L = -R^2 in Minkowski R^{n,1}, with coordinate 0 timelike.
/// Base point is (R, 0, ..., 0).
class Hyperbolic final : public Manifold {
public:
  Hyperbolic(int n, double kappa) : Manifold(n, n + 1), kappa_(kappa) {
    if (!(kappa < 0.0) || !std::isfinite(kappa))
      throw ValidationError("hyperbolic requires kappa < 0", "model.kappa");
    sqrt_k_ = std::sqrt(-kappa);
    radius_ = 1.0 / sqrt_k_;
  }

  ModelKind kind() const override { return ModelKind::hyperbolic; }
  double kappa() const { return kappa_; }

  static double lorentz(const Vec& a, const Vec& b) {
    return a.dot(b) - 2.0 * a(0) * b(0);
  }

  Vec base_point() const override {
    Vec p = Vec::Zero(ambient_dim());
    p(0) = radius_;
    return p;
  }
  double inner(const Vec&, const Vec& a, const Vec& b) const override { return lorentz(a, b); }
  double constraint_residual(const Vec& p) const override {
    const double q = -lorentz(p, p);
    if (!(q > 0.0) || p(0) <= 0.0) return std::numeric_limits<double>::infinity();
    return std::abs(std::sqrt(q) - radius_);
  }
  Vec retract(const Vec& p) const override { return p * (radius_ / std::sqrt(-lorentz(p, p))); }
  Vec project_tangent(const Vec& p, const Vec& v) const override {
    return v - (lorentz(v, p) / lorentz(p, p)) * p;
  }

  Vec exp_step(const Vec& p, const Vec& v) const override {
    const double speed = std::sqrt(std::max(0.0, lorentz(v, v)));
    if (speed == 0.0) return p;
    const double th = speed * sqrt_k_;
    return std::cosh(th) * p + (std::sinh(th) * radius_ / speed) * v;
  }

  Mat transport(const Vec& p, const Vec& v, const Mat& frame) const override {
    const double speed = std::sqrt(std::max(0.0, lorentz(v, v)));
    if (speed == 0.0) return frame;
    const double th = speed * sqrt_k_;
    const Vec u = v / speed;
    const Vec du = (std::sinh(th) * sqrt_k_) * p + (std::cosh(th) - 1.0) * u;
    Mat out = frame;
    for (Eigen::Index j = 0; j < frame.cols(); ++j) out.col(j) += lorentz(frame.col(j), u) * du;
    return out;
  }

  double distance(const Vec& p, const Vec& q) const override {
    const Vec d = p - q;
    const double chord = std::sqrt(std::max(0.0, lorentz(d, d)));
    return 2.0 * radius_ * std::asinh(chord / (2.0 * radius_));
  }

  LocalCurvature curvature(const Vec&, const Mat&) const override {
    return {dim(), kappa_, Vec::Zero(dim()), false};
  }

  Mat canonical_frame(const Vec& p) const override {
    Mat frame(ambient_dim(), dim());
    for (int i = 0; i < dim(); ++i) frame.col(i) = project_tangent(p, Vec::Unit(ambient_dim(), i + 1));
    orthonormalize(p, frame);
    return frame;
  }

  Mat intrinsic_hessian(const Vec& p, const Mat& frame, const Vec& grad,
                        const Mat& hess) const override {
    Mat h = frame.transpose() * hess * frame;
    h.diagonal().array() -= kappa_ * grad.dot(p);
    return h;
  }

private:
  double kappa_;
  double sqrt_k_;
  double radius_;
};

} // namespace bismut
