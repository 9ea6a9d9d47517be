#pragma once

#include <bismut/errors.hpp>
#include <bismut/linalg.hpp>

#include <cmath>
#include <string>

namespace bismut {

enum class ModelKind { euclidean, sphere, hyperbolic, conformal_plane };

inline const char* to_string(ModelKind k) {
  switch (k) {
    case ModelKind::euclidean: return "euclidean";
    case ModelKind::sphere: return "sphere";
    case ModelKind::hyperbolic: return "hyperbolic";
    case ModelKind::conformal_plane: return "conformal_plane";
  }
  return "?";
}

/// n orthonormal tangent vectors at `base_point`, stored as the columns of
/// `vectors` in the model's ambient (embedding or chart) coordinates.
struct TangentFrame {
  Vec base_point;
  Mat vectors;
};

/// Curvature at one point, in the coordinates of an orthonormal frame.
///
/// All built-in models have isotropic curvature, R(a,b)c = K(<b,c>a - <a,c>b),
/// so the sectional curvature K and its gradient dK determine R, Ric and
/// (d*R + nabla Ric). For n >= 3 isotropy forces dK = 0 (Schur).
struct LocalCurvature {
  int dim = 0;
  double sectional = 0.0;
  Vec grad_sectional;  // dK(e_i), frame coordinates
  bool flat = true;    // K == 0 and dK == 0 identically on the model

  double ricci_factor() const { return (dim - 1) * sectional; }

  /// out = R(a,b)c
  void riemann(const Vec& a, const Vec& b, const Vec& c, Vec& out) const {
    out.noalias() = sectional * (b.dot(c) * a - a.dot(c) * b);
  }

  /// out = (d*R + nabla Ric)^#(a, b) = d*R(a)b + (nabla_a Ric^#)(b), where
  /// d*R(v1)v2 = -tr nabla_. R(., v1)v2. For isotropic curvature this is
  /// (n-1) (dK(a) b + dK(b) a - <a,b> grad K).
  void dstar_nabla(const Vec& a, const Vec& b, Vec& out) const {
    const double c = dim - 1;
    out.noalias() = c * (grad_sectional.dot(a) * b + grad_sectional.dot(b) * a -
                         a.dot(b) * grad_sectional);
  }
};

/// A complete Riemannian manifold realized in ambient coordinates:
/// an embedding for the space forms, a global chart for conformal_plane.
///
/// All operations are pure and thread-safe.
class Manifold {
public:
  virtual ~Manifold() = default;

  virtual ModelKind kind() const = 0;
  int dim() const { return dim_; }
  int ambient_dim() const { return ambient_; }

  virtual Vec base_point() const = 0;
  virtual double inner(const Vec& p, const Vec& a, const Vec& b) const = 0;
  double norm(const Vec& p, const Vec& a) const { return std::sqrt(inner(p, a, a)); }

  /// Distance of `p` from the embedding constraint (0 in a global chart).
  virtual double constraint_residual(const Vec& p) const = 0;
  /// Nearest point on the manifold; identity for charts.
  virtual Vec retract(const Vec& p) const { return p; }
  /// Orthogonal projection of an ambient vector onto T_pM.
  virtual Vec project_tangent(const Vec& p, const Vec& v) const = 0;

  /// Point at unit time along the geodesic from p with initial velocity v.
  virtual Vec exp_step(const Vec& p, const Vec& v) const = 0;
  /// Accurate exponential map for long steps (defaults to exp_step).
  virtual Vec exp_map(const Vec& p, const Vec& v) const { return exp_step(p, v); }
  /// Parallel transport of the frame columns along the geodesic from p with
  /// velocity v over unit time. Returns the transported (unnormalized) frame.
  virtual Mat transport(const Vec& p, const Vec& v, const Mat& frame) const = 0;

  /// One development step: move p along the geodesic with velocity v and
  /// transport the frame, re-orthonormalizing at the new point.
  virtual void develop(Vec& p, Mat& frame, const Vec& v) const {
    Mat moved = transport(p, v, frame);
    p = retract(exp_step(p, v));
    for (Eigen::Index j = 0; j < moved.cols(); ++j) moved.col(j) = project_tangent(p, moved.col(j));
    orthonormalize(p, moved);
    frame = moved;
  }

  virtual double distance(const Vec& p, const Vec& q) const = 0;
  virtual LocalCurvature curvature(const Vec& p, const Mat& frame) const = 0;
  virtual Mat canonical_frame(const Vec& p) const = 0;

  /// Intrinsic Hessian in frame coordinates of a function given by its
  /// ambient partial derivatives (gradient `grad`, second partials `hess`).
  virtual Mat intrinsic_hessian(const Vec& p, const Mat& frame, const Vec& grad,
                                const Mat& hess) const = 0;

  /// Modified Gram-Schmidt in the metric at p.
  void orthonormalize(const Vec& p, Mat& frame) const {
    for (Eigen::Index j = 0; j < frame.cols(); ++j) {
      Vec c = frame.col(j);
      for (Eigen::Index i = 0; i < j; ++i) c -= inner(p, c, frame.col(i)) * frame.col(i);
      const double nrm = norm(p, c);
      if (!(nrm > 0.0)) throw NumericalError("degenerate frame in Gram-Schmidt");
      frame.col(j) = c / nrm;
    }
  }

  /// Max |Gram - I| of the frame under the metric at p.
  double frame_defect(const Vec& p, const Mat& frame) const {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < frame.cols(); ++i)
      for (Eigen::Index j = 0; j < frame.cols(); ++j) {
        const double g = inner(p, frame.col(i), frame.col(j));
        worst = std::max(worst, std::abs(g - (i == j ? 1.0 : 0.0)));
      }
    return worst;
  }

protected:
  Manifold(int dim, int ambient) : dim_(dim), ambient_(ambient) {
    if (dim < 2) throw ValidationError("model dimension must be >= 2", "model.dim");
    if (ambient > kMaxAmbient)
      throw ValidationError("model dimension exceeds the supported maximum of " +
                                std::to_string(kMaxDim),
                            "model.dim");
  }

private:
  int dim_;
  int ambient_;
};

inline Vec exp_step(const Manifold& m, const Vec& p, const Vec& v) { return m.exp_step(p, v); }

/// Transport `frame` along the geodesic segment p -> p_next = exp(p, v_step).
inline TangentFrame parallel_transport_step(const Manifold& m, const TangentFrame& frame,
                                            const Vec& p_next, const Vec& v_step) {
  Mat moved = m.transport(frame.base_point, v_step, frame.vectors);
  for (Eigen::Index j = 0; j < moved.cols(); ++j)
    moved.col(j) = m.project_tangent(p_next, moved.col(j));
  m.orthonormalize(p_next, moved);
  return {p_next, moved};
}

} // namespace bismut
