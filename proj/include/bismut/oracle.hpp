#pragma once

#include <bismut/bmpath.hpp>
#include <bismut/montecarlo.hpp>
#include <bismut/test_functions.hpp>

#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

namespace bismut {

/// P_t f with its first and second derivatives at a point, in the
/// coordinates of a given orthonormal frame there.
struct HeatJet {
  double value = 0.0;
  Vec grad;
  Mat hess;
};

/// Closed forms exist for (euclidean; constant, linear, quadratic,
/// gaussian_bump) and for (sphere; constant, linear).
inline bool has_exact_heat(const ManifoldModel& model, const TestFunction& f) {
  switch (model.kind()) {
    case ModelKind::euclidean:
      return f.kind() == FunctionKind::constant || f.kind() == FunctionKind::linear ||
             f.kind() == FunctionKind::quadratic || f.kind() == FunctionKind::gaussian_bump;
    case ModelKind::sphere:
      return f.kind() == FunctionKind::constant || f.kind() == FunctionKind::linear;
    default: return false;
  }
}

inline HeatJet exact_heat(const ManifoldModel& model, const TestFunction& f, const Vec& p,
                          const Mat& frame, double t) {
  if (!has_exact_heat(model, f))
    throw ValidationError(std::string("no closed-form heat semigroup for ") + to_string(f.kind()) +
                              " on " + to_string(model.kind()),
                          "estimator.f.kind");
  if (t < 0.0) throw ValidationError("heat time must be >= 0", "estimator.T");
  const int n = model.dim();
  HeatJet j;
  if (model.kind() == ModelKind::sphere) {
    // First spherical harmonic: Delta <a,y> = -n kappa <a,y>.
    const double kappa = model.constant_curvature();
    const double decay = std::exp(-0.5 * n * kappa * t);
    const Vec a = f.kind() == FunctionKind::linear ? f.a() : Vec(Vec::Zero(p.size()));
    j.value = decay * a.dot(p) + f.c();
    j.grad = decay * frame_gradient(frame, a);
    j.hess = decay * model->intrinsic_hessian(p, frame, a, Mat::Zero(p.size(), p.size()));
    return j;
  }
  Vec g_amb;
  Mat h_amb;
  switch (f.kind()) {
    case FunctionKind::constant:
      j.value = f.c();
      g_amb = Vec::Zero(n);
      h_amb = Mat::Zero(n, n);
      break;
    case FunctionKind::linear:
      j.value = f.a().dot(p) + f.c();
      g_amb = f.a();
      h_amb = Mat::Zero(n, n);
      break;
    case FunctionKind::quadratic:
      j.value = p.dot(f.A() * p) + f.a().dot(p) + f.c() + t * f.A().trace();
      g_amb = 2.0 * f.A() * p + f.a();
      h_amb = 2.0 * f.A();
      break;
    case FunctionKind::gaussian_bump: {
      const double s2 = f.sigma() * f.sigma();
      const double var = s2 + t;
      const Vec d = p - f.a();
      const double v = std::pow(s2 / var, 0.5 * n) * std::exp(-d.squaredNorm() / (2 * var));
      j.value = v;
      g_amb = -v / var * d;
      h_amb = v * (d * d.transpose() / (var * var) - Mat::Identity(n, n) / var);
      break;
    }
    default: break;
  }
  j.grad = frame.transpose() * g_amb;
  j.hess = frame.transpose() * h_amb * frame;
  return j;
}

// ----------------------------------------------------------------------------
// Harmonic test functions.

struct HarmonicCase {
  std::string id;
  TestFunction u;
  double sup_u = 0.0;  // ||u|| on the closed ball
  /// Exact Hessian of u at p in the coordinates of `frame`.
  std::function<Mat(const Vec& p, const Mat& frame)> hessian;
};

namespace detail {

/// Harmonic extension of boundary data g on the disc B(c, r) in R^2 as
/// Re F(w), F(w) = sum_m c_m w^m with w = (y - c) / r. The c_m are trapezoid
/// Fourier coefficients of g on `nodes` boundary points, so u and its
/// derivatives are accurate up to the circle for smooth data.
class DiscPoisson {
public:
  DiscPoisson(Vec center, double r, const std::function<double(const Vec&)>& g, int nodes = 2048)
      : c_(std::move(center)), r_(r) {
    std::vector<double> gv(nodes);
    for (int k = 0; k < nodes; ++k) {
      const double th = 2.0 * std::numbers::pi * k / nodes;
      Vec y(2);
      y << c_(0) + r * std::cos(th), c_(1) + r * std::sin(th);
      gv[k] = g(y);
      sup_ = std::max(sup_, std::abs(gv[k]));
    }
    const int modes = nodes / 2;
    coef_.resize(modes);
    for (int m = 0; m < modes; ++m) {
      double a = 0.0, b = 0.0;
      for (int k = 0; k < nodes; ++k) {
        const double th = 2.0 * std::numbers::pi * static_cast<double>(static_cast<long>(m) * k % nodes) / nodes;
        a += gv[k] * std::cos(th);
        b += gv[k] * std::sin(th);
      }
      const double scale = (m == 0 ? 1.0 : 2.0) / nodes;
      coef_[m] = {scale * a, -scale * b};
    }
    std::size_t keep = coef_.size();
    while (keep > 1 && std::abs(coef_[keep - 1]) < 1e-17 * std::max(sup_, 1.0)) --keep;
    coef_.resize(keep);
  }

  double operator()(const Vec& y) const { return eval(y, 0).real(); }
  double sup() const { return sup_; }

  Vec grad(const Vec& y) const {
    const auto d = eval(y, 1) / r_;
    return make_vec({d.real(), -d.imag()});
  }
  Mat hess(const Vec& y) const {
    const auto d = eval(y, 2) / (r_ * r_);
    Mat h(2, 2);
    h << d.real(), -d.imag(), -d.imag(), -d.real();
    return h;
  }

private:
  /// order-th derivative of F at w(y), by Horner's rule.
  std::complex<double> eval(const Vec& y, int order) const {
    const std::complex<double> w((y(0) - c_(0)) / r_, (y(1) - c_(1)) / r_);
    if (std::abs(w) > 1.0 + 1e-9) throw ValidationError("disc_poisson evaluated outside its disc");
    std::complex<double> acc = 0.0;
    for (std::size_t m = coef_.size(); m-- > static_cast<std::size_t>(order);) {
      double fall = 1.0;
      for (int j = 0; j < order; ++j) fall *= static_cast<double>(m - j);
      acc = acc * w + fall * coef_[m];
    }
    return acc;
  }

  Vec c_;
  double r_;
  std::vector<std::complex<double>> coef_;
  double sup_ = 0.0;
};

} // namespace detail

/// Library of harmonic functions on a ball of a flat or conformal 2D chart
/// (conformal Laplacians are e^{-2 phi} times the flat one, so chart-harmonic
/// polynomials stay harmonic), plus constants on every model.
///
/// ids: const, linear, saddle (3 + y1^2 - y2^2), disc_poisson (euclidean n=2;
/// boundary data `data`, default exp(x) cos(y)).
inline HarmonicCase harmonic_library(const ManifoldModel& model, const std::string& id, const BallDomain& ball,
                                     const std::string& data = "exp(x)*cos(y)") {
  const auto& m = *model;
  const int amb = m.ambient_dim();
  HarmonicCase hc;
  hc.id = id;
  auto generic_hessian = [model](const TestFunction& u) {
    return [model, u](const Vec& p, const Mat& frame) {
      return model->intrinsic_hessian(p, frame, u.grad(p), u.hess(p));
    };
  };
  if (id == "const") {
    hc.u = TestFunction::constant(amb, 1.0);
    hc.sup_u = 1.0;
    hc.hessian = [](const Vec&, const Mat& frame) { return Mat(Mat::Zero(frame.cols(), frame.cols())); };
    return hc;
  }
  const bool chart2d = model.kind() == ModelKind::euclidean || model.kind() == ModelKind::conformal_plane;
  if (id == "linear") {
    if (!(model.kind() == ModelKind::euclidean || model.kind() == ModelKind::conformal_plane))
      throw ValidationError("harmonic 'linear' needs a flat or conformal chart", "estimator.f.id");
    Vec a = Vec::Zero(amb);
    a(0) = 1.0;
    if (amb > 1) a(1) = 0.5;
    hc.u = TestFunction::linear(a, 2.0);
  } else if (id == "saddle") {
    if (!chart2d || model.dim() != 2)
      throw ValidationError("harmonic 'saddle' needs a 2D flat or conformal chart", "estimator.f.id");
    hc.u = TestFunction::expression("3 + x*x - y*y", 2);
  } else if (id == "disc_poisson") {
    if (model.kind() != ModelKind::euclidean || model.dim() != 2)
      throw ValidationError("harmonic 'disc_poisson' is euclidean n=2 only", "estimator.f.id");
    const auto g = TestFunction::expression(data, 2);
    auto P = std::make_shared<detail::DiscPoisson>(ball.center(), ball.radius(), [g](const Vec& y) { return g(y); });
    hc.u = TestFunction::custom(
        2, [P](const Vec& y) { return (*P)(y); }, [P](const Vec& y) { return P->grad(y); },
        [P](const Vec& y) { return P->hess(y); }, "disc_poisson(" + data + ")");
    hc.sup_u = P->sup();
    hc.u.with_bound(hc.sup_u);
    hc.hessian = [P](const Vec& p, const Mat& frame) { return Mat(frame.transpose() * P->hess(p) * frame); };
    return hc;
  } else {
    throw ValidationError("unknown harmonic id '" + id + "'", "estimator.f.id");
  }
  hc.sup_u = hc.u.bound_on(ball);
  if (id == "saddle" && model.kind() == ModelKind::euclidean) {
    // Maximum principle: sup over the circle |y - c| = r.
    const Vec c = ball.center();
    const double r = ball.radius();
    double best = 0.0;
    for (int k = 0; k < 4096; ++k) {
      const double th = 2.0 * std::numbers::pi * k / 4096;
      Vec y(2);
      y << c(0) + r * std::cos(th), c(1) + r * std::sin(th);
      best = std::max(best, std::abs(hc.u(y)));
    }
    hc.sup_u = best;
  }
  hc.u.with_bound(hc.sup_u);
  hc.hessian = generic_hessian(hc.u);
  return hc;
}

/// Largest |Laplace-Beltrami u| over `samples` deterministic points of the ball.
inline double max_abs_laplacian(const ManifoldModel& model, const TestFunction& u, const BallDomain& ball,
                                int samples = 100) {
  const int n = model.dim();
  NormalStream stream(0x1a91ace5ULL, 1);
  double z[kMaxAmbient];
  double worst = std::abs(laplacian(*model, u, ball.center()));
  for (int i = 0; i < samples; ++i) {
    stream.fill(static_cast<std::uint64_t>(i), std::span<double>(z, n + 1));
    Vec w(n);
    for (int j = 0; j < n; ++j) w(j) = z[j];
    const double nrm = w.norm();
    if (!(nrm > 0.0)) continue;
    const double u01 = 0.5 * (1.0 + std::erf(z[n] / std::numbers::sqrt2));
    const Vec y = ball.normal_point(0.95 * ball.radius() * std::pow(u01, 1.0 / n) * w / nrm);
    worst = std::max(worst, std::abs(laplacian(*model, u, y)));
  }
  return worst;
}

// ----------------------------------------------------------------------------
// Coupled-noise finite-difference Hessian of P_T f.

struct FdHessianConfig {
  double T = 1.0;
  double epsilon = 0.02;
  double h = 1e-3;
  ExecutionConfig exec;
};

/// Point and parallel frame at exp_x(s V), V = frame * v, by substepped development.
inline std::pair<Vec, Mat> geodesic_offset(const Manifold& m, const Vec& x, const Mat& frame, const Vec& v,
                                           double s, int substeps = 16) {
  Vec p = x;
  Mat F = frame;
  for (int i = 0; i < substeps; ++i) m.develop(p, F, Vec(F * ((s / substeps) * v)));
  return {p, F};
}

/// (P_T f(exp_x(eps v)) - 2 P_T f(x) + P_T f(exp_x(-eps v))) / eps^2, the
/// three expectations sharing the anti-development noise of each path index.
/// `v` is given in coordinates of `frame` at x.
inline Estimate fd_hessian(const ManifoldModel& model, const TestFunction& f, const Vec& x,
                           const Mat& frame, const Vec& v, const FdHessianConfig& cfg) {
  if (cfg.epsilon < 1e-3 || cfg.epsilon > 1e-1)
    throw ValidationError("epsilon must lie in [1e-3, 1e-1]", "estimator.epsilon");
  if (cfg.exec.n_paths < 10000) throw ValidationError("fd_hessian needs at least 1e4 paths", "execution.n_paths");
  if (std::abs(v.norm() - 1.0) > 1e-9) throw ValidationError("v must be a unit vector", "estimator.v");
  const auto& m = *model;
  const auto [xp, Fp] = geodesic_offset(m, x, frame, v, cfg.epsilon);
  const auto [xm, Fm] = geodesic_offset(m, x, frame, v, -cfg.epsilon);
  const auto ball = BallDomain::whole(model, x);
  PathOptions opt;
  opt.ignore_domain = true;
  const double e2 = cfg.epsilon * cfg.epsilon;
  return run_monte_carlo_scalar(cfg.exec, [&](std::uint64_t i, double& out) {
    PathConfig pc;
    pc.horizon_T = cfg.T;
    pc.step_h = cfg.h;
    pc.seed = cfg.exec.seed;
    pc.path_index = i;
    pc.start = xp;
    const double fp = f(simulate_path(pc, ball, detail::NullObserver{}, opt, &Fp).position);
    pc.start = x;
    const double f0 = f(simulate_path(pc, ball, detail::NullObserver{}, opt, &frame).position);
    pc.start = xm;
    const double fm = f(simulate_path(pc, ball, detail::NullObserver{}, opt, &Fm).position);
    out = (fp - 2.0 * f0 + fm) / e2;
    return PathOutcome{};
  });
}

} // namespace bismut
