#pragma once

#include <bismut/errors.hpp>
#include <bismut/geometry/model.hpp>

#include <cmath>
#include <memory>
#include <numbers>
#include <string>

namespace bismut {

enum class KKind { linear, exp_profile, timechange };
enum class KOrientation { one_to_zero, zero_to_one };

inline const char* to_string(KKind k) {
  switch (k) {
    case KKind::linear: return "linear";
    case KKind::exp_profile: return "exp_profile";
    case KKind::timechange: return "timechange";
  }
  return "?";
}

/// f(y) = sin(pi (delta - d(x,y)) / (2 delta)) on B(x, delta).
class CutoffF {
public:
  explicit CutoffF(std::shared_ptr<const BallDomain> ball) : ball_(std::move(ball)) {}

  double operator()(const Vec& y) const {
    const double rho = ball_->dist_to_boundary(y);
    return std::sin(std::numbers::pi * rho / (2.0 * ball_->radius()));
  }
  double gradient_bound() const { return std::numbers::pi / (2.0 * ball_->radius()); }
  const BallDomain& ball() const { return *ball_; }

private:
  std::shared_ptr<const BallDomain> ball_;
};

/// k(s) and its derivative over one grid step [s, s+h].
struct KSample {
  double k;
  double k_dot;
};

struct KSpec {
  KKind kind = KKind::linear;
  KOrientation orientation = KOrientation::one_to_zero;
  double T = 1.0;          // support end for deterministic kinds
  double lambda = 0.0;     // profile rate for exp_profile and h1 of timechange
  double t_horizon = 1.0;  // timechange clock horizon
  double delay = 0.0;      // linear: k is constant on [0, delay]

  void validate() const {
    if (!(T > 0.0)) throw ValidationError("k support end T must be positive", "estimator.T");
    if (lambda < 0.0) throw ValidationError("k.lambda must be >= 0", "estimator.k.lambda");
    if (!(t_horizon > 0.0))
      throw ValidationError("k.t_horizon must be positive", "estimator.k.t_horizon");
    if (delay < 0.0 || delay >= T)
      throw ValidationError("k.delay must lie in [0, T)", "estimator.k.delay");
    if (kind == KKind::timechange && orientation != KOrientation::one_to_zero)
      throw ValidationError("timechange k is one_to_zero only", "estimator.k.orientation");
  }
};

/// h1(u) = (1 - e^{-lambda u}) / (1 - e^{-lambda t}), or u / t for lambda = 0.
inline double h1_profile(double u, double lambda, double t) {
  if (lambda == 0.0) return u / t;
  return std::expm1(-lambda * u) / std::expm1(-lambda * t);
}
inline double h1_profile_dot(double u, double lambda, double t) {
  if (lambda == 0.0) return 1.0 / t;
  return -lambda * std::exp(-lambda * u) / std::expm1(-lambda * t);
}

/// The test process k along one path. Deterministic kinds ignore the path;
/// timechange integrates h0(s) = int_0^s f^{-2}(X_r) dr up to t_horizon.
///
/// For timechange, k_dot is the step difference -(h1(h0(s+h)) - h1(h0(s)))/h,
/// so that k reaches 0 exactly at the step where h0 hits t_horizon.
class KProcess {
public:
  explicit KProcess(const KSpec& spec, const CutoffF* f = nullptr) : spec_(spec), f_(f) {
    spec.validate();
    if (spec.kind == KKind::timechange && !f)
      throw ValidationError("timechange k needs a cutoff function", "estimator.k.kind");
  }

  const KSpec& spec() const { return spec_; }

  void reset() {
    h0_ = 0.0;
    done_ = false;
  }

  /// Sample for the step [s, s+h] with left-point position y.
  KSample next(double s, double h, const Vec& y) {
    switch (spec_.kind) {
      case KKind::linear: return orient(linear(s));
      case KKind::exp_profile: return orient(exp_profile(s));
      case KKind::timechange: return timechange(h, y);
    }
    return {0.0, 0.0};
  }

  /// Value of k at time s for the deterministic kinds.
  double value_at(double s) const {
    KSample k = spec_.kind == KKind::linear ? linear(s) : exp_profile(s);
    return orient(k).k;
  }

  /// Timechange: h0 has reached t_horizon, so k = 0 from now on.
  bool clock_reached() const { return done_; }
  double h0() const { return h0_; }

private:
  KSample linear(double s) const {
    const double d = spec_.delay;
    if (s >= spec_.T) return {0.0, 0.0};
    if (s < d) return {1.0, 0.0};
    const double len = spec_.T - d;
    return {(spec_.T - s) / len, -1.0 / len};
  }

  KSample exp_profile(double s) const {
    if (s >= spec_.T) return {0.0, 0.0};
    return {1.0 - h1_profile(s, spec_.lambda, spec_.T),
            -h1_profile_dot(s, spec_.lambda, spec_.T)};
  }

  KSample orient(KSample k) const {
    if (spec_.orientation == KOrientation::one_to_zero) return k;
    return {1.0 - k.k, -k.k_dot};
  }

  KSample timechange(double h, const Vec& y) {
    if (done_) return {0.0, 0.0};
    const double fy = (*f_)(y);
    if (!(fy > 0.0)) throw ValidationError("cutoff f is not positive at an interior sample");
    const double t = spec_.t_horizon;
    const double lam = spec_.lambda;
    const double before = h1_profile(h0_, lam, t);
    double next = h0_ + h / (fy * fy);
    if (next >= t) {
      next = t;
      done_ = true;
    }
    const double after = done_ ? 1.0 : h1_profile(next, lam, t);
    const KSample out{1.0 - before, -(after - before) / h};
    h0_ = next;
    return out;
  }

  KSpec spec_;
  const CutoffF* f_;
  double h0_ = 0.0;
  bool done_ = false;
};

inline KSpec k_linear(double T, KOrientation orientation = KOrientation::one_to_zero) {
  if (!(T > 0.0)) throw ValidationError("k_linear requires T > 0", "estimator.T");
  KSpec s;
  s.kind = KKind::linear;
  s.orientation = orientation;
  s.T = T;
  return s;
}

inline KSpec k_timechange(double lambda, double t_horizon) {
  KSpec s;
  s.kind = KKind::timechange;
  s.lambda = lambda;
  s.t_horizon = t_horizon;
  s.T = t_horizon;
  s.validate();
  return s;
}

} // namespace bismut
