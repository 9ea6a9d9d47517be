#pragma once

#include <bismut/errors.hpp>
#include <bismut/geometry/model.hpp>

#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <string>
#include <utility>

namespace bismut {

enum class FormulaId {
  c1,
  c2,
  c3,
  ctilde,
  EHF1,
  EHF2,
  semigroup_local,
  semigroup_global,
  ricci_parallel,
  lemma22_rhs,
  lemma34_rhs
};

inline const char* to_string(FormulaId f) {
  switch (f) {
    case FormulaId::c1: return "c1";
    case FormulaId::c2: return "c2";
    case FormulaId::c3: return "c3";
    case FormulaId::ctilde: return "ctilde";
    case FormulaId::EHF1: return "EHF1";
    case FormulaId::EHF2: return "EHF2";
    case FormulaId::semigroup_local: return "semigroup_local";
    case FormulaId::semigroup_global: return "semigroup_global";
    case FormulaId::ricci_parallel: return "ricci_parallel";
    case FormulaId::lemma22_rhs: return "lemma22_rhs";
    case FormulaId::lemma34_rhs: return "lemma34_rhs";
  }
  return "?";
}

inline FormulaId formula_from_string(const std::string& s) {
  for (int i = 0; i <= static_cast<int>(FormulaId::lemma34_rhs); ++i) {
    const auto f = static_cast<FormulaId>(i);
    if (s == to_string(f)) return f;
  }
  throw ValidationError("unknown formula_id '" + s + "'", "formula_id");
}

struct BoundInputs {
  GeomBounds gb;
  double T = 1.0;
  double sup_f = 1.0;
  double sup_u = 1.0;
  double u_at_x = std::numeric_limits<double>::quiet_NaN();
  double q = 1.0;
  // Fixed parameters for the non-optimized formulas.
  double delta = 1.0;
  double delta1 = 0.25;
  double delta2 = 1.0;
  double p = 2.0;
  double k_moment = std::numeric_limits<double>::quiet_NaN();
  double t = 1.0;  // k-moment horizon

  void validate() const {
    if (gb.n < 2) throw ValidationError("n must be >= 2", "inputs.n");
    if (!(gb.delta_x > 0.0)) throw ValidationError("delta_x must be positive", "inputs.delta_x");
    if (gb.K1 < 0.0) throw ValidationError("K1 must be >= 0", "inputs.K1");
    if (gb.K2 < 0.0) throw ValidationError("K2 must be >= 0", "inputs.K2");
    if (!(T > 0.0)) throw ValidationError("T must be positive", "inputs.T");
    if (sup_f < 0.0) throw ValidationError("sup_f must be >= 0", "inputs.sup_f");
    if (sup_u < 0.0) throw ValidationError("sup_u must be >= 0", "inputs.sup_u");
    if (q < 1.0) throw ValidationError("q must be >= 1", "inputs.q");
    if (!std::isnan(u_at_x) && (u_at_x < 0.0 || u_at_x > sup_u * (1 + 1e-12)))
      throw ValidationError("u_at_x must lie in [0, sup_u]", "inputs.u_at_x");
  }
};

struct BoundResult {
  double value = 0.0;
  std::map<std::string, double> minimizer;
  FormulaId formula_id = FormulaId::c1;
  /// The infimum sits on an open end of the parameter range; value is the
  /// limit and the minimizer is the clamped endpoint.
  bool attained_in_limit = false;
};

struct CConstants {
  double c1, c2, c3, ctilde;
};

namespace detail {

/// pi sqrt((n-1) K0^-) / (2 delta_x)
inline double comparison_term(const GeomBounds& gb) {
  return std::numbers::pi * std::sqrt((gb.n - 1) * gb.K0_minus()) / (2.0 * gb.delta_x);
}
inline double pi2_over(const GeomBounds& gb, double factor) {
  return std::numbers::pi * std::numbers::pi * factor / (4.0 * gb.delta_x * gb.delta_x);
}

} // namespace detail

inline CConstants c_constants(const GeomBounds& gb, double delta1, double delta2, double q) {
  if (!(delta1 > 0.0) || !(delta2 > 0.0))
    throw ValidationError("delta1, delta2 must be positive", "inputs.delta1");
  if (q < 1.0) throw ValidationError("q must be >= 1", "inputs.q");
  if (!(gb.delta_x > 0.0)) throw ValidationError("delta_x must be positive", "inputs.delta_x");
  const double k = gb.K0_minus();
  const double a = detail::comparison_term(gb);
  const int n = gb.n;
  CConstants c;
  c.c1 = 1.0 / (2.0 * delta2) + k + a + detail::pi2_over(gb, n + 3 + 1.0 / delta1);
  c.c2 = k + a + detail::pi2_over(gb, n + 5);
  c.c3 = k + a + detail::pi2_over(gb, n + 3);
  c.ctilde = a + detail::pi2_over(gb, n + 2 * q + 1);
  return c;
}

// ----------------------------------------------------------------------------
// Optimization on log-parameters.

struct Min1D {
  double arg;
  double value;
};

/// Golden-section minimum of fn over [lo, hi] in log space.
inline Min1D golden_section_log(const std::function<double(double)>& fn, double lo, double hi,
                                double rtol = 1e-8) {
  constexpr double g = 0.6180339887498949;
  double a = std::log(lo), b = std::log(hi);
  auto eval = [&](double u) {
    double v = fn(std::exp(u));
    if (!std::isfinite(v)) v = std::numeric_limits<double>::infinity();
    return v;
  };
  double c = b - g * (b - a), d = a + g * (b - a);
  double fc = eval(c), fd = eval(d);
  while (b - a > rtol * std::max(1.0, std::abs(a) + std::abs(b)) * 0.5) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = eval(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = eval(d);
    }
  }
  // Report the best of the final interior points and the bracket ends.
  Min1D best{std::exp(c), fc};
  if (fd < best.value) best = {std::exp(d), fd};
  for (double e : {a, b}) {
    const double fe = eval(e);
    if (fe < best.value) best = {std::exp(e), fe};
  }
  if (!std::isfinite(best.value)) throw NumericalError("objective is non-finite on the whole bracket");
  return best;
}

struct Min2D {
  double x, y, value;
};

/// Nested golden section: outer over x, inner over y.
inline Min2D golden_section_log_2d(const std::function<double(double, double)>& fn,
                                   std::pair<double, double> xr, std::pair<double, double> yr,
                                   double rtol = 1e-8) {
  double best_y = yr.first;
  const auto outer = golden_section_log(
      [&](double x) {
        const auto in = golden_section_log([&](double y) { return fn(x, y); }, yr.first, yr.second, rtol);
        return in.value;
      },
      xr.first, xr.second, rtol);
  best_y = golden_section_log([&](double y) { return fn(outer.arg, y); }, yr.first, yr.second, rtol).arg;
  return {outer.arg, best_y, fn(outer.arg, best_y)};
}

inline constexpr double kParamLo = 1e-6;
inline constexpr double kParamHi = 1e6;
inline constexpr double kDelta1Cap = 0.5 * (1.0 - 1e-9);

inline bool at_edge(double v, double lo, double hi) {
  return std::abs(std::log(v / lo)) < 1e-6 || std::abs(std::log(v / hi)) < 1e-6;
}

// ----------------------------------------------------------------------------
// Harmonic-function bounds.

/// Objective of EHF-1/EHF-2 before the factor in u.
inline double ehf_objective(const GeomBounds& gb, FormulaId which, double d1, double d2) {
  const double k = gb.K0_minus();
  const double a = detail::comparison_term(gb);
  const double ind = k != 0.0 ? 1.0 : 0.0;
  const double radical =
      std::sqrt((1.0 + 2.0 * ind) * ((d1 + 1.0) * gb.K1 * gb.K1 + 0.5 * d2 * gb.K2 * gb.K2));
  if (which == FormulaId::EHF1)
    return radical + std::sqrt(6.0) * (1.0 / (2.0 * d2) + 3.0 * k + a +
                                       detail::pi2_over(gb, gb.n + 3 + 1.0 / d1));
  return radical + (1.0 / d2 + 6.0 * k + 2.0 * a + 2.0 * detail::pi2_over(gb, gb.n + 3 + 1.0 / d1));
}

inline double ehf_prefactor(const BoundInputs& in, FormulaId which) {
  if (which == FormulaId::EHF1) {
    if (std::isnan(in.u_at_x)) throw ValidationError("EHF1 requires u_at_x", "inputs.u_at_x");
    return std::sqrt(in.sup_u * in.u_at_x);
  }
  return in.sup_u;
}

inline std::pair<double, double> ehf_delta1_range(FormulaId which) {
  return {kParamLo, which == FormulaId::EHF1 ? kDelta1Cap : kParamHi};
}

inline BoundResult harmonic_bound(const BoundInputs& in, FormulaId which) {
  if (which != FormulaId::EHF1 && which != FormulaId::EHF2)
    throw ValidationError("harmonic_bound takes EHF1 or EHF2", "formula_id");
  in.validate();
  const double pre = ehf_prefactor(in, which);
  const auto r1 = ehf_delta1_range(which);
  const auto m = golden_section_log_2d(
      [&](double d1, double d2) { return ehf_objective(in.gb, which, d1, d2); }, r1,
      {kParamLo, kParamHi});
  BoundResult r;
  r.formula_id = which;
  r.value = m.value * pre;
  r.minimizer = {{"delta1", m.x}, {"delta2", m.y}};
  r.attained_in_limit = at_edge(m.x, r1.first, r1.second) || at_edge(m.y, kParamLo, kParamHi);
  return r;
}

// ----------------------------------------------------------------------------
// Semigroup bounds.

inline double semigroup_local_objective(const BoundInputs& in, double delta) {
  const auto& gb = in.gb;
  const double lead =
      0.5 * in.T * std::sqrt(gb.K1 * gb.K1 + (delta > 0 ? gb.K2 * gb.K2 / delta : 0.0)) + 2.0 / in.T;
  const double rate = gb.K0_minus() + 0.5 * delta + detail::comparison_term(gb) +
                      detail::pi2_over(gb, gb.n + 3);
  return lead * std::exp(in.T * rate) * in.sup_f;
}

inline double semigroup_global_objective(const BoundInputs& in, double delta) {
  const auto& gb = in.gb;
  const double lead =
      std::sqrt(0.5 * gb.K1 * gb.K1 + (delta > 0 ? gb.K2 * gb.K2 / (2.0 * delta) : 0.0)) +
      2.0 / in.T;
  return lead * std::exp((gb.K0_minus() + 0.5 * delta) * in.T) * in.sup_f;
}

inline BoundResult semigroup_bound(const BoundInputs& in, FormulaId which) {
  in.validate();
  BoundResult r;
  r.formula_id = which;
  const auto& gb = in.gb;
  if (which == FormulaId::ricci_parallel) {
    r.value = (gb.K1 * gb.K1 / std::numbers::sqrt2 + 2.0 / in.T) * std::exp(gb.K0_minus() * in.T) *
              in.sup_f;
    return r;
  }
  std::function<double(double)> obj;
  if (which == FormulaId::semigroup_local)
    obj = [&](double d) { return semigroup_local_objective(in, d); };
  else if (which == FormulaId::semigroup_global)
    obj = [&](double d) { return semigroup_global_objective(in, d); };
  else
    throw ValidationError("semigroup_bound takes semigroup_local, semigroup_global or ricci_parallel",
                          "formula_id");
  if (gb.K2 == 0.0) {
    // Objective is increasing in delta: the infimum is the delta -> 0 limit.
    r.value = obj(0.0);
    r.minimizer = {{"delta", 0.0}};
    r.attained_in_limit = true;
    return r;
  }
  const auto m = golden_section_log(obj, kParamLo, kParamHi);
  r.value = m.value;
  r.minimizer = {{"delta", m.arg}};
  r.attained_in_limit = at_edge(m.arg, kParamLo, kParamHi);
  return r;
}

// ----------------------------------------------------------------------------
// Moment right-hand sides.

/// General branch: p > 1 with 1/p + 1/q = 1; k_moment = E int |kdot|^{2q}.
inline double lemma22_rhs(const GeomBounds& gb, double T, double delta, double p, double k_moment) {
  if (!(p > 1.0)) throw ValidationError("p must be > 1", "inputs.p");
  if (!(delta > 0.0)) throw ValidationError("delta must be positive", "inputs.delta");
  if (!(T > 0.0)) throw ValidationError("T must be positive", "inputs.T");
  if (!(k_moment >= 0.0)) throw ValidationError("k_moment must be >= 0", "inputs.k_moment");
  const double q = p / (p - 1.0);
  const double inner = std::pow(2 * p - 1, p) * std::pow(gb.K1, 2 * p) / (4.0 * std::pow(delta, p - 1)) +
                       std::pow(gb.K2, 2 * p) / (4.0 * std::pow(delta, 2 * p - 1));
  return std::pow(inner, 1.0 / p) * std::exp((2.0 * gb.K0_minus() + delta) * T) *
         std::pow(T, 2.0 / p) * std::pow(k_moment, 1.0 / q);
}

/// K2 = 0 branch with deterministic k: K1^2 T e^{2 K0^- T} int kdot^2.
inline double lemma22_rhs_deterministic(const GeomBounds& gb, double T, double kdot_sq_integral) {
  if (!(T > 0.0)) throw ValidationError("T must be positive", "inputs.T");
  return gb.K1 * gb.K1 * T * std::exp(2.0 * gb.K0_minus() * T) * kdot_sq_integral;
}

/// ctilde_q / (1 - e^{-ctilde_q t}) together with the cruder e^{ctilde_q t} / t.
struct Lemma34Bound {
  double value;
  double crude;
  double ctilde;
};

inline Lemma34Bound lemma34_rhs(const GeomBounds& gb, double q, double t) {
  if (!(t > 0.0)) throw ValidationError("t must be positive", "inputs.t");
  const double c = c_constants(gb, 1.0, 1.0, q).ctilde;
  const double v = c > 0.0 ? c / -std::expm1(-c * t) : 1.0 / t;
  return {v, std::exp(c * t) / t, c};
}

/// Formula dispatcher used by the CLI.
inline BoundResult evaluate_bound(const BoundInputs& in, FormulaId id) {
  BoundResult r;
  r.formula_id = id;
  switch (id) {
    case FormulaId::c1:
    case FormulaId::c2:
    case FormulaId::c3:
    case FormulaId::ctilde: {
      in.validate();
      const auto c = c_constants(in.gb, in.delta1, in.delta2, in.q);
      r.value = id == FormulaId::c1 ? c.c1 : id == FormulaId::c2 ? c.c2 : id == FormulaId::c3 ? c.c3 : c.ctilde;
      return r;
    }
    case FormulaId::EHF1:
    case FormulaId::EHF2: return harmonic_bound(in, id);
    case FormulaId::semigroup_local:
    case FormulaId::semigroup_global:
    case FormulaId::ricci_parallel: return semigroup_bound(in, id);
    case FormulaId::lemma22_rhs:
      in.validate();
      r.value = lemma22_rhs(in.gb, in.T, in.delta, in.p, in.k_moment);
      return r;
    case FormulaId::lemma34_rhs:
      in.validate();
      r.value = lemma34_rhs(in.gb, in.q, in.t).value;
      return r;
  }
  return r;
}

// ----------------------------------------------------------------------------
// Brute-force log-grid scans (independent check of the optimizers).

inline double log_grid_point(double lo, double hi, int i, int count) {
  return std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * i / (count - 1));
}

inline double grid_scan_1d(const std::function<double(double)>& fn, double lo, double hi, int count = 200) {
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < count; ++i) best = std::min(best, fn(log_grid_point(lo, hi, i, count)));
  return best;
}

inline double grid_scan_2d(const std::function<double(double, double)>& fn, std::pair<double, double> xr,
                           std::pair<double, double> yr, int count = 200) {
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < count; ++i) {
    const double x = log_grid_point(xr.first, xr.second, i, count);
    for (int j = 0; j < count; ++j)
      best = std::min(best, fn(x, log_grid_point(yr.first, yr.second, j, count)));
  }
  return best;
}

/// Grid oracle for any optimized formula, on the same brackets.
inline double bound_grid_oracle(const BoundInputs& in, FormulaId id, int count = 200) {
  switch (id) {
    case FormulaId::EHF1:
    case FormulaId::EHF2: {
      const double pre = ehf_prefactor(in, id);
      return pre * grid_scan_2d([&](double a, double b) { return ehf_objective(in.gb, id, a, b); },
                                ehf_delta1_range(id), {kParamLo, kParamHi}, count);
    }
    case FormulaId::semigroup_local:
      return grid_scan_1d([&](double d) { return semigroup_local_objective(in, d); }, kParamLo, kParamHi, count);
    case FormulaId::semigroup_global:
      return grid_scan_1d([&](double d) { return semigroup_global_objective(in, d); }, kParamLo, kParamHi,
                          count);
    default: throw ValidationError("formula has no free parameters", "formula_id");
  }
}

} // namespace bismut
