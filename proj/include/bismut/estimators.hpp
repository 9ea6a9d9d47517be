#pragma once

#include <bismut/bmpath.hpp>
#include <bismut/bounds.hpp>
#include <bismut/controls.hpp>
#include <bismut/montecarlo.hpp>
#include <bismut/oracle.hpp>
#include <bismut/test_functions.hpp>
#include <bismut/transport.hpp>

#include <cmath>
#include <memory>
#include <string>
#include <vector>

namespace bismut {

enum class HessianVariant { three_term, iterated };
enum class HarmonicMode { interior_eval, exit_eval };

/// Shared inputs of the path-space estimators. `v`, `w` are given in the
/// coordinates of the ball's center frame.
struct EstimatorSetup {
  std::shared_ptr<const BallDomain> ball;
  double T = 1.0;  // semigroup time; harmonic estimators use it as the simulation cap
  KSpec k;
  ExecutionConfig exec;
};

namespace detail {

inline void require_unit(const Vec& v, int n, const char* field) {
  if (v.size() != n) throw ValidationError("tangent vector has wrong dimension", field);
  if (!v.allFinite() || std::abs(v.norm() - 1.0) > 1e-9)
    throw ValidationError("tangent vector must have unit length", field);
}

inline void validate_setup(const EstimatorSetup& s) {
  if (!s.ball) throw ValidationError("estimator needs a domain", "estimator.radius");
  if (!(s.T > 0.0) || !std::isfinite(s.T)) throw ValidationError("T must be positive", "estimator.T");
  s.exec.validate();
  if (s.exec.h > s.T) throw ValidationError("h must not exceed T", "execution.h");
  const auto gb = geom_bounds(*s.ball);
  const double scale = 1.0 + std::abs(gb.K0) + gb.K1 + gb.K2;
  if (s.exec.h * scale > 0.05)
    throw ValidationError("h is too large for the curvature scale of the domain", "execution.h");
  s.k.validate();
}

/// Outcome of the transported part of a path.
struct TransportRun {
  PathState path;
  bool exited_while_active = false;
  bool clock_not_reached = false;
};

/// Runs one path, calling `step(lc, ksample, view)` while k is active and
/// the path is inside the domain. With `to_horizon` the path continues to
/// cfg.horizon_T after the transport stops (for f(X_T)); otherwise it stops
/// at exit, or once k is done when `stop_when_done` is set.
template <class Step>
TransportRun transport_path(const BallDomain& ball, const PathConfig& cfg, KProcess& k, bool to_horizon,
                            bool stop_when_done, Step&& step) {
  const auto& m = *ball.model();
  TransportRun run;
  bool active = true;
  const bool timechange = k.spec().kind == KKind::timechange;
  const double k_end = k.spec().T;
  k.reset();
  PathOptions opt;
  opt.continue_after_exit = to_horizon;
  run.path = simulate_path(
      cfg, ball,
      [&](const StepView& sv) {
        if (active) {
          if (!(sv.dist_to_boundary > 0.0)) {
            active = false;
            run.exited_while_active = true;
          } else if (timechange ? k.clock_reached() : sv.s >= k_end) {
            active = false;
          }
        }
        if (!active) return to_horizon || !stop_when_done;
        const KSample ks = k.next(sv.s, sv.h, sv.position);
        step(m.curvature(sv.position, sv.frame), ks, sv);
        return true;
      },
      opt, &ball.center_frame());
  if (timechange && !k.clock_reached()) run.clock_not_reached = true;
  return run;
}

inline PathConfig path_config(const EstimatorSetup& s, std::uint64_t index) {
  PathConfig c;
  c.start = s.ball->center();
  c.ball_radius = s.ball->radius();
  c.horizon_T = s.T;
  c.step_h = s.exec.h;
  c.seed = s.exec.seed;
  c.path_index = index;
  return c;
}

inline std::unique_ptr<CutoffF> make_cutoff(const EstimatorSetup& s) {
  return std::make_unique<CutoffF>(s.ball);
}

inline void validate_heat_k(const EstimatorSetup& s, KOrientation want) {
  if (s.k.orientation != want)
    throw ValidationError(want == KOrientation::one_to_zero
                              ? "Hessian estimators need k decreasing from 1 to 0 (one_to_zero)"
                              : "the gradient estimator needs k increasing from 0 to 1 (zero_to_one)",
                          "estimator.k.orientation");
  if (s.k.kind == KKind::timechange) {
    if (s.k.t_horizon > s.T * (1 + 1e-12))
      throw ValidationError("k.t_horizon must not exceed T", "estimator.k.t_horizon");
  } else if (s.k.T > s.T * (1 + 1e-12)) {
    throw ValidationError("k support end must not exceed T", "estimator.k.T");
  }
}

inline PathOutcome outcome(const TransportRun& r, bool finite) {
  PathOutcome o;
  o.ok = finite && !r.path.failed;
  o.exited_early = r.exited_while_active;
  o.clock_not_reached = r.clock_not_reached;
  return o;
}

} // namespace detail

/// <grad P_T f, v> = E[f(X_T) int kdot <Q_s v, dB>] with k rising from 0 to 1.
inline Estimate estimate_gradient(const EstimatorSetup& s, const TestFunction& f, const Vec& v) {
  detail::validate_setup(s);
  detail::require_unit(v, s.ball->model().dim(), "estimator.v");
  detail::validate_heat_k(s, KOrientation::zero_to_one);
  const auto cutoff = detail::make_cutoff(s);
  return run_monte_carlo_scalar(s.exec, [&](std::uint64_t i, double& out) {
    KProcess k(s.k, cutoff.get());
    auto st = TransportState::start(v);
    const auto run = detail::transport_path(*s.ball, detail::path_config(s, i), k, true, false,
                                            [&](const LocalCurvature& lc, const KSample& ks, const StepView& sv) {
                                              accumulate_integrals(st, ks.k_dot, sv.db, sv.h);
                                              step_Q(st, lc.ricci_factor(), sv.h);
                                            });
    out = f(run.path.position) * st.I_Q;
    return detail::outcome(run, std::isfinite(out));
  });
}

/// (Hess P_T f)(v, v) by the three-term or the iterated-integral formula.
inline Estimate estimate_hessian_vv(const EstimatorSetup& s, const TestFunction& f, const Vec& v,
                                    HessianVariant variant = HessianVariant::three_term) {
  detail::validate_setup(s);
  detail::require_unit(v, s.ball->model().dim(), "estimator.v");
  detail::validate_heat_k(s, KOrientation::one_to_zero);
  const auto cutoff = detail::make_cutoff(s);
  return run_monte_carlo_scalar(s.exec, [&](std::uint64_t i, double& out) {
    KProcess k(s.k, cutoff.get());
    auto st = TransportState::start(v);
    const auto run = detail::transport_path(*s.ball, detail::path_config(s, i), k, true, false,
                                            [&](const LocalCurvature& lc, const KSample& ks, const StepView& sv) {
                                              advance(st, lc, ks.k, ks.k_dot, sv.db, sv.h);
                                            });
    const double w = variant == HessianVariant::three_term ? three_term_weight(st) : iterated_weight(st);
    out = f(run.path.position) * w;
    return detail::outcome(run, std::isfinite(out));
  });
}

/// Polarized (Hess P_T f)(v, w); (v, w) and (w, v) run the same computation.
inline Estimate estimate_hessian_vw(const EstimatorSetup& s, const TestFunction& f, const Vec& v, const Vec& w) {
  detail::validate_setup(s);
  detail::require_unit(v, s.ball->model().dim(), "estimator.v");
  detail::require_unit(w, s.ball->model().dim(), "estimator.w");
  detail::validate_heat_k(s, KOrientation::one_to_zero);
  const auto cutoff = detail::make_cutoff(s);
  return run_monte_carlo_scalar(s.exec, [&](std::uint64_t i, double& out) {
    KProcess k(s.k, cutoff.get());
    auto st = PolarizedTransportState::start(v, w);
    const auto run = detail::transport_path(*s.ball, detail::path_config(s, i), k, true, false,
                                            [&](const LocalCurvature& lc, const KSample& ks, const StepView& sv) {
                                              st.advance(lc, ks.k, ks.k_dot, sv.db, sv.h);
                                            });
    out = f(run.path.position) * st.weight();
    return detail::outcome(run, std::isfinite(out));
  });
}

/// Largest |Delta u| accepted by the harmonic estimator.
inline constexpr double kHarmonicTolerance = 1e-6;

/// (Hess u)(v, v) for u harmonic on the ball, with a timechange k.
///
/// interior_eval evaluates u where the clock reaches t_horizon; exit_eval
/// runs on to the first exit and evaluates u there (projected onto the
/// sphere for euclidean balls). Paths that leave before the clock is reached
/// use the exit point and are counted in clock_not_reached. `s.T` caps the
/// simulated time.
inline Estimate estimate_harmonic_hessian(const EstimatorSetup& s, const TestFunction& u, const Vec& v,
                                          HarmonicMode mode, double harmonic_tolerance = kHarmonicTolerance) {
  detail::validate_setup(s);
  detail::require_unit(v, s.ball->model().dim(), "estimator.v");
  if (s.k.kind != KKind::timechange)
    throw ValidationError("the harmonic estimator needs a timechange k", "estimator.k.kind");
  const double lap = max_abs_laplacian(s.ball->model(), u, *s.ball);
  if (!(lap <= harmonic_tolerance))
    throw ValidationError("u is not harmonic on the domain (max |Laplacian| = " + std::to_string(lap) + ")",
                          "estimator.f");
  const auto cutoff = detail::make_cutoff(s);
  const bool euclid = s.ball->model().kind() == ModelKind::euclidean;
  auto project = [&](const Vec& y) {
    if (!euclid) return y;
    const Vec d = y - s.ball->center();
    const double r = d.norm();
    return r > s.ball->radius() ? Vec(s.ball->center() + s.ball->radius() / r * d) : y;
  };
  return run_monte_carlo_scalar(s.exec, [&](std::uint64_t i, double& out) {
    KProcess k(s.k, cutoff.get());
    auto st = TransportState::start(v);
    const bool stop_at_clock = mode == HarmonicMode::interior_eval;
    const auto run = detail::transport_path(*s.ball, detail::path_config(s, i), k, false, stop_at_clock,
                                            [&](const LocalCurvature& lc, const KSample& ks, const StepView& sv) {
                                              advance(st, lc, ks.k, ks.k_dot, sv.db, sv.h);
                                            });
    const Vec& y = run.path.exited ? run.path.exit_position : run.path.position;
    out = u(project(y)) * three_term_weight(st);
    PathOutcome o = detail::outcome(run, std::isfinite(out));
    o.exited_early = false;
    if (mode == HarmonicMode::exit_eval && !run.path.exited) o.clock_not_reached = true;
    return o;
  });
}

// ----------------------------------------------------------------------------
// Martingale drift of the five-term process.

struct DriftRow {
  double t;
  double mean;
  double stderr_;
};

struct DriftTable {
  double reference = 0.0;  // (Hess P_T f)(v, v) at x from the oracle
  std::vector<DriftRow> rows;
  std::vector<Estimate> estimates;
  bool passed(double nsigma = 3.0) const {
    for (const auto& r : rows)
      if (!(std::abs(r.mean - reference) <= nsigma * r.stderr_ + 1e-12)) return false;
    return true;
  }
};

/// Evaluates the five-term local-martingale process at the
/// grid times (rounded to the path grid) using exact P_{T-t} f jets. Paths
/// that leave the ball freeze the process at the exit time (optional
/// stopping keeps the mean).
inline DriftTable martingale_drift_test(const EstimatorSetup& s, const TestFunction& f, const Vec& v,
                                        const std::vector<double>& grid) {
  detail::validate_setup(s);
  const auto& model = s.ball->model();
  detail::require_unit(v, model.dim(), "estimator.v");
  detail::validate_heat_k(s, KOrientation::one_to_zero);
  if (s.k.kind == KKind::timechange)
    throw ValidationError("the drift test needs a deterministic k", "estimator.k.kind");
  if (!has_exact_heat(model, f))
    throw ValidationError("the drift test needs an exact semigroup oracle (euclidean families or sphere linear)",
                          "estimator.f.kind");
  if (grid.empty()) throw ValidationError("grid must not be empty", "estimator.grid");
  const PathConfig base = detail::path_config(s, 0);
  const double h = base.effective_h();
  std::vector<std::int64_t> idx;
  DriftTable table;
  for (double t : grid) {
    if (!(t > 0.0 && t < s.T)) throw ValidationError("grid times must lie in (0, T)", "estimator.grid");
    idx.push_back(std::llround(t / h));
    table.rows.push_back({static_cast<double>(idx.back()) * h, 0.0, 0.0});
  }
  const auto& x = s.ball->center();
  const auto j0 = exact_heat(model, f, x, s.ball->center_frame(), s.T);
  table.reference = v.dot(j0.hess * v);

  const std::size_t cols = grid.size();
  table.estimates = run_monte_carlo(s.exec, cols, [&](std::uint64_t i, std::span<double> out) {
    KProcess k(s.k);
    auto st = TransportState::start(v);
    std::size_t next = 0;
    auto m_value = [&](const StepView& sv, double kval) {
      const auto jet = exact_heat(model, f, sv.position, sv.frame, s.T - sv.s);
      const Vec qv = st.Qv();
      return kval * kval * qv.dot(jet.hess * qv) + kval * jet.grad.dot(st.Wvv) -
             2.0 * kval * jet.grad.dot(qv) * st.I_Q - jet.value * st.I_W +
             jet.value * (st.I_Q * st.I_Q - st.I_QQ);
    };
    const auto& m = *model;
    const PathConfig pc = detail::path_config(s, i);
    const auto path = simulate_path(
        pc, *s.ball,
        [&](const StepView& sv) {
          const double kval = k.value_at(sv.s);
          if (!(sv.dist_to_boundary > 0.0)) {
            const double mv = m_value(sv, kval);
            for (; next < cols; ++next) out[next] = mv;
            return false;
          }
          while (next < cols && idx[next] == sv.step) out[next++] = m_value(sv, kval);
          if (next == cols) return false;
          const KSample ks = k.next(sv.s, sv.h, sv.position);
          advance(st, m.curvature(sv.position, sv.frame), ks.k, ks.k_dot, sv.db, sv.h);
          return true;
        },
        PathOptions{.continue_after_exit = true}, &s.ball->center_frame());
    PathOutcome o;
    o.ok = !path.failed && next == cols;
    return o;
  });
  for (std::size_t j = 0; j < cols; ++j) {
    table.rows[j].mean = table.estimates[j].value;
    table.rows[j].stderr_ = table.estimates[j].stderr_;
  }
  return table;
}

// ----------------------------------------------------------------------------
// Moments of the timechange k.

struct KMomentResult {
  Estimate mc;
  double bound;  // ctilde_q / (1 - e^{-ctilde_q t})
  double crude;  // e^{ctilde_q t} / t
  double lambda;
};

/// MC estimate of E int_0^{t ^ tau_D} |kdot|^{2q} ds for the timechange k with
/// profile rate lambda (default: ctilde_q of the ball), and the closed-form bound.
inline KMomentResult k_moment_check(const EstimatorSetup& s, double q, double t, double lambda = -1.0) {
  if (q < 1.0) throw ValidationError("q must be >= 1", "estimator.q");
  const auto gb = geom_bounds(*s.ball);
  const auto b = lemma34_rhs(gb, q, t);
  EstimatorSetup run = s;
  run.k = k_timechange(lambda >= 0.0 ? lambda : b.ctilde, t);
  run.T = t + 2.0 * s.exec.h;
  detail::validate_setup(run);
  const auto cutoff = detail::make_cutoff(run);
  KMomentResult r;
  r.bound = b.value;
  r.crude = b.crude;
  r.lambda = run.k.lambda;
  r.mc = run_monte_carlo_scalar(run.exec, [&](std::uint64_t i, double& out) {
    KProcess k(run.k, cutoff.get());
    double acc = 0.0;
    const auto tr = detail::transport_path(*run.ball, detail::path_config(run, i), k, false, true,
                                           [&](const LocalCurvature&, const KSample& ks, const StepView& sv) {
                                             acc += std::pow(std::abs(ks.k_dot), 2.0 * q) * sv.h;
                                           });
    out = acc;
    return detail::outcome(tr, std::isfinite(out));
  });
  return r;
}

/// E int_0^{T ^ tau_D} kdot^2 |W^k(v, v)|^2 ds.
inline Estimate w_moment(const EstimatorSetup& s, const Vec& v) {
  detail::validate_setup(s);
  detail::require_unit(v, s.ball->model().dim(), "estimator.v");
  const auto cutoff = detail::make_cutoff(s);
  return run_monte_carlo_scalar(s.exec, [&](std::uint64_t i, double& out) {
    KProcess k(s.k, cutoff.get());
    auto st = TransportState::start(v);
    const auto run = detail::transport_path(*s.ball, detail::path_config(s, i), k, false, false,
                                            [&](const LocalCurvature& lc, const KSample& ks, const StepView& sv) {
                                              advance(st, lc, ks.k, ks.k_dot, sv.db, sv.h);
                                            });
    out = st.I_WW;
    return detail::outcome(run, std::isfinite(out));
  });
}

} // namespace bismut
