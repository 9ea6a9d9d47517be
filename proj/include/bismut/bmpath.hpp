#pragma once

#include <bismut/geometry/model.hpp>
#include <bismut/rng.hpp>

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <vector>

namespace bismut {

struct PathConfig {
  Vec start;
  double ball_radius = 1.0;
  double horizon_T = 1.0;
  double step_h = 1e-3;
  std::uint64_t seed = 0;
  std::uint64_t path_index = 0;

  /// Number of grid steps; the effective step is horizon_T / n_steps().
  std::int64_t n_steps() const {
    return std::max<std::int64_t>(1, std::llround(horizon_T / step_h));
  }
  double effective_h() const { return horizon_T / static_cast<double>(n_steps()); }

  void validate() const {
    if (!(horizon_T > 0.0) || !std::isfinite(horizon_T))
      throw ValidationError("T must be positive", "estimator.T");
    if (!(step_h > 0.0) || step_h > horizon_T)
      throw ValidationError("h must satisfy 0 < h <= T", "execution.h");
    if (!(ball_radius > 0.0)) throw ValidationError("radius must be positive", "estimator.radius");
  }
};

struct PathOptions {
  bool zero_noise = false;
  /// Keep simulating to the horizon after the first exit (exit time is still
  /// recorded at the first flagged step).
  bool continue_after_exit = false;
  bool record = false;
  /// Skip all distance evaluations: no exit, dist_to_boundary stays +inf.
  bool ignore_domain = false;
};

/// Left-point data handed to observers before each step.
struct StepView {
  std::int64_t step;
  double s;
  double h;
  const Vec& position;
  const Mat& frame;
  const Vec& db;  // anti-development increment over [s, s+h]
  double dist_to_boundary;
};

struct PathState {
  double time = 0.0;
  Vec position;
  TangentFrame frame;
  std::vector<Vec> db_increments;  // filled when PathOptions::record
  std::vector<Vec> trajectory;     // positions at grid times, when recording
  bool exited = false;
  std::optional<double> exit_time;
  Vec exit_position;
  double dist_to_boundary = 0.0;
  std::int64_t steps = 0;
  bool failed = false;  // non-finite state encountered
};

namespace detail {
struct NullObserver {
  bool operator()(const StepView&) const { return true; }
};
} // namespace detail

/// Brownian motion on the model by geodesic increments (stochastic
/// development) from cfg.start, killed at the first grid time with
/// d(start, X) >= radius unless continue_after_exit is set.
///
/// `obs(view)` is called at the left point of every step and may return
/// false to stop the path early. `start_frame` defaults to the model's
/// canonical frame at the start.
template <class Observer>
  requires std::predicate<Observer&, const StepView&>
PathState simulate_path(const PathConfig& cfg, const BallDomain& ball, Observer&& obs,
                        const PathOptions& opt = {}, const Mat* start_frame = nullptr) {
  const auto& m = *ball.model();
  const int n = m.dim();
  const std::int64_t steps = cfg.n_steps();
  const double h = cfg.effective_h();
  const double sqrt_h = std::sqrt(h);
  NormalStream stream(cfg.seed, cfg.path_index);

  PathState st;
  st.position = cfg.start;
  Mat frame = start_frame ? *start_frame : m.canonical_frame(cfg.start);
  Vec db(n);
  double normals[kMaxAmbient];
  double dist = opt.ignore_domain ? std::numeric_limits<double>::infinity()
                                   : ball.dist_to_boundary(st.position);
  if (opt.record) st.trajectory.push_back(st.position);

  for (std::int64_t k = 0; k < steps; ++k) {
    if (opt.zero_noise) {
      db.setZero();
    } else {
      stream.fill(static_cast<std::uint64_t>(k), std::span<double>(normals, n));
      for (int i = 0; i < n; ++i) db(i) = sqrt_h * normals[i];
    }
    const double s = k * h;
    if (!obs(StepView{k, s, h, st.position, frame, db, dist})) {
      st.time = s;
      st.steps = k;
      break;
    }
    if (opt.record) st.db_increments.push_back(db);
    m.develop(st.position, frame, Vec(frame * db));
    st.time = (k + 1) * h;
    st.steps = k + 1;
    if (!st.position.allFinite() || !frame.allFinite()) {
      st.failed = true;
      break;
    }
    if (!opt.ignore_domain) dist = ball.dist_to_boundary(st.position);
    if (opt.record) st.trajectory.push_back(st.position);
    if (!st.exited && !(dist > 0.0)) {
      st.exited = true;
      st.exit_time = st.time;
      st.exit_position = st.position;
      if (!opt.continue_after_exit) break;
    }
  }
  st.frame = {st.position, frame};
  st.dist_to_boundary = dist;
  return st;
}

inline PathState simulate_path(const PathConfig& cfg, const BallDomain& ball,
                               const PathOptions& opt = {}) {
  return simulate_path(cfg, ball, detail::NullObserver{}, opt);
}

/// Observer-list form: callbacks receive (s, position, frame, dB).
using StepCallback = std::function<void(double, const Vec&, const Mat&, const Vec&)>;

inline PathState simulate_path(const PathConfig& cfg, const BallDomain& ball,
                               const std::vector<StepCallback>& observers,
                               const PathOptions& opt = {}) {
  return simulate_path(
      cfg, ball,
      [&](const StepView& v) {
        for (const auto& cb : observers) cb(v.s, v.position, v.frame, v.db);
        return true;
      },
      opt);
}

/// Grid clock {(s_k, T(s_k))}: T(s) = int_0^s f^{-2}(X_r) dr by the
/// left-point rule, plus the path's horizon.
struct OccupationClock {
  std::vector<double> s;
  std::vector<double> t;
};

/// `path` must have been simulated with PathOptions::record.
template <class F>
OccupationClock occupation_clock(const PathState& path, double h, F&& f) {
  if (path.trajectory.empty()) throw ValidationError("occupation_clock needs a recorded path");
  OccupationClock c;
  c.s.reserve(path.trajectory.size());
  c.t.reserve(path.trajectory.size());
  c.s.push_back(0.0);
  c.t.push_back(0.0);
  for (std::size_t k = 0; k + 1 < path.trajectory.size(); ++k) {
    const double fv = f(path.trajectory[k]);
    if (!(fv > 0.0)) throw ValidationError("cutoff f must be positive inside the domain");
    c.s.push_back((k + 1) * h);
    c.t.push_back(c.t.back() + h / (fv * fv));
  }
  return c;
}

struct InverseClockResult {
  double s;
  bool reached;  // false: t lies beyond the clock's final value
};

/// tau(t): first grid time s with T(s) >= t.
inline InverseClockResult inverse_clock(const OccupationClock& clock, double t) {
  if (t < 0.0) throw ValidationError("inverse_clock requires t >= 0");
  const auto it = std::lower_bound(clock.t.begin(), clock.t.end(), t);
  if (it == clock.t.end()) return {clock.s.back(), false};
  return {clock.s[static_cast<std::size_t>(it - clock.t.begin())], true};
}

} // namespace bismut
