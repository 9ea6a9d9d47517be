#pragma once

#include <bismut/config.hpp>
#include <bismut/geometry/curvature.hpp>

#include <chrono>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <vector>

namespace bismut::verify {

using json = nlohmann::json;

enum class Suite { quick, full };

inline Suite suite_from_string(const std::string& s) {
  if (s == "quick") return Suite::quick;
  if (s == "full") return Suite::full;
  throw ValidationError("suite must be quick or full", "suite");
}

struct CheckResult {
  int id = 0;
  std::string name;
  bool passed = false;
  std::string detail;
  json metrics = json::object();
  double seconds = 0.0;
};

inline CheckResult named(int id, std::string name) {
  CheckResult r;
  r.id = id;
  r.name = std::move(name);
  return r;
}

namespace detail {

inline constexpr double kPi = std::numbers::pi;

inline std::uint64_t budget(Suite s, std::uint64_t full) {
  return s == Suite::full ? full : std::max<std::uint64_t>(full / 20, 2000);
}

inline std::string fmt(double x) { return config::format_number(x); }

inline bool within(const Estimate& e, double exact, double nsigma = 3.0) {
  return std::abs(e.value - exact) <= nsigma * e.stderr_;
}

inline json est(const Estimate& e) { return {{"value", e.value}, {"stderr", e.stderr_}, {"n_paths", e.n_paths}}; }

inline std::shared_ptr<BallDomain> ball(const ManifoldModel& m, const Vec& x, double r) {
  return std::make_shared<BallDomain>(m, x, r);
}

inline PathConfig path(const Vec& x, double radius, double T, double h, std::uint64_t seed, std::uint64_t idx) {
  PathConfig c;
  c.start = x;
  c.ball_radius = radius;
  c.horizon_T = T;
  c.step_h = h;
  c.seed = seed;
  c.path_index = idx;
  return c;
}

const Vec e1 = make_vec({1.0, 0.0});

inline const char* const kConformalPhi = "0.15*(x*x + y*y) + 0.1*sin(x)*y";

inline Vec random_point(const ManifoldModel& model, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> ud(-1.0, 1.0);
  const auto& m = *model;
  if (model.kind() == ModelKind::conformal_plane) return make_vec({ud(rng), ud(rng)});
  const Vec p0 = m.base_point();
  const Mat e = m.canonical_frame(p0);
  Vec w(m.dim());
  for (int i = 0; i < m.dim(); ++i) w(i) = 0.8 * ud(rng);
  return m.retract(m.exp_step(p0, Vec(e * w)));
}

} // namespace detail

// ----------------------------------------------------------------------------

inline CheckResult euclidean_hessian(Suite suite) {
  auto r = named(1, "euclidean Hessian exactness");
  EstimatorSetup s;
  s.ball = detail::ball(ManifoldModel::euclidean(2), Vec::Zero(2), 4.0);
  s.T = 1.0;
  s.k = k_linear(1.0);
  s.exec.n_paths = detail::budget(suite, 200000);
  s.exec.h = 1e-3;
  s.exec.seed = 1;
  const auto t0 = std::chrono::steady_clock::now();
  const auto e = estimate_hessian_vv(s, TestFunction::gaussian_bump(Vec::Zero(2), 1.0), detail::e1);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const double rel = std::abs(e.value + 0.25) / 0.25;
  r.passed = detail::within(e, -0.25) && rel <= 0.05 && secs <= 180.0;
  r.metrics = {{"estimate", detail::est(e)}, {"exact", -0.25}, {"relative_error", rel}, {"wall_seconds", secs}};
  r.detail = "estimate " + detail::fmt(e.value) + " +- " + detail::fmt(e.stderr_) + " vs -0.25, rel " +
             detail::fmt(rel) + ", " + detail::fmt(secs) + " s";
  return r;
}

inline CheckResult flat_degeneracy(Suite suite) {
  auto r = named(2, "flat degeneracy");
  const std::uint64_t paths = suite == Suite::full ? 2000 : 200;
  std::uint64_t bad = 0, steps = 0;
  for (int n : {2, 3}) {
    const auto model = ManifoldModel::euclidean(n);
    const BallDomain b(model, Vec::Zero(n), 3.0);
    const Mat I = Mat::Identity(n, n);
    for (std::uint64_t i = 0; i < paths; ++i) {
      auto st = TransportState::start(Vec::Unit(n, 0));
      KProcess k(k_linear(1.0));
      simulate_path(detail::path(b.center(), 3.0, 1.0, 1e-3, 2, i), b, [&](const StepView& sv) {
        const auto ks = k.next(sv.s, sv.h, sv.position);
        advance(st, model->curvature(sv.position, sv.frame), ks.k, ks.k_dot, sv.db, sv.h);
        ++steps;
        if (st.Q != I || st.Wvv != Vec::Zero(n) || st.I_W != 0.0) ++bad;
        return true;
      });
    }
  }
  r.passed = bad == 0 && steps > 0;
  r.metrics = {{"steps_checked", steps}, {"nonzero_steps", bad}};
  r.detail = std::to_string(steps) + " steps, " + std::to_string(bad) + " with Q != Id or W != 0";
  return r;
}

inline CheckResult constant_curvature_transport(Suite suite) {
  auto r = named(3, "constant-curvature transport");
  const std::uint64_t paths = suite == Suite::full ? 4 : 1;
  double worst = 0.0;
  struct Case {
    ManifoldModel model;
    double sign;
  };
  for (const auto& c : {Case{ManifoldModel::sphere(2, 1.0), -1.0}, Case{ManifoldModel::hyperbolic(2, -1.0), 1.0}}) {
    const Vec x = c.model->base_point();
    const BallDomain b(c.model, x, 1.0);
    const Mat want = std::exp(0.5 * c.sign) * Mat::Identity(2, 2);
    for (std::uint64_t i = 0; i < paths; ++i) {
      auto st = TransportState::start(detail::e1);
      simulate_path(
          detail::path(x, 1.0, 1.0, 1e-4, 3, i), b,
          [&](const StepView& sv) {
            step_Q(st, curvature_at(c.model, TangentFrame{sv.position, sv.frame}).ricci, sv.h);
            return true;
          },
          PathOptions{.continue_after_exit = true});
      worst = std::max(worst, (st.Q - want).cwiseAbs().maxCoeff());
    }
  }
  r.passed = worst <= 1e-6;
  r.metrics = {{"max_abs_error", worst}};
  r.detail = "max |Q(1) - exp(-+1/2) Id| = " + detail::fmt(worst);
  return r;
}

inline CheckResult martingale_drift(Suite suite) {
  auto r = named(4, "martingale drift");
  EstimatorSetup s;
  s.ball = detail::ball(ManifoldModel::euclidean(2), make_vec({0.5, 0.0}), 5.0);
  s.T = 1.0;
  s.k = k_linear(1.0);
  s.exec.n_paths = detail::budget(suite, 100000);
  s.exec.h = 1e-3;
  s.exec.seed = 4;
  const auto t0 = std::chrono::steady_clock::now();
  const auto table = martingale_drift_test(s, TestFunction::gaussian_bump(Vec::Zero(2), 1.0), detail::e1,
                                           {0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8});
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  double worst_z = 0.0;
  json rows = json::array();
  for (const auto& row : table.rows) {
    worst_z = std::max(worst_z, std::abs(row.mean - table.reference) / row.stderr_);
    rows.push_back({{"t", row.t}, {"mean", row.mean}, {"stderr", row.stderr_}});
  }
  r.passed = table.passed() && secs <= 300.0;
  r.metrics = {{"reference", table.reference}, {"rows", rows}, {"max_z", worst_z}, {"wall_seconds", secs}};
  r.detail = "reference " + detail::fmt(table.reference) + ", worst |z| " + detail::fmt(worst_z) + " over " +
             std::to_string(table.rows.size()) + " grid times, " + detail::fmt(secs) + " s";
  return r;
}

inline CheckResult ito_isometry(Suite suite) {
  auto r = named(5, "Ito isometry");
  bool ok = true;
  std::string summary;
  for (const auto& model : {ManifoldModel::euclidean(2), ManifoldModel::sphere(2, 1.0)}) {
    const Vec x = model->base_point();
    const BallDomain b(model, x, 2.0);
    ExecutionConfig ex;
    ex.n_paths = detail::budget(suite, 100000);
    ex.seed = 5;
    const auto e = run_monte_carlo_scalar(ex, [&](std::uint64_t i, double& out) {
      auto st = TransportState::start(detail::e1);
      KProcess k(k_linear(1.0));
      simulate_path(detail::path(x, 2.0, 1.0, 1e-3, 5, i), b, [&](const StepView& sv) {
        const auto ks = k.next(sv.s, sv.h, sv.position);
        advance(st, model->curvature(sv.position, sv.frame), ks.k, ks.k_dot, sv.db, sv.h);
        return true;
      });
      out = st.I_Q * st.I_Q - st.I_QQ;
      return PathOutcome{};
    });
    ok = ok && detail::within(e, 0.0);
    r.metrics[to_string(model.kind())] = detail::est(e);
    summary += std::string(summary.empty() ? "" : "; ") + to_string(model.kind()) + " " + detail::fmt(e.value) +
              " +- " + detail::fmt(e.stderr_);
  }
  r.passed = ok;
  r.detail = "mean(I_Q^2 - I_QQ): " + summary;
  return r;
}

inline CheckResult lemma22_bound(Suite suite) {
  auto r = named(6, "second-order transport moment bound");
  EstimatorSetup s;
  const auto model = ManifoldModel::sphere(2, 1.0);
  s.ball = detail::ball(model, model->base_point(), 3.0);
  s.T = 1.0;
  s.k = k_linear(1.0);
  s.exec.n_paths = detail::budget(suite, 100000);
  s.exec.h = 1e-3;
  s.exec.seed = 6;
  const auto m = w_moment(s, detail::e1);
  const double rhs = lemma22_rhs_deterministic(geom_bounds(*s.ball), 1.0, 1.0);
  r.passed = m.value <= rhs + 3 * m.stderr_;
  r.metrics = {{"moment", detail::est(m)}, {"rhs", rhs}};
  r.detail = "E int |W(v, kdot v)|^2 = " + detail::fmt(m.value) + " +- " + detail::fmt(m.stderr_) + " <= " +
             detail::fmt(rhs);
  return r;
}

inline CheckResult harmonic_hessian(Suite suite) {
  auto r = named(7, "harmonic Hessian");
  EstimatorSetup s;
  const auto model = ManifoldModel::euclidean(2);
  s.ball = detail::ball(model, Vec::Zero(2), 1.0);
  s.T = 50.0;
  s.k = k_timechange(0.0, 0.5);
  s.exec.n_paths = detail::budget(suite, 200000);
  s.exec.h = 1e-3;
  s.exec.seed = 7;
  const auto hc = harmonic_library(model, "saddle", *s.ball);
  const auto in = estimate_harmonic_hessian(s, hc.u, detail::e1, HarmonicMode::interior_eval);
  const auto ex = estimate_harmonic_hessian(s, hc.u, detail::e1, HarmonicMode::exit_eval);
  const double comb = std::hypot(in.stderr_, ex.stderr_);
  r.passed = detail::within(in, 2.0) && std::abs(in.value - ex.value) <= 3 * comb;
  r.metrics = {{"interior_eval", detail::est(in)}, {"exit_eval", detail::est(ex)}, {"exact", 2.0}};
  r.detail = "interior " + detail::fmt(in.value) + " +- " + detail::fmt(in.stderr_) + ", exit " +
             detail::fmt(ex.value) + " +- " + detail::fmt(ex.stderr_) + " vs 2";
  return r;
}

inline CheckResult bound_dominance(Suite suite) {
  auto r = named(8, "bound dominance");
  const auto model = ManifoldModel::sphere(2, 1.0);
  EstimatorSetup s;
  s.ball = detail::ball(model, model->base_point(), detail::kPi / 4);
  s.T = 0.5;
  s.k = k_timechange(0.0, 0.5);
  s.exec.n_paths = detail::budget(suite, 20000);
  s.exec.h = 1e-3;
  s.exec.seed = 8;
  const auto e = estimate_hessian_vv(s, TestFunction::linear(make_vec({0.0, 0.0, 1.0})), detail::e1);
  BoundInputs in;
  in.gb = geom_bounds(*s.ball);
  in.T = 0.5;
  in.sup_f = 1.0;
  const double local = semigroup_bound(in, FormulaId::semigroup_local).value;

  BoundInputs hin;
  hin.gb = geom_bounds(BallDomain(ManifoldModel::euclidean(2), Vec::Zero(2), 1.0));
  hin.sup_u = 4.0;
  hin.u_at_x = 3.0;
  const double ehf1 = harmonic_bound(hin, FormulaId::EHF1).value;
  const double ehf2 = harmonic_bound(hin, FormulaId::EHF2).value;
  r.passed = std::abs(e.value) - 3 * e.stderr_ <= local && ehf1 >= 2.0 && ehf2 >= 2.0;
  r.metrics = {{"sphere_estimate", detail::est(e)}, {"semigroup_local", local}, {"EHF1", ehf1}, {"EHF2", ehf2}};
  r.detail = "|" + detail::fmt(e.value) + "| - 3se <= " + detail::fmt(local) + "; EHF1 " + detail::fmt(ehf1) +
             ", EHF2 " + detail::fmt(ehf2) + " >= 2";
  return r;
}

inline CheckResult optimizer_oracle(Suite suite) {
  auto r = named(9, "optimizer oracle");
  std::mt19937_64 gen(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int trials = suite == Suite::full ? 6 : 2;
  double worst = -std::numeric_limits<double>::infinity();
  int bad = 0;
  for (int trial = 0; trial < trials; ++trial) {
    BoundInputs in;
    in.gb.n = 2 + trial % 3;
    in.gb.K0 = -2 + 4 * u(gen);
    in.gb.K1 = 2 * u(gen);
    in.gb.K2 = 0.1 + 2 * u(gen);
    in.gb.delta_x = 0.3 + 2 * u(gen);
    in.T = 0.2 + u(gen);
    in.sup_u = 3.0;
    in.u_at_x = 2.0;
    for (auto id : {FormulaId::EHF1, FormulaId::EHF2, FormulaId::semigroup_local, FormulaId::semigroup_global}) {
      const double opt = evaluate_bound(in, id).value;
      const double grid = bound_grid_oracle(in, id);
      const double excess = (opt - grid) / opt;
      worst = std::max(worst, excess);
      if (!(excess <= 1e-6)) ++bad;
    }
  }
  BoundInputs lim;
  lim.gb.n = 2;
  lim.gb.delta_x = 1.0;
  lim.sup_u = 4.0;
  lim.u_at_x = 3.0;
  const double ehf1 = harmonic_bound(lim, FormulaId::EHF1).value;
  const double closed = std::sqrt(6.0) * (7 * detail::kPi * detail::kPi / 4) * std::sqrt(12.0);
  const double rel = std::abs(ehf1 / closed - 1.0);
  r.passed = bad == 0 && rel <= 1e-4 && std::abs(ehf1 / 146.556 - 1.0) <= 1e-4;
  r.metrics = {{"worst_excess_over_grid", worst}, {"violations", bad}, {"ehf1_limit", ehf1}, {"closed_form", closed}};
  r.detail = "max (opt - grid)/opt " + detail::fmt(worst) + ", EHF1 limit " + detail::fmt(ehf1) + " vs " +
             detail::fmt(closed);
  return r;
}

inline CheckResult constants(Suite) {
  auto r = named(10, "constants");
  GeomBounds a;
  a.n = 2;
  a.delta_x = 1.0;
  GeomBounds b;
  b.n = 3;
  b.K0 = -1.0;
  b.K1 = 1.0;
  b.delta_x = 2.0;
  const double ct = c_constants(a, 0.25, 1.0, 1.0).ctilde;
  const double c3 = c_constants(b, 0.25, 1.0, 1.0).c3;
  const double c3_closed = 1.0 + detail::kPi * std::sqrt(2.0) / 4 + 6 * detail::kPi * detail::kPi / 16;
  r.passed = std::abs(ct - 12.3370) <= 5e-5 && std::abs(c3 - 5.8118) <= 5e-5 && std::abs(c3 / c3_closed - 1) <= 5e-6;
  r.metrics = {{"ctilde", ct}, {"c3", c3}};
  r.detail = "ctilde " + detail::fmt(ct) + " (12.3370), c3 " + detail::fmt(c3) + " (5.8118)";
  return r;
}

inline json with_paths(json cfg, std::uint64_t n_paths) {
  cfg["execution"]["n_paths"] = n_paths;
  return cfg;
}

inline json determinism_config(std::uint64_t n_paths) {
  return with_paths(json::parse(R"({
    "model": {"kind": "sphere", "n": 2, "kappa": 1.0},
    "estimator": {"kind": "hessian_vv", "T": 0.5, "radius": 2.5, "v": [1.0, 0.0],
                  "f": {"kind": "linear", "a": [0.0, 0.3, 1.0]}},
    "execution": {"h": 2e-3, "seed": 11, "chunk_size": 256}
  })"), n_paths);
}

inline CheckResult determinism(Suite suite) {
  auto r = named(11, "determinism");
  const std::uint64_t n = suite == Suite::full ? 20000 : 4000;
  const json harmonic = with_paths(json::parse(R"({
    "model": {"kind": "euclidean", "n": 2},
    "estimator": {"kind": "harmonic_hessian", "T": 20, "radius": 1.0, "v": [1.0, 0.0],
                  "f": {"kind": "harmonic", "id": "saddle"},
                  "k": {"kind": "timechange", "t_horizon": 0.5}},
    "execution": {"h": 2e-3, "seed": 12, "chunk_size": 256}
  })"), n / 4);
  const std::vector<json> configs{determinism_config(n), harmonic};
  bool ok = true;
  json runs = json::array();
  for (auto cfg : configs) {
    cfg["execution"]["workers"] = 1;
    const auto a = config::run_simulation(config::parse_simulation(cfg));
    cfg["execution"]["workers"] = 8;
    const auto b = config::run_simulation(config::parse_simulation(cfg));
    const bool same = a.estimate == b.estimate && a.stderr_ == b.stderr_ && a.result.dump() == b.result.dump();
    ok = ok && same;
    runs.push_back({{"estimator", a.result["estimator"]}, {"workers_1", a.estimate}, {"workers_8", b.estimate},
                    {"identical", same}});
  }
  r.passed = ok;
  r.metrics = {{"runs", runs}};
  r.detail = ok ? "workers 1 and 8 give bit-identical results" : "results differ between worker counts";
  return r;
}

inline CheckResult curvature_identities(Suite) {
  auto r = named(12, "curvature identities");
  std::mt19937_64 rng(12);
  double worst_alg = 0.0;
  const std::vector<ManifoldModel> models{
      ManifoldModel::euclidean(3),        ManifoldModel::sphere(2, 1.0),       ManifoldModel::sphere(3, 0.5),
      ManifoldModel::hyperbolic(2, -1.0), ManifoldModel::hyperbolic(4, -2.0), ManifoldModel::conformal_plane(detail::kConformalPhi)};
  for (const auto& model : models) {
    for (int trial = 0; trial < 100; ++trial) {
      const Vec p = detail::random_point(model, rng);
      const auto cd = curvature_at(model, {p, model->canonical_frame(p)});
      const int n = cd.n;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          for (int k = 0; k < n; ++k)
            for (int l = 0; l < n; ++l) {
              const double v = cd.riemann(i, j, k, l);
              worst_alg = std::max({worst_alg, std::abs(v + cd.riemann(j, i, k, l)),
                                    std::abs(v + cd.riemann(i, j, l, k)), std::abs(v - cd.riemann(k, l, i, j)),
                                    std::abs(v + cd.riemann(j, k, i, l) + cd.riemann(k, i, j, l))});
            }
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
          double s = 0.0;
          for (int i = 0; i < n; ++i) s += cd.riemann(i, a, b, i);
          worst_alg = std::max({worst_alg, std::abs(cd.ricci(a, b) - s), std::abs(cd.ricci(a, b) - cd.ricci(b, a))});
        }
    }
  }
  const auto model = ManifoldModel::conformal_plane(detail::kConformalPhi);
  const auto& cp = *model.as_conformal();
  std::uniform_real_distribution<double> ud(-1.0, 1.0);
  double worst_fd = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const Vec p = make_vec({ud(rng), ud(rng)});
    const Mat frame = cp.canonical_frame(p);
    const auto cd = curvature_at(model, {p, frame});
    const auto via_ricci = fd::dstar_nabla_via_ricci(cp, p, frame);
    const auto via_div = fd::dstar_nabla_via_divergence(cp, p, frame);
    for (int i = 0; i < 8; ++i)
      worst_fd = std::max({worst_fd, std::abs(cd.dstar_nabla_data[i] - via_ricci[i]),
                           std::abs(cd.dstar_nabla_data[i] - via_div[i])});
  }
  r.passed = worst_alg <= 1e-8 && worst_fd <= 1e-5;
  r.metrics = {{"max_algebraic_residual", worst_alg}, {"max_dstar_nabla_fd_gap", worst_fd}};
  r.detail = "symmetry/Bianchi/contraction residual " + detail::fmt(worst_alg) + ", d*R + nabla Ric vs FD " +
             detail::fmt(worst_fd);
  return r;
}

// ----------------------------------------------------------------------------

using Check = std::function<CheckResult(Suite)>;

inline std::vector<Check> all_checks() {
  return {euclidean_hessian, flat_degeneracy, constant_curvature_transport, martingale_drift,
          ito_isometry,      lemma22_bound,   harmonic_hessian,             bound_dominance,
          optimizer_oracle,  constants,       determinism,                  curvature_identities};
}

/// Runs one check; exceptions become failures.
inline CheckResult run_check(const Check& c, Suite suite, int id) {
  const auto t0 = std::chrono::steady_clock::now();
  CheckResult r;
  try {
    r = c(suite);
  } catch (const std::exception& e) {
    r.id = id;
    r.name = "check " + std::to_string(id);
    r.passed = false;
    r.detail = std::string("error: ") + e.what();
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

inline std::string status_line(const CheckResult& r) {
  char head[64];
  std::snprintf(head, sizeof head, "%s [%2d] ", r.passed ? "PASS" : "FAIL", r.id);
  return head + r.name + ": " + r.detail;
}

inline json report(const std::vector<CheckResult>& results, Suite suite) {
  json checks = json::array();
  bool all = true;
  for (const auto& r : results) {
    all = all && r.passed;
    checks.push_back({{"id", r.id},
                      {"name", r.name},
                      {"passed", r.passed},
                      {"detail", r.detail},
                      {"seconds", r.seconds},
                      {"metrics", r.metrics}});
  }
  return {{"schema", "bismut.verify/1"},
          {"suite", suite == Suite::full ? "full" : "quick"},
          {"passed", all},
          {"checks", checks}};
}

} // namespace bismut::verify
