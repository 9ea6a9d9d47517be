#include <bismut/bmpath.hpp>
#include <bismut/controls.hpp>
#include <bismut/montecarlo.hpp>
#include <bismut/transport.hpp>

#include <gtest/gtest.h>

#include <cmath>

using namespace bismut;

namespace {

PathConfig config(const Vec& x, double radius, double T, double h, std::uint64_t seed,
                  std::uint64_t idx) {
  PathConfig c;
  c.start = x;
  c.ball_radius = radius;
  c.horizon_T = T;
  c.step_h = h;
  c.seed = seed;
  c.path_index = idx;
  return c;
}

/// Runs one path with linear k and returns the final transport state.
TransportState run_linear(const BallDomain& ball, double T, double h, std::uint64_t seed,
                          std::uint64_t idx, const Vec& v, double* q_excess = nullptr,
                          double K0 = 0.0) {
  const auto& m = *ball.model();
  auto st = TransportState::start(v);
  KProcess k(k_linear(T));
  simulate_path(config(ball.center(), ball.radius(), T, h, seed, idx), ball,
                [&](const StepView& sv) {
                  const auto lc = m.curvature(sv.position, sv.frame);
                  const auto ks = k.next(sv.s, sv.h, sv.position);
                  if (q_excess) {
                    const double nrm = st.Q.operatorNorm();
                    *q_excess = std::max(*q_excess, nrm - std::exp(-0.5 * K0 * sv.s));
                  }
                  advance(st, lc, ks.k, ks.k_dot, sv.db, sv.h);
                  return true;
                });
  return st;
}

} // namespace

TEST(Transport, ConstantCurvatureClosedForm) {
  struct Case {
    ManifoldModel model;
    double sign;
  };
  for (auto c : {Case{ManifoldModel::sphere(2, 1.0), -1.0}, Case{ManifoldModel::hyperbolic(2, -1.0), 1.0}}) {
    const Vec x = c.model->base_point();
    BallDomain ball(c.model, x, 1.0);
    auto st = TransportState::start(make_vec({1.0, 0.0}));
    double worst_inv = 0.0;
    simulate_path(config(x, 1.0, 1.0, 1e-4, 3, 0), ball, [&](const StepView& sv) {
      const auto cd = curvature_at(c.model, TangentFrame{sv.position, sv.frame});
      step_Q(st, cd.ricci, sv.h);
      worst_inv = std::max(worst_inv, (st.Q * st.Q_inv - Mat::Identity(2, 2)).norm());
      return true;
    }, PathOptions{.continue_after_exit = true});
    const Mat want = std::exp(0.5 * c.sign) * Mat::Identity(2, 2);
    EXPECT_LT((st.Q - want).cwiseAbs().maxCoeff(), 1e-6);
    EXPECT_LT(worst_inv, 1e-6);
  }
}

TEST(Transport, IsotropicAndTensorFormsAgree) {
  auto model = ManifoldModel::conformal_plane("0.15*(x*x + y*y) + 0.1*sin(x)*y");
  const Vec x = make_vec({0.2, -0.1});
  BallDomain ball(model, x, 0.5);
  const Vec v = make_vec({0.6, 0.8});
  auto a = TransportState::start(v);
  auto b = TransportState::start(v);
  KProcess k(k_linear(0.5));
  simulate_path(config(x, 0.5, 0.5, 1e-3, 9, 1), ball, [&](const StepView& sv) {
    const auto lc = model->curvature(sv.position, sv.frame);
    const auto cd = expand(lc);
    const auto ks = k.next(sv.s, sv.h, sv.position);
    accumulate_integrals(a, ks.k_dot, sv.db, sv.h);
    step_W(a, lc, ks.k, sv.db, sv.h);
    step_Q(a, lc.ricci_factor(), sv.h);
    accumulate_integrals(b, ks.k_dot, sv.db, sv.h);
    step_W(b, cd, ks.k, sv.db, sv.h);
    step_Q(b, cd.ricci, sv.h);
    return true;
  });
  EXPECT_LT((a.Wvv - b.Wvv).norm(), 1e-12);
  EXPECT_LT((a.Q - b.Q).norm(), 1e-12);
  EXPECT_GT(a.Wvv.norm(), 0.0);
}

TEST(Transport, FlatSpaceIsExactlyTrivial) {
  auto model = ManifoldModel::euclidean(2);
  const Vec x = Vec::Zero(2);
  BallDomain ball(model, x, 3.0);
  for (std::uint64_t i = 0; i < 50; ++i) {
    auto st = TransportState::start(make_vec({1.0, 0.0}));
    KProcess k(k_linear(1.0));
    simulate_path(config(x, 3.0, 1.0, 1e-3, 1, i), ball, [&](const StepView& sv) {
      const auto ks = k.next(sv.s, sv.h, sv.position);
      advance(st, model->curvature(sv.position, sv.frame), ks.k, ks.k_dot, sv.db, sv.h);
      EXPECT_EQ(st.Q, Mat::Identity(2, 2));
      EXPECT_EQ(st.Wvv, Vec::Zero(2));
      return true;
    });
    EXPECT_EQ(st.I_W, 0.0);
  }
}

TEST(Transport, ZeroKLeavesWZero) {
  auto model = ManifoldModel::sphere(2, 1.0);
  const Vec x = model->base_point();
  BallDomain ball(model, x, 1.0);
  auto st = TransportState::start(make_vec({1.0, 0.0}));
  simulate_path(config(x, 1.0, 0.5, 1e-3, 1, 0), ball, [&](const StepView& sv) {
    advance(st, model->curvature(sv.position, sv.frame), 0.0, 0.0, sv.db, sv.h);
    return true;
  });
  EXPECT_EQ(st.Wvv, Vec::Zero(2));
  EXPECT_EQ(st.I_Q, 0.0);
  EXPECT_EQ(st.I_QQ, 0.0);
}

TEST(Transport, ZeroNoiseAccumulators) {
  auto model = ManifoldModel::euclidean(2);
  const Vec x = Vec::Zero(2);
  BallDomain ball(model, x, 1.0);
  auto st = TransportState::start(make_vec({1.0, 0.0}));
  KProcess k(k_linear(2.0));
  PathOptions opt;
  opt.zero_noise = true;
  simulate_path(config(x, 1.0, 2.0, 1e-3, 1, 0), ball, [&](const StepView& sv) {
    const auto ks = k.next(sv.s, sv.h, sv.position);
    advance(st, model->curvature(sv.position, sv.frame), ks.k, ks.k_dot, sv.db, sv.h);
    return true;
  }, opt);
  EXPECT_EQ(st.I_W, 0.0);
  EXPECT_EQ(st.I_Q, 0.0);
  EXPECT_NEAR(st.I_QQ, 0.5, 1e-12);
}

TEST(Transport, ConstantKGivesZeroAccumulators) {
  auto model = ManifoldModel::sphere(2, 1.0);
  const Vec x = model->base_point();
  BallDomain ball(model, x, 1.0);
  auto st = TransportState::start(make_vec({0.0, 1.0}));
  simulate_path(config(x, 1.0, 0.5, 1e-3, 2, 0), ball, [&](const StepView& sv) {
    advance(st, model->curvature(sv.position, sv.frame), 1.0, 0.0, sv.db, sv.h);
    return true;
  });
  EXPECT_EQ(st.I_W, 0.0);
  EXPECT_EQ(st.I_Q, 0.0);
  EXPECT_EQ(st.I_QQ, 0.0);
  EXPECT_GT(st.Wvv.norm(), 0.0);
}

TEST(Transport, ItoIsometryAndMartingale) {
  for (auto model : {ManifoldModel::euclidean(2), ManifoldModel::sphere(2, 1.0)}) {
    const Vec x = model->base_point();
    BallDomain ball(model, x, 1.0);
    ExecutionConfig ex;
    ex.n_paths = 20000;
    ex.workers = 1;
    const auto est = run_monte_carlo(ex, 2, [&](std::uint64_t i, std::span<double> out) {
      const auto st = run_linear(ball, 1.0, 1e-2, 21, i, make_vec({1.0, 0.0}));
      out[0] = st.I_Q * st.I_Q - st.I_QQ;
      out[1] = st.I_Q;
      return PathOutcome{};
    });
    EXPECT_NEAR(est[0].value, 0.0, 3 * est[0].stderr_);
    EXPECT_NEAR(est[1].value, 0.0, 3 * est[1].stderr_);
  }
}

TEST(Transport, IteratedIntegralIdentityPerPath) {
  auto model = ManifoldModel::sphere(2, 1.0);
  const Vec x = model->base_point();
  BallDomain ball(model, x, 1.0);
  for (std::uint64_t i = 0; i < 20; ++i) {
    const auto st = run_linear(ball, 1.0, 1e-3, 5, i, make_vec({1.0, 0.0}));
    // I_Q^2 - sum of squared increments = 2 I_nested exactly; the bracket
    // differs from I_QQ by O(sqrt(h)).
    EXPECT_NEAR(st.I_Q * st.I_Q - st.I_QQ, 2 * st.I_nested, 0.2);
  }
}

TEST(Transport, DampingBound) {
  struct Case {
    ManifoldModel model;
    Vec x;
  };
  auto cp = ManifoldModel::conformal_plane("0.15*(x*x + y*y) + 0.1*sin(x)*y");
  for (auto c : {Case{ManifoldModel::sphere(2, 1.0), ManifoldModel::sphere(2, 1.0)->base_point()},
                 Case{ManifoldModel::hyperbolic(2, -1.0), ManifoldModel::hyperbolic(2, -1.0)->base_point()},
                 Case{cp, make_vec({0.1, 0.2})}}) {
    BallDomain ball(c.model, c.x, 0.6);
    const auto gb = geom_bounds(ball);
    for (std::uint64_t i = 0; i < 40; ++i) {
      double excess = -1.0;
      run_linear(ball, 1.0, 1e-3, 8, i, make_vec({1.0, 0.0}), &excess, gb.K0);
      EXPECT_LE(excess, 1e-5);
    }
  }
}

TEST(Transport, WMomentBoundDeterministicK) {
  auto model = ManifoldModel::sphere(2, 1.0);
  const Vec x = model->base_point();
  BallDomain ball(model, x, 1.0);
  ExecutionConfig ex;
  ex.n_paths = 8000;
  ex.workers = 1;
  const auto est = run_monte_carlo_scalar(ex, [&](std::uint64_t i, double& out) {
    out = run_linear(ball, 1.0, 1e-2, 6, i, make_vec({1.0, 0.0})).I_WW;
    return PathOutcome{};
  });
  EXPECT_LE(est.value, 1.0 + 3 * est.stderr_);
  EXPECT_GT(est.value, 0.0);
}

TEST(Transport, PolarizedSymmetricAndDiagonal) {
  auto model = ManifoldModel::conformal_plane("0.2*(x*x + y*y)");
  const Vec x = make_vec({0.3, 0.0});
  BallDomain ball(model, x, 0.5);
  const Vec v = make_vec({0.6, 0.8});
  const Vec w = make_vec({1.0, 0.0});
  auto run = [&](const Vec& a, const Vec& b, TransportState* vv) {
    auto st = PolarizedTransportState::start(a, b);
    auto sv_state = TransportState::start(a);
    KProcess k(k_linear(0.5));
    simulate_path(config(x, 0.5, 0.5, 1e-3, 4, 2), ball, [&](const StepView& sv) {
      const auto lc = model->curvature(sv.position, sv.frame);
      const auto ks = k.next(sv.s, sv.h, sv.position);
      st.advance(lc, ks.k, ks.k_dot, sv.db, sv.h);
      if (vv) advance(sv_state, lc, ks.k, ks.k_dot, sv.db, sv.h);
      return true;
    });
    if (vv) *vv = sv_state;
    return st.weight();
  };
  EXPECT_EQ(run(v, w, nullptr), run(w, v, nullptr));
  TransportState vv;
  const double diag = run(v, v, &vv);
  EXPECT_EQ(diag, three_term_weight(vv));
}
