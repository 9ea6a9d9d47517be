#include <bismut/bmpath.hpp>
#include <bismut/controls.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace bismut;

TEST(Controls, LinearExamples) {
  KProcess k(k_linear(1.0));
  for (double s : {0.0, 0.3, 0.99}) EXPECT_DOUBLE_EQ(k.next(s, 1e-3, Vec()).k_dot, -1.0);
  KProcess k2(k_linear(2.0));
  EXPECT_DOUBLE_EQ(k2.value_at(1.0), 0.5);
  EXPECT_DOUBLE_EQ(k2.value_at(0.0), 1.0);
  EXPECT_DOUBLE_EQ(k2.value_at(2.0), 0.0);
  EXPECT_DOUBLE_EQ(k2.next(2.5, 1e-3, Vec()).k_dot, 0.0);

  const double T = 3.0, h = 1e-3;
  double integral = 0;
  KProcess k3(k_linear(T));
  for (int i = 0; i < 3000; ++i) integral += std::pow(k3.next(i * h, h, Vec()).k_dot, 2) * h;
  EXPECT_NEAR(integral, 1.0 / T, 1e-12);

  KProcess up(k_linear(2.0, KOrientation::zero_to_one));
  EXPECT_DOUBLE_EQ(up.value_at(0.0), 0.0);
  EXPECT_DOUBLE_EQ(up.value_at(1.0), 0.5);
  EXPECT_DOUBLE_EQ(up.next(0.2, 1e-3, Vec()).k_dot, 0.5);
  EXPECT_DOUBLE_EQ(up.value_at(5.0), 1.0);

  EXPECT_THROW(k_linear(0.0), ValidationError);
  EXPECT_THROW(k_linear(-1.0), ValidationError);
}

TEST(Controls, DelayedLinearAndProfile) {
  KSpec s = k_linear(1.0);
  s.delay = 0.5;
  KProcess k(s);
  EXPECT_DOUBLE_EQ(k.value_at(0.3), 1.0);
  EXPECT_DOUBLE_EQ(k.next(0.3, 1e-3, Vec()).k_dot, 0.0);
  EXPECT_DOUBLE_EQ(k.value_at(0.75), 0.5);
  EXPECT_DOUBLE_EQ(k.next(0.75, 1e-3, Vec()).k_dot, -2.0);

  KSpec e;
  e.kind = KKind::exp_profile;
  e.lambda = 1.0;
  e.T = 1.0;
  KProcess ke(e);
  EXPECT_DOUBLE_EQ(ke.value_at(0.0), 1.0);
  EXPECT_NEAR(ke.value_at(1.0 - 1e-15), 0.0, 1e-12);
  EXPECT_NEAR(ke.value_at(0.5), 1.0 - (1 - std::exp(-0.5)) / (1 - std::exp(-1.0)), 1e-15);
}

namespace {

struct Frozen {
  ManifoldModel model = ManifoldModel::euclidean(2);
  std::shared_ptr<BallDomain> ball = std::make_shared<BallDomain>(model, Vec::Zero(2), 1.0);
  CutoffF f{ball};
};

} // namespace

TEST(Controls, TimechangeFrozenLinear) {
  Frozen fz;
  KProcess k(k_timechange(0.0, 0.5), &fz.f);
  const Vec x = Vec::Zero(2);
  const double h = 1e-3;
  int i = 0;
  for (; i < 2000 && !k.clock_reached(); ++i) {
    const auto ks = k.next(i * h, h, x);
    EXPECT_NEAR(ks.k, 1.0 - i * h / 0.5, 1e-12);
    EXPECT_NEAR(ks.k_dot, -1.0 / 0.5, 1e-9);
  }
  EXPECT_EQ(i, 500);
  const auto after = k.next(i * h, h, x);
  EXPECT_EQ(after.k, 0.0);
  EXPECT_EQ(after.k_dot, 0.0);
}

TEST(Controls, TimechangeFrozenExponential) {
  Frozen fz;
  KProcess k(k_timechange(1.0, 1.0), &fz.f);
  const Vec x = Vec::Zero(2);
  const double h = 1e-3;
  for (int i = 0; i < 1000; ++i) {
    const double s = i * h;
    const auto ks = k.next(s, h, x);
    EXPECT_NEAR(ks.k, 1.0 - (1 - std::exp(-s)) / (1 - std::exp(-1.0)), 1e-12);
  }
  EXPECT_TRUE(k.clock_reached());
}

TEST(Controls, TimechangeFrozenMoment) {
  Frozen fz;
  KProcess k(k_timechange(0.0, 2.0), &fz.f);
  const double h = 1e-3;
  double m = 0;
  for (int i = 0; i < 5000; ++i) m += std::pow(k.next(i * h, h, Vec::Zero(2)).k_dot, 2) * h;
  EXPECT_NEAR(m, 0.5, 1e-9);
}

TEST(Controls, TimechangeAlongPathsInvariants) {
  auto model = ManifoldModel::sphere(2, 1.0);
  const Vec x = model->base_point();
  auto ball = std::make_shared<BallDomain>(model, x, 0.8);
  CutoffF f(ball);
  for (std::uint64_t p = 0; p < 30; ++p) {
    KProcess k(k_timechange(2.0, 0.2), &f);
    PathConfig c;
    c.start = x;
    c.ball_radius = 0.8;
    c.horizon_T = 5.0;
    c.step_h = 1e-3;
    c.seed = 3;
    c.path_index = p;
    double prev_h0 = 0, prev_k = 1;
    bool first = true;
    simulate_path(c, *ball, [&](const StepView& sv) {
      const auto ks = k.next(sv.s, sv.h, sv.position);
      if (first) {
        EXPECT_DOUBLE_EQ(ks.k, 1.0);
      }
      first = false;
      EXPECT_GE(ks.k, 0.0);
      EXPECT_LE(ks.k, 1.0);
      EXPECT_LE(ks.k, prev_k);
      EXPECT_GE(k.h0(), prev_h0);
      prev_h0 = k.h0();
      prev_k = ks.k;
      if (k.clock_reached()) {
        const auto z = k.next(sv.s + sv.h, sv.h, sv.position);
        EXPECT_EQ(z.k, 0.0);
        EXPECT_EQ(z.k_dot, 0.0);
      }
      return true;
    });
  }
}

TEST(Controls, CutoffProperties) {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<std::pair<ManifoldModel, Vec>> cases{
      {ManifoldModel::euclidean(2), Vec::Zero(2)},
      {ManifoldModel::sphere(2, 1.0), ManifoldModel::sphere(2, 1.0)->base_point()},
      {ManifoldModel::hyperbolic(3, -1.0), ManifoldModel::hyperbolic(3, -1.0)->base_point()},
      {ManifoldModel::conformal_plane("0.2*(x*x + y*y)"), make_vec({0.3, 0.0})}};
  for (auto& [model, x] : cases) {
    const double delta = 0.7;
    auto ball = std::make_shared<BallDomain>(model, x, delta);
    CutoffF f(ball);
    EXPECT_NEAR(f(x), 1.0, 1e-12);
    const int n = model.dim();
    const int samples = model.kind() == ModelKind::conformal_plane ? 2000 : 10000;
    for (int i = 0; i < samples; ++i) {
      Vec w(n);
      for (int j = 0; j < n; ++j) w(j) = u(gen);
      if (w.norm() < 1e-6) continue;
      const double r = delta * 0.98 * std::abs(u(gen));
      const Vec dir = w / w.norm();
      const Vec y = ball->normal_point(r * dir);
      const double fy = f(y);
      EXPECT_GT(fy, 0.0);
      EXPECT_LE(fy, 1.0 + 1e-12);
      // Radial derivative by central differences in normal coordinates.
      const double e = 1e-5;
      const double df =
          (f(ball->normal_point((r + e) * dir)) - f(ball->normal_point(std::max(r - e, 0.0) * dir))) /
          (r + e - std::max(r - e, 0.0));
      EXPECT_LE(std::abs(df), f.gradient_bound() * (1 + 1e-4));
    }
    // Boundary value.
    Vec w = Vec::Zero(n);
    w(0) = delta;
    EXPECT_NEAR(f(ball->normal_point(w)), 0.0, 1e-6);
  }
}

TEST(Controls, SpecValidation) {
  KSpec s;
  s.T = -1;
  EXPECT_THROW(s.validate(), ValidationError);
  s = KSpec{};
  s.lambda = -1;
  EXPECT_THROW(s.validate(), ValidationError);
  s = KSpec{};
  s.kind = KKind::timechange;
  s.orientation = KOrientation::zero_to_one;
  EXPECT_THROW(s.validate(), ValidationError);
  EXPECT_THROW(KProcess(k_timechange(0.0, 1.0), nullptr), ValidationError);
  EXPECT_THROW(k_timechange(0.0, 0.0), ValidationError);
}
