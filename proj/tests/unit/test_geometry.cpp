#include <bismut/geometry/curvature.hpp>
#include <bismut/geometry/model.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace bismut;

namespace {

constexpr double kPi = std::numbers::pi;
const char* const kPhi = "0.15*(x*x + y*y) + 0.1*sin(x)*y";

std::vector<ManifoldModel> all_models() {
  return {ManifoldModel::euclidean(3), ManifoldModel::sphere(2, 1.0), ManifoldModel::sphere(3, 0.5),
          ManifoldModel::hyperbolic(2, -1.0), ManifoldModel::hyperbolic(4, -2.0),
          ManifoldModel::conformal_plane(kPhi)};
}

Vec random_point(const ManifoldModel& model, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> ud(-1.0, 1.0);
  const auto& m = *model;
  if (model.kind() == ModelKind::conformal_plane) return make_vec({ud(rng), ud(rng)});
  const Vec p0 = m.base_point();
  const Mat e = m.canonical_frame(p0);
  Vec w(m.dim());
  for (int i = 0; i < m.dim(); ++i) w(i) = 0.8 * ud(rng);
  return m.retract(m.exp_step(p0, Vec(e * w)));
}

Vec random_unit(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  Vec v(n);
  for (int i = 0; i < n; ++i) v(i) = nd(rng);
  return v / v.norm();
}

} // namespace

TEST(ExpStep, EuclideanIsTranslation) {
  const auto m = ManifoldModel::euclidean(3);
  const Vec p = make_vec({1, 2, 3}), v = make_vec({0.5, -1, 2});
  EXPECT_EQ(m->exp_step(p, v), p + v);
}

TEST(ExpStep, SphereQuarterCircle) {
  const auto m = ManifoldModel::sphere(2, 1.0);
  const Vec q = m->exp_step(make_vec({1, 0, 0}), make_vec({0, kPi / 2, 0}));
  EXPECT_NEAR((q - make_vec({0, 1, 0})).norm(), 0.0, 1e-15);
}

TEST(ExpStep, FlatConformalPlaneIsTranslation) {
  const auto m = ManifoldModel::conformal_plane("0");
  const Vec p = make_vec({0.3, -0.2}), v = make_vec({0.7, 0.1});
  EXPECT_NEAR((m->exp_step(p, v) - (p + v)).norm(), 0.0, 1e-15);
}

TEST(ExpStep, HyperbolicStaysOnSheetAndMatchesDistance) {
  const auto m = ManifoldModel::hyperbolic(3, -0.5);
  const Vec p = m->base_point();
  const Mat e = m->canonical_frame(p);
  const Vec v = e * make_vec({0.3, -1.2, 0.7});
  const Vec q = m->exp_step(p, v);
  EXPECT_LT(m->constraint_residual(q), 1e-12);
  EXPECT_NEAR(m->distance(p, q), m->norm(p, v), 1e-12);
}

TEST(Transport, EuclideanFrameUnchanged) {
  const auto m = ManifoldModel::euclidean(2);
  const TangentFrame f{make_vec({0, 0}), Mat::Identity(2, 2)};
  const Vec v = make_vec({0.3, 0.4});
  const auto g = parallel_transport_step(*m, f, m->exp_step(f.base_point, v), v);
  EXPECT_EQ(g.vectors, f.vectors);
}

TEST(Transport, GreatCircleHolonomyIsIdentity) {
  const double kappa = 2.0;
  const auto m = ManifoldModel::sphere(2, kappa);
  Vec p = m->base_point();
  Mat f = m->canonical_frame(p);
  const Mat f0 = f;
  const double length = 2 * kPi / std::sqrt(kappa);
  const int steps = 1000;
  for (int s = 0; s < steps; ++s) {
    const Vec u = f.col(0) * (0.6 * length / steps) + f.col(1) * (0.8 * length / steps);
    m->develop(p, f, u);
  }
  EXPECT_NEAR((p - m->base_point()).norm(), 0.0, 1e-8);
  EXPECT_NEAR((f - f0).norm(), 0.0, 1e-8);
}

TEST(Transport, OctantLoopRotatesByQuarterTurn) {
  const auto m = ManifoldModel::sphere(2, 1.0);
  const Vec n = make_vec({0, 0, 1}), a = make_vec({1, 0, 0}), b = make_vec({0, 1, 0});
  Mat f(3, 2);
  f.col(0) = a;
  f.col(1) = b;
  const Vec legs_from[3] = {n, a, b};
  const Vec legs_dir[3] = {a, b, n};
  Vec p = n;
  for (int leg = 0; leg < 3; ++leg) {
    const Vec v = legs_dir[leg] * (kPi / 2);
    ASSERT_NEAR((p - legs_from[leg]).norm(), 0.0, 1e-12);
    f = m->transport(p, v, f);
    p = m->exp_step(p, v);
  }
  EXPECT_NEAR((p - n).norm(), 0.0, 1e-12);
  const double angle = std::atan2(f.col(0).dot(b), f.col(0).dot(a));
  EXPECT_NEAR(std::abs(angle), kPi / 2, 1e-12);
  const Eigen::Vector3d c0 = f.col(0), c1 = f.col(1);
  EXPECT_NEAR(c0.cross(c1).dot(Eigen::Vector3d(n(0), n(1), n(2))), 1.0, 1e-12);

  // Same loop through many small development steps.
  Vec q = n;
  Mat g(3, 2);
  g.col(0) = a;
  g.col(1) = b;
  const int steps = 2000;
  for (int leg = 0; leg < 3; ++leg) {
    const Vec dir = legs_dir[leg];
    Vec u = dir * (kPi / 2 / steps);
    for (int s = 0; s < steps; ++s) {
      TangentFrame tf{q, g};
      const Vec q_next = m->retract(m->exp_step(q, u));
      const auto moved = parallel_transport_step(*m, tf, q_next, u);
      // the leg direction is itself parallel along the great circle
      u = m->transport(q, u, u).col(0);
      q = q_next;
      g = moved.vectors;
    }
  }
  EXPECT_NEAR((q - n).norm(), 0.0, 1e-8);
  EXPECT_NEAR(std::abs(std::atan2(g.col(0).dot(b), g.col(0).dot(a))), kPi / 2, 1e-8);
}

TEST(Transport, MetricCompatibility) {
  std::mt19937_64 rng(11);
  for (const auto& model : all_models()) {
    const auto& m = *model;
    for (int trial = 0; trial < 20; ++trial) {
      Vec p = random_point(model, rng);
      const Mat e = m.canonical_frame(p);
      Mat pair(m.ambient_dim(), 2);
      pair.col(0) = e * random_unit(m.dim(), rng);
      pair.col(1) = e * (0.5 * random_unit(m.dim(), rng));
      const double before = m.inner(p, pair.col(0), pair.col(1));
      Vec dir = e * random_unit(m.dim(), rng);
      for (int s = 0; s < 50; ++s) {
        const Vec v = 0.01 * dir;
        pair = m.transport(p, v, pair);
        dir = m.transport(p, v, dir).col(0);
        p = m.retract(m.exp_step(p, v));
      }
      EXPECT_NEAR(m.inner(p, pair.col(0), pair.col(1)), before, 1e-8) << to_string(m.kind());
    }
  }
}

TEST(Transport, DevelopKeepsFramesOrthonormalAndPointsOnManifold) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd;
  for (const auto& model : all_models()) {
    const auto& m = *model;
    Vec p = m.base_point();
    Mat f = m.canonical_frame(p);
    for (int s = 0; s < 2000; ++s) {
      Vec db(m.dim());
      for (int i = 0; i < m.dim(); ++i) db(i) = 0.03 * nd(rng);
      m.develop(p, f, Vec(f * db));
      ASSERT_LT(m.constraint_residual(p), 1e-8);
      ASSERT_LT(m.frame_defect(p, f), 1e-12 * (1 + p.squaredNorm())) << to_string(m.kind()) << " |p|=" << p.norm();
      for (int j = 0; j < m.dim(); ++j)
        ASSERT_LT((m.project_tangent(p, f.col(j)) - f.col(j)).norm(), 1e-10 * (1 + p.squaredNorm()))
            << to_string(m.kind()) << " |p|=" << p.norm();
    }
  }
}

TEST(Curvature, EuclideanTensorsVanish) {
  const auto m = ManifoldModel::euclidean(3);
  const auto cd = curvature_at(m, {m->base_point(), m->canonical_frame(m->base_point())});
  for (double x : cd.riemann_data) EXPECT_EQ(x, 0.0);
  for (double x : cd.dstar_nabla_data) EXPECT_EQ(x, 0.0);
  EXPECT_EQ(cd.ricci.norm(), 0.0);
}

TEST(Curvature, SphereRicci) {
  const auto m = ManifoldModel::sphere(3, 1.0);
  const auto cd = curvature_at(m, {m->base_point(), m->canonical_frame(m->base_point())});
  EXPECT_NEAR((cd.ricci - 2.0 * Eigen::MatrixXd::Identity(3, 3)).norm(), 0.0, 1e-15);
}

TEST(Curvature, RejectsPointOffManifold) {
  const auto m = ManifoldModel::sphere(2, 1.0);
  TangentFrame f{make_vec({0, 0, 1.01}), Mat::Identity(3, 2)};
  EXPECT_THROW(curvature_at(m, f), ValidationError);
}

TEST(Curvature, HilbertSchmidtNormOfCurvatureOperator) {
  std::mt19937_64 rng(3);
  for (int n : {2, 3, 5}) {
    for (double kappa : {1.0, -0.7}) {
      const auto m = kappa > 0 ? ManifoldModel::sphere(n, kappa) : ManifoldModel::hyperbolic(n, kappa);
      const auto cd = curvature_at(m, {m->base_point(), m->canonical_frame(m->base_point())});
      double best = 0.0;
      for (int trial = 0; trial < 400; ++trial) {
        const Vec v = random_unit(n, rng);
        const Vec w = trial % 4 == 0 ? v : random_unit(n, rng);
        // |X -> R(X,v)w|_HS summed over the frame
        double hs = 0.0;
        for (int i = 0; i < n; ++i)
          for (int l = 0; l < n; ++l) {
            double s = 0.0;
            for (int j = 0; j < n; ++j)
              for (int k = 0; k < n; ++k) s += cd.riemann(i, j, k, l) * v(j) * w(k);
            hs += s * s;
          }
        const double vw = v.dot(w);
        EXPECT_NEAR(std::sqrt(hs), std::abs(kappa) * std::sqrt(1 + (n - 2) * vw * vw), 1e-12);
        best = std::max(best, std::sqrt(hs));
      }
      EXPECT_NEAR(best, std::abs(kappa) * std::sqrt(n - 1.0), 1e-12);
    }
  }
}

TEST(Curvature, AlgebraicIdentitiesAtRandomPoints) {
  std::mt19937_64 rng(17);
  for (const auto& model : all_models()) {
    for (int trial = 0; trial < 100; ++trial) {
      const Vec p = random_point(model, rng);
      const auto cd = curvature_at(model, {p, model->canonical_frame(p)});
      const int n = cd.n;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          for (int k = 0; k < n; ++k)
            for (int l = 0; l < n; ++l) {
              const double r = cd.riemann(i, j, k, l);
              ASSERT_NEAR(r, -cd.riemann(j, i, k, l), 1e-8);
              ASSERT_NEAR(r, -cd.riemann(i, j, l, k), 1e-8);
              ASSERT_NEAR(r, cd.riemann(k, l, i, j), 1e-8);
              ASSERT_NEAR(r + cd.riemann(j, k, i, l) + cd.riemann(k, i, j, l), 0.0, 1e-8);
            }
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
          double s = 0.0;
          for (int i = 0; i < n; ++i) s += cd.riemann(i, a, b, i);
          ASSERT_NEAR(cd.ricci(a, b), s, 1e-8);
          ASSERT_NEAR(cd.ricci(a, b), cd.ricci(b, a), 1e-12);
        }
    }
  }
}

TEST(Curvature, SectionalCurvatureOfSampledPlanes) {
  std::mt19937_64 rng(23);
  for (double kappa : {0.5, -1.5}) {
    const int n = 4;
    const auto m = kappa > 0 ? ManifoldModel::sphere(n, kappa) : ManifoldModel::hyperbolic(n, kappa);
    for (int trial = 0; trial < 50; ++trial) {
      const Vec p = random_point(m, rng);
      const auto lc = m->curvature(p, m->canonical_frame(p));
      Vec a = random_unit(n, rng), b = random_unit(n, rng);
      b -= b.dot(a) * a;
      b /= b.norm();
      Vec out(n);
      lc.riemann(a, b, b, out);
      EXPECT_NEAR(out.dot(a), kappa, 1e-12);
    }
  }
}

TEST(Curvature, HolonomyOfSmallLoopMatchesSectionalCurvature) {
  // Rotation of a transported vector around a small geodesic square is
  // K * area to leading order, independent of any curvature formula.
  for (const auto& model : {ManifoldModel::sphere(2, 1.3), ManifoldModel::hyperbolic(2, -0.8),
                            ManifoldModel::conformal_plane(kPhi)}) {
    const auto& m = *model;
    const Vec p0 = model.kind() == ModelKind::conformal_plane ? make_vec({0.2, -0.1}) : m.base_point();
    double k_expected = 0.0;
    if (auto* cp = model.as_conformal()) k_expected = cp->gauss_curvature(p0);
    else k_expected = model.constant_curvature();
    const double h = 0.02;
    const int sub = 200;
    Vec p = p0;
    Mat f = m.canonical_frame(p0);
    const Mat f0 = f;
    // counter-clockwise square e1, e2, -e1, -e2 in frame coordinates
    const Vec dirs[4] = {make_vec({1, 0}), make_vec({0, 1}), make_vec({-1, 0}), make_vec({0, -1})};
    for (const auto& d : dirs)
      for (int s = 0; s < sub; ++s) m.develop(p, f, Vec(f * (d * (h / sub))));
    const double angle = std::atan2(m.inner(p, f.col(0), f0.col(1)), m.inner(p, f.col(0), f0.col(0)));
    EXPECT_NEAR(angle, k_expected * h * h, 0.05 * std::abs(k_expected) * h * h) << to_string(m.kind());
  }
}

TEST(ConformalPlane, GaussCurvatureMatchesFiniteDifferences) {
  const auto model = ManifoldModel::conformal_plane(kPhi);
  const auto& cp = *model.as_conformal();
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> ud(-1.2, 1.2);
  const double h = 1e-4;
  for (int trial = 0; trial < 100; ++trial) {
    const Vec p = make_vec({ud(rng), ud(rng)});
    auto phi = [&](double dx, double dy) { return cp.phi(make_vec({p(0) + dx, p(1) + dy})); };
    const double lap = (phi(h, 0) + phi(-h, 0) + phi(0, h) + phi(0, -h) - 4 * phi(0, 0)) / (h * h);
    EXPECT_NEAR(cp.gauss_curvature(p), -std::exp(-2 * cp.phi(p)) * lap, 1e-6);
  }
}

TEST(ConformalPlane, DstarNablaMatchesFiniteDifferenceRoutes) {
  const auto model = ManifoldModel::conformal_plane(kPhi);
  const auto& cp = *model.as_conformal();
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> ud(-1.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const Vec p = make_vec({ud(rng), ud(rng)});
    const Mat frame = cp.canonical_frame(p);
    const auto cd = curvature_at(model, {p, frame});
    const auto via_ricci = fd::dstar_nabla_via_ricci(cp, p, frame);
    const auto via_div = fd::dstar_nabla_via_divergence(cp, p, frame);
    for (int i = 0; i < 8; ++i) {
      EXPECT_NEAR(cd.dstar_nabla_data[i], via_ricci[i], 1e-5);
      EXPECT_NEAR(cd.dstar_nabla_data[i], via_div[i], 1e-5);
    }
  }
}

TEST(ConformalPlane, DistanceByShootingAndPolarTableAgree) {
  const auto model = ManifoldModel::conformal_plane(kPhi);
  const auto& cp = *model.as_conformal();
  const Vec c = make_vec({0.1, 0.2});
  const BallDomain ball(model, c, 1.0);
  std::mt19937_64 rng(37);
  for (int trial = 0; trial < 40; ++trial) {
    const Vec w = random_unit(2, rng) * (0.05 + 0.9 * (trial / 40.0));
    const Vec y = ball.normal_point(w);
    EXPECT_NEAR(ball.distance_from_center(y), w.norm(), 1e-8);
    EXPECT_NEAR(cp.distance(c, y), w.norm(), 1e-8);
  }
  // exp along a shot vector reproduces the length
  const Vec v = cp.canonical_frame(c) * make_vec({0.3, -0.5});
  EXPECT_NEAR(cp.distance(c, cp.exp_map(c, v)), std::sqrt(0.34), 1e-8);
}

TEST(ConformalPlane, FlatTableDistanceIsEuclidean) {
  const auto model = ManifoldModel::conformal_plane("0*x");
  const BallDomain ball(model, make_vec({0.5, 0.5}), 2.0);
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> ud(-1.5, 2.5);
  for (int trial = 0; trial < 100; ++trial) {
    const Vec y = make_vec({ud(rng), ud(rng)});
    const double d = (y - make_vec({0.5, 0.5})).norm();
    if (d > 2.4) continue;
    EXPECT_NEAR(ball.distance_from_center(y), d, 1e-9);
  }
}

TEST(GeomBounds, ClosedForms) {
  auto check = [](const ManifoldModel& m, double k0, double k1) {
    const auto gb = geom_bounds(m, m->base_point(), 0.5);
    EXPECT_DOUBLE_EQ(gb.K0, k0);
    EXPECT_DOUBLE_EQ(gb.K1, k1);
    EXPECT_EQ(gb.K2, 0.0);
    EXPECT_EQ(gb.delta_x, 0.5);
  };
  check(ManifoldModel::euclidean(2), 0, 0);
  check(ManifoldModel::sphere(2, 1.0), 1, 1);
  check(ManifoldModel::hyperbolic(2, -1.0), -1, 1);
  check(ManifoldModel::sphere(4, 2.0), 6, 2 * std::sqrt(3.0));
}

TEST(GeomBounds, ConformalGridBoundsDominateSamples) {
  const auto model = ManifoldModel::conformal_plane(kPhi);
  const auto& cp = *model.as_conformal();
  const Vec c = make_vec({0.0, 0.0});
  const BallDomain ball(model, c, 0.8);
  const auto gb = geom_bounds(ball);
  std::mt19937_64 rng(43);
  std::uniform_real_distribution<double> ud(-1.0, 1.0);
  int inside = 0;
  for (int trial = 0; trial < 4000; ++trial) {
    const Vec y = make_vec({ud(rng), ud(rng)});
    if (!ball.contains(y)) continue;
    ++inside;
    const double k = cp.gauss_curvature(y);
    EXPECT_LE(gb.K0, k);
    EXPECT_GE(gb.K1, std::abs(k));
    EXPECT_GE(gb.K2, std::exp(-cp.phi(y)) * cp.grad_gauss_curvature(y).norm());
  }
  EXPECT_GT(inside, 500);
  EXPECT_GT(gb.K2, 0.0);
}

TEST(GeomBounds, RemarkInequalityForRandomVectors) {
  // |R^{#,#}(v,v)|_HS <= |R| |v|^2 with |R| the sup over unit pairs.
  std::mt19937_64 rng(47);
  std::normal_distribution<double> nd;
  for (const auto& model : all_models()) {
    const Vec p = model->base_point();
    const auto cd = curvature_at(model, {p, model->canonical_frame(p)});
    const int n = cd.n;
    const auto lc = model->curvature(p, model->canonical_frame(p));
    const double norm_r = std::abs(lc.sectional) * std::sqrt(n - 1.0);
    for (int trial = 0; trial < 1000; ++trial) {
      Vec v(n);
      for (int i = 0; i < n; ++i) v(i) = nd(rng);
      double hs = 0.0;
      for (int i = 0; i < n; ++i)
        for (int l = 0; l < n; ++l) {
          double s = 0.0;
          for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) s += cd.riemann(i, j, k, l) * v(j) * v(k);
          hs += s * s;
        }
      ASSERT_LE(std::sqrt(hs), norm_r * v.squaredNorm() * (1 + 1e-12) + 1e-15);
    }
  }
}
