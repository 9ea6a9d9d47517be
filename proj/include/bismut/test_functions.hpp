#pragma once

#include <bismut/errors.hpp>
#include <bismut/expression.hpp>
#include <bismut/geometry/model.hpp>
#include <bismut/rng.hpp>

#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>

namespace bismut {

enum class FunctionKind { constant, linear, quadratic, gaussian_bump, expression, custom };

inline const char* to_string(FunctionKind k) {
  switch (k) {
    case FunctionKind::constant: return "constant";
    case FunctionKind::linear: return "linear";
    case FunctionKind::quadratic: return "quadratic";
    case FunctionKind::gaussian_bump: return "gaussian_bump";
    case FunctionKind::expression: return "expr";
    case FunctionKind::custom: return "custom";
  }
  return "?";
}

/// A bounded test function given in ambient (embedding or chart)
/// coordinates, with ambient partial derivatives up to order two.
///
/// Family parameters are kept so that oracles can recognise closed forms:
///   constant:      c
///   linear:        <a, y> + c
///   quadratic:     <A y, y> + <a, y> + c   (A symmetric)
///   gaussian_bump: exp(-|y - a|^2 / (2 sigma^2))
class TestFunction {
public:
  using Value = std::function<double(const Vec&)>;
  using Grad = std::function<Vec(const Vec&)>;
  using Hess = std::function<Mat(const Vec&)>;

  TestFunction() : TestFunction(constant(1, 0.0)) {}

  static TestFunction constant(int ambient, double c) {
    TestFunction f(FunctionKind::constant, ambient);
    f.c_ = c;
    f.value_ = [c](const Vec&) { return c; };
    f.grad_ = [ambient](const Vec&) { return Vec(Vec::Zero(ambient)); };
    f.hess_ = [ambient](const Vec&) { return Mat(Mat::Zero(ambient, ambient)); };
    f.bound_ = std::abs(c);
    return f;
  }

  static TestFunction linear(const Vec& a, double c = 0.0) {
    TestFunction f(FunctionKind::linear, static_cast<int>(a.size()));
    f.a_ = a;
    f.c_ = c;
    const int n = f.ambient_;
    f.value_ = [a, c](const Vec& y) { return a.dot(y) + c; };
    f.grad_ = [a](const Vec&) { return a; };
    f.hess_ = [n](const Vec&) { return Mat(Mat::Zero(n, n)); };
    return f;
  }

  static TestFunction quadratic(const Mat& A, const Vec& a, double c = 0.0) {
    if (A.rows() != A.cols() || A.rows() != a.size())
      throw ValidationError("quadratic: A must be square and match b", "estimator.f.A");
    TestFunction f(FunctionKind::quadratic, static_cast<int>(a.size()));
    const Mat S = 0.5 * (A + A.transpose());
    f.A_ = S;
    f.a_ = a;
    f.c_ = c;
    f.value_ = [S, a, c](const Vec& y) { return y.dot(S * y) + a.dot(y) + c; };
    f.grad_ = [S, a](const Vec& y) { return Vec(2.0 * S * y + a); };
    f.hess_ = [S](const Vec&) { return Mat(2.0 * S); };
    return f;
  }

  static TestFunction gaussian_bump(const Vec& center, double sigma) {
    if (!(sigma > 0.0)) throw ValidationError("gaussian_bump sigma must be positive", "estimator.f.sigma");
    TestFunction f(FunctionKind::gaussian_bump, static_cast<int>(center.size()));
    f.a_ = center;
    f.sigma_ = sigma;
    const double s2 = sigma * sigma;
    const int n = f.ambient_;
    f.value_ = [center, s2](const Vec& y) { return std::exp(-(y - center).squaredNorm() / (2 * s2)); };
    f.grad_ = [center, s2](const Vec& y) {
      const Vec d = y - center;
      return Vec(-std::exp(-d.squaredNorm() / (2 * s2)) / s2 * d);
    };
    f.hess_ = [center, s2, n](const Vec& y) {
      const Vec d = y - center;
      const double g = std::exp(-d.squaredNorm() / (2 * s2));
      return Mat(g * (d * d.transpose() / (s2 * s2) - Mat::Identity(n, n) / s2));
    };
    f.bound_ = 1.0;
    return f;
  }

  /// Expression over ambient coordinates x1..xN (x, y, z aliases).
  static TestFunction expression(const std::string& text, int ambient,
                                 const std::map<std::string, double>& params = {}) {
    TestFunction f(FunctionKind::expression, ambient);
    f.text_ = text;
    auto e = std::make_shared<Expr>(coordinate_expr(text, ambient, params));
    auto d1 = std::make_shared<std::vector<Expr>>();
    auto d2 = std::make_shared<std::vector<Expr>>();
    for (int i = 0; i < ambient; ++i) d1->push_back(e->diff(i));
    for (int i = 0; i < ambient; ++i)
      for (int j = 0; j < ambient; ++j) d2->push_back((*d1)[i].diff(j));
    f.value_ = [e](const Vec& y) { return e->eval(std::span<const double>(y.data(), y.size())); };
    f.grad_ = [d1, ambient](const Vec& y) {
      Vec g(ambient);
      for (int i = 0; i < ambient; ++i) g(i) = (*d1)[i].eval(std::span<const double>(y.data(), y.size()));
      return g;
    };
    f.hess_ = [d2, ambient](const Vec& y) {
      Mat h(ambient, ambient);
      for (int i = 0; i < ambient; ++i)
        for (int j = 0; j < ambient; ++j)
          h(i, j) = (*d2)[i * ambient + j].eval(std::span<const double>(y.data(), y.size()));
      return h;
    };
    if (e->is_constant()) {
      f.kind_ = FunctionKind::constant;
      f.c_ = e->constant_value();
      f.bound_ = std::abs(f.c_);
    }
    return f;
  }

  static TestFunction custom(int ambient, Value v, Grad g, Hess h, std::string description) {
    TestFunction f(FunctionKind::custom, ambient);
    f.value_ = std::move(v);
    f.grad_ = std::move(g);
    f.hess_ = std::move(h);
    f.text_ = std::move(description);
    return f;
  }

  double operator()(const Vec& y) const { return value_(y); }
  Vec grad(const Vec& y) const { return grad_(y); }
  Mat hess(const Vec& y) const { return hess_(y); }

  FunctionKind kind() const { return kind_; }
  int ambient_dim() const { return ambient_; }
  const Vec& a() const { return a_; }
  const Mat& A() const { return A_; }
  double c() const { return c_; }
  double sigma() const { return sigma_; }
  const std::string& text() const { return text_; }

  /// Supplied bound, if any.
  std::optional<double> supplied_bound() const { return bound_; }
  TestFunction& with_bound(double b) {
    if (!(b >= 0.0)) throw ValidationError("bound must be >= 0", "estimator.f.bound");
    bound_ = b;
    return *this;
  }

  /// ||f||_D: the supplied bound or a sampled estimate over the closed ball,
  /// inflated by 2%.
  double bound_on(const BallDomain& ball) const {
    if (bound_) return *bound_;
    const int n = ball.model().dim();
    double worst = std::abs(value_(ball.center()));
    NormalStream stream(0x5eedb0d5ULL, 0);
    double z[kMaxAmbient];
    for (std::uint64_t i = 0; i < 4096; ++i) {
      stream.fill(i, std::span<double>(z, n));
      Vec w(n);
      for (int j = 0; j < n; ++j) w(j) = z[j];
      const double nrm = w.norm();
      if (!(nrm > 0.0)) continue;
      // Alternate boundary points and interior points.
      const double r = (i % 2 == 0) ? 1.0 : std::pow((i % 97) / 97.0, 1.0 / n);
      const Vec y = ball.normal_point(ball.radius() * r * w / nrm);
      worst = std::max(worst, std::abs(value_(y)));
    }
    return 1.02 * worst;
  }

private:
  TestFunction(FunctionKind k, int ambient) : kind_(k), ambient_(ambient) {
    a_ = Vec::Zero(ambient);
    A_ = Mat::Zero(ambient, ambient);
  }

  FunctionKind kind_;
  int ambient_;
  Vec a_;
  Mat A_;
  double c_ = 0.0;
  double sigma_ = 1.0;
  std::string text_;
  std::optional<double> bound_;
  Value value_;
  Grad grad_;
  Hess hess_;
};

/// Laplace-Beltrami of f at p through the trace of the intrinsic Hessian.
inline double laplacian(const Manifold& m, const TestFunction& f, const Vec& p) {
  const Mat frame = m.canonical_frame(p);
  return m.intrinsic_hessian(p, frame, f.grad(p), f.hess(p)).trace();
}

/// df(e_i) for the frame columns e_i, from ambient partial derivatives.
inline Vec frame_gradient(const Mat& frame, const Vec& ambient_grad) {
  return frame.transpose() * ambient_grad;
}

} // namespace bismut
