#pragma once

#include <bismut/geometry/curvature.hpp>
#include <bismut/geometry/manifold.hpp>

#include <algorithm>
#include <cmath>

namespace bismut {

/// Damped and doubly damped transport along one path, in the coordinates of
/// the parallel frame (everything pulled back to T_xM by ptr_s^{-1}).
///
/// Q, Q_inv: ptr^{-1} Q_s and its inverse. Wvv: ptr^{-1} W^k_s(v,v).
/// Accumulators (left-point Ito sums):
///   I_W      = int kdot <W(v,v), dB>
///   I_Q      = int kdot <Q v, dB>
///   I_QQ     = int kdot^2 |Q v|^2 ds
///   I_nested = int (int_0^s kdot <Q v, dB>) kdot <Q v, dB>
///   I_WW     = int kdot^2 |W(v,v)|^2 ds
struct TransportState {
  Mat Q;
  Mat Q_inv;
  Vec v;
  Vec Wvv;
  double I_W = 0.0;
  double I_Q = 0.0;
  double I_QQ = 0.0;
  double I_nested = 0.0;
  double I_WW = 0.0;

  static TransportState start(const Vec& v) {
    const auto n = v.size();
    TransportState s;
    s.Q = Mat::Identity(n, n);
    s.Q_inv = Mat::Identity(n, n);
    s.v = v;
    s.Wvv = Vec::Zero(n);
    return s;
  }

  Vec Qv() const { return Q * v; }
};

/// Q <- exp(-(h/2) Ric) Q, Q_inv <- Q_inv exp((h/2) Ric), with Ric frozen
/// at the left point. Exact when Ric is constant along the path.
inline void step_Q(TransportState& st, const Eigen::MatrixXd& ricci, double h) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(ricci);
  const Eigen::VectorXd lam = es.eigenvalues();
  const Eigen::MatrixXd U = es.eigenvectors();
  const Mat damp = U * (-0.5 * h * lam.array()).exp().matrix().asDiagonal() * U.transpose();
  const Mat grow = U * (0.5 * h * lam.array()).exp().matrix().asDiagonal() * U.transpose();
  st.Q = damp * st.Q;
  st.Q_inv = st.Q_inv * grow;
}

/// Isotropic form: Ric = r Id.
inline void step_Q(TransportState& st, double r, double h) {
  if (r == 0.0) return;
  st.Q *= std::exp(-0.5 * h * r);
  st.Q_inv *= std::exp(0.5 * h * r);
}

/// Increment of W(a-slot, b-slot) for one step:
/// R(dB, k Qa) Qb - (h/2) S(k Qa, Qb) - (h/2) Ric W.
inline void w_increment(const LocalCurvature& lc, double k, const Vec& qa, const Vec& qb,
                        const Vec& w, const Vec& db, double h, Vec& out) {
  if (lc.flat) {
    out.setZero(w.size());
    return;
  }
  Vec tmp(w.size());
  lc.riemann(db, k * qa, qb, out);
  if (!lc.grad_sectional.isZero(0.0)) {
    lc.dstar_nabla(k * qa, qb, tmp);
    out -= (0.5 * h) * tmp;
  }
  out -= (0.5 * h * lc.ricci_factor()) * w;
}

inline void step_W(TransportState& st, const LocalCurvature& lc, double k_val, const Vec& db,
                   double h) {
  const Vec qv = st.Qv();
  Vec dw(st.Wvv.size());
  w_increment(lc, k_val, qv, qv, st.Wvv, db, h, dw);
  st.Wvv += dw;
}

/// General-tensor form, with curvature supplied as CurvatureData.
inline void step_W(TransportState& st, const CurvatureData& cd, double k_val, const Vec& db,
                   double h) {
  const int n = cd.n;
  const Vec qv = st.Qv();
  const Vec a = k_val * qv;
  Vec dw = Vec::Zero(n);
  // <R(e_i,e_j)e_k, e_l> with (i, j, k) = (dB, kQv, Qv)
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        const double c = db(i) * a(j) * qv(k);
        if (c == 0.0) continue;
        for (int l = 0; l < n; ++l) dw(l) += c * cd.riemann(i, j, k, l);
      }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double c = a(i) * qv(j);
      for (int l = 0; l < n; ++l) dw(l) -= 0.5 * h * c * cd.dstar_nabla(i, j, l);
    }
  const Mat ric = cd.ricci;
  dw -= (0.5 * h) * (ric * st.Wvv);
  st.Wvv += dw;
}

inline void accumulate_integrals(TransportState& st, double k_dot, const Vec& db, double h) {
  const Vec qv = st.Qv();
  const double inc = k_dot * qv.dot(db);
  st.I_W += k_dot * st.Wvv.dot(db);
  st.I_nested += st.I_Q * inc;
  st.I_Q += inc;
  st.I_QQ += k_dot * k_dot * qv.dot(qv) * h;
  st.I_WW += k_dot * k_dot * st.Wvv.dot(st.Wvv) * h;
}

/// One full left-point step: integrals, then W, then Q.
inline void advance(TransportState& st, const LocalCurvature& lc, double k_val, double k_dot,
                    const Vec& db, double h) {
  accumulate_integrals(st, k_dot, db, h);
  step_W(st, lc, k_val, db, h);
  step_Q(st, lc.ricci_factor(), h);
}

/// Polarized state tracking W(v, .w) and W(w, .v) for the (v, w) formula.
/// The pair is stored in a canonical order so that (v, w) and (w, v) run
/// the identical computation.
struct PolarizedTransportState {
  Mat Q;
  Vec v, w;
  Vec Wvw, Wwv;
  double I_Wvw = 0.0;
  double I_Wwv = 0.0;
  double I_Qv = 0.0;
  double I_Qw = 0.0;
  double I_QvQw = 0.0;

  static PolarizedTransportState start(const Vec& a, const Vec& b) {
    const bool swap = std::lexicographical_compare(b.data(), b.data() + b.size(), a.data(),
                                                   a.data() + a.size());
    PolarizedTransportState s;
    const auto n = a.size();
    s.Q = Mat::Identity(n, n);
    s.v = swap ? b : a;
    s.w = swap ? a : b;
    s.Wvw = Vec::Zero(n);
    s.Wwv = Vec::Zero(n);
    return s;
  }

  void advance(const LocalCurvature& lc, double k_val, double k_dot, const Vec& db, double h) {
    const Vec qv = Q * v;
    const Vec qw = Q * w;
    const double iv = k_dot * qv.dot(db);
    const double iw = k_dot * qw.dot(db);
    I_Wvw += k_dot * Wvw.dot(db);
    I_Wwv += k_dot * Wwv.dot(db);
    I_Qv += iv;
    I_Qw += iw;
    I_QvQw += k_dot * k_dot * qv.dot(qw) * h;
    Vec d(v.size());
    w_increment(lc, k_val, qv, qw, Wvw, db, h, d);
    Wvw += d;
    w_increment(lc, k_val, qw, qv, Wwv, db, h, d);
    Wwv += d;
    step_Q_only(lc.ricci_factor(), h);
  }

  /// Per-path weight multiplying f(X_T).
  double weight() const { return (-0.5 * (I_Wvw + I_Wwv) + I_Qv * I_Qw) - I_QvQw; }

private:
  void step_Q_only(double r, double h) {
    if (r != 0.0) Q *= std::exp(-0.5 * h * r);
  }
};

/// Per-path weight of the three-term Hessian formula.
inline double three_term_weight(const TransportState& st) {
  return (-st.I_W + st.I_Q * st.I_Q) - st.I_QQ;
}
inline double iterated_weight(const TransportState& st) { return -st.I_W + 2.0 * st.I_nested; }

} // namespace bismut
