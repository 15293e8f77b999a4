#pragma once
#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <vector>

#include "shockstab/errors.hpp"
#include "shockstab/model.hpp"
#include "shockstab/ode.hpp"
#include "shockstab/spline.hpp"

namespace shockstab {

using Eigen::Matrix4d;
using Eigen::Vector4d;
using cd = std::complex<double>;
using Matrix4cd = Eigen::Matrix4cd;
using Vector4cd = Eigen::Vector4cd;
using Matrix2cd = Eigen::Matrix2cd;
using Vector2cd = Eigen::Vector2cd;

// ---------------------------------------------------------------------------
// Reduced (slow) flow on the critical manifold, travelling-wave coordinates:
//   U' = (P - c U)/D(U),  P' = -R(U)
// ---------------------------------------------------------------------------
inline Eigen::Vector2d reduced_flow_rhs(const Model& m, double c, const Eigen::Vector2d& up) {
  const double U = up[0], P = up[1];
  const double D = m.D(U);
  if (std::abs(D) < 1e-12) throw NumericalError("reduced_flow_rhs: fold crossing");
  return {(P - c * U) / D, -m.R(U)};
}

// saddle data of the reduced flow at an end state U* (R(U*) = 0)
struct ReducedSaddle {
  double U, P;         // equilibrium (U*, c U*)
  double mu_s, mu_u;   // stable/unstable eigenvalue
  double ms, mu;       // manifold slopes dP/dU for stable/unstable directions
};

inline ReducedSaddle reduced_saddle(const Model& m, double c, double Ustar) {
  const double D = m.D(Ustar), Rp = m.Rp(Ustar);
  if (!(Rp / D < 0.0)) throw NumericalError("reduced_saddle: end state not a saddle");
  const double tr = -c / D, det = Rp / D;
  const double disc = std::sqrt(tr * tr - 4.0 * det);
  const double mu_s = (tr - disc) / 2.0, mu_u = (tr + disc) / 2.0;
  return {Ustar, c * Ustar, mu_s, mu_u, -Rp / mu_s, -Rp / mu_u};
}

// ---------------------------------------------------------------------------
// Singular-limit geometry: both slow legs P(U) and the matching wavespeed c0.
// Legs are shot OUT of the saddles (inbound integration is exponentially
// ill-posed), parameterized by U: dP/dU = -R D/(P - cU).
// ---------------------------------------------------------------------------
struct SingularGeometry {
  double c0 = 0.0;
  JumpData jump;
  double P_star = 0.0;      // common P value at both jump endpoints
  HermiteSeries P_right;    // base P(U) on [u_plus, 1]
  HermiteSeries P_left;     // base P(U) on [0, u_minus]
};

namespace detail {

using Vec1 = Eigen::Matrix<double, 1, 1>;

inline HermiteSeries shoot_leg_P_of_U(const Model& m, double c, double U0, double P0,
                                      double U1) {
  auto rhs = [&](double U, const Vec1& p) -> Vec1 {
    const double den = p[0] - c * U;
    if (std::abs(den) < 1e-14) throw NumericalError("slow leg: tangency P = cU");
    Vec1 out;
    out[0] = -m.R(U) * m.D(U) / den;
    return out;
  };
  OdeOpts o;
  o.rtol = 1e-12;
  o.atol = 1e-14;
  Vec1 p0;
  p0[0] = P0;
  OdeSolution<Vec1> sol;
  try {
    sol = rk45(rhs, U0, U1, p0, o);
  } catch (const NumericalError&) {
    // the graph parametrization P(U) develops a vertical tangent where the
    // leg folds back through P = cU; the stepper stalls there
    throw NumericalError("slow leg: fold of the reduced flow (P = cU) before the target U");
  }
  std::vector<double> U(sol.t), P, dP;
  P.reserve(U.size());
  dP.reserve(U.size());
  for (std::size_t i = 0; i < U.size(); ++i) {
    P.push_back(sol.y[i][0]);
    dP.push_back(sol.f[i][0]);
  }
  if (U.front() > U.back()) {
    std::reverse(U.begin(), U.end());
    std::reverse(P.begin(), P.end());
    std::reverse(dP.begin(), dP.end());
  }
  return HermiteSeries(U, P, dP);
}

}  // namespace detail

// mismatch of the two slow legs at the equal-area jump (both carry the same P
// across the layer); its root in c is the singular wavespeed
inline double leg_mismatch(const Model& m, double c, const JumpData& j, double delta = 1e-9) {
  const auto sP = reduced_saddle(m, c, 1.0);
  const auto sM = reduced_saddle(m, c, 0.0);
  auto right = detail::shoot_leg_P_of_U(m, c, 1.0 - delta, sP.P - sP.mu * delta, j.u_plus);
  auto left = detail::shoot_leg_P_of_U(m, c, delta, sM.P + sM.ms * delta, j.u_minus);
  return right(j.u_plus) - left(j.u_minus);
}

// default bracket: for c below ~0.166 the left slow leg folds back through
// P = cU before reaching u_minus, so the mismatch is only defined on a window
// around the root; (0.17, 0.22) brackets the sign change with both legs intact
inline SingularGeometry singular_wavespeed(const Model& m, double c_lo = 0.17,
                                           double c_hi = 0.22) {
  const JumpData j = equal_area_jumps(m);
  double flo = leg_mismatch(m, c_lo, j), fhi = leg_mismatch(m, c_hi, j);
  if (flo * fhi > 0.0) throw NumericalError("singular_wavespeed: initial bracket fails");
  // bisect to get close, then secant-polish
  double a = c_lo, b = c_hi, fa = flo;
  for (int it = 0; it < 30; ++it) {
    const double mid = 0.5 * (a + b);
    const double fm = leg_mismatch(m, mid, j);
    if (fa * fm <= 0.0)
      b = mid;
    else {
      a = mid;
      fa = fm;
    }
  }
  double x0 = a, x1 = b, f0 = leg_mismatch(m, x0, j), f1 = leg_mismatch(m, x1, j);
  for (int it = 0; it < 60 && std::abs(x1 - x0) > 1e-15; ++it) {
    if (f1 == f0) break;
    const double x2 = x1 - f1 * (x1 - x0) / (f1 - f0);
    x0 = x1;
    f0 = f1;
    x1 = x2;
    f1 = leg_mismatch(m, x1, j);
  }
  const double c0 = x1;

  SingularGeometry g;
  g.c0 = c0;
  g.jump = j;
  const auto sP = reduced_saddle(m, c0, 1.0);
  const auto sM = reduced_saddle(m, c0, 0.0);
  const double delta = 1e-9;
  g.P_right = detail::shoot_leg_P_of_U(m, c0, 1.0 - delta, sP.P - sP.mu * delta, j.u_plus);
  g.P_left = detail::shoot_leg_P_of_U(m, c0, delta, sM.P + sM.ms * delta, j.u_minus);
  g.P_star = 0.5 * (g.P_right(j.u_plus) + g.P_left(j.u_minus));
  return g;
}

// ---------------------------------------------------------------------------
// Shock layer in the fast variable xi: u'' = F(u) - v_star, Hamiltonian
// H = w^2/2 - G(u) + v_star u, orbit on the level H = H(u_plus, 0) = -H0 with
// H0 = -G(u_plus) + v_star u_plus.
//
// Phi(u) := G(u) - v_star u + H0 satisfies Phi(u_pm) = 0 and
// Phi'(u_pm) = F(u_pm) - v_star = 0 (that is what the equal-area pair means),
// so the quartic factors exactly as A (u - u_minus)^2 (u - u_plus)^2 with
// A = (cubic coefficient of F)/4. The level set w = -sqrt(2 Phi) is therefore
// w = -k (u - u_minus)(u_plus - u), k = sqrt(2A), and u' = w integrates in
// closed form to a logistic front. Evaluating the factored form sidesteps the
// catastrophic cancellation of G - v_star u + H0 near the tails, where the
// true value ~ (distance)^2 drops below the rounding of its O(1) terms.
// ---------------------------------------------------------------------------
struct LayerProfile {
  HermiteSeries u, w;      // functions of xi on [-Xi, Xi]
  double Xi = 0.0;         // half-width at which the tails reach tail_tol
  double tail_rate = 0.0;  // exponential approach rate to the end states
  double H_residual = 0;   // max Hamiltonian drift along the orbit
  double v_star = 0.0;
};

inline LayerProfile layer_shock_profile(const Model& m, const JumpData& j,
                                        double tail_tol = 1e-10) {
  const double A = m.params().F_coeffs[3] / 4.0;
  if (A <= 0.0)
    throw NumericalError("layer_shock_profile: flux needs a positive cubic coefficient");
  if (std::abs(m.F(j.u_minus) - j.v_star) > 1e-9 || std::abs(m.F(j.u_plus) - j.v_star) > 1e-9)
    throw NumericalError("layer_shock_profile: v_star is not an equal-area level of the flux");
  const double k = std::sqrt(2.0 * A);
  const double du = j.u_plus - j.u_minus;
  const double rate = k * du;  // tail decay rate; equals sqrt(D(u_pm))
  const double depth = std::min(tail_tol, 0.1 * du);
  const double Xi = std::log(du / depth) / rate;

  // node spacing 0.05/rate keeps the cubic-Hermite interpolation error of the
  // logistic front near 1e-12
  const std::size_t nh = static_cast<std::size_t>(std::ceil(Xi * rate / 0.05));
  const std::size_t n = 2 * nh + 1;
  std::vector<double> xi(n), uu(n), ww(n), dudxi(n), dwdxi(n);
  const double H0 = -m.G(j.u_plus) + j.v_star * j.u_plus;
  double Hres = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double z = (static_cast<double>(i) - static_cast<double>(nh)) / static_cast<double>(nh);
    const double x = 1.0 / (1.0 + std::exp(rate * (z * Xi)));  // logistic, x(0) = 1/2
    xi[i] = z * Xi;
    uu[i] = j.u_minus + du * x;
    ww[i] = -k * du * du * x * (1.0 - x);
    dudxi[i] = ww[i];
    dwdxi[i] = m.F(uu[i]) - j.v_star;
    const double H = 0.5 * ww[i] * ww[i] - m.G(uu[i]) + j.v_star * uu[i];
    Hres = std::max(Hres, std::abs(H - H0));
  }
  LayerProfile lp;
  lp.Xi = Xi;
  lp.tail_rate = rate;
  lp.u = HermiteSeries(xi, uu, dudxi);
  lp.w = HermiteSeries(xi, ww, dwdxi);
  lp.H_residual = Hres;
  lp.v_star = j.v_star;
  return lp;
}

// ---------------------------------------------------------------------------
// Travelling-wave system at eps > 0 (zeta scale):
//   eps U' = W, eps W' = F(U) - V, P' = -R(U), V' = P - c U
// ---------------------------------------------------------------------------
inline Vector4d wave_rhs(const Model& m, double eps, double c, const Vector4d& y) {
  return {y[1] / eps, (m.F(y[0]) - y[3]) / eps, -m.R(y[0]), y[2] - c * y[0]};
}

inline Matrix4d wave_jacobian(const Model& m, double eps, double c, const Vector4d& y) {
  // true flux derivative, independent of any alternate-D configuration
  const auto& fc = m.params().F_coeffs;
  const double Fp = fc[1] + 2.0 * fc[2] * y[0] + 3.0 * fc[3] * y[0] * y[0];
  Matrix4d J = Matrix4d::Zero();
  J(0, 1) = 1.0 / eps;
  J(1, 0) = Fp / eps;
  J(1, 3) = -1.0 / eps;
  J(2, 0) = -m.Rp(y[0]);
  J(3, 0) = -c;
  J(3, 2) = 1.0;
  return J;
}

struct EquilibriumData {
  Vector4d q;           // equilibrium state (U*, 0, c U*, F(U*))
  Matrix4d J;           // linearization
  Vector4cd eigvals;    // sorted by real part, ascending
  Matrix4cd eigvecs;    // unit norm, first significant component positive-real
};

inline EquilibriumData equilibria_and_linearization(const Model& m, double eps, double c,
                                                    double Ustar) {
  EquilibriumData e;
  e.q = {Ustar, 0.0, c * Ustar, m.F(Ustar)};
  e.J = wave_jacobian(m, eps, c, e.q);
  Eigen::EigenSolver<Matrix4d> es(e.J);
  if (es.info() != Eigen::Success)
    throw NumericalError("equilibria_and_linearization: eigensolver failed");
  Vector4cd vals = es.eigenvalues();
  Matrix4cd vecs = es.eigenvectors();
  std::array<int, 4> idx{0, 1, 2, 3};
  std::sort(idx.begin(), idx.end(),
            [&](int a, int b) { return vals[a].real() < vals[b].real(); });
  for (int k = 0; k < 4; ++k) {
    e.eigvals[k] = vals[idx[k]];
    Vector4cd v = vecs.col(idx[k]);
    v /= v.norm();
    for (int i = 0; i < 4; ++i) {
      if (std::abs(v[i]) > 1e-12) {
        v *= std::conj(v[i]) / std::abs(v[i]);
        break;
      }
    }
    e.eigvecs.col(k) = v;
  }
  return e;
}

// ---------------------------------------------------------------------------
// Singular composite orbit: initial guess for the eps > 0 boundary-value
// problem, assembled from the two slow legs (in zeta) and the shock layer
// (in xi = zeta/eps), clamped to the end states beyond the legs.
// ---------------------------------------------------------------------------
struct SingularOrbit {
  SingularGeometry geo;
  LayerProfile layer;
  HermiteSeries U_right, P_right_t;  // right slow leg as functions of zeta in [-T_R, 0]
  HermiteSeries U_left, P_left_t;    // left slow leg as functions of zeta in [0, T_L]
  double T_R = 0.0, T_L = 0.0;
};

inline SingularOrbit singular_orbit(const Model& m, const SingularGeometry& g,
                                    double delta = 1e-9) {
  using Vec2 = Eigen::Vector2d;
  SingularOrbit so;
  so.geo = g;
  so.layer = layer_shock_profile(m, g.jump);
  const double c = g.c0;
  auto rhs = [&](double, const Vec2& y) -> Vec2 { return reduced_flow_rhs(m, c, y); };
  OdeOpts o;
  o.rtol = 1e-12;
  o.atol = 1e-14;

  const auto sP = reduced_saddle(m, c, 1.0);
  std::vector<Event<Vec2>> evR{
      {[&](double, const Vec2& y) { return y[0] - g.jump.u_plus; }, true, 0}};
  auto segR = rk45(rhs, 0.0, 2000.0, Vec2{1.0 - delta, sP.P - sP.mu * delta}, o, evR);
  if (!segR.event_hit) throw NumericalError("singular_orbit: right leg missed the jump");

  const auto sM = reduced_saddle(m, c, 0.0);
  std::vector<Event<Vec2>> evL{
      {[&](double, const Vec2& y) { return y[0] - g.jump.u_minus; }, true, 0}};
  auto segL = rk45(rhs, 0.0, -2000.0, Vec2{delta, sM.P + sM.ms * delta}, o, evL);
  if (!segL.event_hit) throw NumericalError("singular_orbit: left leg missed the jump");

  // zeta is a pure translation of integration time: shift so the jump sits at
  // zeta = 0; the backward-shot left leg only needs its node order reversed
  auto to_series = [](const OdeSolution<Vec2>& s, double shift, int comp, bool reversed) {
    std::vector<double> t, y, dy;
    const std::size_t n = s.t.size();
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t k = reversed ? n - 1 - i : i;
      t.push_back(s.t[k] - shift);
      y.push_back(s.y[k][comp]);
      dy.push_back(s.f[k][comp]);
    }
    return HermiteSeries(t, y, dy);
  };
  so.T_R = segR.t_end;
  so.U_right = to_series(segR, segR.t_end, 0, false);  // covers [-T_R, 0]
  so.P_right_t = to_series(segR, segR.t_end, 1, false);
  so.T_L = -segL.t_end;
  so.U_left = to_series(segL, segL.t_end, 0, true);  // covers [0, T_L]
  so.P_left_t = to_series(segL, segL.t_end, 1, true);
  return so;
}

// composite guess sampled at zeta (wave decreasing 1 -> 0, layer at zeta = 0);
// the layer hands over to the slow legs where its tail distance from the end
// states falls to ~eps — past that point the slow variation of P and V
// dominates, so stretching the layer (with its frozen P, V) any further would
// leave an O(1) defect; the legs attach with their arguments shifted so their
// jump endpoints sit at the handover
inline Vector4d sample_singular_orbit(const Model& m, const SingularOrbit& so, double eps,
                                      double zeta) {
  const double c = so.geo.c0;
  const double du = so.geo.jump.u_plus - so.geo.jump.u_minus;
  const double depth = std::min(eps, 0.1 * du);
  const double xi_h = std::min(so.layer.Xi, std::log(du / depth) / so.layer.tail_rate);
  const double w_half = xi_h * eps;
  if (std::abs(zeta) <= w_half) {
    const double xi = zeta / eps;
    return {so.layer.u(xi), so.layer.w(xi), so.geo.P_star, so.geo.jump.v_star};
  }
  if (zeta < 0.0) {
    const double zs = zeta + w_half;
    if (zs <= -so.T_R) return {1.0, 0.0, c, m.F(1.0)};
    const double U = so.U_right(zs), P = so.P_right_t(zs);
    return {U, eps * (P - c * U) / m.D(U), P, m.F(U)};
  }
  const double zs = zeta - w_half;
  if (zs >= so.T_L) return {0.0, 0.0, 0.0, m.F(0.0)};
  const double U = so.U_left(zs), P = so.P_left_t(zs);
  return {U, eps * (P - c * U) / m.D(U), P, m.F(U)};
}

// ---------------------------------------------------------------------------
// Full travelling-wave boundary-value problem: 3-stage Lobatto IIIA
// collocation with the wavespeed as an extra unknown, projection boundary
// conditions onto the saddle subspaces, interior phase condition
// U(0) = flux inflection, adaptive mesh refinement, eps-continuation.
// ---------------------------------------------------------------------------
struct WaveProfile {
  double eps = 0.0, c = 0.0, L = 0.0;
  std::vector<double> zeta;
  std::vector<Vector4d> y;
  std::vector<Vector4d> f;
  double max_residual = 0.0;  // collocation defect estimate
  double bc_residual = 0.0;   // end-state deviation at truncation
};

struct WaveBvpOpts {
  double L = 50.0;
  double rtol = 1e-8;
  int max_newton = 25;
  int max_refine = 14;
  long max_nodes = 500000;
};

namespace detail {

// stable/unstable left-eigenvector projection rows at an end state
inline Eigen::Matrix<double, 2, 4> projection_rows(const Model& m, double eps, double c,
                                                   double Ustar, bool stable) {
  const auto e = equilibria_and_linearization(m, eps, c, Ustar);
  int nneg = 0;
  for (int k = 0; k < 4; ++k)
    if (e.eigvals[k].real() < 0) ++nneg;
  if (nneg != 2)
    throw NumericalError("projection_rows: end state not hyperbolic with a 2-2 split");
  Matrix4cd Vi = e.eigvecs.inverse();
  Eigen::Matrix<double, 2, 4> L;
  for (int r = 0; r < 2; ++r) {
    const int k = stable ? r : 2 + r;  // eigvals sorted ascending
    if (std::abs(e.eigvals[k].imag()) > 1e-8 * (1.0 + std::abs(e.eigvals[k].real())))
      throw NumericalError("projection_rows: complex end-state eigenvalue");
    Eigen::Matrix<cd, 1, 4> row = Vi.row(k);
    double scale = 0.0;
    for (int i = 0; i < 4; ++i) scale = std::max(scale, std::abs(row[i]));
    for (int i = 0; i < 4; ++i) L(r, i) = row[i].real() / scale;
  }
  return L;
}

struct BvpWork {
  std::vector<double> z;       // mesh
  std::vector<Vector4d> y;     // states at nodes
  double c = 0.0;
  std::size_t i0 = 0;          // index of zeta = 0
};

inline std::size_t find_zero_index(const std::vector<double>& z) {
  for (std::size_t i = 0; i < z.size(); ++i)
    if (z[i] == 0.0) return i;
  throw NumericalError("wave bvp: mesh lost the zeta = 0 node");
}

// one Newton solve on a fixed mesh; returns max |r|_inf over the iteration end
inline double bvp_newton(const Model& m, double eps, BvpWork& w, double phase_U,
                         const WaveBvpOpts& opt) {
  const std::size_t N = w.z.size() - 1;
  const Eigen::Index dim = 4 * static_cast<Eigen::Index>(N + 1) + 1;
  const Eigen::Index ccol = dim - 1;

  Eigen::VectorXd r(dim);
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(40 * N + 30);

  auto assemble = [&](bool with_jac) -> double {
    if (with_jac) trip.clear();
    const double c = w.c;
    const auto Ls = projection_rows(m, eps, c, 1.0, true);
    const auto Lu = projection_rows(m, eps, c, 0.0, false);
    const Vector4d qp{1.0, 0.0, c, m.F(1.0)};
    const Vector4d qm{0.0, 0.0, 0.0, m.F(0.0)};

    // left boundary rows 0..1
    Eigen::Vector2d rl = Ls * (w.y.front() - qp);
    r[0] = rl[0];
    r[1] = rl[1];
    if (with_jac) {
      for (int rr = 0; rr < 2; ++rr) {
        for (int i = 0; i < 4; ++i) trip.emplace_back(rr, i, Ls(rr, i));
        trip.emplace_back(rr, ccol, -Ls(rr, 2));  // dq_plus/dc = e3
      }
    }
    // interval rows
    for (std::size_t i = 0; i < N; ++i) {
      const double h = w.z[i + 1] - w.z[i];
      const Vector4d &yi = w.y[i], &yj = w.y[i + 1];
      const Vector4d fi = wave_rhs(m, eps, c, yi);
      const Vector4d fj = wave_rhs(m, eps, c, yj);
      const Vector4d ym = 0.5 * (yi + yj) - (h / 8.0) * (fj - fi);
      const Vector4d fm = wave_rhs(m, eps, c, ym);
      const Vector4d ri = yj - yi - (h / 6.0) * (fi + 4.0 * fm + fj);
      const Eigen::Index row = 2 + 4 * static_cast<Eigen::Index>(i);
      r.segment<4>(row) = ri;
      if (with_jac) {
        const Matrix4d Ji = wave_jacobian(m, eps, c, yi);
        const Matrix4d Jj = wave_jacobian(m, eps, c, yj);
        const Matrix4d Jm = wave_jacobian(m, eps, c, ym);
        const Matrix4d I = Matrix4d::Identity();
        const Matrix4d Ai = -I - (h / 6.0) * (Ji + 4.0 * Jm * (0.5 * I + (h / 8.0) * Ji));
        const Matrix4d Bi = I - (h / 6.0) * (Jj + 4.0 * Jm * (0.5 * I - (h / 8.0) * Jj));
        const Vector4d gi{0.0, 0.0, 0.0, -yi[0]};
        const Vector4d gj{0.0, 0.0, 0.0, -yj[0]};
        const Vector4d gm{0.0, 0.0, 0.0, -ym[0]};
        const Vector4d dym_dc = -(h / 8.0) * (gj - gi);
        const Vector4d dr_dc = -(h / 6.0) * (gi + 4.0 * (Jm * dym_dc + gm) + gj);
        for (int a = 0; a < 4; ++a) {
          for (int b = 0; b < 4; ++b) {
            trip.emplace_back(row + a, 4 * static_cast<Eigen::Index>(i) + b, Ai(a, b));
            trip.emplace_back(row + a, 4 * static_cast<Eigen::Index>(i + 1) + b, Bi(a, b));
          }
          trip.emplace_back(row + a, ccol, dr_dc[a]);
        }
      }
    }
    // right boundary rows
    Eigen::Vector2d rr2 = Lu * (w.y.back() - qm);
    const Eigen::Index rrow = 2 + 4 * static_cast<Eigen::Index>(N);
    r[rrow] = rr2[0];
    r[rrow + 1] = rr2[1];
    if (with_jac) {
      for (int rr = 0; rr < 2; ++rr)
        for (int i = 0; i < 4; ++i)
          trip.emplace_back(rrow + rr, 4 * static_cast<Eigen::Index>(N) + i, Lu(rr, i));
    }
    // phase row: U at zeta = 0 pinned to the flux inflection
    r[rrow + 2] = w.y[w.i0][0] - phase_U;
    if (with_jac) trip.emplace_back(rrow + 2, 4 * static_cast<Eigen::Index>(w.i0), 1.0);
    return r.cwiseAbs().maxCoeff();
  };

  double rn = assemble(true);
  for (int it = 0; it < opt.max_newton; ++it) {
    Eigen::SparseMatrix<double> A(dim, dim);
    A.setFromTriplets(trip.begin(), trip.end());
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(A);
    if (lu.info() != Eigen::Success)
      throw NumericalError("wave bvp: singular collocation Jacobian");
    Eigen::VectorXd dx = lu.solve(r);

    // damped update with simple backtracking
    double alpha = 1.0;
    std::vector<Vector4d> ysave = w.y;
    double csave = w.c;
    double rnew = rn;
    for (int bt = 0; bt < 10; ++bt) {
      for (std::size_t i = 0; i <= N; ++i)
        w.y[i] = ysave[i] - alpha * dx.segment<4>(4 * static_cast<Eigen::Index>(i));
      w.c = csave - alpha * dx[ccol];
      try {
        rnew = assemble(false);
      } catch (const NumericalError&) {
        rnew = std::numeric_limits<double>::infinity();
      }
      if (rnew < (1.0 - 1e-4 * alpha) * rn || rnew < 1e-12) break;
      alpha *= 0.5;
    }
    if (!(rnew < rn) && rn < 1e-9) {  // stagnation at fl.point floor
      w.y = ysave;
      w.c = csave;
      return rn;
    }
    if (!(rnew < rn) && rn >= 1e-9)
      throw NumericalError("wave bvp: Newton stalled, |r| = " + std::to_string(rn));
    rn = assemble(true);
    const double dxn = dx.cwiseAbs().maxCoeff();
    if (rn < 1e-12 || dxn < 1e-13) return rn;
  }
  if (rn > 1e-8) throw NumericalError("wave bvp: Newton did not converge");
  return rn;
}

// collocation defect on each interval, sampled off the collocation points.
// The reconstruction must be the scheme's own quartic collocation polynomial
// (values y0, ym, y1; slopes f0, f1): its residual vanishes at s = 0, 1/2, 1
// by construction, so the quarter-point samples measure genuine
// inter-collocation error.  A plain cubic Hermite is one order lower than the
// scheme; on the two rows carrying a 1/eps factor its slope mismatch gets
// amplified by 1/eps and reports O(1) defects on converged solutions.
inline std::vector<double> interval_defect(const Model& m, double eps, const BvpWork& w) {
  const std::size_t N = w.z.size() - 1;
  std::vector<double> d(N, 0.0);
  for (std::size_t i = 0; i < N; ++i) {
    const double h = w.z[i + 1] - w.z[i];
    const Vector4d &y0 = w.y[i], &y1 = w.y[i + 1];
    const Vector4d f0 = wave_rhs(m, eps, w.c, y0);
    const Vector4d f1 = wave_rhs(m, eps, w.c, y1);
    const Vector4d ym = 0.5 * (y0 + y1) - (h / 8.0) * (f1 - f0);
    double scale = 1.0;
    for (int k = 0; k < 4; ++k)
      scale = std::max(scale, std::max(std::abs(f0[k]), std::abs(f1[k])));
    double worst = 0.0;
    for (double s : {0.25, 0.75}) {
      const double t = 1.0 - s;
      // quartic basis: value 1 at one of {0, 1/2, 1} (A, C, D) or unit slope
      // at an endpoint (B, E), all other values/end-slopes zero
      const double A = 1.0 + s * s * (-11.0 + s * (18.0 - 8.0 * s));
      const double B = s * (1.0 + s * (-4.0 + s * (5.0 - 2.0 * s)));
      const double C = 16.0 * s * s * t * t;
      const double D = s * s * (-5.0 + s * (14.0 - 8.0 * s));
      const double E = -t * (1.0 + t * (-4.0 + t * (5.0 - 2.0 * t)));
      const double Ap = s * (-22.0 + s * (54.0 - 32.0 * s));
      const double Bp = 1.0 + s * (-8.0 + s * (15.0 - 8.0 * s));
      const double Cp = 32.0 * s * t * (1.0 - 2.0 * s);
      const double Dp = s * (-10.0 + s * (42.0 - 32.0 * s));
      const double Ep = 1.0 + t * (-8.0 + t * (15.0 - 8.0 * t));
      const Vector4d ys = A * y0 + (B * h) * f0 + C * ym + D * y1 + (E * h) * f1;
      const Vector4d dys =
          (Ap * y0 + (Bp * h) * f0 + Cp * ym + Dp * y1 + (Ep * h) * f1) / h;
      const Vector4d def = dys - wave_rhs(m, eps, w.c, ys);
      worst = std::max(worst, def.cwiseAbs().maxCoeff() / scale);
    }
    d[i] = worst;
  }
  return d;
}

// guess transfer onto a refined mesh.  Linear on purpose: Hermite slopes on
// the 1/eps rows magnify any node-level offset from the slow manifold into
// O(h/eps) overshoots at inserted nodes, which the stiff collocation rows
// turn into huge residuals; the O(h^2) loss is recovered by the next Newton.
inline void interp_onto(const BvpWork& src, const std::vector<double>& znew,
                        BvpWork& dst) {
  dst.z = znew;
  dst.c = src.c;
  dst.y.assign(znew.size(), Vector4d::Zero());
  std::size_t j = 0;
  for (std::size_t i = 0; i < znew.size(); ++i) {
    const double zq = znew[i];
    while (j + 2 < src.z.size() && src.z[j + 1] <= zq) ++j;
    const double h = src.z[j + 1] - src.z[j];
    const double s = std::clamp((zq - src.z[j]) / h, 0.0, 1.0);
    dst.y[i] = (1.0 - s) * src.y[j] + s * src.y[j + 1];
  }
  dst.i0 = find_zero_index(dst.z);
}

}  // namespace detail

inline std::vector<double> wave_initial_mesh(double L, double eps) {
  std::vector<double> z;
  const double outer_h = 0.25;
  // the graded region must cover the full shock-layer support (half-width
  // ~75*eps in zeta for the default flux, tails decaying at rate ~0.29/eps)
  const double inner = std::min(1.5, 100.0 * eps);
  // geometric grading from |z| = inner down to spacing eps/3 near the layer
  std::vector<double> half;
  double x = 0.0, hstep = eps / 3.0;
  while (x < inner) {
    half.push_back(x);
    x += hstep;
    hstep = std::min(hstep * 1.12, 0.1);
  }
  half.push_back(inner);
  for (double v = inner + outer_h; v < L; v += outer_h) half.push_back(v);
  half.push_back(L);
  for (auto it = half.rbegin(); it != half.rend(); ++it) z.push_back(-*it);
  for (std::size_t i = 1; i < half.size(); ++i) z.push_back(half[i]);
  return z;
}

inline WaveProfile solve_wave_bvp(const Model& model, const WaveBvpOpts& opt = {}) {
  const double eps_target = model.eps();
  const JumpData jd = equal_area_jumps(model);
  const double phase_U = 0.5 * (jd.u_minus + jd.u_plus);
  const SingularGeometry geo = singular_wavespeed(model);
  const SingularOrbit orbit = singular_orbit(model, geo);

  // the singular composite approximates the true wave to O(eps) uniformly, so
  // it is a direct Newton starter at any small eps; no continuation needed
  detail::BvpWork w;
  w.z = wave_initial_mesh(opt.L, eps_target);
  w.c = geo.c0;
  w.i0 = detail::find_zero_index(w.z);
  w.y.resize(w.z.size());
  for (std::size_t i = 0; i < w.z.size(); ++i)
    w.y[i] = sample_singular_orbit(model, orbit, eps_target, w.z[i]);

  for (int round = 0;; ++round) {
    detail::bvp_newton(model, eps_target, w, phase_U, opt);
    auto d = detail::interval_defect(model, eps_target, w);
    std::vector<double> znew;
    znew.reserve(w.z.size() * 2);
    bool refined = false;
    for (std::size_t i = 0; i + 1 < w.z.size(); ++i) {
      znew.push_back(w.z[i]);
      const double h = w.z[i + 1] - w.z[i];
      if (d[i] > opt.rtol && h > 1e-4 * eps_target) {
        const int parts = d[i] > 100.0 * opt.rtol ? 3 : 2;
        for (int p = 1; p < parts; ++p) znew.push_back(w.z[i] + h * p / parts);
        refined = true;
      }
    }
    znew.push_back(w.z.back());
    if (!refined) break;
    if (round >= opt.max_refine)
      throw NumericalError("wave bvp: refinement budget exhausted");
    if (static_cast<long>(znew.size()) > opt.max_nodes)
      throw NumericalError("wave bvp: node budget exhausted");
    detail::BvpWork wn;
    detail::interp_onto(w, znew, wn);
    w = std::move(wn);
  }

  WaveProfile wp;
  wp.eps = eps_target;
  wp.c = w.c;
  wp.L = opt.L;
  wp.zeta = w.z;
  wp.y = w.y;
  wp.f.resize(w.y.size());
  for (std::size_t i = 0; i < w.y.size(); ++i)
    wp.f[i] = wave_rhs(model, eps_target, w.c, w.y[i]);
  auto d = detail::interval_defect(model, eps_target, w);
  wp.max_residual = d.empty() ? 0.0 : *std::max_element(d.begin(), d.end());
  const Vector4d qp{1.0, 0.0, w.c, model.F(1.0)};
  wp.bc_residual = std::max((w.y.front() - qp).cwiseAbs().maxCoeff(),
                            w.y.back().cwiseAbs().maxCoeff());
  return wp;
}

// U(zeta) interpolant for downstream spectral modules
inline HermiteSeries wave_U_interpolant(const WaveProfile& wp) {
  std::vector<double> t(wp.zeta), u, du;
  u.reserve(t.size());
  du.reserve(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    u.push_back(wp.y[i][0]);
    du.push_back(wp.f[i][0]);
  }
  return HermiteSeries(t, u, du);
}

}  // namespace shockstab
