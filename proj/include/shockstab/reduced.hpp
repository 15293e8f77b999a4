#pragma once
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <string>
#include <vector>

#include "shockstab/errors.hpp"
#include "shockstab/model.hpp"
#include "shockstab/ode.hpp"
#include "shockstab/riccati.hpp"
#include "shockstab/spectrum_essential.hpp"
#include "shockstab/wave.hpp"

namespace shockstab {

using Vector3cd = Eigen::Vector3cd;
using Matrix3cd = Eigen::Matrix3cd;
using Vector1cd = Eigen::Matrix<cd, 1, 1>;

// ---------------------------------------------------------------------------
// Fast (layer-scale) eigenvalue problem, followed projectively. In the chart
// beta = (w, p, v)/u the layer-scale flow reads, per unit xi = zeta/eps,
//   beta1' = D(u) - beta3 - beta1^2
//   beta2' = eps (lam - R'(u)) - beta2 beta1
//   beta3' = eps (beta2 - c) - beta3 beta1
// and we integrate in zeta (divide by eps). The complementary chart
// gamma = (u, p, v)/w covers passages where u crosses zero.
// ---------------------------------------------------------------------------
inline Vector3cd fast_beta_rhs_xi(const Model& m, double ub, double eps, double c, cd lam,
                                  const Vector3cd& b) {
  Vector3cd f;
  f[0] = m.D(ub) - b[2] - b[0] * b[0];
  f[1] = eps * (lam - m.Rp(ub)) - b[1] * b[0];
  f[2] = eps * (b[1] - c) - b[2] * b[0];
  return f;
}

inline Matrix3cd fast_beta_jac_xi(const Model& m, double ub, double eps, const Vector3cd& b) {
  Matrix3cd J;
  J << -2.0 * b[0], 0.0, -1.0,
       -b[1], -b[0], 0.0,
       -b[2], cd(eps), -b[0];
  return J;
}

inline Vector3cd fast_gamma_rhs_xi(const Model& m, double ub, double eps, double c, cd lam,
                                   const Vector3cd& g) {
  const cd q = m.D(ub) * g[0] - g[2];
  Vector3cd f;
  f[0] = 1.0 - g[0] * q;
  f[1] = eps * (lam - m.Rp(ub)) * g[0] - g[1] * q;
  f[2] = eps * (g[1] - c * g[0]) - g[2] * q;
  return f;
}

inline Matrix3cd fast_gamma_jac_xi(const Model& m, double ub, double eps, double c, cd lam,
                                   const Vector3cd& g) {
  const double Du = m.D(ub);
  const cd q = Du * g[0] - g[2];
  Matrix3cd J;
  J << -2.0 * Du * g[0] + g[2], 0.0, g[0],
       eps * (lam - m.Rp(ub)) - g[1] * Du, -q, g[1],
       -eps * c - g[2] * Du, cd(eps), -q + g[2];
  return J;
}

namespace detail {
inline Vector3cd flip_projective_chart(const Vector3cd& x) {
  if (std::abs(x[0]) < 1e-300)
    throw NumericalError("projective chart flip: leading coordinate vanished");
  return Vector3cd(1.0 / x[0], x[1] / x[0], x[2] / x[0]);
}
}  // namespace detail

struct ProjOpts {
  double rtol = 1e-10;
  double atol = 1e-12;
  double chunk = 2.5;
  double switch_hi = 100.0;  // flip chart once the state norm exceeds this
  double blowup = 1e8;
  double min_chunk_frac = 1e-7;
};

struct ProjPath {
  std::vector<double> zeta;
  std::vector<Vector3cd> beta;
  int chart_flips = 0;
};

inline Vector3cd integrate_fast_projective(const Model& m,
                                           const std::function<double(double)>& ubar,
                                           double eps, double c, cd lam, double z0, double z1,
                                           Vector3cd state, const ProjOpts& opt = {},
                                           ProjPath* path = nullptr) {
  int chart = 0;  // 0: beta = (w,p,v)/u, 1: gamma = (u,p,v)/w
  auto record = [&](double z, const Vector3cd& x, int ch) {
    if (!path) return;
    if (ch == 0) {
      path->zeta.push_back(z);
      path->beta.push_back(x);
    } else if (std::abs(x[0]) > 1e-300) {
      path->zeta.push_back(z);
      path->beta.push_back(detail::flip_projective_chart(x));
    }
  };
  auto guard = [&](const Vector3cd& x) {
    if (!x.allFinite() || x.cwiseAbs().maxCoeff() > opt.blowup)
      throw NumericalError("integrate_fast_projective: chart blowup");
  };
  OdeOpts oo;
  oo.rtol = opt.rtol;
  oo.atol = opt.atol;

  const double total = z1 - z0;
  const double dir = total >= 0 ? 1.0 : -1.0;
  double z = z0, chunk = std::min(opt.chunk, std::abs(total));
  if (state.cwiseAbs().maxCoeff() > opt.switch_hi) {
    state = detail::flip_projective_chart(state);
    chart = 1;
    if (path) ++path->chart_flips;
  }
  record(z, state, chart);
  while ((z1 - z) * dir > 1e-14 * (std::abs(total) + 1.0)) {
    const double zt = z + dir * std::min(chunk, std::abs(z1 - z));
    try {
      if (chart == 0) {
        auto rhs = [&](double zz, const Vector3cd& b) {
          guard(b);
          return (fast_beta_rhs_xi(m, ubar(zz), eps, c, lam, b) / eps).eval();
        };
        auto jac = [&](double zz, const Vector3cd& b) {
          return (fast_beta_jac_xi(m, ubar(zz), eps, b) / eps).eval();
        };
        const auto sol = sdirk3<Vector3cd, Matrix3cd>(rhs, jac, z, zt, state, oo);
        state = sol.back();
      } else {
        auto rhs = [&](double zz, const Vector3cd& g) {
          guard(g);
          return (fast_gamma_rhs_xi(m, ubar(zz), eps, c, lam, g) / eps).eval();
        };
        auto jac = [&](double zz, const Vector3cd& g) {
          return (fast_gamma_jac_xi(m, ubar(zz), eps, c, lam, g) / eps).eval();
        };
        const auto sol = sdirk3<Vector3cd, Matrix3cd>(rhs, jac, z, zt, state, oo);
        state = sol.back();
      }
    } catch (const NumericalError&) {
      chunk *= 0.5;
      if (chunk < opt.min_chunk_frac * std::abs(total))
        throw NumericalError(
            "integrate_fast_projective: step collapse in both chart-flip attempts");
      continue;
    }
    z = zt;
    if (state.cwiseAbs().maxCoeff() > opt.switch_hi) {
      state = detail::flip_projective_chart(state);
      chart = 1 - chart;
      if (path) ++path->chart_flips;
    }
    record(z, state, chart);
    chunk = std::min(chunk * 2.0, opt.chunk);
  }
  if (chart == 1) state = detail::flip_projective_chart(state);
  return state;
}

// frozen-end projective initial data: ratio form of the selected eigenvector
inline Vector3cd fast_frozen_init(const Model& m, double ub, double eps, double c, cd lam,
                                  bool unstable) {
  const SortedEigs se = sorted_spatial_eigs(frozen_evp_matrix(m, eps, c, ub, lam));
  const Vector4cd v = se.vectors.col(unstable ? 3 : 0);
  if (std::abs(v[0]) < 1e-12)
    throw NumericalError("fast_frozen_init: eigenvector has no u-component");
  return Vector3cd(v[1] / v[0], v[2] / v[0], v[3] / v[0]);
}

struct FastProbeOpts {
  double L0 = 25.0;
  double tail_frac = 0.1;  // window used for the tail classification
  ProjOpts proj;
};

struct FastProbeResult {
  cd Ef = 0.0;                 // beta1 mismatch at zeta = 0
  cd beta2_gap = 0.0;          // beta2 mismatch at zeta = 0
  Vector3cd beta_fwd, beta_bwd;
  std::string classification;  // "<left>-to-<right>" from tail growth signs
  ProjPath fwd_path;
};

inline FastProbeResult fast_connection_probe(const Model& m,
                                             const std::function<double(double)>& ubar,
                                             double half_length, double eps, double c, cd lam,
                                             const FastProbeOpts& opt = {}) {
  const double L0 = std::min(opt.L0, 0.5 * half_length);
  FastProbeResult out;

  Vector3cd b = fast_frozen_init(m, ubar(-L0), eps, c, lam, true);
  out.beta_fwd = integrate_fast_projective(m, ubar, eps, c, lam, -L0, 0.0, b, opt.proj,
                                           &out.fwd_path);
  integrate_fast_projective(m, ubar, eps, c, lam, 0.0, L0, out.beta_fwd, opt.proj,
                            &out.fwd_path);

  Vector3cd bs = fast_frozen_init(m, ubar(L0), eps, c, lam, false);
  out.beta_bwd = integrate_fast_projective(m, ubar, eps, c, lam, L0, 0.0, bs, opt.proj);

  out.Ef = out.beta_fwd[0] - out.beta_bwd[0];
  out.beta2_gap = out.beta_fwd[1] - out.beta_bwd[1];

  auto tail_sign = [&](bool left) {
    double acc = 0.0;
    int n = 0;
    for (size_t i = 0; i < out.fwd_path.zeta.size(); ++i) {
      const double z = out.fwd_path.zeta[i];
      const bool in = left ? (z <= -L0 * (1.0 - opt.tail_frac))
                           : (z >= L0 * (1.0 - opt.tail_frac));
      if (!in) continue;
      acc += (out.fwd_path.beta[i][0].real() > 0.0) ? 1.0 : -1.0;
      ++n;
    }
    return n > 0 && acc > 0.0;
  };
  out.classification = std::string(tail_sign(true) ? "unstable" : "stable") + "-to-" +
                       (tail_sign(false) ? "unstable" : "stable");
  return out;
}

struct FastRoot {
  double lam = 0.0;
  double residual = 0.0;  // |Ef| at the accepted root
  cd beta2_gap = 0.0;
  std::string classification;
};

struct FastScanReport {
  std::vector<FastRoot> roots;
  double lo = 0.0, hi = 0.0;
  int grid_n = 0;
  std::vector<double> grid_lam;
  std::vector<double> grid_Ef;
};

inline FastScanReport fast_probe_root_scan(const Model& m,
                                           const std::function<double(double)>& ubar,
                                           double half_length, double eps, double c,
                                           double lo, double hi, int n, int threads = 1,
                                           const FastProbeOpts& opt = {}) {
  FastScanReport rep;
  rep.lo = lo;
  rep.hi = hi;
  rep.grid_n = n;
  rep.grid_lam.resize(n + 1);
  rep.grid_Ef.resize(n + 1);
  auto probe = [&](double lam) {
    return fast_connection_probe(m, ubar, half_length, eps, c, lam, opt);
  };
  detail::parallel_for_idx(n + 1, threads, [&](int i) {
    const double lam = lo + (hi - lo) * i / n;
    rep.grid_lam[i] = lam;
    rep.grid_Ef[i] = probe(lam).Ef.real();
  });
  for (int i = 0; i < n; ++i) {
    const double fa = rep.grid_Ef[i], fb = rep.grid_Ef[i + 1];
    if (!(fa * fb < 0.0)) continue;
    double a = rep.grid_lam[i], b = rep.grid_lam[i + 1], va = fa, vb = fb;
    for (int it = 0; it < 60 && std::abs(b - a) > 1e-9 * (1.0 + std::abs(b)); ++it) {
      double mid = (std::abs(vb - va) > 1e-300) ? b - vb * (b - a) / (vb - va)
                                                : 0.5 * (a + b);
      if (!(mid > std::min(a, b) && mid < std::max(a, b))) mid = 0.5 * (a + b);
      const double vm = probe(mid).Ef.real();
      if (va * vm <= 0.0) {
        b = mid;
        vb = vm;
      } else {
        a = mid;
        va = vm;
      }
    }
    const double lam_star = 0.5 * (a + b);
    const FastProbeResult pr = probe(lam_star);
    rep.roots.push_back({lam_star, std::abs(pr.Ef), pr.beta2_gap, pr.classification});
  }
  return rep;
}

// quotient of the full 4D linear eigenvalue flow started on (1, beta0);
// cross-check for the projective fast integration
inline Vector3cd projective_full_quotient(const Model& m,
                                          const std::function<double(double)>& ubar,
                                          double eps, double c, cd lam, double z0, double z1,
                                          const Vector3cd& beta0, double rtol = 1e-11) {
  auto rhs = [&](double z, const Vector4cd& y) -> Vector4cd {
    return frozen_evp_matrix(m, eps, c, ubar(z), lam) * y;
  };
  Vector4cd y0;
  y0 << 1.0, beta0[0], beta0[1], beta0[2];
  OdeOpts oo;
  oo.rtol = rtol;
  oo.atol = 1e-13;
  const Vector4cd y = rk45(rhs, z0, z1, y0, oo).back();
  if (std::abs(y[0]) < 1e-300)
    throw NumericalError("projective_full_quotient: u-component vanished");
  return Vector3cd(y[1] / y[0], y[2] / y[0], y[3] / y[0]);
}

// ---------------------------------------------------------------------------
// Slow (reduced, fold-carrying) eigenvalue problem along the singular orbit,
// parameterized by Ubar with the geometry legs supplying Pbar(U). In the chart
// S = P/V the slow Riccati equation becomes
//   dS/dU = ((lam - R'(U)) + c0 S - D(U) S^2) / (Pbar(U) - c0 U),
// which is regular through the folds of D. T = 1/S covers passages of S
// through infinity.
// ---------------------------------------------------------------------------
struct SlowOpts {
  double section_U = 0.4;  // comparison section on the left slow leg
  double rtol = 1e-11;
  double atol = 1e-13;
  double switch_hi = 100.0;
  double blowup = 1e8;
};

struct SlowPath {
  std::vector<double> U;
  std::vector<cd> S;
};

// slow spatial rate at a frozen end state: root of D mu^2 + c0 mu - (lam - R') = 0
inline cd slow_mu(const Model& m, double c0, double Ustar, cd lam, bool unstable) {
  const double Du = m.D(Ustar);
  const cd disc = std::sqrt(c0 * c0 + 4.0 * Du * (lam - m.Rp(Ustar)));
  return unstable ? (-c0 + disc) / (2.0 * Du) : (-c0 - disc) / (2.0 * Du);
}

// chart value of the frozen slow eigen-direction at an end state
inline cd slow_frozen_init(const Model& m, double c0, double Ustar, cd lam, bool unstable) {
  const cd mu = slow_mu(m, c0, Ustar, lam, unstable);
  if (std::abs(mu) < 1e-300)
    throw NumericalError("slow_frozen_init: degenerate slow rate");
  return (lam - m.Rp(Ustar)) / (m.D(Ustar) * mu);
}

namespace detail {

inline cd integrate_slow_leg(const Model& m, const HermiteSeries& Pbar, double c0, cd lam,
                             double U0, double U1, cd S0, const SlowOpts& opt,
                             SlowPath* path) {
  int chart = 0;  // 0: S, 1: T = 1/S
  cd s = S0;
  if (std::abs(s) > opt.switch_hi) {
    s = 1.0 / s;
    chart = 1;
  }
  auto record = [&](double u, cd val, int ch) {
    if (!path) return;
    path->U.push_back(u);
    path->S.push_back(ch == 0 ? val : (std::abs(val) > 1e-300 ? 1.0 / val : cd(1e300, 0)));
  };
  OdeOpts oo;
  oo.rtol = opt.rtol;
  oo.atol = opt.atol;
  const double total = U1 - U0;
  const double dir = total >= 0 ? 1.0 : -1.0;
  double u = U0, chunk = std::abs(total);
  record(u, s, chart);
  while ((U1 - u) * dir > 1e-15) {
    const double ut = u + dir * std::min(chunk, std::abs(U1 - u));
    try {
      if (chart == 0) {
        auto rhs = [&](double U, const Vector1cd& y) -> Vector1cd {
          if (!std::isfinite(std::abs(y[0])) || std::abs(y[0]) > opt.blowup)
            throw NumericalError("slow leg: chart blowup");
          const cd S = y[0];
          Vector1cd f;
          f[0] = ((lam - m.Rp(U)) + c0 * S - m.D(U) * S * S) / (Pbar(U) - c0 * U);
          return f;
        };
        const auto sol = rk45(rhs, u, ut, Vector1cd(s), oo);
        s = sol.back()[0];
      } else {
        auto rhs = [&](double U, const Vector1cd& y) -> Vector1cd {
          if (!std::isfinite(std::abs(y[0])) || std::abs(y[0]) > opt.blowup)
            throw NumericalError("slow leg: chart blowup");
          const cd T = y[0];
          Vector1cd f;
          f[0] = (-(lam - m.Rp(U)) * T * T - c0 * T + m.D(U)) / (Pbar(U) - c0 * U);
          return f;
        };
        const auto sol = rk45(rhs, u, ut, Vector1cd(s), oo);
        s = sol.back()[0];
      }
    } catch (const NumericalError&) {
      chunk *= 0.5;
      if (chunk < 1e-9 * std::abs(total))
        throw NumericalError("integrate_slow_leg: step collapse in both charts");
      continue;
    }
    u = ut;
    if (std::abs(s) > opt.switch_hi) {
      s = 1.0 / s;
      chart = 1 - chart;
    }
    record(u, s, chart);
    chunk = std::min(chunk * 2.0, std::abs(total));
  }
  if (chart == 1) {
    if (std::abs(s) < 1e-300)
      throw NumericalError("integrate_slow_leg: value is at infinity on arrival");
    s = 1.0 / s;
  }
  return s;
}

}  // namespace detail

struct JumpMapData {
  cd j12 = 0.0, j22 = 0.0;
  Matrix2cd J;  // acts on (P, V); S = P/V maps to (S + j12)/j22
};

inline JumpMapData jump_map(const Model& m, const SingularGeometry& geo, cd lam) {
  const double up = geo.jump.u_plus, um = geo.jump.u_minus, Ps = geo.P_star;
  const double c0 = geo.c0;
  const double den_p = Ps - c0 * up;
  const double den_m = c0 * up - Ps;
  if (std::abs(den_p) < 1e-300 || std::abs(den_m) < 1e-300)
    throw NumericalError("jump_map: degenerate layer base point");
  JumpMapData jm;
  jm.j12 = (m.R(up) - m.R(um) - lam * (up - um)) / den_p;
  jm.j22 = (c0 * um - Ps) / den_m;
  jm.J << 1.0, jm.j12, 0.0, jm.j22;
  return jm;
}

// mismatch of the slow shooting solutions at the section on the left leg:
// forward sweep (saddle at U=1, down the right leg, jump, down the left leg)
// against backward sweep (saddle at U=0, up the left leg)
inline cd slow_evans_eval(const Model& m, const SingularGeometry& geo, cd lam,
                          const SlowOpts& opt = {}, SlowPath* fwd = nullptr,
                          SlowPath* bwd = nullptr) {
  const double up = geo.jump.u_plus, um = geo.jump.u_minus;
  if (!(opt.section_U > geo.P_left.front_t() && opt.section_U < um))
    throw ConfigError("slow_evans_eval: section must lie inside the left slow leg");

  cd S = slow_frozen_init(m, geo.c0, 1.0, lam, true);
  S = detail::integrate_slow_leg(m, geo.P_right, geo.c0, lam, geo.P_right.back_t(), up, S,
                                 opt, fwd);
  const JumpMapData jm = jump_map(m, geo, lam);
  if (std::abs(jm.j22) < 1e-300) throw NumericalError("slow_evans_eval: singular jump map");
  S = (S + jm.j12) / jm.j22;
  if (fwd) {
    fwd->U.push_back(um);
    fwd->S.push_back(S);
  }
  S = detail::integrate_slow_leg(m, geo.P_left, geo.c0, lam, um, opt.section_U, S, opt, fwd);

  cd Sb = slow_frozen_init(m, geo.c0, 0.0, lam, false);
  Sb = detail::integrate_slow_leg(m, geo.P_left, geo.c0, lam, geo.P_left.front_t(),
                                  opt.section_U, Sb, opt, bwd);
  return S - Sb;
}

// quotient of the linear slow flow d(p,v)/dU = ((lam-R')v, D p - c0 v)/(Pbar - c0 U)
// started on (S0, 1); cross-check for the slow Riccati legs
inline cd slow_linear_quotient(const Model& m, const HermiteSeries& Pbar, double c0, cd lam,
                               double U0, double U1, cd S0, double rtol = 1e-12) {
  auto rhs = [&](double U, const Vector2cd& y) -> Vector2cd {
    const cd den = Pbar(U) - c0 * U;
    Vector2cd f;
    f[0] = (lam - m.Rp(U)) * y[1] / den;
    f[1] = (m.D(U) * y[0] - c0 * y[1]) / den;
    return f;
  };
  OdeOpts oo;
  oo.rtol = rtol;
  oo.atol = 1e-14;
  const Vector2cd y = rk45(rhs, U0, U1, Vector2cd(S0, 1.0), oo).back();
  if (std::abs(y[1]) < 1e-300)
    throw NumericalError("slow_linear_quotient: v-component vanished");
  return y[0] / y[1];
}

struct SlowEigReport {
  std::vector<double> roots;
  std::vector<double> residuals;
  double scanned_lo = 0.0, scanned_hi = 0.0;
  int grid_n = 0;
  std::vector<double> grid_lam;
  std::vector<double> grid_Es;
};

inline SlowEigReport find_slow_eigenvalues(const Model& m, const SingularGeometry& geo,
                                           double lo, double hi, int n = 160,
                                           int threads = 1, const SlowOpts& opt = {}) {
  SlowEigReport rep;
  // below lam = R'(0) the frozen slow rates at the U = 0 end change branch
  // character; keep the real-axis scan above it
  rep.scanned_lo = std::max(lo, m.Rp(0.0) + 5e-4);
  rep.scanned_hi = hi;
  rep.grid_n = n;
  if (!(rep.scanned_hi > rep.scanned_lo))
    throw ConfigError("find_slow_eigenvalues: empty interval after branch clamp");
  rep.grid_lam.resize(n + 1);
  rep.grid_Es.assign(n + 1, std::numeric_limits<double>::quiet_NaN());
  detail::parallel_for_idx(n + 1, threads, [&](int i) {
    const double lam = rep.scanned_lo + (rep.scanned_hi - rep.scanned_lo) * i / n;
    rep.grid_lam[i] = lam;
    try {
      rep.grid_Es[i] = slow_evans_eval(m, geo, lam, opt).real();
    } catch (const NumericalError&) {
      // a pole passing through the section; leave NaN, intervals are skipped
    }
  });
  std::vector<double> mags;
  for (double v : rep.grid_Es)
    if (std::isfinite(v)) mags.push_back(std::abs(v));
  if (mags.empty()) throw NumericalError("find_slow_eigenvalues: no finite samples");
  std::nth_element(mags.begin(), mags.begin() + mags.size() / 2, mags.end());
  const double scale = std::max(mags[mags.size() / 2], 1e-30);

  for (int i = 0; i < n; ++i) {
    const double fa = rep.grid_Es[i], fb = rep.grid_Es[i + 1];
    if (!std::isfinite(fa) || !std::isfinite(fb) || !(fa * fb < 0.0)) continue;
    double a = rep.grid_lam[i], b = rep.grid_lam[i + 1], va = fa, vb = fb;
    for (int it = 0; it < 80 && (b - a) > 1e-13 * (1.0 + std::abs(a)); ++it) {
      double mid = (std::abs(vb - va) > 1e-300) ? b - vb * (b - a) / (vb - va)
                                                : 0.5 * (a + b);
      if (!(mid > a && mid < b)) mid = 0.5 * (a + b);
      double vm;
      try {
        vm = slow_evans_eval(m, geo, mid, opt).real();
      } catch (const NumericalError&) {
        vm = std::numeric_limits<double>::quiet_NaN();
      }
      if (!std::isfinite(vm)) {
        mid = 0.5 * (a + b);
        try {
          vm = slow_evans_eval(m, geo, mid, opt).real();
        } catch (const NumericalError&) {
          break;
        }
      }
      if (va * vm <= 0.0) {
        b = mid;
        vb = vm;
      } else {
        a = mid;
        va = vm;
      }
    }
    const double lam_star = 0.5 * (a + b);
    double resid;
    try {
      resid = std::abs(slow_evans_eval(m, geo, lam_star, opt));
    } catch (const NumericalError&) {
      continue;  // crossing was a pole
    }
    // a genuine eigenvalue drives E_s to zero; a pole crossing stays large
    if (resid < 1e-6 * scale || resid < 1e-9) {
      rep.roots.push_back(lam_star);
      rep.residuals.push_back(resid);
    }
  }
  return rep;
}

}  // namespace shockstab
