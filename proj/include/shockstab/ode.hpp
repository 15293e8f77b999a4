#pragma once
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "shockstab/errors.hpp"

namespace shockstab {

struct OdeOpts {
  double rtol = 1e-8;
  double atol = 1e-10;
  double h0 = 0.0;    // 0: chosen from the first derivative
  double hmax = 0.0;  // 0: full interval length
  long max_steps = 4000000;
};

template <class Vec>
struct Event {
  std::function<double(double, const Vec&)> g;
  bool terminal = true;
  int direction = 0;  // 0: any sign change; +1 only -..+; -1 only +..-
};

namespace detail {
inline double absval(double x) { return std::abs(x); }
inline double absval(const std::complex<double>& x) { return std::abs(x); }

template <class Vec>
double error_norm(const Vec& e, const Vec& y0, const Vec& y1, double rtol, double atol) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < e.size(); ++i) {
    const double sc = atol + rtol * std::max(absval(y0[i]), absval(y1[i]));
    const double q = absval(e[i]) / sc;
    s += q * q;
  }
  return std::sqrt(s / static_cast<double>(e.size()));
}

template <class Vec>
Vec hermite(double t, double t0, double t1, const Vec& y0, const Vec& y1, const Vec& f0,
            const Vec& f1) {
  const double h = t1 - t0;
  const double s = (t - t0) / h;
  const double s2 = s * s, s3 = s2 * s;
  const double h00 = 2 * s3 - 3 * s2 + 1, h10 = s3 - 2 * s2 + s;
  const double h01 = -2 * s3 + 3 * s2, h11 = s3 - s2;
  return h00 * y0 + (h10 * h) * f0 + h01 * y1 + (h11 * h) * f1;
}
}  // namespace detail

template <class Vec>
struct OdeSolution {
  std::vector<double> t;
  std::vector<Vec> y;
  std::vector<Vec> f;
  bool event_hit = false;
  int event_index = -1;
  double t_end = 0.0;  // final time reached (event time if event_hit)

  const Vec& back() const { return y.back(); }

  Vec eval(double tq) const {
    if (t.size() < 2) return y.front();
    const bool fwd = t.back() > t.front();
    std::size_t lo = 0, hi = t.size() - 1;
    while (hi - lo > 1) {
      const std::size_t mid = (lo + hi) / 2;
      if (fwd ? (t[mid] <= tq) : (t[mid] >= tq))
        lo = mid;
      else
        hi = mid;
    }
    return detail::hermite(tq, t[lo], t[lo + 1], y[lo], y[lo + 1], f[lo], f[lo + 1]);
  }
};

// Dormand-Prince 5(4) with FSAL, cubic-Hermite dense output and event location.
template <class Vec, class RHS>
OdeSolution<Vec> rk45(RHS&& fn, double t0, double t1, Vec y0, const OdeOpts& opts = {},
                      const std::vector<Event<Vec>>& events = {}) {
  static const double a21 = 1.0 / 5;
  static const double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static const double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static const double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                      a54 = -212.0 / 729;
  static const double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                      a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  static const double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                      b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  static const double e1 = 35.0 / 384 - 5179.0 / 57600, e3 = 500.0 / 1113 - 7571.0 / 16695,
                      e4 = 125.0 / 192 - 393.0 / 640, e5 = -2187.0 / 6784 + 92097.0 / 339200,
                      e6 = 11.0 / 84 - 187.0 / 2100, e7 = -1.0 / 40;

  if (t1 == t0) throw NumericalError("rk45: empty integration interval");
  const double dir = (t1 > t0) ? 1.0 : -1.0;
  const double span = std::abs(t1 - t0);
  const double hmax = (opts.hmax > 0.0) ? opts.hmax : span;

  OdeSolution<Vec> sol;
  double t = t0;
  Vec y = y0;
  Vec k1 = fn(t, y);

  double h = opts.h0;
  if (h <= 0.0) {
    double d0 = detail::error_norm(y, y, y, opts.rtol, opts.atol);  // ~|y|/scale
    double d1 = detail::error_norm(k1, y, y, opts.rtol, opts.atol);
    h = (d1 > 1e-10) ? 0.01 * d0 / d1 : 1e-6 * span;
    h = std::clamp(h, 1e-12 * span, 0.1 * span);
  }
  h = std::min(h, hmax);

  sol.t.push_back(t);
  sol.y.push_back(y);
  sol.f.push_back(k1);
  std::vector<double> gprev(events.size());
  for (std::size_t i = 0; i < events.size(); ++i) gprev[i] = events[i].g(t, y);

  long nsteps = 0, nreject_row = 0;
  while (dir * (t1 - t) > 1e-14 * span) {
    if (++nsteps > opts.max_steps) throw NumericalError("rk45: max step count exceeded");
    h = std::min(h, hmax);
    if (dir * (t + dir * h) > dir * t1) h = std::abs(t1 - t);
    const double hs = dir * h;

    Vec k2 = fn(t + hs * 0.2, Vec(y + hs * (a21 * k1)));
    Vec k3 = fn(t + hs * 0.3, Vec(y + hs * (a31 * k1 + a32 * k2)));
    Vec k4 = fn(t + hs * 0.8, Vec(y + hs * (a41 * k1 + a42 * k2 + a43 * k3)));
    Vec k5 = fn(t + hs * (8.0 / 9), Vec(y + hs * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4)));
    Vec k6 = fn(t + hs, Vec(y + hs * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5)));
    Vec ynew = y + hs * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    Vec k7 = fn(t + hs, ynew);
    Vec err = hs * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

    double en = detail::error_norm(err, y, ynew, opts.rtol, opts.atol);
    if (!std::isfinite(en)) en = 1e300;  // NaN would poison the h update
    if (en <= 1.0) {
      nreject_row = 0;
      const double tnew = t + hs;
      // event check on this step via Hermite interpolation + bisection
      for (std::size_t i = 0; i < events.size(); ++i) {
        const double gnew = events[i].g(tnew, ynew);
        const bool crossed = (gprev[i] == 0.0 && gnew != 0.0)
                                 ? false
                                 : (gprev[i] * gnew <= 0.0 && gprev[i] != gnew &&
                                    (events[i].direction == 0 ||
                                     (events[i].direction > 0 ? gprev[i] < gnew : gprev[i] > gnew)));
        if (crossed) {
          double ta = t, tb = tnew, ga = gprev[i];
          for (int it = 0; it < 80; ++it) {
            const double tm = 0.5 * (ta + tb);
            const Vec ym = detail::hermite(tm, t, tnew, y, ynew, k1, k7);
            const double gm = events[i].g(tm, ym);
            if (ga * gm <= 0.0) {
              tb = tm;
            } else {
              ta = tm;
              ga = gm;
            }
            if (std::abs(tb - ta) < 1e-13 * (std::abs(tb) + 1.0)) break;
          }
          const double te = 0.5 * (ta + tb);
          const Vec ye = detail::hermite(te, t, tnew, y, ynew, k1, k7);
          if (events[i].terminal) {
            sol.t.push_back(te);
            sol.y.push_back(ye);
            sol.f.push_back(fn(te, ye));
            sol.event_hit = true;
            sol.event_index = static_cast<int>(i);
            sol.t_end = te;
            return sol;
          }
        }
        gprev[i] = gnew;
      }
      t = tnew;
      y = ynew;
      k1 = k7;
      sol.t.push_back(t);
      sol.y.push_back(y);
      sol.f.push_back(k1);
      h *= std::clamp(0.9 * std::pow(std::max(en, 1e-10), -0.2), 0.2, 5.0);
    } else {
      if (++nreject_row > 60) throw NumericalError("rk45: repeated step rejection");
      h *= std::clamp(0.9 * std::pow(en, -0.2), 0.1, 0.9);
      if (h < 1e-14 * span) throw NumericalError("rk45: step size collapsed");
    }
  }
  sol.t_end = t;
  return sol;
}

// 3-stage L-stable SDIRK (order 3), stiffly accurate, Newton with a
// user-supplied Jacobian; error control by step doubling.
template <class Vec, class Mat, class RHS, class JAC>
OdeSolution<Vec> sdirk3(RHS&& fn, JAC&& jac, double t0, double t1, Vec y0,
                        const OdeOpts& opts = {}) {
  static const double g = 0.435866521508459;
  static const double b1 = -(6 * g * g - 16 * g + 1) / 4.0;
  static const double b2 = (6 * g * g - 20 * g + 5) / 4.0;
  static const double c2 = (1 + g) / 2.0, a21 = (1 - g) / 2.0;

  if (t1 == t0) throw NumericalError("sdirk3: empty integration interval");
  const double dir = (t1 > t0) ? 1.0 : -1.0;
  const double span = std::abs(t1 - t0);
  const double hmax = (opts.hmax > 0.0) ? opts.hmax : span;
  const Eigen::Index n = y0.size();
  using Scalar = typename Vec::Scalar;
  const Mat I = Mat::Identity(n, n);

  // one SDIRK step of size hs from (t, y); returns false if Newton failed
  auto step = [&](double t, const Vec& y, double hs, Vec& out) -> bool {
    Vec k[3];
    const double cs[3] = {g, c2, 1.0};
    for (int s = 0; s < 3; ++s) {
      Vec acc = y;
      if (s == 1) acc += hs * (a21 * k[0]);
      if (s == 2) acc += hs * (b1 * k[0] + b2 * k[1]);
      // solve z = acc + hs*g*f(ts, z) by Newton on z
      const double ts = t + hs * cs[s];
      Vec z = (s == 0) ? y : Vec(acc);  // predictor
      Mat J = jac(ts, z);
      Eigen::PartialPivLU<Mat> lu(I - (Scalar)(hs * g) * J);
      bool ok = false;
      for (int it = 0; it < 12; ++it) {
        Vec rhsv = z - acc - (Scalar)(hs * g) * fn(ts, z);
        Vec dz = lu.solve(rhsv);
        z -= dz;
        double nd = 0.0, nz = 0.0;
        bool finite = true;
        for (Eigen::Index i = 0; i < n; ++i) {
          const double ad = detail::absval(dz[i]), az = detail::absval(z[i]);
          finite = finite && std::isfinite(ad) && std::isfinite(az);
          nd = std::max(nd, ad);
          nz = std::max(nz, az);
        }
        // per-component check: max() would skip NaN entries entirely
        if (!finite) return false;
        if (nd <= 1e-12 * (1.0 + nz)) {
          ok = true;
          break;
        }
        if (it == 5) {  // slow: refresh Jacobian once
          J = jac(ts, z);
          lu.compute(I - (Scalar)(hs * g) * J);
        }
      }
      if (!ok) return false;
      k[s] = fn(ts, z);
      if (s == 2) out = z;  // stiffly accurate: y_{n+1} = z_3
    }
    return true;
  };

  OdeSolution<Vec> sol;
  double t = t0;
  Vec y = y0;
  sol.t.push_back(t);
  sol.y.push_back(y);
  sol.f.push_back(fn(t, y));

  double h = (opts.h0 > 0.0) ? opts.h0 : 1e-4 * span;
  h = std::min(h, hmax);
  long nsteps = 0;
  int nfail_row = 0;
  while (dir * (t1 - t) > 1e-14 * span) {
    if (++nsteps > opts.max_steps) throw NumericalError("sdirk3: max step count exceeded");
    h = std::min(h, hmax);
    if (dir * (t + dir * h) > dir * t1) h = std::abs(t1 - t);
    const double hs = dir * h;

    Vec ybig, yh1, yh2;
    bool ok = step(t, y, hs, ybig) && step(t, y, 0.5 * hs, yh1) &&
              step(t + 0.5 * hs, yh1, 0.5 * hs, yh2);
    if (ok) {
      Vec err = yh2 - ybig;
      double en = detail::error_norm(err, y, yh2, opts.rtol, opts.atol) / 7.0;
      if (!std::isfinite(en)) en = 1e300;  // NaN would poison the h update
      if (en <= 1.0) {
        nfail_row = 0;
        t += hs;
        y = yh2;
        sol.t.push_back(t);
        sol.y.push_back(y);
        sol.f.push_back(fn(t, y));
        h *= std::clamp(0.85 * std::pow(std::max(en, 1e-12), -0.25), 0.3, 4.0);
        continue;
      }
      h *= std::clamp(0.85 * std::pow(en, -0.25), 0.1, 0.8);
    } else {
      h *= 0.3;
    }
    if (++nfail_row > 80 || h < 1e-15 * span)
      throw NumericalError("sdirk3: step size collapsed");
  }
  sol.t_end = t;
  return sol;
}

}  // namespace shockstab
