#pragma once
#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <exception>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "shockstab/errors.hpp"
#include "shockstab/model.hpp"
#include "shockstab/ode.hpp"
#include "shockstab/spectrum_essential.hpp"
#include "shockstab/spline.hpp"
#include "shockstab/wave.hpp"

namespace shockstab {

using Matrix42cd = Eigen::Matrix<cd, 4, 2>;
using Vector8cd = Eigen::Matrix<cd, 8, 1>;

namespace detail {

// cyclic work-sharing parallel loop; first exception wins and is rethrown
template <class F>
inline void parallel_for_idx(int n, int threads, F&& body) {
  threads = std::max(1, std::min(threads, n));
  if (threads <= 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr err;
  std::mutex errm;
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= n) return;
        try {
          body(i);
        } catch (...) {
          std::lock_guard<std::mutex> lk(errm);
          if (!err) err = std::current_exception();
          return;
        }
      }
    });
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Grassmannian chart. The eigenvalue system y' = M(zeta) y is followed on
// Gr(2,4) in the chart W = Y X^{-1} of the frame [X; Y] after the coordinate
// change y -> T y. The default T keeps both the stable and unstable frames of
// the problem inside one chart along the whole wave.
// ---------------------------------------------------------------------------
inline Matrix4cd default_chart() {
  Matrix4cd T = Matrix4cd::Zero();
  T(0, 0) = cd(0, -1);
  T(0, 2) = 1.0;
  T(1, 1) = cd(0, 1);
  T(1, 3) = 1.0;
  T(2, 2) = 1.0;
  T(3, 3) = 1.0;
  return T;
}

struct Blocks {
  Matrix2cd A, B, C, D;
};

inline Blocks split_blocks(const Matrix4cd& M) {
  Blocks b;
  b.A = M.topLeftCorner<2, 2>();
  b.B = M.topRightCorner<2, 2>();
  b.C = M.bottomLeftCorner<2, 2>();
  b.D = M.bottomRightCorner<2, 2>();
  return b;
}

// W' = C + D W - W A - W B W
inline Matrix2cd riccati_rhs_matrix(const Blocks& b, const Matrix2cd& W) {
  return b.C + b.D * W - W * b.A - W * b.B * W;
}

struct RiccatiProblem {
  Model m;
  double eps = 1e-4;
  double c = 0.0;
  cd lam;
  std::function<double(double)> ubar;  // profile as a function of zeta
  Matrix4cd T, Tinv;

  Matrix4cd M_full(double zeta) const {
    return frozen_evp_matrix(m, eps, c, ubar(zeta), lam);
  }
  Matrix4cd M_chart(double zeta) const { return T * M_full(zeta) * Tinv; }
};

inline RiccatiProblem make_riccati_problem(const Model& m, double eps, double c, cd lam,
                                           std::function<double(double)> ubar,
                                           const Matrix4cd& T = default_chart()) {
  RiccatiProblem pr;
  pr.m = m;
  pr.eps = eps;
  pr.c = c;
  pr.lam = lam;
  pr.ubar = std::move(ubar);
  pr.T = T;
  pr.Tinv = T.inverse();
  return pr;
}

// eigen-decomposition sorted by ascending real part, with each column scaled
// to unit norm and rotated so its first significant entry is positive real
struct SortedEigs {
  Vector4cd values;
  Matrix4cd vectors;
};

inline SortedEigs sorted_spatial_eigs(const Matrix4cd& M) {
  Eigen::ComplexEigenSolver<Matrix4cd> es(M, true);
  if (es.info() != Eigen::Success)
    throw NumericalError("sorted_spatial_eigs: eigensolver failed");
  std::array<int, 4> idx{0, 1, 2, 3};
  Vector4cd ev = es.eigenvalues();
  std::sort(idx.begin(), idx.end(),
            [&](int a, int b) { return ev[a].real() < ev[b].real(); });
  SortedEigs out;
  for (int j = 0; j < 4; ++j) {
    out.values[j] = ev[idx[j]];
    Vector4cd v = es.eigenvectors().col(idx[j]);
    v /= v.norm();
    for (int k = 0; k < 4; ++k)
      if (std::abs(v[k]) > 1e-12) {
        v *= std::polar(1.0, -std::arg(v[k]));
        break;
      }
    out.vectors.col(j) = v;
  }
  return out;
}

// chart coordinates of the frozen stable/unstable eigenplane at one end
inline Matrix2cd init_eigenplane(const RiccatiProblem& pr, double zeta_end, bool unstable) {
  const SortedEigs se = sorted_spatial_eigs(pr.M_full(zeta_end));
  Matrix42cd Z;
  Z.col(0) = se.vectors.col(unstable ? 2 : 0);
  Z.col(1) = se.vectors.col(unstable ? 3 : 1);
  const Matrix42cd Zc = pr.T * Z;
  const Matrix2cd X = Zc.topRows<2>();
  const Matrix2cd Y = Zc.bottomRows<2>();
  const double sc = X.cwiseAbs().maxCoeff();
  if (!(sc > 0.0) || std::abs(X.determinant()) < 1e-12 * sc * sc)
    throw NumericalError("init_eigenplane: eigenplane is singular in this chart");
  return Y * X.inverse();
}

struct RiccatiOpts {
  double rtol = 1e-10;
  double atol = 1e-12;
  double blowup = 1e8;
  double h0 = 0.0;
};

struct RiccatiTrajectory {
  std::vector<double> zeta;
  std::vector<Matrix2cd> W;
};

inline RiccatiTrajectory integrate_riccati(const RiccatiProblem& pr, double za, double zb,
                                           const Matrix2cd& W0, const RiccatiOpts& opt = {}) {
  if (!W0.allFinite() || W0.cwiseAbs().maxCoeff() > opt.blowup)
    throw NumericalError("integrate_riccati: chart blowup, |W| exceeds limit");
  // Trial stage iterates may leave any sane bound when the stepper probes an
  // oversized step (e.g. one spanning the whole constant tail plus the shock
  // layer).  Those must read as a failed step -- rejected and retried smaller
  // -- not as a hard error, so the rhs reports them as non-finite; accepted
  // trajectory values are checked against the blowup limit afterwards.
  const double hard = 100.0 * opt.blowup;
  auto rhs = [&](double z, const Vector4cd& v) -> Vector4cd {
    const Matrix2cd W = Eigen::Map<const Matrix2cd>(v.data());
    if (!W.allFinite() || W.cwiseAbs().maxCoeff() > hard)
      return Vector4cd::Constant(std::numeric_limits<double>::quiet_NaN());
    const Blocks b = split_blocks(pr.M_chart(z));
    const Matrix2cd F = riccati_rhs_matrix(b, W);
    Vector4cd out;
    Eigen::Map<Matrix2cd>(out.data()) = F;
    return out;
  };
  // d vec(F)/d vec(W) = I (x) (D - W B)  -  (A + B W)^T (x) I
  auto jac = [&](double z, const Vector4cd& v) -> Matrix4cd {
    const Matrix2cd W = Eigen::Map<const Matrix2cd>(v.data());
    const Blocks b = split_blocks(pr.M_chart(z));
    const Matrix2cd P = b.D - W * b.B;
    const Matrix2cd Q = b.A + b.B * W;
    Matrix4cd J = Matrix4cd::Zero();
    J.block<2, 2>(0, 0) = P;
    J.block<2, 2>(2, 2) = P;
    for (int p = 0; p < 2; ++p)
      for (int q = 0; q < 2; ++q)
        J.block<2, 2>(2 * p, 2 * q) -= Q(q, p) * Matrix2cd::Identity();
    return J;
  };
  OdeOpts oo;
  oo.rtol = opt.rtol;
  oo.atol = opt.atol;
  oo.h0 = opt.h0;
  Vector4cd v0;
  Eigen::Map<Matrix2cd>(v0.data()) = W0;
  OdeSolution<Vector4cd> sol;
  try {
    sol = sdirk3<Vector4cd, Matrix4cd>(rhs, jac, za, zb, v0, oo);
  } catch (const NumericalError& e) {
    // step-size collapse here means the solution itself is running off the
    // chart (a pole of W in zeta); anything else is equally fatal for E_T
    throw NumericalError(std::string("integrate_riccati: chart blowup along the trajectory (") +
                         e.what() + ")");
  }
  RiccatiTrajectory tr;
  tr.zeta = sol.t;
  tr.W.reserve(sol.y.size());
  for (const auto& v : sol.y) tr.W.push_back(Eigen::Map<const Matrix2cd>(v.data()));
  for (const auto& Wk : tr.W)
    if (!Wk.allFinite() || Wk.cwiseAbs().maxCoeff() > opt.blowup)
      throw NumericalError("integrate_riccati: chart blowup, |W| exceeds limit");
  return tr;
}

// quotient of the plain 4D linear flow of the frame [I; W0]; cross-check for
// the Riccati integration on short subintervals
inline Matrix2cd linear_plane_quotient(const RiccatiProblem& pr, double za, double zb,
                                       const Matrix2cd& W0, double rtol = 1e-10) {
  auto rhs = [&](double z, const Vector8cd& v) -> Vector8cd {
    const Matrix42cd Z = Eigen::Map<const Matrix42cd>(v.data());
    const Matrix42cd F = pr.M_chart(z) * Z;
    Vector8cd out;
    Eigen::Map<Matrix42cd>(out.data()) = F;
    return out;
  };
  Matrix42cd Z0;
  Z0.topRows<2>() = Matrix2cd::Identity();
  Z0.bottomRows<2>() = W0;
  Vector8cd v0;
  Eigen::Map<Matrix42cd>(v0.data()) = Z0;
  OdeOpts oo;
  oo.rtol = rtol;
  oo.atol = 1e-12;
  const auto sol = rk45(rhs, za, zb, v0, oo);
  const Matrix42cd Z = Eigen::Map<const Matrix42cd>(sol.back().data());
  const Matrix2cd X = Z.topRows<2>();
  const double sc = X.cwiseAbs().maxCoeff();
  if (!(sc > 0.0) || std::abs(X.determinant()) < 1e-12 * sc * sc)
    throw NumericalError("linear_plane_quotient: frame left the chart");
  return Z.bottomRows<2>() * X.inverse();
}

// ---------------------------------------------------------------------------
// Evans function: E(lambda) = det(W_s(0) - W_u(0)), where W_u flows the
// frozen unstable plane from -L and W_s the frozen stable plane from +L.
// ---------------------------------------------------------------------------
class RiccatiEvans {
 public:
  RiccatiEvans(Model m, const WaveProfile& wp, RiccatiOpts opt = {},
               Matrix4cd T = default_chart())
      : m_(std::move(m)),
        eps_(wp.eps),
        c_(wp.c),
        L_(wp.L),
        U_(wave_U_interpolant(wp)),
        opt_(opt),
        T_(std::move(T)),
        Tinv_(T_.inverse()) {}

  double eps() const { return eps_; }
  double c() const { return c_; }
  double L() const { return L_; }

  RiccatiProblem problem(cd lam) const {
    RiccatiProblem pr;
    pr.m = m_;
    pr.eps = eps_;
    pr.c = c_;
    pr.lam = lam;
    const HermiteSeries U = U_;
    pr.ubar = [U](double z) { return U(z); };
    pr.T = T_;
    pr.Tinv = Tinv_;
    return pr;
  }

  Matrix2cd plane_at_zero(cd lam, bool unstable, RiccatiTrajectory* path = nullptr) const {
    const RiccatiProblem pr = problem(lam);
    const double z0 = unstable ? -L_ : L_;
    const Matrix2cd W0 = init_eigenplane(pr, z0, unstable);
    RiccatiTrajectory tr = integrate_riccati(pr, z0, 0.0, W0, opt_);
    const Matrix2cd W = tr.W.back();
    if (path) *path = std::move(tr);
    return W;
  }

  cd eval(cd lam) const {
    return (plane_at_zero(lam, false) - plane_at_zero(lam, true)).determinant();
  }

 private:
  Model m_;
  double eps_, c_, L_;
  HermiteSeries U_;
  RiccatiOpts opt_;
  Matrix4cd T_, Tinv_;
};

// ---------------------------------------------------------------------------
// Argument-principle machinery: adaptive winding numbers over closed contours.
// ---------------------------------------------------------------------------
struct Contour {
  std::vector<std::function<cd(double)>> segs;  // each maps t in [0,1]
  cd at(double s) const {
    s -= std::floor(s);
    const double x = s * static_cast<double>(segs.size());
    const int k = std::min<int>(static_cast<int>(segs.size()) - 1, static_cast<int>(x));
    return segs[k](x - k);
  }
};

inline Contour circle_contour(cd center, double radius) {
  Contour C;
  C.segs.push_back([=](double t) { return center + radius * std::polar(1.0, 2.0 * M_PI * t); });
  return C;
}

inline Contour rect_contour(double re0, double re1, double im0, double im1) {
  Contour C;
  C.segs.push_back([=](double t) { return cd(re0 + (re1 - re0) * t, im0); });
  C.segs.push_back([=](double t) { return cd(re1, im0 + (im1 - im0) * t); });
  C.segs.push_back([=](double t) { return cd(re1 - (re1 - re0) * t, im1); });
  C.segs.push_back([=](double t) { return cd(re0, im1 - (im1 - im0) * t); });
  return C;
}

// closed polygon through the given vertices (one linear segment per edge);
// list them counterclockwise so winding numbers keep their usual sign
inline Contour polygon_contour(const std::vector<cd>& vertices) {
  Contour C;
  const size_t n = vertices.size();
  for (size_t i = 0; i < n; ++i) {
    const cd a = vertices[i], b = vertices[(i + 1) % n];
    C.segs.push_back([a, b](double t) { return a + t * (b - a); });
  }
  return C;
}

// right-half-plane contour: large semicircular arc of radius R closed along
// the imaginary axis, detouring around the origin on a radius-r semicircle
// that bulges into the right half plane (the origin stays outside)
inline Contour right_halfplane_contour(double R = 1e5, double r = 1.0) {
  Contour C;
  C.segs.push_back([=](double t) { return R * std::polar(1.0, -M_PI / 2 + M_PI * t); });
  C.segs.push_back([=](double t) { return cd(0.0, R + (r - R) * t); });
  C.segs.push_back([=](double t) { return r * std::polar(1.0, M_PI / 2 - M_PI * t); });
  C.segs.push_back([=](double t) { return cd(0.0, -r - (R - r) * t); });
  return C;
}

struct ContourNearZero : NumericalError {
  double s;
  cd lambda;
  ContourNearZero(double s_, cd lam)
      : NumericalError("winding_number: contour passes near a zero or pole"),
        s(s_),
        lambda(lam) {}
};

struct PhaseUnresolved : NumericalError {
  PhaseUnresolved()
      : NumericalError(
            "winding_number: phase step not resolved within the evaluation "
            "budget (possible discontinuity across the contour)") {}
};

struct WindingOpts {
  int n0 = 24;
  int max_evals = 20000;
  int threads = 1;
  double zero_rel = 1e-10;     // relative |f| threshold for near-zero abort
  double max_dphi = M_PI / 2;  // refine arcs with larger phase steps
};

struct WindingResult {
  int winding = 0;
  double raw = 0.0;
  int n_evals = 0;
  std::vector<double> s;
  std::vector<cd> val;
};

inline WindingResult winding_number(const std::function<cd(cd)>& f, const Contour& C,
                                    const WindingOpts& o = {}) {
  std::vector<std::pair<double, cd>> pts;
  auto eval_batch = [&](const std::vector<double>& ss) {
    std::vector<cd> out(ss.size());
    detail::parallel_for_idx(static_cast<int>(ss.size()), o.threads,
                             [&](int i) { out[i] = f(C.at(ss[i])); });
    for (size_t i = 0; i < ss.size(); ++i) pts.emplace_back(ss[i], out[i]);
    std::sort(pts.begin(), pts.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
  };

  std::vector<double> seed(o.n0);
  for (int i = 0; i < o.n0; ++i) seed[i] = static_cast<double>(i) / o.n0;
  eval_batch(seed);
  int evals = o.n0;

  for (;;) {
    std::vector<double> mags(pts.size());
    for (size_t i = 0; i < pts.size(); ++i) mags[i] = std::abs(pts[i].second);
    std::vector<double> tmp = mags;
    std::nth_element(tmp.begin(), tmp.begin() + tmp.size() / 2, tmp.end());
    const double scale = tmp[tmp.size() / 2];
    for (size_t i = 0; i < pts.size(); ++i)
      if (!std::isfinite(mags[i]) || !(mags[i] > o.zero_rel * scale))
        throw ContourNearZero(pts[i].first, C.at(pts[i].first));

    std::vector<double> pend;
    const size_t n = pts.size();
    for (size_t j = 0; j < n; ++j) {
      const size_t k = (j + 1) % n;
      const double dphi = std::arg(pts[k].second / pts[j].second);
      if (std::abs(dphi) > o.max_dphi) {
        const double s1 = pts[j].first;
        const double s2 = (k == 0) ? pts[0].first + 1.0 : pts[k].first;
        double mid = 0.5 * (s1 + s2);
        mid -= std::floor(mid);
        pend.push_back(mid);
      }
    }
    if (pend.empty()) break;
    evals += static_cast<int>(pend.size());
    if (evals > o.max_evals) throw PhaseUnresolved();
    eval_batch(pend);
  }

  double total = 0.0;
  const size_t n = pts.size();
  for (size_t j = 0; j < n; ++j)
    total += std::arg(pts[(j + 1) % n].second / pts[j].second);
  WindingResult r;
  r.raw = total / (2.0 * M_PI);
  const long w = std::lround(r.raw);
  if (std::abs(r.raw - static_cast<double>(w)) > 1e-3)
    throw NumericalError(
        "winding_number: accumulated phase is not an integer multiple of 2*pi");
  r.winding = static_cast<int>(w);
  r.n_evals = evals;
  r.s.reserve(n);
  r.val.reserve(n);
  for (const auto& p : pts) {
    r.s.push_back(p.first);
    r.val.push_back(p.second);
  }
  return r;
}

// ---------------------------------------------------------------------------
// localize_spectrum: roots and poles of a function analytic off the real axis
// inside a rectangle. The real axis may carry a branch slit, so the rectangle
// is decomposed into an upper box, a lower box, and a thin band around the
// axis. Boxes quadrisect on nonzero winding (cuts jittered off the axis and
// away from roots); the band is partitioned into strips whose winding
// localizes on-axis points, falling back to a magnitude scan where a slit
// makes the winding unusable.
//
// When the rectangle reaches into the far-field continuous spectrum, the
// evaluator stops being analytic left of the Fredholm border: the frozen
// end-state problem loses its 2/2 spatial splitting there, so winding numbers
// are meaningless and sample phases never settle. Supplying ess_left (the
// border abscissa as a function of height, nonincreasing in |Im|) clips the
// search to the region lying ess_margin right of the border: the axis band
// starts at the border's axis crossing, and the off-axis boxes become
// polygons whose left side follows the offset border. The clipped-away part
// of the band is reported in ess_excluded rather than silently dropped.
// ---------------------------------------------------------------------------
struct SpectralPoint {
  cd lambda;
  int index = 0;  // +k for roots of total multiplicity k, negative for poles
  double diameter = 0.0;
};

struct SpectralReport {
  std::vector<SpectralPoint> points;
  std::vector<std::array<double, 2>> scan_cleared;  // re-intervals certified by |f| scan
  std::vector<std::array<double, 2>> ess_excluded;  // re-intervals left unsearched
  int n_evals = 0;
};

struct LocalizeOpts {
  double diam_tol = 1e-3;
  double jitter = 1.37e-3;
  double axis_band = 5e-3;
  int strips = 16;
  int threads = 1;
  int max_depth = 40;
  int scan_pts = 24;
  double grid_phase = 0.0;  // fractional shift of interior strip edges, in [0,1)
  // rightmost admissible-boundary abscissa at height |im| (continuous-spectrum
  // border); empty means the whole rectangle is searchable
  std::function<double(double)> ess_left;
  double ess_margin = 0.02;  // clearance kept right of the border
};

// border abscissa callback for the far-field dispersion curves of the two
// rest states: each curve has Im lambda = c k, so the border Re at height im
// is the dispersion real part at k = im / c, maximized over the end states
inline std::function<double(double)> dispersion_left_limit(const Model& m, double eps, double c,
                                                           double u_left = 1.0,
                                                           double u_right = 0.0) {
  return [=](double im) {
    const double k = std::abs(im) / c;
    return std::max(dispersion(m, eps, c, u_left, k).real(),
                    dispersion(m, eps, c, u_right, k).real());
  };
}

namespace detail {

struct LocalizeState {
  const std::function<cd(cd)>* f;
  LocalizeOpts opt;
  SpectralReport* rep;
};

inline int boxed_winding(LocalizeState& st, double r0, double r1, double i0, double i1) {
  WindingOpts wo;
  wo.threads = st.opt.threads;
  const WindingResult w = winding_number(*st.f, rect_contour(r0, r1, i0, i1), wo);
  st.rep->n_evals += w.n_evals;
  return w.winding;
}

inline void quadrisect(LocalizeState& st, double r0, double r1, double i0, double i1, int w,
                       int depth) {
  if (w == 0) return;
  const double dr = r1 - r0, di = i1 - i0;
  if (std::max(dr, di) <= st.opt.diam_tol) {
    st.rep->points.push_back({cd(0.5 * (r0 + r1), 0.5 * (i0 + i1)), w, std::max(dr, di)});
    return;
  }
  if (depth > st.opt.max_depth)
    throw NumericalError("localize_spectrum: quadrisection depth exceeded");

  const double j = st.opt.jitter;
  for (int attempt = 0;; ++attempt) {
    if (attempt > 6)
      throw NumericalError("localize_spectrum: could not place cuts away from roots");
    const double off = 0.37 * j * attempt * (attempt % 2 ? 1.0 : -1.0);
    double rc = std::clamp(0.5 * (r0 + r1) + off, r0 + 0.125 * dr, r1 - 0.125 * dr);
    double ic = 0.5 * (i0 + i1) + off;
    // while the box is tall enough, keep the horizontal cut off the real axis
    if (std::abs(ic) < j && di > 8.0 * j) {
      ic = (i1 - j > i0 + 0.125 * di) ? j : -j;
    }
    ic = std::clamp(ic, i0 + 0.125 * di, i1 - 0.125 * di);
    int w00, w10, w01, w11;
    try {
      w00 = boxed_winding(st, r0, rc, i0, ic);
      w10 = boxed_winding(st, rc, r1, i0, ic);
      w01 = boxed_winding(st, r0, rc, ic, i1);
      w11 = boxed_winding(st, rc, r1, ic, i1);
    } catch (const ContourNearZero&) {
      continue;  // a cut landed on a root or pole; jitter and retry
    }
    if (w00 + w10 + w01 + w11 != w)
      throw NumericalError(
          "localize_spectrum: winding additivity violated during quadrisection");
    quadrisect(st, r0, rc, i0, ic, w00, depth + 1);
    quadrisect(st, rc, r1, i0, ic, w10, depth + 1);
    quadrisect(st, r0, rc, ic, i1, w01, depth + 1);
    quadrisect(st, rc, r1, ic, i1, w11, depth + 1);
    return;
  }
}

// counterclockwise polygon for the part of the upper box [r0, xr] x [i0, i1]
// lying right of the (nonincreasing-in-height) boundary x = lim(y): right edge
// up, top edge leftward, then back down along the offset boundary
inline std::vector<cd> boundary_sliver_upper(const std::function<double(double)>& lim,
                                             double r0, double xr, double i0, double i1,
                                             int nseg) {
  auto solve_y = [&](double xt) {
    double lo = i0, hi = i1;  // smallest y with lim(y) <= xt
    for (int it = 0; it < 80; ++it) {
      const double mid = 0.5 * (lo + hi);
      (lim(mid) <= xt ? hi : lo) = mid;
    }
    return hi;
  };
  const double y_lo = (lim(i0) <= xr) ? i0 : solve_y(xr);
  const double y_top = (lim(i1) >= r0) ? i1 : solve_y(r0);
  std::vector<cd> v;
  auto push = [&](double x, double y) {
    const cd p(x, y);
    if (v.empty() || std::abs(v.back() - p) > 1e-12) v.push_back(p);
  };
  push(xr, y_lo);
  push(xr, i1);
  push(std::max(r0, lim(i1)), i1);
  if (y_top < i1) push(r0, y_top);
  for (int j = 0; j <= nseg; ++j) {
    const double y = y_top + (y_lo - y_top) * static_cast<double>(j) / nseg;
    push(std::min(xr, std::max(r0, lim(y))), y);
  }
  if (std::abs(v.back() - v.front()) <= 1e-12) v.pop_back();
  return v;
}

// winding search over an off-axis box. Without a boundary callback this is a
// plain quadrisection. With one, the part of the box right of the boundary's
// deepest incursion (attained at the edge nearest the axis) is a rectangle
// handled as usual, and the sliver between the offset boundary and that
// rectangle is swept by a polygon contour, which must come back empty: an
// object that close to the continuous spectrum cannot be enclosed in boxes.
inline void offaxis_region(LocalizeState& st, double r0, double r1, double i0, double i1) {
  const auto& bl = st.opt.ess_left;
  if (!bl) {
    const int w = boxed_winding(st, r0, r1, i0, i1);
    quadrisect(st, r0, r1, i0, i1, w, 0);
    return;
  }
  const bool upper = i0 >= 0.0;  // boxes here never straddle the axis
  const double amin = upper ? i0 : -i1;
  const double amax = upper ? i1 : -i0;
  const double xcut = bl(amin) + st.opt.ess_margin;
  if (xcut <= r0) {
    const int w = boxed_winding(st, r0, r1, i0, i1);
    quadrisect(st, r0, r1, i0, i1, w, 0);
    return;
  }
  if (xcut < r1) {
    const int w = boxed_winding(st, xcut, r1, i0, i1);
    quadrisect(st, xcut, r1, i0, i1, w, 0);
  }
  const double xr = std::min(xcut, r1);
  for (int attempt = 0;; ++attempt) {
    const double off = st.opt.ess_margin + 0.37 * st.opt.jitter * attempt;
    auto lim = [&](double y) { return bl(y) + off; };
    if (lim(amax) >= xr) {
      if (xcut >= r1) st.rep->ess_excluded.push_back({r0, r1});
      return;  // boundary offset covers the whole sliver: nothing searchable
    }
    std::vector<cd> poly = boundary_sliver_upper(lim, r0, xr, amin, amax, 24);
    if (!upper) {  // mirror below the axis; conjugation flips orientation back
      std::reverse(poly.begin(), poly.end());
      for (cd& p : poly) p = std::conj(p);
    }
    WindingOpts wo;
    wo.threads = st.opt.threads;
    int w = 0;
    try {
      const WindingResult wr = winding_number(*st.f, polygon_contour(poly), wo);
      st.rep->n_evals += wr.n_evals;
      w = wr.winding;
    } catch (const ContourNearZero&) {
      if (attempt >= 6)
        throw NumericalError(
            "localize_spectrum: contour along the admissible-boundary offset keeps "
            "passing near a zero or pole; adjust ess_margin");
      continue;  // nudge the offset and retry
    } catch (const PhaseUnresolved&) {
      throw NumericalError(
          "localize_spectrum: phase never settles along the admissible-boundary "
          "offset; the boundary callback or ess_margin is too tight");
    }
    if (w != 0)
      throw NumericalError(
          "localize_spectrum: winding " + std::to_string(w) +
          " within ess_margin of the admissible boundary; objects there cannot be "
          "enclosed in boxes clear of the boundary");
    return;
  }
}

// certify a slit-crossing strip as point-free via a magnitude scan on two
// horizontal lines placed symmetrically inside the band
inline void certify_empty_by_scan(LocalizeState& st, double r0, double r1, double i0,
                                  double i1) {
  const int n = st.opt.scan_pts;
  const double yc = 0.5 * (i0 + i1), dy = 0.25 * (i1 - i0);
  std::vector<double> mag(2 * n);
  detail::parallel_for_idx(2 * n, st.opt.threads, [&](int k) {
    const int i = k % n;
    const double x = r0 + (r1 - r0) * (i + 0.5) / n;
    const double y = (k < n) ? yc + dy : yc - dy;
    mag[k] = std::abs((*st.f)(cd(x, y)));
  });
  st.rep->n_evals += 2 * n;
  std::vector<double> tmp = mag;
  std::nth_element(tmp.begin(), tmp.begin() + tmp.size() / 2, tmp.end());
  const double med = tmp[tmp.size() / 2];
  const double mn = *std::min_element(mag.begin(), mag.end());
  if (!(mn > 0.02 * med))
    throw NumericalError(
        "localize_spectrum: unresolved magnitude dip inside the axis band near re=" +
        std::to_string(0.5 * (r0 + r1)));
  st.rep->scan_cleared.push_back({r0, r1});
}

}  // namespace detail

inline SpectralReport localize_spectrum(const std::function<cd(cd)>& f, double re0,
                                        double re1, double im0, double im1,
                                        const LocalizeOpts& opt = {}) {
  SpectralReport rep;
  detail::LocalizeState st{&f, opt, &rep};
  const double band = opt.axis_band;

  if (im0 > band || im1 < -band) {
    // rectangle clear of the real axis
    detail::offaxis_region(st, re0, re1, im0, im1);
  } else {
    const double blo = std::max(im0, -band);
    const double bhi = std::min(im1, band);
    if (im1 > bhi) detail::offaxis_region(st, re0, re1, bhi, im1);
    if (im0 < blo) detail::offaxis_region(st, re0, re1, im0, blo);
    // axis band, swept left to right in strips with jitter-adjustable edges;
    // the admissible boundary bites deepest at the axis, so one clip suffices
    double re_lo = re0;
    if (opt.ess_left) {
      re_lo = std::max(re0, opt.ess_left(0.0) + opt.ess_margin);
      if (re_lo > re0) rep.ess_excluded.push_back({re0, std::min(re_lo, re1)});
    }
    const double dx = (re1 - re_lo) / opt.strips;
    double xl = re_lo;
    for (int s = 0; re_lo < re1 && s < opt.strips; ++s) {
      double xr = (s + 1 == opt.strips)
                      ? re1
                      : std::min(re_lo + (s + 1 + opt.grid_phase) * dx, re1 - 0.25 * dx);
      xr = std::max(xr, xl + 0.25 * dx);
      bool done = false;
      for (int attempt = 0; attempt <= 6 && !done; ++attempt) {
        try {
          const int w = detail::boxed_winding(st, xl, xr, blo, bhi);
          if (w != 0) detail::quadrisect(st, xl, xr, blo, bhi, w, 0);
          done = true;
        } catch (const ContourNearZero&) {
          if (s + 1 == opt.strips || attempt == 6)
            throw NumericalError(
                "localize_spectrum: strip edge could not be moved off a root near re=" +
                std::to_string(xr));
          xr += 0.37 * opt.jitter;  // shift the shared edge and retry
        } catch (const PhaseUnresolved&) {
          detail::certify_empty_by_scan(st, xl, xr, blo, bhi);
          done = true;
        }
      }
      xl = xr;
    }
  }

  std::sort(rep.points.begin(), rep.points.end(),
            [](const SpectralPoint& a, const SpectralPoint& b) {
              return a.lambda.real() < b.lambda.real();
            });
  return rep;
}

}  // namespace shockstab
