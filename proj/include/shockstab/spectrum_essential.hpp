#pragma once
#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "shockstab/model.hpp"
#include "shockstab/wave.hpp"

namespace shockstab {

// ---------------------------------------------------------------------------
// Far-field (frozen-coefficient) spectral theory. The linearization about an
// end state U* admits Fourier modes e^{ikz} with
//   lambda(k) = -eps^2 k^4 - D(U*) k^2 + R'(U*) + i c k,
// tracing the Fredholm border for that end.
// ---------------------------------------------------------------------------
inline cd dispersion(const Model& m, double eps, double c, double Ustar, double k) {
  const double k2 = k * k;
  return {-eps * eps * k2 * k2 - m.D(Ustar) * k2 + m.Rp(Ustar), c * k};
}

struct FredholmBorder {
  double Ustar;
  std::vector<double> k;
  std::vector<cd> lambda;
};

inline FredholmBorder essential_spectrum_plotdata(const Model& m, double eps, double c,
                                                  double Ustar, double kmax, int n) {
  FredholmBorder b;
  b.Ustar = Ustar;
  b.k.reserve(2 * n + 1);
  b.lambda.reserve(2 * n + 1);
  for (int i = -n; i <= n; ++i) {
    const double k = kmax * i / n;
    b.k.push_back(k);
    b.lambda.push_back(dispersion(m, eps, c, Ustar, k));
  }
  return b;
}

// numerically maximized real part along one border (attained at k = 0 for
// positive end-state diffusivity)
inline double border_rightmost(const Model& m, double eps, double c, double Ustar,
                               double kmax = 10.0, int n = 4000) {
  double best = -std::numeric_limits<double>::infinity();
  for (int i = 0; i <= n; ++i) {
    const double k = kmax * i / n;
    best = std::max(best, dispersion(m, eps, c, Ustar, k).real());
  }
  return best;
}

// ---------------------------------------------------------------------------
// Frozen-coefficient spatial eigenvalues and region signatures. The first-order
// eigenvalue system in the wave variable has the 4x4 coefficient matrix
//   [ 0       1/eps  0  0     ]
//   [ D/eps   0      0  -1/eps]
//   [ lam-R'  0      0  0     ]
//   [ -c      0      1  0     ]
// whose eigenvalue real-part signs (sorted ascending) classify the region.
// ---------------------------------------------------------------------------
inline Matrix4cd frozen_evp_matrix(const Model& m, double eps, double c, double Ustar, cd lam) {
  Matrix4cd A = Matrix4cd::Zero();
  A(0, 1) = 1.0 / eps;
  A(1, 0) = m.D(Ustar) / eps;
  A(1, 3) = -1.0 / eps;
  A(2, 0) = lam - m.Rp(Ustar);
  A(3, 0) = -c;
  A(3, 2) = 1.0;
  return A;
}

inline Vector4cd frozen_spatial_eigs(const Model& m, double eps, double c, double Ustar,
                                     cd lam) {
  Eigen::ComplexEigenSolver<Matrix4cd> es(frozen_evp_matrix(m, eps, c, Ustar, lam), false);
  if (es.info() != Eigen::Success)
    throw NumericalError("frozen_spatial_eigs: eigensolver failed");
  Vector4cd v = es.eigenvalues();
  std::sort(v.data(), v.data() + 4, [](cd a, cd b) { return a.real() < b.real(); });
  return v;
}

struct RegionLabel {
  std::array<int, 4> sig_left;   // signs of Re(mu), ascending, at the U = 1 end
  std::array<int, 4> sig_right;  // same at the U = 0 end
  bool in_omega = false;         // 2-2 hyperbolic splitting at both ends
  std::string text;              // e.g. "(--++)/(--++)"
};

inline RegionLabel region_signature(const Model& m, double eps, double c, cd lam) {
  RegionLabel out;
  auto sig_of = [&](double Ustar, std::array<int, 4>& sig) {
    const Vector4cd mu = frozen_spatial_eigs(m, eps, c, Ustar, lam);
    int nneg = 0;
    for (int i = 0; i < 4; ++i) {
      sig[i] = mu[i].real() > 0 ? 1 : -1;
      if (sig[i] < 0) ++nneg;
    }
    return nneg;
  };
  const int nl = sig_of(1.0, out.sig_left);
  const int nr = sig_of(0.0, out.sig_right);
  out.in_omega = (nl == 2 && nr == 2);
  auto str = [](const std::array<int, 4>& s) {
    std::string t;
    for (int v : s) t += (v > 0 ? '+' : '-');
    return t;
  };
  out.text = "(" + str(out.sig_left) + ")/(" + str(out.sig_right) + ")";
  return out;
}

// spatial eigenvalues of the dominant fourth-order part, mu^4 = -lambda/eps^2
// (sector bound for large |lambda|); sorted by argument
inline std::array<cd, 4> sector_bound_eigs(cd lam, double eps) {
  const double r = std::pow(std::abs(lam), 0.25) / std::sqrt(eps);
  const double th = std::arg(-lam);
  std::array<cd, 4> mu;
  for (int k = 0; k < 4; ++k)
    mu[k] = std::polar(r, (th + 2.0 * M_PI * k) / 4.0);
  std::sort(mu.begin(), mu.end(), [](cd a, cd b) { return std::arg(a) < std::arg(b); });
  return mu;
}

}  // namespace shockstab
