#pragma once
#include <array>
#include <cmath>
#include <utility>

#include "shockstab/errors.hpp"

namespace shockstab {

// Cubic flux F, its derivative D = F' (the sign-indefinite diffusivity), the
// cubic reaction R, and the flux antiderivative G (layer Hamiltonian potential).
// Coefficients ascending degree.
struct ModelParams {
  double eps = 1e-4;
  double c = 0.1968108280976078;  // singular-limit wavespeed of the default model
  std::array<double, 4> F_coeffs{0.0, 21.0 / 8.0, -4.0, 2.0};
  std::array<double, 4> R_coeffs{0.0, -1.0, 6.0, -5.0};
  // alternate published diffusivity variant 6(u-7/12)(u-5/6), kept for
  // sensitivity experiments only; default ties D to F' exactly
  bool use_paper_eq2_D = false;
};

namespace detail {
template <std::size_t N>
inline double horner(const std::array<double, N>& c, double u) {
  double s = 0.0;
  for (std::size_t i = N; i-- > 0;) s = s * u + c[i];
  return s;
}
}  // namespace detail

struct ModelEval {
  double F, D, Dp, R, Rp, G;
};

class Model {
 public:
  Model() : Model(ModelParams{}) {}
  explicit Model(const ModelParams& mp) : p_(mp) {
    Fc_ = mp.F_coeffs;
    Rc_ = mp.R_coeffs;
    if (mp.use_paper_eq2_D) {
      // 6(u-7/12)(u-5/6) = 6u^2 - (17/2)u + 35/12
      Dc_ = {35.0 / 12.0, -17.0 / 2.0, 6.0};
    } else {
      Dc_ = {Fc_[1], 2.0 * Fc_[2], 3.0 * Fc_[3]};
    }
    Dpc_ = {Dc_[1], 2.0 * Dc_[2]};
    Rpc_ = {Rc_[1], 2.0 * Rc_[2], 3.0 * Rc_[3]};
    Gc_ = {0.0, Fc_[0], Fc_[1] / 2.0, Fc_[2] / 3.0, Fc_[3] / 4.0};
  }

  const ModelParams& params() const { return p_; }
  double eps() const { return p_.eps; }
  double c() const { return p_.c; }

  double F(double u) const { return detail::horner(Fc_, u); }
  double D(double u) const { return detail::horner(Dc_, u); }
  double Dp(double u) const { return detail::horner(Dpc_, u); }
  double R(double u) const { return detail::horner(Rc_, u); }
  double Rp(double u) const { return detail::horner(Rpc_, u); }
  double G(double u) const { return detail::horner(Gc_, u); }

 private:
  ModelParams p_;
  std::array<double, 4> Fc_, Rc_;
  std::array<double, 3> Dc_, Rpc_;
  std::array<double, 2> Dpc_;
  std::array<double, 5> Gc_;
};

inline ModelEval eval_model(const Model& m, double u) {
  return {m.F(u), m.D(u), m.Dp(u), m.R(u), m.Rp(u), m.G(u)};
}

// roots of D, ascending; requires a genuinely sign-changing diffusivity
inline std::pair<double, double> fold_points(const Model& m) {
  double d0, d1, d2;
  if (m.params().use_paper_eq2_D) {
    d0 = 35.0 / 12.0;
    d1 = -17.0 / 2.0;
    d2 = 6.0;
  } else {
    d0 = m.params().F_coeffs[1];
    d1 = 2.0 * m.params().F_coeffs[2];
    d2 = 3.0 * m.params().F_coeffs[3];
  }
  const double disc = d1 * d1 - 4.0 * d2 * d0;
  if (d2 == 0.0 || disc <= 0.0)
    throw NumericalError("fold_points: diffusivity has no real fold pair");
  const double r = std::sqrt(disc);
  double u1 = (-d1 - r) / (2.0 * d2), u2 = (-d1 + r) / (2.0 * d2);
  if (u1 > u2) std::swap(u1, u2);
  return {u1, u2};
}

struct JumpData {
  double u_minus, u_plus;  // shock endpoints, u_minus < u_plus
  double v_star;           // common flux level F(u_minus) = F(u_plus)
};

// Equal-area chord of the cubic flux. A cubic is odd-symmetric about its
// inflection point u_i, so the chord through (u_i, F(u_i)) balances the two
// lobes automatically; the endpoints solve F(u_i + s) = F(u_i - s), i.e.
// s^2 = -F'(u_i)/a3.
inline JumpData equal_area_jumps(const Model& m) {
  const auto& fc = m.params().F_coeffs;
  const double a3 = fc[3], a2 = fc[2];
  if (a3 == 0.0) throw NumericalError("equal_area_jumps: flux is not cubic");
  const double ui = -a2 / (3.0 * a3);
  // chord slope condition uses the exact flux derivative, independent of any
  // alternate-D configuration
  const double slope = fc[1] + 2.0 * fc[2] * ui + 3.0 * fc[3] * ui * ui;
  if (!(slope / a3 < 0.0))
    throw NumericalError("equal_area_jumps: flux monotone at inflection, no shock chord");
  const double s = std::sqrt(-slope / a3);
  return {ui - s, ui + s, m.F(ui)};
}

}  // namespace shockstab
