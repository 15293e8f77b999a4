#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <complex>

#include "doctest.h"
#include "shockstab/model.hpp"
#include "shockstab/reduced.hpp"
#include "shockstab/spectrum_essential.hpp"
#include "shockstab/wave.hpp"

using namespace shockstab;

namespace {
const SingularGeometry& geo() {
  static const SingularGeometry g = singular_wavespeed(Model{});
  return g;
}
}  // namespace

TEST_CASE("fast beta vector field is the projectivized linear flow") {
  const Model m;
  const double eps = 0.05, c = 0.2, ub = 0.37;
  const cd lam(1.3, 0.4);
  const Vector3cd b(cd(0.2, -0.1), cd(-0.4, 0.3), cd(0.7, 0.05));
  // xi-scale linear field on y = (1, b): d beta_i = dy_{i+1} - b_i dy_0
  const Matrix4cd M = eps * frozen_evp_matrix(m, eps, c, ub, lam);
  Vector4cd y;
  y << 1.0, b[0], b[1], b[2];
  const Vector4cd dy = M * y;
  const Vector3cd f = fast_beta_rhs_xi(m, ub, eps, c, lam, b);
  for (int i = 0; i < 3; ++i) CHECK(std::abs(f[i] - (dy[i + 1] - b[i] * dy[0])) < 1e-13);
}

TEST_CASE("fast gamma vector field is the complementary-chart quotient") {
  const Model m;
  const double eps = 0.05, c = 0.2, ub = 0.66;  // inside the negative-diffusivity strip
  const cd lam(0.9, -0.2);
  const Vector3cd g(cd(0.5, 0.2), cd(-0.3, 0.6), cd(0.25, -0.4));
  const Matrix4cd M = eps * frozen_evp_matrix(m, eps, c, ub, lam);
  Vector4cd y;
  y << g[0], 1.0, g[1], g[2];
  const Vector4cd dy = M * y;
  const Vector3cd f = fast_gamma_rhs_xi(m, ub, eps, c, lam, g);
  CHECK(std::abs(f[0] - (dy[0] - g[0] * dy[1])) < 1e-13);
  CHECK(std::abs(f[1] - (dy[2] - g[1] * dy[1])) < 1e-13);
  CHECK(std::abs(f[2] - (dy[3] - g[2] * dy[1])) < 1e-13);
}

TEST_CASE("fast chart jacobians match finite differences") {
  const Model m;
  const double eps = 0.03, c = 0.21, ub = 0.48;
  const cd lam(0.7, 0.3);
  const Vector3cd b(cd(0.3, 0.1), cd(-0.2, 0.4), cd(0.6, -0.3));
  const double h = 1e-6;
  const Matrix3cd Jb = fast_beta_jac_xi(m, ub, eps, b);
  const Matrix3cd Jg = fast_gamma_jac_xi(m, ub, eps, c, lam, b);
  for (int j = 0; j < 3; ++j) {
    Vector3cd e = Vector3cd::Zero();
    e[j] = 1.0;
    const Vector3cd db = (fast_beta_rhs_xi(m, ub, eps, c, lam, b + h * e) -
                          fast_beta_rhs_xi(m, ub, eps, c, lam, b - h * e)) /
                         (2 * h);
    const Vector3cd dg = (fast_gamma_rhs_xi(m, ub, eps, c, lam, b + h * e) -
                          fast_gamma_rhs_xi(m, ub, eps, c, lam, b - h * e)) /
                         (2 * h);
    CHECK((Jb.col(j) - db).norm() < 1e-6);
    CHECK((Jg.col(j) - dg).norm() < 1e-6);
  }
}

TEST_CASE("projective chart flip is an involution") {
  const Vector3cd x(cd(0.4, -0.2), cd(1.3, 0.8), cd(-2.0, 0.1));
  const Vector3cd y = detail::flip_projective_chart(detail::flip_projective_chart(x));
  CHECK((x - y).norm() < 1e-14);
}

TEST_CASE("projective fast integration agrees with the 4D linear quotient") {
  const Model m;
  const double eps = 0.05, c = 0.2;
  auto ubar = [](double z) { return 0.5 - 0.4 * std::tanh(z); };
  for (cd lam : {cd(2.0, 0.0), cd(0.6, 0.5)}) {
    const double z0 = -1.0, z1 = -0.5;
    const Vector3cd b0 = fast_frozen_init(m, ubar(z0), eps, c, lam, true);
    const Vector3cd br = integrate_fast_projective(m, ubar, eps, c, lam, z0, z1, b0);
    const Vector3cd bq = projective_full_quotient(m, ubar, eps, c, lam, z0, z1, b0);
    CHECK((br - bq).norm() < 1e-6 * (1.0 + bq.norm()));
  }
}

TEST_CASE("fast connection probe at frozen coefficients recovers spatial rates") {
  const Model m;
  const double eps = 1e-2, c = 0.1968108280976078;
  const cd lam(1.0, 0.0);
  auto ubar = [](double) { return 0.0; };
  const FastProbeResult r = fast_connection_probe(m, ubar, 50.0, eps, c, lam);
  // with constant coefficients both sweeps sit on frozen eigendirections:
  // beta1 = eps * mu for the selected spatial eigenvalue
  const Vector4cd mu = frozen_spatial_eigs(m, eps, c, 0.0, lam);
  const cd expected = eps * (mu[3] - mu[0]);
  CHECK(std::abs(r.Ef - expected) < 1e-6 * std::abs(expected));
  CHECK(r.classification == "unstable-to-unstable");
  CHECK(r.fwd_path.zeta.size() > 2);
  CHECK(r.fwd_path.zeta.front() == doctest::Approx(-25.0));
  CHECK(r.fwd_path.zeta.back() == doctest::Approx(25.0));
}

TEST_CASE("fast root scan mechanics on a rootless window") {
  const Model m;
  const double eps = 1e-2, c = 0.1968108280976078;
  auto ubar = [](double) { return 0.0; };
  const FastScanReport rep = fast_probe_root_scan(m, ubar, 50.0, eps, c, 0.5, 1.5, 2, 2);
  CHECK(rep.roots.empty());
  REQUIRE(rep.grid_Ef.size() == 3);
  for (double v : rep.grid_Ef) {
    CHECK(std::isfinite(v));
    CHECK(v > 0.0);
  }
}

TEST_CASE("slow spatial rates solve the end-state quadratic") {
  const Model m;
  const double c0 = geo().c0;
  for (double Us : {0.0, 1.0}) {
    for (cd lam : {cd(0.3, 0.0), cd(-0.5, 0.2)}) {
      for (bool unstable : {false, true}) {
        const cd mu = slow_mu(m, c0, Us, lam, unstable);
        CHECK(std::abs(m.D(Us) * mu * mu + c0 * mu - (lam - m.Rp(Us))) < 1e-12);
        const cd S = slow_frozen_init(m, c0, Us, lam, unstable);
        // S is a fixed point of the slow Riccati numerator
        CHECK(std::abs((lam - m.Rp(Us)) + c0 * S - m.D(Us) * S * S) < 1e-12);
      }
    }
  }
  // real lam above the branch point: unstable rate positive at U=1
  CHECK(slow_mu(m, c0, 1.0, cd(0.3, 0.0), true).real() > 0.0);
  CHECK(slow_mu(m, c0, 0.0, cd(0.3, 0.0), false).real() < 0.0);
}

TEST_CASE("jump map transports the lam = 0 variational solution") {
  const Model m;
  const SingularGeometry& g = geo();
  // S_var(U) = -R(U)/(Pbar - c0 U) solves the slow problem at lam = 0; at the
  // layer base points Pbar = P_star on both sides
  auto Svar = [&](double U) { return -m.R(U) / (g.P_star - g.c0 * U); };
  const JumpMapData jm = jump_map(m, g, cd(0.0, 0.0));
  const cd lhs = (Svar(g.jump.u_plus) + jm.j12) / jm.j22;
  CHECK(std::abs(lhs - Svar(g.jump.u_minus)) < 1e-12);
  // matrix form acts on (P, V) consistently with the chart action
  const cd S = 0.37;
  const Vector2cd pv = jm.J * Vector2cd(S, 1.0);
  CHECK(std::abs(pv[0] / pv[1] - (S + jm.j12) / jm.j22) < 1e-14);
}

TEST_CASE("slow Riccati legs agree with the linear quotient") {
  const Model m;
  const SingularGeometry& g = geo();
  const SlowOpts so;
  for (cd lam : {cd(0.25, 0.0), cd(-0.4, 0.15)}) {
    const double U0 = g.P_right.back_t(), U1 = g.jump.u_plus;
    const cd S0 = slow_frozen_init(m, g.c0, 1.0, lam, true);
    const cd Sr = detail::integrate_slow_leg(m, g.P_right, g.c0, lam, U0, U1, S0, so, nullptr);
    const cd Sq = slow_linear_quotient(m, g.P_right, g.c0, lam, U0, U1, S0);
    CHECK(std::abs(Sr - Sq) < 1e-8 * (1.0 + std::abs(Sq)));
  }
}

TEST_CASE("slow Evans function vanishes at the translation eigenvalue") {
  const Model m;
  CHECK(std::abs(slow_evans_eval(m, geo(), cd(0.0, 0.0))) < 1e-8);
}

TEST_CASE("slow eigenvalue scan finds exactly the two real eigenvalues") {
  const Model m;
  const SlowEigReport rep = find_slow_eigenvalues(m, geo(), -0.95, 0.3, 100, 2);
  REQUIRE(rep.roots.size() == 2);
  CHECK(rep.roots[0] == doctest::Approx(-0.8003258596).epsilon(2e-6));
  CHECK(std::abs(rep.roots[1]) < 1e-8);
  CHECK(rep.scanned_lo == doctest::Approx(-0.95));
}

TEST_CASE("slow eigenvalues are independent of the comparison section") {
  const Model m;
  SlowOpts a, b;
  a.section_U = 0.3;
  b.section_U = 0.45;
  const SlowEigReport ra = find_slow_eigenvalues(m, geo(), -0.85, -0.75, 20, 2, a);
  const SlowEigReport rb = find_slow_eigenvalues(m, geo(), -0.85, -0.75, 20, 2, b);
  REQUIRE(ra.roots.size() == 1);
  REQUIRE(rb.roots.size() == 1);
  CHECK(ra.roots[0] == doctest::Approx(rb.roots[0]).epsilon(1e-8));
}

TEST_CASE("slow section outside the left leg is rejected") {
  const Model m;
  SlowOpts so;
  so.section_U = 0.9;  // beyond u_minus: not on the left leg
  CHECK_THROWS_AS(slow_evans_eval(m, geo(), cd(0.1, 0.0), so), ConfigError);
}
