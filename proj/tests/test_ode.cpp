#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <complex>

#include "doctest.h"
#include "shockstab/errors.hpp"
#include "shockstab/ode.hpp"

using namespace shockstab;
using Vec1 = Eigen::Matrix<double, 1, 1>;
using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;
using CVec1 = Eigen::Matrix<std::complex<double>, 1, 1>;
using CMat1 = Eigen::Matrix<std::complex<double>, 1, 1>;

TEST_CASE("rk45 integrates exponential decay to tolerance") {
  auto rhs = [](double, const Vec1& y) { return Vec1(-y[0]); };
  Vec1 y0(1.0);
  OdeOpts o;
  o.rtol = 1e-10;
  o.atol = 1e-12;
  const auto sol = rk45(rhs, 0.0, 1.0, y0, o);
  CHECK(sol.back()[0] == doctest::Approx(std::exp(-1.0)).epsilon(1e-9));
  CHECK(sol.t_end == doctest::Approx(1.0));
}

TEST_CASE("rk45 dense output matches the analytic solution between nodes") {
  auto rhs = [](double t, const Vec1&) { return Vec1(std::cos(t)); };
  OdeOpts o;
  o.rtol = 1e-10;  // cubic-Hermite interpolation is a lower order than the steps
  o.atol = 1e-12;
  const auto sol = rk45(rhs, 0.0, 6.0, Vec1(0.0), o);
  for (double tq : {0.31, 1.7, 2.9, 4.01, 5.73}) {
    CHECK(sol.eval(tq)[0] == doctest::Approx(std::sin(tq)).epsilon(1e-6));
  }
}

TEST_CASE("rk45 handles reverse-time integration") {
  auto rhs = [](double, const Vec1& y) { return Vec1(-y[0]); };
  const auto sol = rk45(rhs, 1.0, 0.0, Vec1(std::exp(-1.0)));
  CHECK(sol.back()[0] == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(sol.t.back() < sol.t.front());
}

TEST_CASE("rk45 integrates a complex linear rotation") {
  using cd = std::complex<double>;
  auto rhs = [](double, const CVec1& y) { return CVec1(cd(0.0, 1.0) * y[0]); };
  OdeOpts o;
  o.rtol = 1e-11;
  o.atol = 1e-13;
  const auto sol = rk45(rhs, 0.0, 2.0 * M_PI, CVec1(cd(1.0, 0.0)), o);
  CHECK(std::abs(sol.back()[0] - cd(1.0, 0.0)) < 1e-8);
}

TEST_CASE("rk45 event location stops at a crossing") {
  auto rhs = [](double, const Vec2& y) { return Vec2(y[1], -y[0]); };
  std::vector<Event<Vec2>> ev(1);
  ev[0].g = [](double, const Vec2& y) { return y[0]; };
  ev[0].terminal = true;
  ev[0].direction = -1;  // only downward crossings
  const auto sol = rk45(rhs, 0.0, 10.0, Vec2(1.0, 0.0), {}, ev);
  REQUIRE(sol.event_hit);
  CHECK(sol.event_index == 0);
  CHECK(sol.t_end == doctest::Approx(M_PI / 2.0).epsilon(1e-8));
  CHECK(std::abs(sol.back()[0]) < 1e-8);
}

TEST_CASE("rk45 event direction filter skips wrong-signed crossings") {
  auto rhs = [](double, const Vec2& y) { return Vec2(y[1], -y[0]); };
  std::vector<Event<Vec2>> ev(1);
  ev[0].g = [](double, const Vec2& y) { return y[0]; };
  ev[0].terminal = true;
  ev[0].direction = +1;  // first upward crossing is at 3*pi/2
  const auto sol = rk45(rhs, 0.0, 10.0, Vec2(1.0, 0.0), {}, ev);
  REQUIRE(sol.event_hit);
  CHECK(sol.t_end == doctest::Approx(3.0 * M_PI / 2.0).epsilon(1e-7));
}

TEST_CASE("rk45 throws on step exhaustion") {
  auto rhs = [](double, const Vec1& y) { return Vec1(y[0] * y[0]); };  // blows up at t=1
  OdeOpts o;
  o.max_steps = 200;
  CHECK_THROWS_AS(rk45(rhs, 0.0, 2.0, Vec1(1.0), o), NumericalError);
}

TEST_CASE("sdirk3 solves a stiff relaxation problem") {
  // y' = -1000 (y - cos t) - sin t, exact solution y = cos t from y(0) = 1
  auto rhs = [](double t, const Vec1& y) {
    return Vec1(-1000.0 * (y[0] - std::cos(t)) - std::sin(t));
  };
  auto jac = [](double, const Vec1&) {
    Eigen::Matrix<double, 1, 1> j;
    j(0, 0) = -1000.0;
    return j;
  };
  OdeOpts o;
  o.rtol = 1e-9;
  o.atol = 1e-11;
  const auto sol = sdirk3<Vec1, Eigen::Matrix<double, 1, 1>>(rhs, jac, 0.0, 1.0, Vec1(1.0), o);
  CHECK(sol.back()[0] == doctest::Approx(std::cos(1.0)).epsilon(1e-7));
}

TEST_CASE("sdirk3 matches rk45 on a nonstiff nonlinear problem") {
  auto rhs = [](double, const Vec2& y) { return Vec2(y[1], std::sin(y[0]) - 0.2 * y[1]); };
  auto jac = [](double, const Vec2& y) {
    Mat2 j;
    j << 0.0, 1.0, std::cos(y[0]), -0.2;
    return j;
  };
  OdeOpts o;
  o.rtol = 1e-9;
  o.atol = 1e-11;
  const Vec2 y0(2.5, 0.0);
  const auto a = sdirk3<Vec2, Mat2>(rhs, jac, 0.0, 4.0, y0, o);
  const auto b = rk45(rhs, 0.0, 4.0, y0, o);
  CHECK(a.back()[0] == doctest::Approx(b.back()[0]).epsilon(1e-6));
  CHECK(a.back()[1] == doctest::Approx(b.back()[1]).epsilon(1e-6));
}

TEST_CASE("sdirk3 integrates a complex stiff linear equation in reverse time") {
  using cd = std::complex<double>;
  const cd a(-40.0, 5.0);
  auto rhs = [a](double, const CVec1& y) { return CVec1(a * y[0]); };
  auto jac = [a](double, const CVec1&) {
    CMat1 j;
    j(0, 0) = a;
    return j;
  };
  OdeOpts o;
  o.rtol = 1e-10;
  o.atol = 1e-12;
  // integrate from t=1 back to t=0; exact factor exp(-a)
  const auto sol = sdirk3<CVec1, CMat1>(rhs, jac, 1.0, 0.0, CVec1(cd(1.0, 0.0)), o);
  const cd expected = std::exp(-a);
  CHECK(std::abs(sol.back()[0] - expected) / std::abs(expected) < 1e-6);
}
