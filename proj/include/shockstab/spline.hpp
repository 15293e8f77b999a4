#pragma once
#include <cmath>
#include <cstddef>
#include <vector>

#include "shockstab/errors.hpp"

namespace shockstab {

namespace detail {
inline std::size_t bracket(const std::vector<double>& x, double q) {
  // x strictly increasing; returns i with x[i] <= q < x[i+1] (clamped)
  std::size_t lo = 0, hi = x.size() - 1;
  if (q <= x.front()) return 0;
  if (q >= x.back()) return x.size() - 2;
  while (hi - lo > 1) {
    const std::size_t mid = (lo + hi) / 2;
    (x[mid] <= q ? lo : hi) = mid;
  }
  return lo;
}
}  // namespace detail

// C1 piecewise-cubic interpolant from values and exact derivatives at the nodes
// (the natural representation of an ODE solution trajectory).
class HermiteSeries {
 public:
  HermiteSeries() = default;
  HermiteSeries(std::vector<double> t, std::vector<double> y, std::vector<double> dy)
      : t_(std::move(t)), y_(std::move(y)), dy_(std::move(dy)) {
    if (t_.size() < 2 || t_.size() != y_.size() || t_.size() != dy_.size())
      throw NumericalError("HermiteSeries: bad node data");
    for (std::size_t i = 1; i < t_.size(); ++i)
      if (!(t_[i] > t_[i - 1])) throw NumericalError("HermiteSeries: grid not increasing");
  }

  double front_t() const { return t_.front(); }
  double back_t() const { return t_.back(); }
  std::size_t size() const { return t_.size(); }
  const std::vector<double>& grid() const { return t_; }
  const std::vector<double>& values() const { return y_; }

  double operator()(double q) const {
    const std::size_t i = detail::bracket(t_, q);
    const double h = t_[i + 1] - t_[i], s = (q - t_[i]) / h;
    const double s2 = s * s, s3 = s2 * s;
    return (2 * s3 - 3 * s2 + 1) * y_[i] + (s3 - 2 * s2 + s) * h * dy_[i] +
           (-2 * s3 + 3 * s2) * y_[i + 1] + (s3 - s2) * h * dy_[i + 1];
  }

  double deriv(double q) const {
    const std::size_t i = detail::bracket(t_, q);
    const double h = t_[i + 1] - t_[i], s = (q - t_[i]) / h;
    const double s2 = s * s;
    return ((6 * s2 - 6 * s) * y_[i] + (3 * s2 - 4 * s + 1) * h * dy_[i] +
            (-6 * s2 + 6 * s) * y_[i + 1] + (3 * s2 - 2 * s) * h * dy_[i + 1]) /
           h;
  }

 private:
  std::vector<double> t_, y_, dy_;
};

// Natural cubic spline (zero second derivative at the ends).
class CubicSpline {
 public:
  CubicSpline() = default;
  CubicSpline(std::vector<double> x, std::vector<double> y) : x_(std::move(x)), y_(std::move(y)) {
    const std::size_t n = x_.size();
    if (n < 3 || y_.size() != n) throw NumericalError("CubicSpline: need >= 3 nodes");
    for (std::size_t i = 1; i < n; ++i)
      if (!(x_[i] > x_[i - 1])) throw NumericalError("CubicSpline: grid not increasing");
    // tridiagonal solve for second derivatives (Thomas algorithm)
    m_.assign(n, 0.0);
    std::vector<double> diag(n, 1.0), rhs(n, 0.0), sub(n, 0.0), sup(n, 0.0);
    for (std::size_t i = 1; i + 1 < n; ++i) {
      const double hl = x_[i] - x_[i - 1], hr = x_[i + 1] - x_[i];
      sub[i] = hl / 6.0;
      diag[i] = (hl + hr) / 3.0;
      sup[i] = hr / 6.0;
      rhs[i] = (y_[i + 1] - y_[i]) / hr - (y_[i] - y_[i - 1]) / hl;
    }
    for (std::size_t i = 1; i < n; ++i) {
      const double w = sub[i] / diag[i - 1];
      diag[i] -= w * sup[i - 1];
      rhs[i] -= w * rhs[i - 1];
    }
    m_[n - 1] = rhs[n - 1] / diag[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) m_[i] = (rhs[i] - sup[i] * m_[i + 1]) / diag[i];
  }

  double operator()(double q) const {
    const std::size_t i = detail::bracket(x_, q);
    const double h = x_[i + 1] - x_[i];
    const double a = (x_[i + 1] - q) / h, b = (q - x_[i]) / h;
    return a * y_[i] + b * y_[i + 1] +
           ((a * a * a - a) * m_[i] + (b * b * b - b) * m_[i + 1]) * h * h / 6.0;
  }

  double deriv(double q) const {
    const std::size_t i = detail::bracket(x_, q);
    const double h = x_[i + 1] - x_[i];
    const double a = (x_[i + 1] - q) / h, b = (q - x_[i]) / h;
    return (y_[i + 1] - y_[i]) / h +
           ((3 * b * b - 1) * m_[i + 1] - (3 * a * a - 1) * m_[i]) * h / 6.0;
  }

 private:
  std::vector<double> x_, y_, m_;
};

}  // namespace shockstab
