#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <vector>

namespace toposphere {

/// Cubic spline through (x_i, v_i). Each end is either clamped to a given
/// slope or natural (zero second derivative).
class CubicSpline {
 public:
  CubicSpline() = default;

  CubicSpline(std::vector<double> x, std::vector<double> v,
              std::optional<double> slope_left, std::optional<double> slope_right)
      : x_(std::move(x)), v_(std::move(v)) {
    const std::size_t n = x_.size();
    if (n < 3 || v_.size() != n) throw std::invalid_argument("spline needs >= 3 matching samples");
    m_.assign(n, 0.0);

    // Tridiagonal system in the second derivatives m_i.
    std::vector<double> a(n, 0.0), b(n, 0.0), c(n, 0.0), d(n, 0.0);
    for (std::size_t i = 1; i + 1 < n; ++i) {
      const double h0 = x_[i] - x_[i - 1];
      const double h1 = x_[i + 1] - x_[i];
      a[i] = h0 / 6.0;
      b[i] = (h0 + h1) / 3.0;
      c[i] = h1 / 6.0;
      d[i] = (v_[i + 1] - v_[i]) / h1 - (v_[i] - v_[i - 1]) / h0;
    }
    const double hl = x_[1] - x_[0];
    if (slope_left) {
      b[0] = hl / 3.0;
      c[0] = hl / 6.0;
      d[0] = (v_[1] - v_[0]) / hl - *slope_left;
    } else {
      b[0] = 1.0;
    }
    const double hr = x_[n - 1] - x_[n - 2];
    if (slope_right) {
      a[n - 1] = hr / 6.0;
      b[n - 1] = hr / 3.0;
      d[n - 1] = *slope_right - (v_[n - 1] - v_[n - 2]) / hr;
    } else {
      b[n - 1] = 1.0;
    }

    // Thomas algorithm.
    for (std::size_t i = 1; i < n; ++i) {
      const double w = a[i] / b[i - 1];
      b[i] -= w * c[i - 1];
      d[i] -= w * d[i - 1];
    }
    m_[n - 1] = d[n - 1] / b[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) m_[i] = (d[i] - c[i] * m_[i + 1]) / b[i];
  }

  double front() const { return x_.front(); }
  double back() const { return x_.back(); }
  const std::vector<double>& abscissae() const { return x_; }
  const std::vector<double>& values() const { return v_; }

  double value(double t) const { return eval(t, 0); }
  double derivative(double t) const { return eval(t, 1); }
  double second_derivative(double t) const { return eval(t, 2); }

 private:
  // Outside the sample range the spline is continued linearly.
  double eval(double t, int order) const {
    const std::size_t n = x_.size();
    if (t > x_[n - 1]) {
      const double s = end_slope(n - 2);
      if (order == 0) return v_[n - 1] + s * (t - x_[n - 1]);
      return order == 1 ? s : 0.0;
    }
    if (t < x_[0]) {
      const double s = start_slope();
      if (order == 0) return v_[0] + s * (t - x_[0]);
      return order == 1 ? s : 0.0;
    }
    std::size_t i = static_cast<std::size_t>(std::upper_bound(x_.begin(), x_.end(), t) - x_.begin());
    i = std::clamp<std::size_t>(i, 1, n - 1) - 1;
    const double h = x_[i + 1] - x_[i];
    const double A = (x_[i + 1] - t) / h;
    const double B = (t - x_[i]) / h;
    if (order == 0) {
      return A * v_[i] + B * v_[i + 1] +
             ((A * A * A - A) * m_[i] + (B * B * B - B) * m_[i + 1]) * h * h / 6.0;
    }
    if (order == 1) {
      return (v_[i + 1] - v_[i]) / h - (3.0 * A * A - 1.0) / 6.0 * h * m_[i] +
             (3.0 * B * B - 1.0) / 6.0 * h * m_[i + 1];
    }
    return A * m_[i] + B * m_[i + 1];
  }

  double start_slope() const {
    const double h = x_[1] - x_[0];
    return (v_[1] - v_[0]) / h - h * (2.0 * m_[0] + m_[1]) / 6.0;
  }

  double end_slope(std::size_t i) const {
    const double h = x_[i + 1] - x_[i];
    return (v_[i + 1] - v_[i]) / h + h * (m_[i] + 2.0 * m_[i + 1]) / 6.0;
  }

  std::vector<double> x_;
  std::vector<double> v_;
  std::vector<double> m_;
};

}  // namespace toposphere
