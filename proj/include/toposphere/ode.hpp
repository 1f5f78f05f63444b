#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>

#include "toposphere/errors.hpp"

namespace toposphere {

struct OdeOptions {
  double rtol = 1e-10;
  double atol = 1e-10;
  double h_init = 1e-3;
  double h_max = 0.02;
  std::size_t max_steps = 2000000;
};

/// Dormand-Prince 5(4) with step-size control. The observer sees every
/// accepted step as (t, y, dy/dt) and may stop the integration by
/// returning false. Returns the last accepted time.
template <std::size_t N, class Rhs, class Observer>
double integrate_dopri(Rhs&& rhs, double t0, std::array<double, N> y, double t1,
                       const OdeOptions& opt, Observer&& observe) {
  using State = std::array<double, N>;
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                          a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                          a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                          b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                          e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

  auto axpy = [](const State& base, std::initializer_list<std::pair<double, const State*>> terms,
                 double h) {
    State out = base;
    for (const auto& [w, k] : terms)
      for (std::size_t i = 0; i < N; ++i) out[i] += h * w * (*k)[i];
    return out;
  };

  double t = t0;
  State k1 = rhs(t, y);
  if (!observe(t, y, k1)) return t;
  double h = std::min(opt.h_init, opt.h_max);
  std::size_t steps = 0;
  while (t < t1) {
    if (++steps > opt.max_steps) throw ConvergenceError("ODE step budget exhausted");
    h = std::min({h, opt.h_max, t1 - t});
    const State k2 = rhs(t + c2 * h, axpy(y, {{a21, &k1}}, h));
    const State k3 = rhs(t + c3 * h, axpy(y, {{a31, &k1}, {a32, &k2}}, h));
    const State k4 = rhs(t + c4 * h, axpy(y, {{a41, &k1}, {a42, &k2}, {a43, &k3}}, h));
    const State k5 = rhs(t + c5 * h, axpy(y, {{a51, &k1}, {a52, &k2}, {a53, &k3}, {a54, &k4}}, h));
    const State k6 =
        rhs(t + h, axpy(y, {{a61, &k1}, {a62, &k2}, {a63, &k3}, {a64, &k4}, {a65, &k5}}, h));
    const State y5 = axpy(y, {{b1, &k1}, {b3, &k3}, {b4, &k4}, {b5, &k5}, {b6, &k6}}, h);
    const State k7 = rhs(t + h, y5);

    double err = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      const double e = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
      const double sc = opt.atol + opt.rtol * std::max(std::abs(y[i]), std::abs(y5[i]));
      err = std::max(err, std::abs(e) / sc);
    }
    if (!std::isfinite(err)) {
      h *= 0.25;
      if (h < 1e-16) throw ConvergenceError("ODE step underflow");
      continue;
    }
    if (err <= 1.0) {
      t += h;
      y = y5;
      k1 = k7;
      if (!observe(t, y, k1)) return t;
    }
    const double fac = err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
    h *= fac;
    if (h < 1e-16) throw ConvergenceError("ODE step underflow");
  }
  return t;
}

/// Cubic Hermite interpolation on [t0, t1] from values and slopes.
inline double hermite(double t0, double t1, double v0, double v1, double d0, double d1, double t) {
  const double h = t1 - t0;
  if (h <= 0.0) return v0;
  const double s = (t - t0) / h;
  const double s2 = s * s, s3 = s2 * s;
  return (2 * s3 - 3 * s2 + 1) * v0 + (s3 - 2 * s2 + s) * h * d0 + (-2 * s3 + 3 * s2) * v1 +
         (s3 - s2) * h * d1;
}

}  // namespace toposphere
