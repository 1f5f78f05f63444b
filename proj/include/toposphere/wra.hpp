#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "toposphere/errors.hpp"
#include "toposphere/geodesics.hpp"
#include "toposphere/optimize.hpp"
#include "toposphere/parallel.hpp"
#include "toposphere/profile.hpp"

namespace toposphere {

/// r -> y'(r)/y(r) for a radial distance function.
using RadialHessian = std::function<double(double)>;

inline RadialHessian hessian_of(const ModelSurface& s) {
  return [s](double r) { return s.hessian(r); };
}

inline RadialHessian constant_curvature_hessian(double kappa) {
  const double k = std::sqrt(kappa);
  return [k](double r) { return k / std::tan(k * r); };
}

/// RP^n with curvature 1 has the radial Hessian of the unit sphere on (0, pi/2).
inline RadialHessian projective_hessian() {
  return [](double r) { return 1.0 / std::tan(r); };
}

struct WraVerdict {
  bool holds = false;
  double witness_r = 0.0;
  double margin = 0.0;  // min of h_model - h_target
};

/// h_target <= h_model on (r_lo, r_hi): 4096-point grid, then golden-section
/// refinement of the smallest margin.
inline WraVerdict check_wra(const ModelSurface& model, const RadialHessian& target, double r_lo, double r_hi,
                            double tol = 1e-9) {
  if (!(r_hi > r_lo) || r_lo < 0.0 || (model.compact() && r_hi > model.ell() + 1e-12))
    throw DomainError("r range outside the model");
  const double a = r_lo + 1e-6, b = r_hi - 1e-9;
  auto margin = [&](double r) { return model.hessian(r) - target(r); };
  const Extremum m = bracket_and_minimize(margin, a, b, 4096, 1e-12);
  WraVerdict v;
  v.margin = m.value;
  v.witness_r = m.x;
  v.holds = m.value >= -tol;
  return v;
}

/// Table rows cover 1 <= sqrt(kappa) <= 2.
inline void require_sqrt_kappa(double sqrt_kappa) {
  if (!(sqrt_kappa >= 1.0 && sqrt_kappa <= 2.0)) throw DomainError("sqrt(kappa) must lie in [1, 2]");
}

/// Max over (pi/2, pi/sqrt(kappa)) of (cot r tan(sqrt(kappa) r)/sqrt(kappa) - 1)/sin^2 r.
inline double lambda_hat(double sqrt_kappa) {
  require_sqrt_kappa(sqrt_kappa);
  if (sqrt_kappa == 1.0) return 0.0;
  if (sqrt_kappa == 2.0) return -1.0;
  const double k = sqrt_kappa;
  auto f = [k](double r) {
    const double s = std::sin(r);
    return (std::tan(k * r) / (std::tan(r) * k) - 1.0) / (s * s);
  };
  return bracket_and_maximize(f, kPi / 2.0 + 1e-9, kPi / k - 1e-9, 2048, 1e-10).value;
}

/// Sup over (pi - pi/sqrt(kappa), pi/2) of
/// ((arccos(cos(k r0)/cos(k (r0 - pi)))/(pi k))^2 - 1)/sin^2 r0.
inline double mu_hat(double sqrt_kappa) {
  require_sqrt_kappa(sqrt_kappa);
  if (sqrt_kappa == 1.0) return 0.0;
  if (sqrt_kappa == 2.0) return -1.0;
  const double k = sqrt_kappa;
  auto f = [k](double r0) {
    const double c = std::clamp(std::cos(k * r0) / std::cos(k * (r0 - kPi)), -1.0, 1.0);
    const double u = std::acos(c) / (kPi * k);
    const double s = std::sin(r0);
    return (u * u - 1.0) / (s * s);
  };
  return bracket_and_maximize(f, kPi - kPi / k + 1e-9, kPi / 2.0 - 1e-9, 2048, 1e-10).value;
}

struct KappaLambdaRow {
  double sqrt_kappa = 1.0;
  double mu_hat = 0.0;
  double lambda_hat = 0.0;
  double bound_4k = 0.0;  // 4/kappa - 4/sqrt(kappa)
};

inline KappaLambdaRow table_row(double sqrt_kappa) {
  KappaLambdaRow row;
  row.sqrt_kappa = sqrt_kappa;
  row.mu_hat = mu_hat(sqrt_kappa);
  row.lambda_hat = lambda_hat(sqrt_kappa);
  row.bound_4k = 4.0 / (sqrt_kappa * sqrt_kappa) - 4.0 / sqrt_kappa;
  return row;
}

/// Rows for sqrt(kappa) = 1.0, 1.1, ..., 2.0.
inline std::vector<KappaLambdaRow> table1() {
  std::vector<KappaLambdaRow> rows(11);
  parallel_for(11, [&](std::size_t i) { rows[i] = table_row(1.0 + 0.1 * static_cast<double>(i)); });
  return rows;
}

/// Printed reference values (mu_hat, lambda_hat, bound) to five places.
inline const std::array<std::array<double, 4>, 11>& table1_reference() {
  static const std::array<std::array<double, 4>, 11> ref{{
      {1.0, 0.0, 0.0, 0.0},
      {1.1, -0.74446, -0.50881, -0.33058},
      {1.2, -0.88571, -0.74151, -0.55556},
      {1.3, -0.94333, -0.85889, -0.71006},
      {1.4, -0.97071, -0.92212, -0.81633},
      {1.5, -0.98480, -0.95764, -0.88889},
      {1.6, -0.99238, -0.97803, -0.93750},
      {1.7, -0.99651, -0.98968, -0.96886},
      {1.8, -0.99869, -0.99607, -0.98765},
      {1.9, -0.99972, -0.99914, -0.99723},
      {2.0, -1.0, -1.0, -1.0},
  }};
  return ref;
}

/// Round half to even at five decimals.
inline double round5(double v) { return std::nearbyint(v * 1e5) / 1e5; }

/// |round5(computed) - printed| within one unit of the fifth decimal.
inline bool matches_printed(double computed, double printed) {
  return std::abs(round5(computed) - printed) <= 1e-5 + 1e-12;
}

struct CriticalRadiiReport {
  std::array<bool, 4> conditions{};
  std::vector<double> shot_r0;
  std::vector<double> shot_theta;  // unwrapped theta where each shot first meets r = R*
  bool ok() const { return std::all_of(conditions.begin(), conditions.end(), [](bool b) { return b; }); }
};

namespace detail {

// First time the perpendicular geodesic from (r0, 0) reaches r = target.
inline std::optional<double> first_meeting(const Ray& ray, double target, double t_max) {
  const double dt = 0.01;
  double t_prev = 0.0, r_prev = ray.at(0.0).r;
  for (double t = dt; t <= t_max; t += dt) {
    const double r = ray.at(t).r;
    if ((r - target) * (r_prev - target) <= 0.0 && r != r_prev)
      return bisect_root([&](double s) { return ray.at(s).r - target; }, t_prev, t, 1e-12);
    t_prev = t;
    r_prev = r;
  }
  return std::nullopt;
}

}  // namespace detail

/// Checks the four conditions for (R, R*) on a grid of `grid` points.
inline CriticalRadiiReport verify_critical_radii(const ModelSurface& s, double R, double R_star,
                                                 std::size_t shots = 20, std::size_t grid = 4096) {
  if (!s.compact()) throw NotNoncompact("critical radii need a compact model");
  CriticalRadiiReport rep;
  const double ell = s.ell();
  const double yR = s.y(R);
  rep.conditions[0] = 0.0 < R && R < R_star && R_star < ell && std::abs(yR - s.y(R_star)) <= 1e-9;
  bool above = true, inc = true, dec = true;
  for (std::size_t i = 1; i < grid; ++i) {
    const double u = static_cast<double>(i) / static_cast<double>(grid);
    const double r_mid = R + (R_star - R) * u;
    if (!(s.y(r_mid) > yR)) above = false;
    const double a = R * (i - 1) / grid, b = R * i / grid;
    if (!(s.y(b) > s.y(a))) inc = false;
    const double c = R_star + (ell - R_star) * (i - 1) / grid, d = R_star + (ell - R_star) * i / grid;
    if (!(s.y(d) < s.y(c))) dec = false;
  }
  rep.conditions[1] = above;
  rep.conditions[2] = inc && dec;
  bool shots_ok = true;
  for (std::size_t i = 0; i < shots; ++i) {
    const double r0 = R * (static_cast<double>(i) + 0.5) / static_cast<double>(shots);
    const Ray ray(s, r0, kPi / 2.0);
    const auto t0 = detail::first_meeting(ray, R_star, 4.0 * ell);
    const double th = t0 ? ray.at(*t0).theta : NAN;
    rep.shot_r0.push_back(r0);
    rep.shot_theta.push_back(th);
    if (!(t0 && th > kPi / 2.0)) shots_ok = false;
  }
  rep.conditions[3] = shots_ok;
  return rep;
}

struct CriticalRadii {
  double R = 0.0;
  double R_star = 0.0;
  CriticalRadiiReport report;
};

/// Shrinks R from the first local maximum of y by factors of 0.98 until all
/// four conditions hold.
inline CriticalRadii critical_radii(const ModelSurface& s, std::size_t shots = 20) {
  if (!s.compact()) throw NotNoncompact("critical radii need a compact model");
  const double ell = s.ell();
  const std::size_t n = 4096;
  double r_peak = ell / 2.0;
  for (std::size_t i = 1; i < n; ++i) {
    const double r = ell * static_cast<double>(i) / n;
    if (s.y(r + ell / n) <= s.y(r)) {
      r_peak = golden_section_max([&](double u) { return s.y(u); }, r - ell / n, r + ell / n, 1e-12).x;
      break;
    }
  }
  std::string last;
  for (double R = 0.98 * r_peak; R >= 1e-3; R *= 0.98) {
    const double yR = s.y(R);
    // First return of y to y(R) beyond the peak.
    std::optional<double> R_star;
    double prev = r_peak;
    for (std::size_t i = 1; i <= n; ++i) {
      const double r = r_peak + (ell - r_peak) * static_cast<double>(i) / n;
      if (s.y(r) <= yR) {
        R_star = bisect_root([&](double u) { return s.y(u) - yR; }, prev, std::min(r, ell - 1e-12), 1e-14);
        break;
      }
      prev = r;
    }
    if (!R_star) continue;
    CriticalRadiiReport rep = verify_critical_radii(s, R, *R_star, shots);
    if (rep.ok()) return {R, *R_star, rep};
    last = "R=" + std::to_string(R) + " conditions " + std::to_string(rep.conditions[0]) +
           std::to_string(rep.conditions[1]) + std::to_string(rep.conditions[2]) + std::to_string(rep.conditions[3]);
  }
  throw NotFound("no critical radii down to R=1e-3; last tried " + last);
}

struct EndsEstimate {
  double liminf = 0.0;
  bool one_end = false;
};

/// inf of y(r)/r over 256 tail points in [r_tail, sample extent].
inline EndsEstimate ends_criterion(const ModelSurface& s, double r_tail) {
  if (s.compact()) throw NotNoncompact("ends criterion needs a noncompact model");
  const double r_end = s.sample_extent();
  if (!(r_tail > 0.0 && r_tail < r_end)) throw DomainError("tail start outside the sampled range");
  double m = kInf;
  for (int i = 0; i <= 256; ++i) {
    const double r = r_tail + (r_end - r_tail) * i / 256.0;
    m = std::min(m, s.y(r) / r);
  }
  return {m, m < 2.0 / kPi};
}

}  // namespace toposphere
