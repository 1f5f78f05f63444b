#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <utility>

namespace toposphere {

struct Extremum {
  double x;
  double value;
};

/// Golden-section search for the maximum of a unimodal f on [a, b].
template <class F>
Extremum golden_section_max(F&& f, double a, double b, double xtol = 1e-10) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c);
  double fd = f(d);
  while (std::abs(b - a) > xtol) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  const double x = 0.5 * (a + b);
  return {x, f(x)};
}

/// Dense grid scan followed by golden-section refinement around the best
/// grid node.
template <class F>
Extremum bracket_and_maximize(F&& f, double a, double b, std::size_t grid = 2048,
                              double xtol = 1e-10) {
  double best_x = a;
  double best_v = -INFINITY;
  std::size_t best_i = 0;
  const double dx = (b - a) / static_cast<double>(grid - 1);
  for (std::size_t i = 0; i < grid; ++i) {
    const double x = a + dx * static_cast<double>(i);
    const double v = f(x);
    if (v > best_v) {
      best_v = v;
      best_x = x;
      best_i = i;
    }
  }
  const double lo = best_i == 0 ? a : best_x - dx;
  const double hi = best_i + 1 == grid ? b : best_x + dx;
  Extremum refined = golden_section_max(f, lo, hi, xtol);
  if (refined.value < best_v) return {best_x, best_v};
  return refined;
}

template <class F>
Extremum bracket_and_minimize(F&& f, double a, double b, std::size_t grid = 2048,
                              double xtol = 1e-10) {
  auto neg = [&](double x) { return -f(x); };
  Extremum e = bracket_and_maximize(neg, a, b, grid, xtol);
  return {e.x, -e.value};
}

/// Bisection for a sign change of f on [a, b]; f(a) and f(b) must differ in sign.
template <class F>
double bisect_root(F&& f, double a, double b, double xtol = 1e-13, int max_iter = 200) {
  double fa = f(a);
  for (int i = 0; i < max_iter && std::abs(b - a) > xtol; ++i) {
    const double m = 0.5 * (a + b);
    const double fm = f(m);
    if (fm == 0.0) return m;
    if ((fm < 0.0) == (fa < 0.0)) {
      a = m;
      fa = fm;
    } else {
      b = m;
    }
  }
  return 0.5 * (a + b);
}

}  // namespace toposphere
