#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "toposphere/cutlocus.hpp"
#include "toposphere/errors.hpp"
#include "toposphere/geodesics.hpp"
#include "toposphere/optimize.hpp"
#include "toposphere/parallel.hpp"
#include "toposphere/profile.hpp"

namespace toposphere {

/// (d(p, q), d(o, q)).
struct ReferencePoint {
  double x = 0.0;
  double y = 0.0;
};

struct CurveSample {
  double t = 0.0;
  double x = 0.0;
  double y = 0.0;
};

/// t -> (x(t), y(t)) sampled, optionally backed by exact evaluators.
class ReferenceCurve {
 public:
  std::vector<CurveSample> samples;
  std::optional<double> dy_start;  // right derivative of y at the first sample
  std::optional<double> dy_end;    // left derivative of y at the last sample
  std::function<double(double)> exact_y;
  std::function<double(double)> exact_dy;  // right derivative

  double t_begin() const { return samples.front().t; }
  double t_end() const { return samples.back().t; }

  double y_at(double t) const {
    if (exact_y) return exact_y(t);
    return interpolate(t, [](const CurveSample& s) { return s.y; });
  }

  double x_at(double t) const {
    return interpolate(t, [](const CurveSample& s) { return s.x; });
  }

  double right_derivative(double t) const {
    if (exact_dy) return exact_dy(t);
    if (dy_start && std::abs(t - t_begin()) < 1e-14) return *dy_start;
    const std::size_t i = segment(t);
    return (samples[i + 1].y - samples[i].y) / (samples[i + 1].t - samples[i].t);
  }

  double left_derivative_end() const {
    if (dy_end) return *dy_end;
    const std::size_t n = samples.size();
    return (samples[n - 1].y - samples[n - 2].y) / (samples[n - 1].t - samples[n - 2].t);
  }

 private:
  std::size_t segment(double t) const {
    auto it = std::upper_bound(samples.begin(), samples.end(), t,
                               [](double v, const CurveSample& s) { return v < s.t; });
    std::size_t i = static_cast<std::size_t>(it - samples.begin());
    return std::clamp<std::size_t>(i, 1, samples.size() - 1) - 1;
  }

  template <class Get>
  double interpolate(double t, Get get) const {
    if (samples.size() == 1) return get(samples[0]);
    const std::size_t i = segment(t);
    const double w = (t - samples[i].t) / (samples[i + 1].t - samples[i].t);
    return (1.0 - w) * get(samples[i]) + w * get(samples[i + 1]);
  }
};

enum class Regime { Interior, CutPoint, Boundary };

inline const char* regime_name(Regime r) {
  switch (r) {
    case Regime::Interior:
      return "interior";
    case Regime::CutPoint:
      return "cut";
    case Regime::Boundary:
      return "boundary";
  }
  return "?";
}

struct SlopeSample {
  ReferencePoint point;
  double value = 0.0;
  Regime regime = Regime::Interior;
};

/// Preimage of a reference point in the closed upper half of the model.
struct Inversion {
  SurfacePoint q;
  double phi = 0.0;  // launch angle of the lowermost minimizing geodesic
  bool cut = false;
  bool boundary = false;
  std::optional<std::size_t> branch;
};

class ReferenceSpace {
 public:
  ReferenceSpace(ModelSurface surface, double r0, const CutOptions& opt = {})
      : surface_(std::move(surface)), r0_(r0) {
    require_open_radius(surface_, r0);
    if (surface_.family() != Family::ConstantCurvature)
      cut_ = std::make_shared<CutStructure>(cut_structure(surface_, r0_, opt));
    if (cut_) tabulate_trunk();
  }

  const ModelSurface& surface() const { return surface_; }
  double r0() const { return r0_; }

  const CutStructure& cut() const {
    if (!cut_) cut_ = std::make_shared<CutStructure>(cut_structure(surface_, r0_));
    return *cut_;
  }

  /// d(p, (y, pi)): the right-hand edge of the reference space at height y.
  double upper_boundary(double y) const { return upper_boundary_near(y, kInf); }

  /// As upper_boundary, but the trunk is only resolved exactly when x is near it.
  double upper_boundary_near(double y, double x) const {
    double xb = r0_ + y;
    if (surface_.compact()) xb = std::min(xb, 2.0 * surface_.ell() - r0_ - y);
    for (const auto& tab : trunk_tables_) {
      if (y < tab.front().first || y > tab.back().first) continue;
      auto it = std::lower_bound(tab.begin(), tab.end(), std::make_pair(y, -kInf));
      const std::size_t i = std::clamp<std::size_t>(static_cast<std::size_t>(it - tab.begin()), 1, tab.size() - 1);
      const double w = (y - tab[i - 1].first) / (tab[i].first - tab[i - 1].first);
      const double guess = (1.0 - w) * tab[i - 1].second + w * tab[i].second;
      if (std::isfinite(x) && std::abs(x - guess) > 1e-3) {
        xb = std::min(xb, guess);
        continue;
      }
      const CutArc& piece = cut_->trunk[&tab - trunk_tables_.data()];
      const double t = bisect_root([&](double s) { return piece.at(s).r - y; }, tab[i - 1].second,
                                   tab[i].second, 1e-13);
      xb = std::min(xb, t);
    }
    return xb;
  }

  bool contains(ReferencePoint pt, double tol = 1e-12) const {
    const double x = pt.x, y = pt.y;
    if (x < -tol || y < -tol) return false;
    if (x + y < r0_ - tol) return false;
    if (std::abs(y - x) > r0_ + tol) return false;
    if (surface_.compact() && y > surface_.ell() + tol) return false;
    return x <= upper_boundary_near(y, x) + tol;
  }

  Inversion invert(ReferencePoint pt) const {
    if (!contains(pt, 1e-9))
      throw OutsideReferenceSpace("(" + std::to_string(pt.x) + ", " + std::to_string(pt.y) +
                                  ") is outside the reference space");
    const double x = std::max(pt.x, 0.0), y = std::max(pt.y, 0.0);
    const double tb = 1e-12;
    Inversion inv;
    inv.boundary = true;
    if (x < tb) {
      inv.q = {r0_, 0.0};
      return inv;
    }
    if (y < tb) {
      inv.q = {0.0, 0.0};
      return inv;
    }
    if (std::abs(x + y - r0_) < tb) {
      inv.q = {y, 0.0};
      return inv;
    }
    if (std::abs(y - x - r0_) < tb) {
      inv.q = {y, 0.0};
      inv.phi = kPi;
      return inv;
    }
    if (std::abs(x - y - r0_) < tb) {
      inv.q = {y, kPi};
      return inv;
    }
    if (surface_.compact() && std::abs(x + y - (2.0 * surface_.ell() - r0_)) < tb) {
      inv.q = {y, kPi};
      inv.phi = kPi;
      return inv;
    }
    inv.boundary = false;
    if (surface_.family() == Family::ConstantCurvature) return invert_constant(x, y);
    return invert_fan(x, y);
  }

  /// d(p, q) for q in the closed upper half, by bisection along the parallel through q.
  double distance_to(SurfacePoint q) const {
    const double r = q.r;
    const double th = std::clamp(std::abs(q.theta), 0.0, kPi);
    if (r < 1e-15) return r0_;
    if (th < 1e-15) return std::abs(r0_ - r);
    if (surface_.family() == Family::ConstantCurvature) {
      const double k = std::sqrt(surface_.kappa());
      const double c = std::cos(k * r0_) * std::cos(k * r) + std::sin(k * r0_) * std::sin(k * r) * std::cos(th);
      return std::acos(std::clamp(c, -1.0, 1.0)) / k;
    }
    double lo = std::abs(r0_ - r), hi = upper_boundary(r);
    if (th > kPi - 1e-15) return hi;
    for (int i = 0; i < 200 && hi - lo > 1e-13; ++i) {
      const double mid = 0.5 * (lo + hi);
      const Inversion inv = invert({mid, r});
      (inv.q.theta < th ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  }

  /// Slope with its regime; boundary points report NaN instead of throwing.
  SlopeSample sample_slope(ReferencePoint pt) const {
    const Inversion inv = invert(pt);
    SlopeSample s;
    s.point = pt;
    if (inv.boundary || is_boundary(inv.q)) {
      s.regime = Regime::Boundary;
      s.value = NAN;
      return s;
    }
    if (surface_.family() == Family::ConstantCurvature) {
      s.value = constant_curvature_slope(pt.x, pt.y);
      return s;
    }
    if (inv.cut) {
      s.regime = Regime::CutPoint;
      s.value = arc_height_right_derivative(surface_, cut().branches[*inv.branch], pt.x);
      return s;
    }
    s.value = Ray(surface_, r0_, inv.phi).at(pt.x).rdot;
    return s;
  }

  double slope(ReferencePoint pt) const {
    const SlopeSample s = sample_slope(pt);
    if (s.regime == Regime::Boundary)
      throw UndefinedOnBoundary("slope field undefined at (" + std::to_string(pt.x) + ", " + std::to_string(pt.y) +
                                ")");
    return s.value;
  }

  /// Slope extended to the boundary by the radial speed of the geodesic found by inversion.
  double slope_limit(ReferencePoint pt) const {
    const SlopeSample s = sample_slope(pt);
    if (s.regime != Regime::Boundary) return s.value;
    const Inversion inv = invert(pt);
    if (inv.cut && inv.branch) return arc_height_right_derivative(surface_, cut().branches[*inv.branch], pt.x);
    if (pt.x <= 0.0) return -std::cos(inv.phi);
    return Ray(surface_, r0_, inv.phi).at(pt.x).rdot;
  }

  /// Cut time of the geodesic launched at phi.
  double cut_time(double phi) const {
    if (surface_.family() == Family::ConstantCurvature) return surface_.ell();
    const CutStructure& cs = cut();
    if (auto home = cs.home_branch(phi)) {
      if (surface_.family() == Family::LambdaSphere) return cs.tau(phi);
      const CutArc& h = cs.branches[*home];
      auto in_gap = [&](double t) {
        const CutArc& a = chain_end(*home, t);
        if (t < a.t_start) return false;
        const CutPoint c = a.at(std::min(t, a.t_end));
        return phi >= c.phi_lo && phi <= c.phi_hi;
      };
      double lo = h.t_start, hi = chain_end(*home, kInf).t_end;
      if (!in_gap(hi)) return hi;
      for (int i = 0; i < 60 && hi - lo > 1e-13; ++i) {
        const double mid = 0.5 * (lo + hi);
        (in_gap(mid) ? hi : lo) = mid;
      }
      return hi;
    }
    return detail::trunk_hit_time(Ray(surface_, r0_, phi), surface_.compact() ? surface_.ell() : 10.0);
  }

  /// Height along the geodesic at phi up to its cut time, then along the cut arcs.
  double varsigma_height(double phi, double t) const {
    const double tau = cut_time(phi);
    if (t <= tau || surface_.family() == Family::ConstantCurvature) return Ray(surface_, r0_, phi).at(t).r;
    const auto home = cut().home_branch(phi);
    if (!home) throw DomainError("curve ended on the trunk before t=" + std::to_string(t));
    const CutArc& a = chain_end(*home, t);
    if (t > a.t_end + 1e-12) throw DomainError("curve ended on the trunk before t=" + std::to_string(t));
    return a.at(t).r;
  }

  double varsigma_end(double phi) const {
    if (surface_.family() == Family::ConstantCurvature) return surface_.ell();
    const auto home = cut().home_branch(phi);
    if (!home) return cut_time(phi);
    return chain_end(*home, kInf).t_end;
  }

  ReferenceCurve varsigma(double phi, std::size_t n = 401) const {
    if (!(phi > 0.0 && phi < kPi)) throw DomainError("varsigma needs phi in (0, pi)");
    const double t_end = varsigma_end(phi);
    const double tau = cut_time(phi);
    auto self = std::make_shared<ReferenceSpace>(*this);
    ReferenceCurve c;
    c.exact_y = [self, phi](double t) { return self->varsigma_height(phi, t); };
    c.exact_dy = [self, phi, tau](double t) {
      if (t < tau || self->surface_.family() == Family::ConstantCurvature)
        return Ray(self->surface_, self->r0_, phi).at(t).rdot;
      const auto home = self->cut().home_branch(phi);
      const CutArc& a = self->chain_end(*home, t);
      return arc_height_right_derivative(self->surface_, a, t);
    };
    for (std::size_t i = 0; i < n; ++i) {
      const double t = t_end * static_cast<double>(i) / static_cast<double>(n - 1);
      c.samples.push_back({t, t, c.exact_y(t)});
    }
    c.dy_start = -std::cos(phi);
    return c;
  }

  /// Euler solution of f' = slope(t, f) + perturbation(t); boundary points use
  /// the limiting slope. Runs at h and h/2 are Richardson-combined until either
  /// lands on a branch image, after which the h/2 run is kept; extrapolated
  /// values past a branch image land on it like Euler steps do.
  ReferenceCurve solve_slope_ode(ReferencePoint start, const std::function<double(double)>& perturbation,
                                 double t_end, double h = 1e-3) const {
    if (!contains(start, 1e-9)) throw OutsideReferenceSpace("start point outside the reference space");
    if (!(t_end > start.x)) throw DomainError("t_end must exceed the start abscissa");
    const std::size_t steps = static_cast<std::size_t>(std::ceil((t_end - start.x) / h));
    const double hh = (t_end - start.x) / static_cast<double>(steps);
    double first_landing = kInf;
    auto run = [&](std::size_t m, double step) {
      std::vector<double> f(m + 1);
      f[0] = start.y;
      for (std::size_t k = 0; k < m; ++k) {
        const double t = start.x + step * static_cast<double>(k);
        const double free = f[k] + step * (slope_limit({t, f[k]}) + perturbation(t));
        const double tn = start.x + step * static_cast<double>(k + 1);
        f[k + 1] = land_on_cut(t, f[k], tn, free);
        if (f[k + 1] != free) first_landing = std::min(first_landing, t);
        if (!contains({tn, f[k + 1]}, 1e-7)) throw ExitedReferenceSpace(tn, f[k + 1]);
      }
      return f;
    };
    const std::vector<double> coarse = run(steps, hh);
    const std::vector<double> fine = run(2 * steps, 0.5 * hh);
    ReferenceCurve c;
    for (std::size_t k = 0; k <= steps; ++k) {
      const double t = start.x + hh * static_cast<double>(k);
      const double y = t < first_landing ? land_on_cut(t, fine[2 * k], t, 2.0 * fine[2 * k] - coarse[k]) : fine[2 * k];
      c.samples.push_back({t, t, y});
    }
    return c;
  }

 private:
  // A step crossing a branch image from below stops on it; points of the
  // image take the arc derivative, so the arc is the continuation.
  double land_on_cut(double t, double y, double tn, double yn) const {
    if (!cut_) return yn;
    for (const auto& arc : cut_->branches) {
      if (arc.degenerate() || !arc.contains(t) || !arc.contains(tn)) continue;
      const double h0 = arc.at(t).r, h1 = arc.at(tn).r;
      if (y <= h0 + 1e-9 && yn > h1 + 1e-9) return h1;
    }
    return yn;
  }

  // (r, t) along each trunk piece, sorted by r; pieces have monotone height.
  void tabulate_trunk() {
    for (const auto& piece : cut_->trunk) {
      std::vector<std::pair<double, double>> tab;
      if (!piece.degenerate()) {
        for (int i = 0; i <= 256; ++i) {
          const double t = piece.t_start + (piece.t_end - piece.t_start) * i / 256.0;
          tab.emplace_back(piece.at(t).r, t);
        }
        std::sort(tab.begin(), tab.end());
      } else {
        tab.emplace_back(kInf, kInf);
      }
      trunk_tables_.push_back(std::move(tab));
    }
  }

  bool is_boundary(SurfacePoint q) const {
    return q.r < 1e-12 || q.theta < 1e-9 || q.theta > kPi - 1e-9 ||
           (surface_.compact() && q.r > surface_.ell() - 1e-12);
  }

  double constant_curvature_slope(double x, double y) const {
    const double k = std::sqrt(surface_.kappa());
    return (std::cos(k * r0_) - std::cos(k * y) * std::cos(k * x)) / (std::sin(k * x) * std::sin(k * y));
  }

  Inversion invert_constant(double x, double y) const {
    const double k = std::sqrt(surface_.kappa());
    const double X = k * x, Y = k * y, R = k * r0_;
    Inversion inv;
    const double ct = (std::cos(X) - std::cos(R) * std::cos(Y)) / (std::sin(R) * std::sin(Y));
    const double cp = (std::cos(Y) - std::cos(R) * std::cos(X)) / (std::sin(R) * std::sin(X));
    inv.q = {y, std::acos(std::clamp(ct, -1.0, 1.0))};
    inv.phi = std::acos(std::clamp(cp, -1.0, 1.0));
    inv.boundary = is_boundary(inv.q);
    return inv;
  }

  // Last arc of the merge chain from branch i that is active at time t.
  const CutArc& chain_end(std::size_t i, double t) const {
    const CutStructure& cs = cut();
    while (t > cs.branches[i].t_end && cs.branches[i].next) i = *cs.branches[i].next;
    return cs.branches[i];
  }

  std::size_t chain_index(std::size_t i, double t) const {
    const CutStructure& cs = cut();
    while (t > cs.branches[i].t_end && cs.branches[i].next) i = *cs.branches[i].next;
    return i;
  }

  struct Height {
    double value;
    bool cut;
    std::optional<std::size_t> branch;
  };

  // Height at abscissa x of the curve varsigma_phi; curves that already
  // ended on the opposite meridian report +-infinity by the side they ended on.
  Height height(double phi, double x, std::vector<std::optional<CutPoint>>& cache) const {
    const CutStructure& cs = cut();
    if (auto home = cs.home_branch(phi)) {
      const std::size_t k = chain_index(*home, x);
      const CutArc& a = cs.branches[k];
      if (x >= a.t_start) {
        if (x > a.t_end + 1e-12) {
          const double d = arc_height_right_derivative(surface_, a, std::max(a.t_start, a.t_end - 1e-7));
          return {d > 0 ? -kInf : kInf, false, std::nullopt};
        }
        if (!cache[k]) cache[k] = a.at(x);
        const CutPoint& c = *cache[k];
        if (phi >= c.phi_lo && phi <= c.phi_hi) return {c.r, true, k};
      }
    }
    const Ray ray(surface_, r0_, phi);
    const GeodesicState st = ray.at(x);
    if (st.theta > kPi) {
      const double tc = bisect_root([&](double t) { return ray.at(t).theta - kPi; }, 0.0, x, 1e-14);
      return {ray.at(tc).rdot > 0 ? -kInf : kInf, false, std::nullopt};
    }
    return {st.r, false, std::nullopt};
  }

  Inversion invert_fan(double x, double y) const {
    std::vector<std::optional<CutPoint>> cache(cut().branches.size());
    double lo = 0.0, hi = kPi;
    std::optional<std::size_t> cut_hit;
    for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      const Height h = height(mid, x, cache);
      if (h.cut && std::abs(h.value - y) <= 1e-9) cut_hit = h.branch;
      (h.value < y ? lo : hi) = mid;
    }
    Inversion inv;
    const double phi_star = 0.5 * (lo + hi);
    if (cut_hit) {
      const CutPoint& c = *cache[*cut_hit];
      if (phi_star >= c.phi_lo - 1e-9 && phi_star <= c.phi_hi + 1e-9) {
        inv.q = {c.r, c.theta};
        inv.phi = c.phi_lo;
        inv.cut = true;
        inv.branch = cut_hit;
        inv.boundary = is_boundary(inv.q);
        return inv;
      }
    }
    inv.phi = 0.5 * (lo + hi);
    const GeodesicState st = Ray(surface_, r0_, inv.phi).at(x);
    inv.q = {st.r, std::min(st.theta, kPi)};
    inv.boundary = is_boundary(inv.q);
    return inv;
  }

  ModelSurface surface_;
  double r0_;
  mutable std::shared_ptr<CutStructure> cut_;
  std::vector<std::vector<std::pair<double, double>>> trunk_tables_;
};

inline bool membership(const ModelSurface& surface, double r0, ReferencePoint pt) {
  return ReferenceSpace(surface, r0).contains(pt);
}

inline SurfacePoint invert(const ModelSurface& surface, double r0, ReferencePoint pt) {
  return ReferenceSpace(surface, r0).invert(pt).q;
}

inline SlopeSample slope(const ModelSurface& surface, double r0, ReferencePoint pt) {
  const ReferenceSpace space(surface, r0);
  const SlopeSample s = space.sample_slope(pt);
  if (s.regime == Regime::Boundary) throw UndefinedOnBoundary("slope field undefined on the boundary");
  return s;
}

inline ReferenceCurve varsigma(const ModelSurface& surface, double r0, double phi) {
  return ReferenceSpace(surface, r0).varsigma(phi);
}

inline ReferenceCurve solve_slope_ode(const ModelSurface& surface, double r0, ReferencePoint start,
                                      const std::function<double(double)>& perturbation, double t_end) {
  return ReferenceSpace(surface, r0).solve_slope_ode(start, perturbation, t_end);
}

/// Side of the square [0, extent]^2 that frames the reference space.
inline double reference_extent(const ReferenceSpace& space) {
  return space.surface().compact() ? space.surface().ell() : 2.0 * space.r0() + 4.0;
}

/// Slope samples at the centres of an n x n grid over [0, extent]^2; points
/// outside the reference space are skipped. Rows are computed in parallel.
inline std::vector<SlopeSample> slope_grid(const ReferenceSpace& space, std::size_t n) {
  const double extent = reference_extent(space);
  std::vector<std::vector<SlopeSample>> rows(n);
  parallel_for(n, [&](std::size_t j) {
    const double y = extent * (static_cast<double>(j) + 0.5) / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double x = extent * (static_cast<double>(i) + 0.5) / static_cast<double>(n);
      if (!space.contains({x, y})) continue;
      rows[j].push_back(space.sample_slope({x, y}));
    }
  });
  std::vector<SlopeSample> out;
  for (auto& r : rows) out.insert(out.end(), r.begin(), r.end());
  return out;
}

}  // namespace toposphere
