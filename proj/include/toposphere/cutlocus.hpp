#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "toposphere/errors.hpp"
#include "toposphere/geodesics.hpp"
#include "toposphere/optimize.hpp"
#include "toposphere/parallel.hpp"
#include "toposphere/profile.hpp"

namespace toposphere {

/// A point of the cut locus reached at distance t, with the launch angles of
/// the lowermost and uppermost minimizing geodesics and their arrival angles
/// measured from the outward meridian direction.
struct CutPoint {
  double t = 0.0;
  double r = 0.0;
  double theta = 0.0;
  double psi_down = 0.0;
  double psi_up = 0.0;
  double phi_lo = 0.0;
  double phi_hi = 0.0;
};

class CutArc {
 public:
  double t_start = 0.0;
  double t_end = 0.0;
  bool is_trunk = false;
  bool open_ended = false;
  /// Launch angles whose geodesics end on this arc (or on arcs merging into it).
  double phi_min = 0.0;
  double phi_max = kPi;
  /// Branch that continues this one after a merge.
  std::optional<std::size_t> next;
  std::function<CutPoint(double)> eval;

  bool degenerate() const { return t_end - t_start < 1e-14; }

  bool contains(double t, double slack = 1e-12) const {
    return t >= t_start - slack && t <= t_end + slack;
  }

  CutPoint at(double t) const {
    if (!contains(t, 1e-9)) throw DomainError("t=" + std::to_string(t) + " outside cut arc");
    return eval(std::clamp(t, t_start, t_end));
  }

  SurfacePoint point_at(double t) const {
    const CutPoint c = at(t);
    return {c.r, c.theta};
  }
  double psi_up(double t) const { return at(t).psi_up; }
  double psi_down(double t) const { return at(t).psi_down; }

  std::vector<CutPoint> sample(std::size_t n) const {
    std::vector<CutPoint> out;
    if (degenerate() || n < 2) {
      out.push_back(at(t_start));
      return out;
    }
    for (std::size_t i = 0; i < n; ++i)
      out.push_back(at(t_start + (t_end - t_start) * static_cast<double>(i) / static_cast<double>(n - 1)));
    return out;
  }
};

struct CutStructure {
  double r0 = 1.0;
  /// Monotone pieces of the cut locus on the opposite meridian.
  std::vector<CutArc> trunk;
  std::vector<CutArc> branches;
  std::function<double(double)> tau;

  /// Innermost branch whose launch-angle range contains phi.
  std::optional<std::size_t> home_branch(double phi) const {
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < branches.size(); ++i) {
      const auto& b = branches[i];
      if (phi > b.phi_min && phi < b.phi_max) {
        if (!best || b.phi_max - b.phi_min < branches[*best].phi_max - branches[*best].phi_min) best = i;
      }
    }
    return best;
  }
};

struct CutOptions {
  std::size_t rays = 2048;
  double t_max = 20.0;  // truncation horizon on noncompact surfaces
  double dt = 0.002;    // front scan step
};

namespace detail {

inline bool is_unit_sphere(const ModelSurface& s) {
  return s.family() == Family::LambdaSphere && s.lambda() == 0.0;
}

inline double kappa_of(const ModelSurface& s) {
  return s.family() == Family::ConstantCurvature ? s.kappa() : 1.0;
}

// First time the geodesic reaches theta = pi (theta is nondecreasing).
inline double trunk_hit_time(const Ray& ray, double t_guess) {
  double hi = std::max(t_guess, 1.0);
  for (int i = 0; i < 8 && ray.at(hi).theta < kPi; ++i) hi *= 2.0;
  if (ray.at(hi).theta < kPi) return kInf;
  return bisect_root([&](double t) { return ray.at(t).theta - kPi; }, 0.0, hi, 1e-14);
}

inline CutArc antipode_arc(const ModelSurface& s, double r0, std::size_t resolution) {
  CutArc arc;
  const double ell = s.ell();
  arc.t_start = arc.t_end = ell;
  arc.is_trunk = true;
  arc.phi_min = 0.0;
  arc.phi_max = kPi;
  const double eps = kPi / static_cast<double>(std::max<std::size_t>(resolution, 2));
  arc.eval = [ell, r0, eps](double t) {
    return CutPoint{t, ell - r0, kPi, eps, kPi - eps, 0.0, kPi};
  };
  return arc;
}

inline CutArc lambda_branch(double lambda, double r0) {
  const double s0 = std::sin(r0);
  const double q = lambda * s0 * s0;
  CutArc arc;
  arc.t_start = kPi * std::sqrt(1.0 + q);
  arc.t_end = kPi;
  arc.phi_min = 0.0;
  arc.phi_max = kPi;
  arc.eval = [lambda, r0, q](double t) {
    const double c2 = std::clamp(((kPi * kPi) / (t * t) * (1.0 + q) - 1.0) / q, 0.0, 1.0);
    const double phi_lo = std::acos(std::sqrt(c2));
    const ClosedFormGeodesic g(lambda, 1.0, r0, phi_lo);
    const GeodesicState st = g.at(t);
    CutPoint c;
    c.t = t;
    c.r = st.r;
    c.theta = st.theta;
    c.phi_lo = phi_lo;
    c.phi_hi = kPi - phi_lo;
    c.psi_down = phi_lo;
    c.psi_up = kPi - phi_lo;
    return c;
  };
  return arc;
}

// Splits the trunk traced by phi -> (tau(phi), r) into pieces on which tau is monotone.
template <class Hit>
std::vector<CutArc> trunk_pieces(const ModelSurface& s, double r0, double phi_a, double phi_b, Hit&& hit,
                                 std::size_t grid) {
  std::vector<double> phis(grid), taus(grid);
  for (std::size_t i = 0; i < grid; ++i) {
    phis[i] = phi_a + (phi_b - phi_a) * static_cast<double>(i) / static_cast<double>(grid - 1);
    taus[i] = hit(phis[i]);
  }
  std::vector<double> cuts{phi_a};
  for (std::size_t i = 1; i + 1 < grid; ++i) {
    const bool is_max = taus[i] > taus[i - 1] && taus[i] >= taus[i + 1];
    const bool is_min = taus[i] < taus[i - 1] && taus[i] <= taus[i + 1];
    if (!is_max && !is_min) continue;
    auto f = [&](double p) { return is_max ? hit(p) : -hit(p); };
    cuts.push_back(golden_section_max(f, phis[i - 1], phis[i + 1], 1e-12).x);
  }
  cuts.push_back(phi_b);

  std::vector<CutArc> out;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    const double pa = cuts[k], pb = cuts[k + 1];
    const double ta = hit(pa), tb = hit(pb);
    CutArc arc;
    arc.is_trunk = true;
    arc.t_start = std::min(ta, tb);
    arc.t_end = std::max(ta, tb);
    arc.phi_min = pa;
    arc.phi_max = pb;
    const bool rising = tb >= ta;
    arc.eval = [s, r0, pa, pb, ta, tb, rising, hit](double t) {
      double phi;
      if (t <= std::min(ta, tb)) {
        phi = rising ? pa : pb;
      } else if (t >= std::max(ta, tb)) {
        phi = rising ? pb : pa;
      } else {
        phi = bisect_root([&](double p) { return hit(p) - t; }, pa, pb, 1e-15);
      }
      const Ray ray(s, r0, phi);
      const GeodesicState st = ray.at(t);
      const double psi = std::acos(std::clamp(st.rdot, -1.0, 1.0));
      return CutPoint{t, st.r, kPi, psi, psi, phi, phi};
    };
    out.push_back(std::move(arc));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Generic profiles: dense fan of integrated geodesics.

enum class RayEnd { Crossing, Conjugate, Trunk, Open };

struct FanRay {
  double phi = 0.0;
  std::shared_ptr<Ray> ray;
  double t_valid = 0.0;
  double conj = kInf;
  double hit = kInf;
  double kill = kInf;
  double tau = kInf;
  RayEnd end = RayEnd::Open;
};

class GenericCut {
 public:
  GenericCut(const ModelSurface& s, double r0, const CutOptions& opt) : s_(s), r0_(r0), opt_(opt) {}

  CutStructure build() {
    shoot_fan();
    scan_front();
    auto light = std::make_shared<GenericCut>(*this);
    for (auto& f : light->fan_) f.ray.reset();
    light_ = light;
    CutStructure cs;
    cs.r0 = r0_;
    std::vector<double> phis, taus;
    for (const auto& f : fan_) {
      phis.push_back(f.phi);
      taus.push_back(f.tau);
    }
    cs.tau = [phis, taus](double phi) {
      if (phi <= phis.front()) return taus.front();
      if (phi >= phis.back()) return taus.back();
      const std::size_t i = static_cast<std::size_t>(std::upper_bound(phis.begin(), phis.end(), phi) - phis.begin());
      const double w = (phi - phis[i - 1]) / (phis[i] - phis[i - 1]);
      return (1.0 - w) * taus[i - 1] + w * taus[i];
    };

    const std::size_t n = fan_.size();
    std::size_t i = 0;
    while (i < n) {
      std::size_t j = i;
      const bool branch = is_branch(fan_[i].end);
      while (j + 1 < n && is_branch(fan_[j + 1].end) == branch && fan_[j + 1].end != RayEnd::Open &&
             fan_[i].end != RayEnd::Open)
        ++j;
      if (fan_[i].end == RayEnd::Open) {
        ++i;
        continue;
      }
      if (branch) {
        if (j > i + 1) build_run(cs, i, j);
      } else if (j > i) {
        auto hit = [this](double phi) {
          const Ray ray(s_, r0_, phi);
          return trunk_hit_time(ray, s_.compact() ? s_.ell() : opt_.t_max);
        };
        const double pa = fan_[i].phi, pb = fan_[j].phi;
        auto pieces = trunk_pieces(s_, r0_, pa, pb, hit, std::min<std::size_t>(j - i + 1, 128));
        for (auto& p : pieces) cs.trunk.push_back(std::move(p));
      }
      i = j + 1;
    }
    return cs;
  }

 private:
  static bool is_branch(RayEnd e) { return e == RayEnd::Crossing || e == RayEnd::Conjugate; }

  double horizon() const { return s_.compact() ? s_.ell() + 0.1 : opt_.t_max; }

  void shoot_fan() {
    const std::size_t n = opt_.rays;
    fan_.resize(n);
    const double T = horizon();
    parallel_for(n, [&](std::size_t i) {
      FanRay& f = fan_[i];
      f.phi = kPi * (static_cast<double>(i) + 0.5) / static_cast<double>(n);
      f.ray = std::make_shared<Ray>(s_, r0_, f.phi);
      try {
        f.ray->at(T);
        f.t_valid = T;
      } catch (const PoleCrossing&) {
        f.t_valid = f.ray->integrated_until();
      }
      if (auto c = conjugate_time(s_, *f.ray, f.t_valid)) f.conj = *c;
      if (f.ray->at(f.t_valid).theta >= kPi)
        f.hit = bisect_root([&](double t) { return f.ray->at(t).theta - kPi; }, 0.0, f.t_valid, 1e-14);
    });
  }

  void scan_front() {
    const std::size_t n = fan_.size();
    const double T = horizon();
    alive_.assign(n, 1);
    r_.assign(n, 0.0);
    const std::size_t steps = static_cast<std::size_t>(std::ceil(T / opt_.dt));
    double t_prev = 0.0;
    for (std::size_t k = 1; k <= steps; ++k) {
      const double t = std::min(T, static_cast<double>(k) * opt_.dt);
      advance(t_prev, t, 0);
      t_prev = t;
    }
    for (auto& f : fan_) {
      f.tau = std::min({f.kill, f.conj, f.hit});
      if (!std::isfinite(f.tau)) {
        f.end = RayEnd::Open;
        f.tau = f.t_valid;
      } else if (f.tau == f.hit) {
        f.end = RayEnd::Trunk;
      } else if (f.tau == f.conj) {
        f.end = RayEnd::Conjugate;
      } else {
        f.end = RayEnd::Crossing;
      }
    }
  }

  // Marks rays that left the monotone front during (t_prev, t]. Steps with
  // kills are subdivided so simultaneous crossings are separated.
  void advance(double t_prev, double t, int depth) {
    const std::size_t n = fan_.size();
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < n; ++i) {
      if (!alive_[i] || ended(i, t)) continue;
      idx.push_back(i);
    }
    parallel_for(idx.size(), [&](std::size_t m) { r_[idx[m]] = fan_[idx[m]].ray->at(t).r; });
    // The two meridians bound every ray by the triangle inequality; they act
    // as partners for rays whose true partner lies outside the fan.
    std::vector<std::pair<std::size_t, std::size_t>> killed;
    const std::size_t lower_meridian = n, upper_meridian = n + 1;
    double pmax = lower_bound(t);
    std::size_t pidx = lower_meridian;
    for (std::size_t i : idx) {
      if (r_[i] <= pmax) killed.push_back({i, pidx});
      if (r_[i] > pmax) {
        pmax = r_[i];
        pidx = i;
      }
    }
    double smin = upper_bound(t);
    std::size_t sidx = upper_meridian;
    for (auto it = idx.rbegin(); it != idx.rend(); ++it) {
      const std::size_t i = *it;
      if (r_[i] >= smin) killed.push_back({i, sidx});
      if (r_[i] < smin) {
        smin = r_[i];
        sidx = i;
      }
    }
    if (killed.empty()) {
      for (std::size_t i = 0; i < n; ++i)
        if (ended(i, t)) alive_[i] = 0;
      return;
    }
    if (depth < 4) {
      const int sub = 8;
      double a = t_prev;
      for (int j = 1; j <= sub; ++j) {
        const double b = j == sub ? t : t_prev + (t - t_prev) * j / sub;
        advance(a, b, depth + 1);
        a = b;
      }
      return;
    }
    for (const auto& [i, p] : killed) {
      if (!alive_[i]) continue;
      alive_[i] = 0;
      const Ray& ra = *fan_[i].ray;
      auto other = [&](double s) {
        if (p == lower_meridian) return lower_bound(s);
        if (p == upper_meridian) return upper_bound(s);
        return fan_[p].ray->at(s).r;
      };
      auto g = [&](double s) { return ra.at(s).r - other(s); };
      const double g0 = g(t_prev), g1 = g(t);
      fan_[i].kill = (g0 < 0) != (g1 < 0) ? bisect_root(g, t_prev, t, 1e-13) : t;
    }
    for (std::size_t i = 0; i < n; ++i)
      if (ended(i, t)) alive_[i] = 0;
  }

  double lower_bound(double t) const { return std::abs(r0_ - t) + 1e-11; }

  double upper_bound(double t) const {
    double u = r0_ + t;
    if (s_.compact()) u = std::min(u, 2.0 * s_.ell() - r0_ - t);
    return u - 1e-11;
  }

  bool ended(std::size_t i, double t) const {
    return fan_[i].conj <= t || fan_[i].hit <= t || fan_[i].t_valid < t;
  }

  struct Subtree {
    std::size_t arc;
    std::size_t lo_a, lo_b, hi_a, hi_b;  // fan index ranges (inclusive)
  };

  GeodesicState state(double phi, double t) const {
    const Ray ray(s_, r0_, phi);
    return ray.at(t);
  }

  // Solves sigma_lo(t) = sigma_hi(t) in midpoint/half-gap coordinates.
  std::optional<CutPoint> solve_pair(double t, double lo, double hi) const {
    double u = 0.5 * (lo + hi), v = 0.5 * (hi - lo);
    auto G = [&](double uu, double vv) -> std::array<double, 2> {
      const GeodesicState a = state(uu - vv, t), b = state(uu + vv, t);
      return {(b.r - a.r) / (2.0 * vv), (b.theta - a.theta) / (2.0 * vv)};
    };
    for (int it = 0; it < 40; ++it) {
      if (!(v > 0.0) || u - v <= 0.0 || u + v >= kPi) return std::nullopt;
      const auto g = G(u, v);
      const double res = std::hypot(g[0], g[1]);
      const double hu = 1e-7, hv = std::min(1e-7, 0.5 * v);
      const auto gu = G(u + hu, v), gv = G(u, v + hv);
      const double j00 = (gu[0] - g[0]) / hu, j01 = (gv[0] - g[0]) / hv;
      const double j10 = (gu[1] - g[1]) / hu, j11 = (gv[1] - g[1]) / hv;
      const double det = j00 * j11 - j01 * j10;
      if (det == 0.0 || !std::isfinite(det)) return std::nullopt;
      double du = (j11 * g[0] - j01 * g[1]) / det;
      double dv = (-j10 * g[0] + j00 * g[1]) / det;
      double step = 1.0;
      while (step > 1e-4 && (v - step * dv <= 0.0 || u - step * du - (v - step * dv) <= 0.0 ||
                             u - step * du + (v - step * dv) >= kPi))
        step *= 0.5;
      u -= step * du;
      v -= step * dv;
      if (std::abs(step * du) + std::abs(step * dv) < 1e-13 || res < 1e-13) break;
    }
    const GeodesicState a = state(u - v, t), b = state(u + v, t);
    if (std::abs(a.r - b.r) > 1e-8 || std::abs(a.theta - b.theta) > 1e-8) return std::nullopt;
    CutPoint c;
    c.t = t;
    c.r = 0.5 * (a.r + b.r);
    c.theta = 0.5 * (a.theta + b.theta);
    c.phi_lo = u - v;
    c.phi_hi = u + v;
    c.psi_down = std::acos(std::clamp(a.rdot, -1.0, 1.0));
    c.psi_up = std::acos(std::clamp(b.rdot, -1.0, 1.0));
    return c;
  }

  // Launch angle on a monotone fan side whose cut time is t.
  double seed(double t, std::size_t a, std::size_t b) const {
    const double ta = fan_[a].tau, tb = fan_[b].tau;
    const int dir = ta >= tb ? 1 : -1;  // index direction in which tau decreases
    (void)dir;
    std::size_t best = a;
    for (std::size_t i = std::min(a, b); i < std::max(a, b); ++i) {
      const double t0 = fan_[i].tau, t1 = fan_[i + 1].tau;
      if ((t0 - t) * (t1 - t) <= 0.0 && t0 != t1) {
        const double w = (t - t0) / (t1 - t0);
        return (1.0 - w) * fan_[i].phi + w * fan_[i + 1].phi;
      }
      if (std::abs(fan_[i].tau - t) < std::abs(fan_[best].tau - t)) best = i;
    }
    return fan_[best].phi;
  }

  double refine_endpoint(std::size_t m, double& phi_star) const {
    const std::size_t n = fan_.size();
    const double pa = fan_[m > 0 ? m - 1 : m].phi, pb = fan_[m + 1 < n ? m + 1 : m].phi;
    auto conj = [&](double phi) {
      const Ray ray(s_, r0_, phi);
      const auto c = conjugate_time(s_, ray, fan_[m].conj * 1.2 + 0.1);
      return c ? *c : kInf;
    };
    const Extremum e = bracket_and_minimize(conj, pa, pb, 16, 1e-11);
    phi_star = e.x;
    return e.value;
  }

  Subtree build_leaf(CutStructure& cs, std::size_t a, std::size_t b) {
    std::size_t m = a;
    for (std::size_t i = a; i <= b; ++i)
      if (fan_[i].tau < fan_[m].tau) m = i;
    if (!std::isfinite(fan_[m].conj) || std::abs(fan_[m].conj - fan_[m].tau) > 50.0 * opt_.dt)
      throw ResolutionError("branch endpoint near phi=" + std::to_string(fan_[m].phi) +
                            " is not a conjugate point at this fan density");
    double phi_star = fan_[m].phi;
    const double t0 = refine_endpoint(m, phi_star);
    CutArc arc;
    arc.t_start = t0;
    const GeodesicState end_state = state(phi_star, t0);
    const double psi0 = std::acos(std::clamp(end_state.rdot, -1.0, 1.0));
    const CutPoint start{t0, end_state.r, end_state.theta, psi0, psi0, phi_star, phi_star};
    install_eval(arc, start, a, m, m, b);
    cs.branches.push_back(std::move(arc));
    return {cs.branches.size() - 1, a, m, m, b};
  }

  void install_eval(CutArc& arc, const CutPoint& start, std::size_t lo_a, std::size_t lo_b, std::size_t hi_a,
                    std::size_t hi_b) {
    std::shared_ptr<const GenericCut> keep = light_;
    const double t0 = start.t;
    arc.eval = [keep, start, t0, lo_a, lo_b, hi_a, hi_b](double t) {
      if (t - t0 < 1e-9 && start.phi_lo == start.phi_hi) {
        CutPoint c = start;
        c.t = t;
        return c;
      }
      const double root = std::sqrt(std::max(t - t0, 0.0));
      // Collapsed pairs are caustic points, not cut points.
      auto accept = [&](std::optional<CutPoint> c) {
        if (c && c->phi_hi - c->phi_lo < 0.02 * root) c.reset();
        return c;
      };
      const double lo = keep->seed(t, lo_a, lo_b);
      const double hi = keep->seed(t, hi_a, hi_b);
      auto sol = accept(keep->solve_pair(t, std::min(lo, hi - 1e-9), std::max(hi, lo + 1e-9)));
      // Seeds from the endpoint geometry: the gap opens like sqrt(t - t0).
      for (double w : {1.0, 0.3, 3.0}) {
        if (sol) break;
        sol = accept(keep->solve_pair(t, start.phi_lo - w * root, start.phi_hi + w * root));
      }
      if (!sol) throw ConvergenceError("cut arc point did not converge at t=" + std::to_string(t));
      return *sol;
    };
  }

  Subtree build_tree(CutStructure& cs, std::size_t a, std::size_t b) {
    const double prom = 10.0 * opt_.dt;
    std::optional<std::size_t> split;
    for (std::size_t i = a + 1; i < b; ++i) {
      if (!(fan_[i].tau >= fan_[i - 1].tau && fan_[i].tau >= fan_[i + 1].tau)) continue;
      double min_l = kInf, min_r = kInf;
      for (std::size_t k = a; k <= i; ++k) min_l = std::min(min_l, fan_[k].tau);
      for (std::size_t k = i; k <= b; ++k) min_r = std::min(min_r, fan_[k].tau);
      if (std::min(fan_[i].tau - min_l, fan_[i].tau - min_r) < prom) continue;
      if (!split || fan_[i].tau > fan_[*split].tau) split = i;
    }
    if (!split) return build_leaf(cs, a, b);
    const Subtree left = build_tree(cs, a, *split);
    const Subtree right = build_tree(cs, *split, b);
    const CutArc& la = cs.branches[left.arc];
    const CutArc& ra = cs.branches[right.arc];
    auto gap = [&](double t) { return ra.eval(t).r - la.eval(t).r; };
    double lo = std::max(la.t_start, ra.t_start), hi = fan_[*split].tau + 5.0 * opt_.dt;
    double t_merge = fan_[*split].tau;
    try {
      t_merge = bisect_root(
          [&](double t) {
            try {
              return gap(t);
            } catch (const ConvergenceError&) {
              return -1.0;
            }
          },
          lo, hi, 1e-10);
    } catch (const Error&) {
    }
    CutArc merged;
    merged.t_start = t_merge;
    const CutPoint lp = la.eval(t_merge), rp = ra.eval(t_merge);
    CutPoint start{t_merge, lp.r, lp.theta, lp.psi_down, rp.psi_up, lp.phi_lo, rp.phi_hi};
    cs.branches[left.arc].t_end = t_merge;
    cs.branches[right.arc].t_end = t_merge;
    install_eval(merged, start, left.lo_a, left.lo_b, right.hi_a, right.hi_b);
    cs.branches.push_back(std::move(merged));
    const std::size_t id = cs.branches.size() - 1;
    cs.branches[left.arc].next = id;
    cs.branches[right.arc].next = id;
    return {id, left.lo_a, left.lo_b, right.hi_a, right.hi_b};
  }

  void build_run(CutStructure& cs, std::size_t a, std::size_t b) {
    const std::size_t first = cs.branches.size();
    const Subtree top = build_tree(cs, a, b);
    CutArc& arc = cs.branches[top.arc];
    const std::size_t n = fan_.size();
    const bool full = a == 0 && b == n - 1 && s_.compact();
    const bool open = (a > 0 && fan_[a - 1].end == RayEnd::Open) || (b + 1 < n && fan_[b + 1].end == RayEnd::Open);
    if (full) {
      // The two meridians meet on the opposite meridian at distance ell.
      arc.t_end = s_.ell();
    } else if (open) {
      arc.t_end = horizon();
      arc.open_ended = true;
    } else {
      const double t_guess = std::max(fan_[a].tau, fan_[b].tau) + 5.0 * opt_.dt;
      auto above = [&](double t) {
        try {
          return arc.eval(t).theta - kPi;
        } catch (const ConvergenceError&) {
          return 1.0;
        }
      };
      arc.t_end = bisect_root(above, arc.t_start + 1e-9, t_guess, 1e-10);
    }
    // Launch-angle ranges from the gap at each arc's end.
    for (std::size_t k = first; k < cs.branches.size(); ++k) {
      CutArc& c = cs.branches[k];
      if (k == top.arc && (full || open)) {
        c.phi_min = full ? 0.0 : fan_[a].phi;
        c.phi_max = full ? kPi : fan_[b].phi;
        continue;
      }
      try {
        const CutPoint e = c.eval(c.t_end);
        c.phi_min = e.phi_lo;
        c.phi_max = e.phi_hi;
      } catch (const ConvergenceError&) {
        c.phi_min = fan_[a].phi;
        c.phi_max = fan_[b].phi;
      }
    }
    if (full) {
      const double ell = s_.ell();
      const double r0 = r0_;
      auto inner = arc.eval;
      const double t_end = arc.t_end;
      arc.eval = [inner, ell, r0, t_end](double t) {
        if (t_end - t < 1e-9) return CutPoint{t, ell - r0, kPi, 0.0, kPi, 0.0, kPi};
        return inner(t);
      };
    }
  }

  ModelSurface s_;
  double r0_;
  CutOptions opt_;
  std::vector<FanRay> fan_;
  std::vector<char> alive_;
  std::vector<double> r_;
  std::shared_ptr<const GenericCut> light_;
};

}  // namespace detail

/// Cut locus of p = (r0, 0). Built-in families use closed forms; sampled
/// profiles use a fan of opt.rays geodesics.
inline CutStructure cut_structure(const ModelSurface& surface, double r0, const CutOptions& opt = {}) {
  require_open_radius(surface, r0);
  CutStructure cs;
  cs.r0 = r0;
  if (surface.family() == Family::ConstantCurvature || detail::is_unit_sphere(surface)) {
    const double ell = surface.ell();
    cs.trunk.push_back(detail::antipode_arc(surface, r0, opt.rays));
    cs.tau = [ell](double) { return ell; };
    return cs;
  }
  if (surface.family() == Family::LambdaSphere) {
    const double lam = surface.lambda();
    const double s0 = std::sin(r0);
    if (lam < 0.0) {
      cs.branches.push_back(detail::lambda_branch(lam, r0));
      cs.trunk.push_back(detail::antipode_arc(surface, r0, opt.rays));
      cs.trunk.back().phi_min = cs.trunk.back().phi_max = 0.0;
      cs.tau = [lam, s0](double phi) {
        const double c = std::cos(phi);
        const double w = std::sqrt((1.0 + c * c * lam * s0 * s0) / (1.0 + lam * s0 * s0));
        return kPi / w;
      };
      return cs;
    }
    auto hit = [surface, r0](double phi) { return detail::trunk_hit_time(Ray(surface, r0, phi), kPi); };
    cs.trunk = detail::trunk_pieces(surface, r0, 1e-9, kPi - 1e-9, hit, 256);
    cs.tau = hit;
    return cs;
  }
  detail::GenericCut gen(surface, r0, opt);
  return gen.build();
}

/// Right-hand derivative of the height r along a cut arc parameterized by
/// distance from p. Branches use the uppermost/lowermost arrival angles;
/// the trunk is a meridian, so the height changes at rate 1/cos(psi).
inline double arc_height_right_derivative(const ModelSurface& surface, const CutArc& arc, double t) {
  (void)surface;
  if (arc.degenerate()) throw DomainError("zero-length cut arc has no derivative");
  if (!arc.contains(t, 1e-12)) throw DomainError("t outside cut arc");
  const CutPoint c = arc.at(t);
  if (arc.is_trunk) {
    const double cs = std::cos(c.psi_up);
    if (std::abs(cs) < 1e-14) throw DomainError("trunk tangent to the distance sphere");
    return 1.0 / cs;
  }
  return std::cos(0.5 * (c.psi_up + c.psi_down)) / std::cos(0.5 * (c.psi_up - c.psi_down));
}

/// Second printed form of the same derivative, for cross-checking.
inline double arc_height_right_derivative_alt(const ModelSurface& surface, const CutArc& arc, double t) {
  (void)surface;
  if (arc.degenerate()) throw DomainError("zero-length cut arc has no derivative");
  const CutPoint c = arc.at(t);
  if (arc.is_trunk) return 1.0 / std::cos(c.psi_up);
  return std::cos(c.psi_up) + std::sin(c.psi_up) * std::tan(0.5 * (c.psi_up - c.psi_down));
}

struct MinimizingAngles {
  double psi_down = 0.0;
  double psi_up = 0.0;
  double t = 0.0;
  bool conjugate = false;
  bool trunk = false;
};

/// Arrival angles of the extreme minimizing geodesics at a cut point.
inline MinimizingAngles minimizing_angles(const ModelSurface& surface, const CutStructure& cs, SurfacePoint q,
                                          double tol = 1e-6) {
  (void)surface;
  auto locate = [&](const CutArc& arc) -> std::optional<MinimizingAngles> {
    auto dist = [&](double t) {
      const CutPoint c = arc.at(t);
      return std::hypot(c.r - q.r, c.theta - q.theta);
    };
    double t = arc.t_start;
    if (!arc.degenerate()) t = bracket_and_minimize(dist, arc.t_start, arc.t_end, 64, 1e-12).x;
    if (dist(t) > tol) return std::nullopt;
    const CutPoint c = arc.at(t);
    MinimizingAngles m{c.psi_down, c.psi_up, t, false, arc.is_trunk};
    m.conjugate = arc.degenerate() || std::abs(t - arc.t_start) < 1e-9;
    return m;
  };
  for (const auto& b : cs.branches)
    if (auto m = locate(b)) return *m;
  for (const auto& b : cs.trunk)
    if (auto m = locate(b)) return *m;
  throw NotACutPoint("(" + std::to_string(q.r) + ", " + std::to_string(q.theta) + ") is not on the cut locus");
}

inline MinimizingAngles minimizing_angles(const ModelSurface& surface, double r0, SurfacePoint q) {
  return minimizing_angles(surface, cut_structure(surface, r0), q);
}

}  // namespace toposphere
