#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "toposphere/cutlocus.hpp"
#include "toposphere/errors.hpp"
#include "toposphere/geodesics.hpp"
#include "toposphere/optimize.hpp"
#include "toposphere/refspace.hpp"

namespace toposphere {

/// Side lengths and distance profiles of a triangle o p q in M.
struct TriangleData {
  double d_op = 0.0;
  double d_oq = 0.0;
  double d_pq = 0.0;
  ReferenceCurve sigma_profile;                 // t -> d(o, sigma(t)), sigma from p to q
  std::optional<ReferenceCurve> gamma_profile;  // s -> d(p, gamma(s)), gamma from o to q
  std::optional<ReferenceCurve> tau_profile;    // s -> d(q, tau(s)), tau from o to p
};

/// Throws ProfileInconsistent listing every violated invariant.
inline void validate(const TriangleData& tri, double tol = 1e-7) {
  std::vector<std::string> problems;
  const auto& s = tri.sigma_profile.samples;
  if (s.size() < 2) problems.push_back("sigma profile needs at least 2 samples");
  if (tri.d_op < 0 || tri.d_oq < 0 || tri.d_pq < 0) problems.push_back("negative side length");
  if (tri.d_pq > tri.d_op + tri.d_oq + tol || tri.d_op > tri.d_pq + tri.d_oq + tol ||
      tri.d_oq > tri.d_op + tri.d_pq + tol)
    problems.push_back("triangle inequality violated");
  if (s.size() >= 2) {
    if (std::abs(s.front().t) > tol) problems.push_back("sigma profile must start at t=0");
    if (std::abs(s.back().t - tri.d_pq) > tol) problems.push_back("sigma profile must end at t=d_pq");
    if (std::abs(s.front().y - tri.d_op) > tol) problems.push_back("f(0) differs from d_op");
    if (std::abs(s.back().y - tri.d_oq) > tol) problems.push_back("f(d_pq) differs from d_oq");
    for (std::size_t i = 1; i < s.size(); ++i) {
      if (!(s[i].t > s[i - 1].t)) {
        problems.push_back("sigma profile times not increasing at index " + std::to_string(i));
        break;
      }
      if (std::abs(s[i].y - s[i - 1].y) > (s[i].t - s[i - 1].t) + tol) {
        problems.push_back("sigma profile not 1-Lipschitz near t=" + std::to_string(s[i].t));
        break;
      }
    }
  }
  if (!problems.empty()) {
    std::string msg = "inconsistent triangle data:";
    for (const auto& p : problems) msg += " " + p + ";";
    throw ProfileInconsistent(msg);
  }
}

struct TriangleAngles {
  double p = 0.0;
  double q = 0.0;
  std::optional<double> o;
};

inline double clamped_acos(double c) { return std::acos(std::clamp(c, -1.0, 1.0)); }

/// Angles at p and q in M from one-sided derivatives of the sigma profile;
/// the angle at o comes from the gamma profile when present.
inline TriangleAngles angles_from_profile(const TriangleData& tri) {
  if (tri.d_pq < 1e-12) throw DegenerateSide("side pq has zero length");
  TriangleAngles a;
  const ReferenceCurve& f = tri.sigma_profile;
  a.p = clamped_acos(-f.right_derivative(f.t_begin()));
  a.q = clamped_acos(f.left_derivative_end());
  if (tri.gamma_profile && tri.d_oq > 1e-12) {
    const ReferenceCurve& g = *tri.gamma_profile;
    a.o = clamped_acos(-g.right_derivative(g.t_begin()));
  }
  return a;
}

enum class EncounterClass { NotBad, Bad, Indeterminate };

inline const char* encounter_name(EncounterClass c) {
  switch (c) {
    case EncounterClass::NotBad:
      return "not_bad";
    case EncounterClass::Bad:
      return "bad";
    case EncounterClass::Indeterminate:
      return "indeterminate";
  }
  return "?";
}

/// Contact of a reference curve with the image of a branch arc over [t0, t1]
/// (t0 == t1 for an isolated meeting).
struct Encounter {
  double t0 = 0.0;
  double t1 = 0.0;
  std::size_t branch = 0;
  EncounterClass kind = EncounterClass::NotBad;
};

namespace detail {

inline double arc_gap(const ReferenceCurve& curve, const CutArc& arc, double t) {
  return curve.y_at(t) - arc.at(t).r;
}

}  // namespace detail

/// Times where the curve meets the cut image: sign changes, contact runs and
/// tangential touches of y(t) - L(alpha(t)) per branch arc.
inline std::vector<Encounter> detect_encounters(const ReferenceSpace& space, const ReferenceCurve& curve,
                                                double tol = 1e-9, std::size_t grid = 256) {
  std::vector<Encounter> out;
  const CutStructure& cs = space.cut();
  for (std::size_t b = 0; b < cs.branches.size(); ++b) {
    const CutArc& arc = cs.branches[b];
    if (arc.degenerate()) continue;
    const double lo = std::max(arc.t_start, curve.t_begin());
    const double hi = std::min(arc.t_end, curve.t_end());
    if (!(hi > lo)) continue;
    auto gap = [&](double t) { return detail::arc_gap(curve, arc, t); };
    std::vector<double> ts(grid + 1), ds(grid + 1);
    for (std::size_t i = 0; i <= grid; ++i) {
      ts[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(grid);
      ds[i] = gap(ts[i]);
    }
    auto sign = [&](double d) { return std::abs(d) <= tol ? 0 : (d > 0 ? 1 : -1); };
    auto edge = [&](double inside, double outside) {
      return bisect_root([&](double t) { return std::abs(gap(t)) <= tol ? -1.0 : 1.0; }, inside, outside, 1e-10);
    };
    std::size_t i = 0;
    while (i <= grid) {
      const int si = sign(ds[i]);
      if (si == 0) {
        std::size_t j = i;
        while (j + 1 <= grid && sign(ds[j + 1]) == 0) ++j;
        const double a = i == 0 ? ts[0] : edge(ts[i], ts[i - 1]);
        const double c = j == grid ? ts[grid] : edge(ts[j], ts[j + 1]);
        out.push_back({a, c, b, EncounterClass::NotBad});
        i = j + 1;
        continue;
      }
      if (i + 1 <= grid) {
        const int sn = sign(ds[i + 1]);
        if (sn != 0 && sn != si) {
          const double t = bisect_root(gap, ts[i], ts[i + 1], 1e-12);
          out.push_back({t, t, b, EncounterClass::NotBad});
        } else if (sn == si && si < 0 && i >= 1 && sign(ds[i - 1]) < 0 && ds[i] >= ds[i - 1] && ds[i] >= ds[i + 1]) {
          const Extremum m = golden_section_max(gap, ts[i - 1], ts[i + 1], 1e-12);
          if (m.value >= -tol) out.push_back({m.x, m.x, b, EncounterClass::NotBad});
        }
      }
      ++i;
    }
  }
  std::sort(out.begin(), out.end(), [](const Encounter& a, const Encounter& b) { return a.t0 < b.t0; });
  return out;
}

/// Bad iff the curve rises above the arc in every window (t0, t0 + eps]; the
/// derivative test settles strict undercutting without scanning.
inline EncounterClass classify_encounter(const ReferenceSpace& space, const ReferenceCurve& curve,
                                         const Encounter& enc, double tol = 1e-7) {
  const CutStructure& cs = space.cut();
  if (enc.branch >= cs.branches.size()) throw NotAnEncounter("no such branch");
  const CutArc& arc = cs.branches[enc.branch];
  const double t0 = enc.t1;
  if (!arc.contains(t0, 1e-9) || std::abs(detail::arc_gap(curve, arc, t0)) > 1e-6)
    throw NotAnEncounter("curve does not meet the cut image at t=" + std::to_string(t0));
  const double room = std::min(curve.t_end(), arc.t_end) - t0;
  if (room <= 1e-12) return EncounterClass::NotBad;
  if (curve.right_derivative(t0) < arc_height_right_derivative(space.surface(), arc, t0) - tol)
    return EncounterClass::NotBad;

  std::vector<double> window_max;
  for (double eps = std::min(0.05, room); eps >= 1e-6; eps *= 0.5) {
    double m = -kInf;
    for (int j = 1; j <= 16; ++j) m = std::max(m, detail::arc_gap(curve, arc, t0 + eps * j / 16.0));
    window_max.push_back(m);
  }
  const bool all_above = std::all_of(window_max.begin(), window_max.end(), [&](double m) { return m > tol; });
  if (all_above) return EncounterClass::Bad;
  const bool none_above = std::none_of(window_max.begin(), window_max.end(), [&](double m) { return m > tol; });
  if (none_above) return EncounterClass::NotBad;
  return window_max.back() < -tol ? EncounterClass::NotBad : EncounterClass::Indeterminate;
}

struct ComparisonOptions {
  double tol = 1e-7;
  std::size_t side_samples = 16;  // interior samples along gamma and tau
  bool assume_wra = false;        // reject profiles exceeding the model radius
  bool encounters = true;
};

struct ComparisonReport {
  SurfacePoint q_tilde;
  double phi = 0.0;
  bool q_is_cut = false;
  TriangleAngles angles;
  TriangleAngles model_angles;
  double side_error = 0.0;
  double convexity_margin = kInf;
  double convexity_argmin = 0.0;
  double angle_margin_p = 0.0;
  double angle_margin_q = 0.0;
  std::optional<double> base_angle_margin;
  std::optional<double> gamma_margin;
  std::optional<double> tau_margin;
  std::vector<Encounter> encounters;
  /// Properties (1)-(5); (4) and (5) are unset when the needed profiles are absent.
  std::array<std::optional<bool>, 5> verdict;

  bool passed() const {
    return std::all_of(verdict.begin(), verdict.end(), [](const auto& v) { return !v || *v; });
  }
  std::size_t bad_encounters() const {
    return static_cast<std::size_t>(std::count_if(encounters.begin(), encounters.end(),
                                                  [](const Encounter& e) { return e.kind == EncounterClass::Bad; }));
  }
  std::size_t indeterminate_encounters() const {
    return static_cast<std::size_t>(std::count_if(encounters.begin(), encounters.end(), [](const Encounter& e) {
      return e.kind == EncounterClass::Indeterminate;
    }));
  }
};

/// Alexandrov triangle for tri in the model with base distance tri.d_op.
inline ComparisonReport build_comparison(const ReferenceSpace& space, const TriangleData& tri,
                                         const ComparisonOptions& opt = {}) {
  validate(tri, opt.tol);
  const ModelSurface& surface = space.surface();
  if (std::abs(space.r0() - tri.d_op) > 1e-12) throw DomainError("reference space base differs from d_op");
  if (opt.assume_wra && surface.compact()) {
    for (const auto& s : tri.sigma_profile.samples)
      if (s.y > surface.ell() + opt.tol)
        throw ProfileInconsistent("profile value " + std::to_string(s.y) + " exceeds the model radius");
  }
  ComparisonReport rep;
  const double x = tri.d_pq, y = tri.d_oq;
  const Inversion inv = space.invert({x, y});
  rep.q_tilde = inv.q;
  rep.phi = inv.phi;
  rep.q_is_cut = inv.cut;
  const Ray side(surface, space.r0(), inv.phi);

  const GeodesicState end = side.at(x);
  rep.side_error = std::max(std::abs(end.r - inv.q.r), std::abs(inv.q.r - y));
  if (!inv.boundary) rep.side_error = std::max(rep.side_error, std::abs(std::min(end.theta, kPi) - inv.q.theta));
  rep.verdict[0] = rep.side_error <= opt.tol;

  for (const auto& s : tri.sigma_profile.samples) {
    const double m = s.y - side.at(std::min(s.t, x)).r;
    if (m < rep.convexity_margin) {
      rep.convexity_margin = m;
      rep.convexity_argmin = s.t;
    }
  }
  rep.verdict[1] = rep.convexity_margin >= -opt.tol;

  if (x > 1e-12) {
    rep.angles = angles_from_profile(tri);
    rep.model_angles.p = inv.phi;
    rep.model_angles.q = clamped_acos(end.rdot);
    rep.model_angles.o = inv.q.theta;
    rep.angle_margin_p = rep.angles.p - rep.model_angles.p;
    rep.angle_margin_q = rep.angles.q - rep.model_angles.q;
    rep.verdict[2] = rep.angle_margin_p >= -opt.tol && rep.angle_margin_q >= -opt.tol;
    if (rep.angles.o) {
      rep.base_angle_margin = *rep.angles.o - *rep.model_angles.o;
      rep.verdict[3] = *rep.base_angle_margin >= -opt.tol;
    }
  } else {
    rep.verdict[2] = true;
  }

  const std::size_t n = opt.side_samples;
  std::optional<bool> v5;
  if (tri.gamma_profile && y > 1e-12) {
    double m = kInf;
    for (std::size_t j = 1; j <= n; ++j) {
      const double s = y * static_cast<double>(j) / static_cast<double>(n + 1);
      m = std::min(m, tri.gamma_profile->y_at(s) - space.distance_to({s, inv.q.theta}));
    }
    rep.gamma_margin = m;
    v5 = m >= -opt.tol;
  }
  const bool open_y = y > 1e-12 && (!surface.compact() || y < surface.ell() - 1e-12);
  if (tri.tau_profile && open_y) {
    const ReferenceSpace from_q(surface, y);
    double m = kInf;
    for (std::size_t j = 1; j <= n; ++j) {
      const double s = space.r0() * static_cast<double>(j) / static_cast<double>(n + 1);
      m = std::min(m, tri.tau_profile->y_at(s) - from_q.distance_to({s, inv.q.theta}));
    }
    rep.tau_margin = m;
    v5 = v5.value_or(true) && m >= -opt.tol;
  }
  rep.verdict[4] = v5;

  if (opt.encounters) {
    rep.encounters = detect_encounters(space, tri.sigma_profile);
    for (auto& e : rep.encounters) e.kind = classify_encounter(space, tri.sigma_profile, e, opt.tol);
  }
  return rep;
}

inline ComparisonReport build_comparison(const ModelSurface& surface, const TriangleData& tri,
                                         const ComparisonOptions& opt = {}) {
  return build_comparison(ReferenceSpace(surface, tri.d_op), tri, opt);
}

/// Triangle o p sigma(t): the sigma profile truncated at t.
inline TriangleData prefix_triangle(const TriangleData& tri, double t) {
  TriangleData out;
  out.d_op = tri.d_op;
  out.d_pq = t;
  const ReferenceCurve& f = tri.sigma_profile;
  out.d_oq = f.y_at(t);
  for (const auto& s : f.samples) {
    if (s.t >= t) break;
    out.sigma_profile.samples.push_back(s);
  }
  out.sigma_profile.samples.push_back({t, t, out.d_oq});
  out.sigma_profile.dy_start = f.dy_start;
  out.sigma_profile.exact_y = f.exact_y;
  if (f.exact_dy) {
    auto dy = f.exact_dy;
    out.sigma_profile.dy_end = dy(t);
  }
  return out;
}

struct PrefixReport {
  double worst_margin = kInf;
  std::optional<double> first_failure;  // smallest prefix length failing convexity
  std::size_t checked = 0;
};

/// Alexandrov convexity of every prefix triangle o p sigma(t_k), t_k on a
/// uniform grid of `count` lengths in (0, d_pq].
inline PrefixReport check_prefixes(const ReferenceSpace& space, const TriangleData& tri, std::size_t count,
                                   double tol = 1e-7) {
  PrefixReport rep;
  ComparisonOptions opt;
  opt.tol = tol;
  opt.encounters = false;
  for (std::size_t k = 1; k <= count; ++k) {
    const double t = tri.d_pq * static_cast<double>(k) / static_cast<double>(count);
    const TriangleData pre = prefix_triangle(tri, t);
    const ComparisonReport r = build_comparison(space, pre, opt);
    ++rep.checked;
    rep.worst_margin = std::min(rep.worst_margin, r.convexity_margin);
    if (r.convexity_margin < -tol && !rep.first_failure) rep.first_failure = t;
  }
  return rep;
}

}  // namespace toposphere
