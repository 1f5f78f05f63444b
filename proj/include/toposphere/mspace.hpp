#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "toposphere/comparison.hpp"
#include "toposphere/errors.hpp"
#include "toposphere/profile.hpp"
#include "toposphere/refspace.hpp"

namespace toposphere {

/// splitmix64 stream.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  double normal() {
    const double u = std::max(uniform(), 1e-300), v = uniform();
    return std::sqrt(-2.0 * std::log(u)) * std::cos(2.0 * kPi * v);
  }

 private:
  std::uint64_t state_;
};

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  SplitMix64 g(seed ^ (0xd1b54a32d192ed03ULL * (index + 1)));
  return g.next();
}

using Vec = std::vector<double>;

inline double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

/// Sphere S^n(kappa) or RP^n with curvature 1; points are unit vectors in
/// R^{n+1} (RP^n points up to sign), the base point o is e_0.
class TestManifold {
 public:
  enum class Kind { Sphere, ProjectiveSpace };

  static TestManifold sphere(std::size_t dim, double kappa) {
    if (dim < 2) throw DomainError("dimension must be at least 2");
    if (!(kappa > 0.0)) throw DomainError("sphere requires kappa > 0");
    return TestManifold(Kind::Sphere, dim, kappa);
  }
  static TestManifold projective(std::size_t dim) {
    if (dim < 2) throw DomainError("dimension must be at least 2");
    return TestManifold(Kind::ProjectiveSpace, dim, 1.0);
  }

  Kind kind() const { return kind_; }
  std::size_t dim() const { return dim_; }
  double kappa() const { return kappa_; }
  double scale() const { return k_; }

  /// Largest distance from o.
  double radius() const { return kind_ == Kind::Sphere ? kPi / k_ : kPi / 2.0; }

  /// Chord form 2 asin(|a - b| / 2) stays accurate for nearby points.
  double distance(const Vec& a, const Vec& b) const {
    double minus = 0.0, plus = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      minus += (a[i] - b[i]) * (a[i] - b[i]);
      plus += (a[i] + b[i]) * (a[i] + b[i]);
    }
    const double chord = kind_ == Kind::Sphere ? minus : std::min(minus, plus);
    const double angle = 2.0 * std::asin(std::min(1.0, 0.5 * std::sqrt(chord)));
    return kind_ == Kind::Sphere ? angle / k_ : angle;
  }

  double distance_from_o(const Vec& a) const { return distance(a, base()); }

  Vec base() const {
    Vec o(dim_ + 1, 0.0);
    o[0] = 1.0;
    return o;
  }

  /// Point at distance r from o in the unit direction w orthogonal to e_0.
  Vec point(double r, const Vec& w) const {
    Vec v(dim_ + 1);
    const double a = k_ * r;
    for (std::size_t i = 0; i <= dim_; ++i) v[i] = std::sin(a) * w[i];
    v[0] += std::cos(a);
    return v;
  }

 private:
  TestManifold(Kind kind, std::size_t dim, double kappa)
      : kind_(kind), dim_(dim), kappa_(kappa), k_(std::sqrt(kappa)) {}

  Kind kind_;
  std::size_t dim_;
  double kappa_;
  double k_;
};

/// Unit-speed minimizing geodesic from a to b on the covering sphere.
class GreatArc {
 public:
  GreatArc(const TestManifold& m, Vec a, Vec b) : m_(m), a_(std::move(a)) {
    if (m.kind() == TestManifold::Kind::ProjectiveSpace && dot(a_, b) < 0.0)
      for (double& c : b) c = -c;  // lift with the shorter arc; ties keep b
    const double c = std::clamp(dot(a_, b), -1.0, 1.0);
    angle_ = std::acos(c);
    w_.assign(a_.size(), 0.0);
    double n = 0.0;
    for (std::size_t i = 0; i < a_.size(); ++i) {
      w_[i] = b[i] - c * a_[i];
      n += w_[i] * w_[i];
    }
    n = std::sqrt(n);
    if (n < 1e-300) throw DegenerateTriangle("coincident endpoints");
    for (double& v : w_) v /= n;
  }

  double length() const { return angle_ / m_.scale(); }

  Vec at(double t) const {
    const double s = m_.scale() * t;
    Vec v(a_.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::cos(s) * a_[i] + std::sin(s) * w_[i];
    return v;
  }

  /// Right derivative at t = 0 of d(target, arc(t)); target differs from the start.
  double start_rate(const Vec& target) const {
    const double x = std::clamp(dot(a_, target), -1.0, 1.0);
    const double wt = dot(w_, target);
    const double sn = std::sqrt(std::max(0.0, 1.0 - x * x));
    if (m_.kind() == TestManifold::Kind::Sphere) return -wt / sn;
    if (std::abs(x) < 1e-15) return -std::abs(wt);  // target on the fold
    return (x > 0 ? -wt : wt) / sn;
  }

  /// d(o, arc(t)) and its one-sided derivative in t (right by default).
  std::pair<double, double> height(double t, bool left = false) const {
    const double s = m_.scale() * t;
    const double c0 = std::cos(s) * a_[0] + std::sin(s) * w_[0];
    const double dc0 = -std::sin(s) * a_[0] + std::cos(s) * w_[0];  // d c0 / ds
    const double sn = std::sqrt(std::max(0.0, 1.0 - c0 * c0));
    const double pole = left ? -1.0 : 1.0;
    if (m_.kind() == TestManifold::Kind::Sphere) {
      const double f = std::acos(std::clamp(c0, -1.0, 1.0)) / m_.scale();
      const double df = sn < 1e-12 ? (c0 > 0 ? pole : -pole) : -dc0 / sn;
      return {f, df};
    }
    const double f = std::acos(std::clamp(std::abs(c0), 0.0, 1.0));
    double df;
    if (sn < 1e-12) {
      df = pole;
    } else if (std::abs(c0) < 1e-15) {
      df = left ? std::abs(dc0) : -std::abs(dc0);  // fold at the equator
    } else {
      df = (c0 > 0 ? -dc0 : dc0) / sn;
    }
    return {f, df};
  }

 private:
  const TestManifold& m_;
  Vec a_;
  Vec w_;
  double angle_ = 0.0;
};

/// Exact d(o, sigma(t)) along the minimizing geodesic from p to q.
inline double profile_along(const TestManifold& m, const Vec& p, const Vec& q, double t) {
  const GreatArc arc(m, p, q);
  if (t < -1e-12 || t > arc.length() + 1e-12)
    throw DomainError("t=" + std::to_string(t) + " outside [0, d(p,q)]");
  return arc.height(std::clamp(t, 0.0, arc.length())).first;
}

namespace detail {

inline ReferenceCurve arc_profile(const TestManifold& m, const Vec& a, const Vec& b, std::size_t n) {
  auto keep = std::make_shared<TestManifold>(m);
  auto arc = std::make_shared<GreatArc>(*keep, a, b);
  const double len = arc->length();
  ReferenceCurve c;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = len * static_cast<double>(i) / static_cast<double>(n - 1);
    c.samples.push_back({t, t, arc->height(t).first});
  }
  c.dy_start = arc->height(0.0).second;
  c.dy_end = arc->height(len, true).second;
  c.exact_y = [arc, keep, len](double t) { return arc->height(std::clamp(t, 0.0, len)).first; };
  c.exact_dy = [arc, keep, len](double t) { return arc->height(std::clamp(t, 0.0, len)).second; };
  return c;
}

inline Vec random_direction(SplitMix64& g, std::size_t dim) {
  for (;;) {
    Vec w(dim + 1, 0.0);
    double n = 0.0;
    for (std::size_t i = 1; i <= dim; ++i) {
      w[i] = g.normal();
      n += w[i] * w[i];
    }
    n = std::sqrt(n);
    if (n < 1e-12) continue;
    for (double& v : w) v /= n;
    return w;
  }
}

}  // namespace detail

/// Exact triangle data for o, p, q.
inline TriangleData triangle_from_points(const TestManifold& m, const Vec& p, const Vec& q,
                                         std::size_t samples = 512) {
  const Vec o = m.base();
  TriangleData tri;
  tri.d_op = m.distance(o, p);
  tri.d_oq = m.distance(o, q);
  tri.d_pq = m.distance(p, q);
  const double eps = 1e-9;
  if (tri.d_pq < eps || tri.d_op < eps || tri.d_oq < eps) throw DegenerateTriangle("coincident vertices");
  if (m.kind() == TestManifold::Kind::Sphere &&
      (tri.d_op > m.radius() - eps || tri.d_oq > m.radius() - eps || tri.d_pq > m.radius() - eps))
    throw DegenerateTriangle("antipodal vertices");
  tri.sigma_profile = detail::arc_profile(m, p, q, samples);
  tri.sigma_profile.samples.front().y = tri.d_op;
  tri.sigma_profile.samples.back().y = tri.d_oq;

  // gamma: o -> q, profile d(p, gamma(s)); tau: o -> p, profile d(q, tau(s)).
  auto side = [&](const Vec& from, const Vec& to, const Vec& target, double len) {
    const GreatArc arc(m, from, to);
    ReferenceCurve c;
    for (std::size_t i = 0; i < 65; ++i) {
      const double s = len * i / 64.0;
      c.samples.push_back({s, s, m.distance(target, arc.at(s))});
    }
    c.dy_start = arc.start_rate(target);
    auto keep = std::make_shared<TestManifold>(m);
    auto arc_owned = std::make_shared<GreatArc>(*keep, from, to);
    c.exact_y = [keep, arc_owned, target](double s) { return keep->distance(target, arc_owned->at(s)); };
    return c;
  };
  tri.gamma_profile = side(o, q, p, tri.d_oq);
  tri.tau_profile = side(o, p, q, tri.d_op);
  return tri;
}

struct SampleOptions {
  double r0_min = 0.05;
  double r0_max = 0.0;  // 0: the manifold radius
  std::size_t samples = 512;
};

/// p on the shell d(o, p) ~ U(r0 range), q uniform in distance and direction.
inline TriangleData sample_triangle(const TestManifold& m, std::uint64_t seed, const SampleOptions& opt = {},
                                    std::optional<double> force_r0 = std::nullopt, bool equatorial = false) {
  SplitMix64 g(seed);
  const double rmax = opt.r0_max > 0.0 ? std::min(opt.r0_max, m.radius()) : m.radius();
  for (int attempt = 0; attempt < 100; ++attempt) {
    const double r0 = force_r0 ? *force_r0 : g.uniform(opt.r0_min, rmax);
    double rq = g.uniform(0.0, m.radius());
    if (equatorial) rq = m.radius();
    const Vec p = m.point(r0, detail::random_direction(g, m.dim()));
    const Vec q = m.point(rq, detail::random_direction(g, m.dim()));
    try {
      return triangle_from_points(m, p, q, opt.samples);
    } catch (const DegenerateTriangle&) {
    }
  }
  throw DegenerateTriangle("100 consecutive degenerate samples");
}

/// Batch with per-index derived seeds. On RP^n every 8th triangle has
/// d(o, p) = pi/2 and every 16th lies on the equator.
inline std::vector<TriangleData> sample_batch(const TestManifold& m, std::uint64_t seed, std::size_t count,
                                              const SampleOptions& opt = {}) {
  std::vector<TriangleData> out(count);
  parallel_for(count, [&](std::size_t i) {
    const std::uint64_t s = derive_seed(seed, i);
    if (m.kind() == TestManifold::Kind::ProjectiveSpace && i % 8 == 7)
      out[i] = sample_triangle(m, s, opt, kPi / 2.0, i % 16 == 15);
    else
      out[i] = sample_triangle(m, s, opt);
  });
  return out;
}

/// Radial Hessian of d(o, .) in M.
inline double manifold_radial_hessian(const TestManifold& m, double r) {
  return m.kind() == TestManifold::Kind::Sphere ? m.scale() / std::tan(m.scale() * r) : 1.0 / std::tan(r);
}

}  // namespace toposphere
