#include <catch_amalgamated.hpp>

#include <cmath>

#include "toposphere/comparison.hpp"
#include "toposphere/mspace.hpp"

using namespace toposphere;
using Catch::Matchers::WithinAbs;

namespace {

// Law-of-cosines profile on the unit sphere, folded to RP^n when asked.
double lifted_profile(const Vec& p, Vec q, double t, bool fold) {
  double pq = dot(p, q);
  if (fold && pq < 0.0) {
    for (double& c : q) c = -c;
    pq = -pq;
  }
  const double a = std::acos(std::clamp(p[0], -1.0, 1.0));
  const double c = std::acos(std::clamp(q[0], -1.0, 1.0));
  const double len = std::acos(std::clamp(pq, -1.0, 1.0));
  const double cos_p = (std::cos(c) - std::cos(a) * std::cos(len)) / (std::sin(a) * std::sin(len));
  const double g = std::acos(std::clamp(std::cos(a) * std::cos(t) + std::sin(a) * std::sin(t) * cos_p, -1.0, 1.0));
  return fold ? std::min(g, kPi - g) : g;
}

Vec random_point(const TestManifold& m, SplitMix64& g) {
  return m.point(g.uniform(0.05, m.radius() - 0.05), detail::random_direction(g, m.dim()));
}

}  // namespace

TEST_CASE("manifold distances", "[mspace]") {
  const auto s = TestManifold::sphere(3, 4.0);
  CHECK_THAT(s.radius(), WithinAbs(kPi / 2.0, 1e-15));
  SplitMix64 g(3);
  const Vec w = detail::random_direction(g, 3);
  CHECK_THAT(s.distance_from_o(s.point(0.7, w)), WithinAbs(0.7, 1e-12));
  const auto rp = TestManifold::projective(3);
  CHECK_THAT(rp.distance_from_o(rp.point(1.2, w)), WithinAbs(1.2, 1e-12));
  // Past the equator the point folds back.
  CHECK_THAT(rp.distance_from_o(rp.point(2.0, w)), WithinAbs(kPi - 2.0, 1e-12));
  for (int i = 0; i < 200; ++i) {
    const Vec a = random_point(rp, g), b = random_point(rp, g);
    REQUIRE(rp.distance(a, b) <= kPi / 2.0 + 1e-12);
    REQUIRE(rp.distance(a, b) >= 0.0);
  }
}

TEST_CASE("profiles follow the law of cosines", "[mspace]") {
  SplitMix64 g(8);
  for (const auto& m : {TestManifold::sphere(2, 1.0), TestManifold::projective(3)}) {
    const bool fold = m.kind() == TestManifold::Kind::ProjectiveSpace;
    for (int i = 0; i < 50; ++i) {
      const Vec p = random_point(m, g), q = random_point(m, g);
      const double len = m.distance(p, q);
      CHECK_THAT(profile_along(m, p, q, 0.0), WithinAbs(m.distance_from_o(p), 1e-12));
      CHECK_THAT(profile_along(m, p, q, len), WithinAbs(m.distance_from_o(q), 1e-9));
      for (int k = 1; k < 10; ++k) {
        const double t = len * k / 10.0;
        REQUIRE_THAT(profile_along(m, p, q, t), WithinAbs(lifted_profile(p, q, t, fold), 1e-9));
      }
      CHECK_THROWS_AS(profile_along(m, p, q, len + 0.1), DomainError);
    }
  }
}

TEST_CASE("projective profiles are continuous through the fold", "[mspace]") {
  const auto m = TestManifold::projective(3);
  SplitMix64 g(4);
  int folds = 0;
  for (int i = 0; i < 200; ++i) {
    const TriangleData tri = sample_triangle(m, g.next());
    const ReferenceCurve& f = tri.sigma_profile;
    const std::size_t n = 2000;
    double prev = f.y_at(0.0), peak = prev;
    for (std::size_t k = 1; k <= n; ++k) {
      const double t = tri.d_pq * static_cast<double>(k) / n;
      const double v = f.y_at(t);
      REQUIRE(std::abs(v - prev) <= tri.d_pq / n + 1e-12);
      prev = v;
      peak = std::max(peak, v);
    }
    REQUIRE(peak <= kPi / 2.0 + 1e-12);
    if (peak > kPi / 2.0 - 1e-3) ++folds;
  }
  CHECK(folds > 0);
}

TEST_CASE("sampled triangles are 1-Lipschitz and valid", "[mspace][property]") {
  for (const auto& m : {TestManifold::sphere(2, 1.0), TestManifold::sphere(4, 1.69), TestManifold::projective(3)}) {
    for (const auto& tri : sample_batch(m, 99, 60)) {
      REQUIRE_NOTHROW(validate(tri));
      const auto& s = tri.sigma_profile.samples;
      REQUIRE(s.size() == 512);
      for (std::size_t i = 1; i < s.size(); ++i) REQUIRE(std::abs(s[i].y - s[i - 1].y) <= s[i].t - s[i - 1].t + 1e-12);
      REQUIRE(tri.sigma_profile.dy_start);
      REQUIRE(std::abs(*tri.sigma_profile.dy_start) <= 1.0 + 1e-9);
      REQUIRE(std::abs(*tri.sigma_profile.dy_end) <= 1.0 + 1e-9);
      REQUIRE(tri.d_pq <= tri.d_op + tri.d_oq + 1e-12);
    }
  }
}

TEST_CASE("collinear configurations", "[mspace]") {
  const auto m = TestManifold::sphere(2, 1.0);
  SplitMix64 g(1);
  const Vec w = detail::random_direction(g, 2);
  const Vec p = m.point(1.2, w), q = m.point(0.4, w);
  // q between p and o.
  const auto tri = triangle_from_points(m, p, q);
  for (double t : {0.0, 0.3, 0.8}) CHECK_THAT(tri.sigma_profile.y_at(t), WithinAbs(1.2 - t, 1e-9));
  Vec minus = w;
  for (double& c : minus) c = -c;
  // o between p and q.
  const auto through = triangle_from_points(m, m.point(0.5, w), m.point(0.7, minus));
  CHECK_THAT(through.sigma_profile.y_at(0.2), WithinAbs(0.3, 1e-9));
  CHECK_THAT(through.sigma_profile.y_at(0.9), WithinAbs(0.4, 1e-9));
  CHECK_THROWS_AS(triangle_from_points(m, p, p), DegenerateTriangle);
}

TEST_CASE("sampling is deterministic", "[mspace]") {
  const auto m = TestManifold::projective(3);
  const auto a = sample_batch(m, 5, 10), b = sample_batch(m, 5, 10), c = sample_batch(m, 6, 10);
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    REQUIRE(a[i].d_op == b[i].d_op);
    REQUIRE(a[i].d_pq == b[i].d_pq);
    differs = differs || a[i].d_pq != c[i].d_pq;
  }
  CHECK(differs);
  CHECK_THAT(a[7].d_op, WithinAbs(kPi / 2.0, 1e-12));
}
