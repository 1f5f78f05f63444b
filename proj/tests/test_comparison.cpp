#include <catch_amalgamated.hpp>

#include <cmath>
#include <functional>

#include "toposphere/comparison.hpp"
#include "toposphere/mspace.hpp"

using namespace toposphere;
using Catch::Matchers::WithinAbs;

namespace {

ReferenceCurve curve_of(const std::function<double(double)>& f, const std::function<double(double)>& df, double t0,
                        double t1, std::size_t n = 513) {
  ReferenceCurve c;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = t0 + (t1 - t0) * static_cast<double>(i) / static_cast<double>(n - 1);
    c.samples.push_back({t, t, f(t)});
  }
  c.exact_y = f;
  c.exact_dy = df;
  c.dy_start = df(t0);
  c.dy_end = df(t1);
  return c;
}

TriangleData triangle_of(double d_op, const ReferenceCurve& sigma) {
  TriangleData tri;
  tri.d_op = d_op;
  tri.d_pq = sigma.t_end();
  tri.d_oq = sigma.samples.back().y;
  tri.sigma_profile = sigma;
  return tri;
}

// Reverses a triangle: p and q trade places.
TriangleData swapped(const TriangleData& tri) {
  TriangleData out;
  out.d_op = tri.d_oq;
  out.d_oq = tri.d_op;
  out.d_pq = tri.d_pq;
  const ReferenceCurve& f = tri.sigma_profile;
  for (auto it = f.samples.rbegin(); it != f.samples.rend(); ++it) {
    const double t = tri.d_pq - it->t;
    out.sigma_profile.samples.push_back({t, t, it->y});
  }
  out.sigma_profile.samples.front().t = 0.0;
  if (f.dy_end) out.sigma_profile.dy_start = -*f.dy_end;
  if (f.dy_start) out.sigma_profile.dy_end = -*f.dy_start;
  out.gamma_profile = tri.tau_profile;
  out.tau_profile = tri.gamma_profile;
  return out;
}

}  // namespace

TEST_CASE("angles from profiles", "[comparison]") {
  const double r0 = 1.2;
  auto in = triangle_of(r0, curve_of([=](double t) { return r0 - t; }, [](double) { return -1.0; }, 0.0, 0.5));
  CHECK_THAT(angles_from_profile(in).p, WithinAbs(0.0, 1e-12));
  auto out = triangle_of(r0, curve_of([=](double t) { return r0 + t; }, [](double) { return 1.0; }, 0.0, 0.5));
  CHECK_THAT(angles_from_profile(out).p, WithinAbs(kPi, 1e-12));

  // Unit sphere triangle: angle at p from the spherical law of cosines.
  const auto m = TestManifold::sphere(2, 1.0);
  SplitMix64 g(9);
  for (int i = 0; i < 20; ++i) {
    const TriangleData tri = sample_triangle(m, g.next());
    const double a = tri.d_oq, b = tri.d_op, c = tri.d_pq;
    const double cp = (std::cos(a) - std::cos(b) * std::cos(c)) / (std::sin(b) * std::sin(c));
    const double cq = (std::cos(b) - std::cos(a) * std::cos(c)) / (std::sin(a) * std::sin(c));
    const double co = (std::cos(c) - std::cos(a) * std::cos(b)) / (std::sin(a) * std::sin(b));
    const TriangleAngles ang = angles_from_profile(tri);
    REQUIRE_THAT(ang.p, WithinAbs(std::acos(cp), 1e-6));
    REQUIRE_THAT(ang.q, WithinAbs(std::acos(cq), 1e-6));
    REQUIRE(ang.o);
    REQUIRE_THAT(*ang.o, WithinAbs(std::acos(co), 1e-6));
  }
  TriangleData flat = in;
  flat.d_pq = 0.0;
  CHECK_THROWS_AS(angles_from_profile(flat), DegenerateSide);
}

TEST_CASE("triangle validation", "[comparison]") {
  auto tri = triangle_of(1.0, curve_of([](double t) { return 1.0 + 0.2 * t; }, [](double) { return 0.2; }, 0.0, 1.0));
  CHECK_NOTHROW(validate(tri));
  tri.d_oq = 3.0;
  CHECK_THROWS_AS(validate(tri), ProfileInconsistent);
  auto steep = triangle_of(1.0, curve_of([](double t) { return 1.0 + 2.0 * t; }, [](double) { return 2.0; }, 0.0, 0.3));
  CHECK_THROWS_AS(validate(steep), ProfileInconsistent);
}

TEST_CASE("q on the segment from p to o", "[comparison]") {
  const double r0 = 1.0;
  const auto tri = triangle_of(r0, curve_of([=](double t) { return r0 - t; }, [](double) { return -1.0; }, 0.0, 0.6));
  const ComparisonReport rep = build_comparison(ModelSurface::lambda_sphere(-0.5), tri);
  CHECK(rep.passed());
  CHECK_THAT(rep.angles.q, WithinAbs(kPi, 1e-12));
  CHECK_THAT(rep.model_angles.q, WithinAbs(kPi, 1e-9));
  CHECK_THAT(rep.angle_margin_p, WithinAbs(0.0, 1e-9));
  CHECK_THAT(rep.convexity_margin, WithinAbs(0.0, 1e-9));
}

TEST_CASE("isometric model gives congruent triangles", "[comparison]") {
  const auto m = TestManifold::sphere(2, 1.0);
  const auto tris = sample_batch(m, 21, 40);
  const auto model = ModelSurface::constant_curvature(1.0);
  for (const auto& tri : tris) {
    const ComparisonReport rep = build_comparison(model, tri);
    REQUIRE(rep.passed());
    REQUIRE_THAT(rep.convexity_margin, WithinAbs(0.0, 1e-8));
    REQUIRE_THAT(rep.angle_margin_p, WithinAbs(0.0, 1e-6));
    REQUIRE_THAT(rep.angle_margin_q, WithinAbs(0.0, 1e-6));
    REQUIRE_THAT(*rep.base_angle_margin, WithinAbs(0.0, 1e-6));
    REQUIRE_THAT(*rep.gamma_margin, WithinAbs(0.0, 1e-8));
    REQUIRE_THAT(*rep.tau_margin, WithinAbs(0.0, 1e-8));
  }
}

TEST_CASE("projective triangles against a lambda-sphere", "[comparison]") {
  const auto m = TestManifold::projective(3);
  const auto model = ModelSurface::lambda_sphere(-0.9);
  for (const auto& tri : sample_batch(m, 5, 48)) {
    const ComparisonReport rep = build_comparison(model, tri);
    REQUIRE(rep.passed());
    REQUIRE(rep.convexity_margin >= -1e-7);
    REQUIRE(rep.bad_encounters() == 0);
    REQUIRE(rep.indeterminate_encounters() == 0);
    if (tri.d_op < kPi / 2.0 - 1e-9) REQUIRE(rep.encounters.empty());
  }
}

TEST_CASE("encounters of a curve hugging the equator", "[comparison]") {
  const double lambda = -0.9, r0 = kPi / 2.0;
  const ReferenceSpace space(ModelSurface::lambda_sphere(lambda), r0);
  const auto curve = curve_of([](double) { return kPi / 2.0; }, [](double) { return 0.0; }, 0.0, kPi);
  const auto enc = detect_encounters(space, curve);
  REQUIRE(enc.size() == 1);
  CHECK_THAT(enc[0].t0, WithinAbs(kPi * std::sqrt(1.0 + lambda), 1e-8));
  CHECK_THAT(enc[0].t1, WithinAbs(kPi, 1e-8));
  CHECK(classify_encounter(space, curve, enc[0]) == EncounterClass::NotBad);
}

TEST_CASE("transversal and tangential encounters", "[comparison]") {
  const double r0 = 1.0;
  const ReferenceSpace space(ModelSurface::lambda_sphere(-0.5), r0);
  const double h = kPi - r0, tc = 2.9;

  const auto rising = curve_of([=](double t) { return h + 0.5 * (t - tc); }, [](double) { return 0.5; }, 2.7, 3.1);
  auto enc = detect_encounters(space, rising);
  REQUIRE(enc.size() == 1);
  CHECK_THAT(enc[0].t0, WithinAbs(tc, 1e-8));
  CHECK(classify_encounter(space, rising, enc[0]) == EncounterClass::Bad);

  const auto falling = curve_of([=](double t) { return h - 0.5 * (t - tc); }, [](double) { return -0.5; }, 2.7, 3.1);
  enc = detect_encounters(space, falling);
  REQUIRE(enc.size() == 1);
  CHECK(classify_encounter(space, falling, enc[0]) == EncounterClass::NotBad);

  const auto touch = curve_of([=](double t) { return h - (t - tc) * (t - tc); },
                              [=](double t) { return -2.0 * (t - tc); }, 2.7, 3.1);
  enc = detect_encounters(space, touch);
  REQUIRE(enc.size() == 1);
  CHECK_THAT(enc[0].t0, WithinAbs(tc, 1e-4));
  CHECK(classify_encounter(space, touch, enc[0]) == EncounterClass::NotBad);

  Encounter fake;
  fake.t0 = fake.t1 = 2.75;
  CHECK_THROWS_AS(classify_encounter(space, rising, fake), NotAnEncounter);
}

TEST_CASE("a bad encounter breaks some prefix triangle", "[comparison]") {
  const double r0 = 1.0;
  const ReferenceSpace space(ModelSurface::lambda_sphere(-0.5), r0);
  const double phi = kPi / 2.0;
  const ReferenceCurve vs = space.varsigma(phi);
  const double tc = 2.7, h = kPi - r0;
  // Follows varsigma to tc on the cut arc, then rises above it.
  auto f = [&](double t) { return t <= tc ? vs.y_at(t) : h + 0.3 * (t - tc); };
  auto df = [&](double t) { return t < tc ? vs.right_derivative(t) : 0.3; };
  const auto tri = triangle_of(r0, curve_of(f, df, 0.0, 2.9, 1025));
  const ComparisonReport full = build_comparison(space, tri);
  CHECK(full.bad_encounters() >= 1);
  const PrefixReport pre = check_prefixes(space, tri, 64);
  REQUIRE(pre.first_failure);
  CHECK(*pre.first_failure > tc);
}

TEST_CASE("curves below the slope field pass every prefix", "[comparison]") {
  const double r0 = 1.0;
  const ReferenceSpace space(ModelSurface::lambda_sphere(-0.5), r0);
  for (double phi : {1.2, kPi / 2.0, 2.2}) {
    const ReferenceCurve vs = space.varsigma(phi);
    const double end = std::min(vs.t_end(), 2.9);
    auto f = [&](double t) { return vs.y_at(t) - 0.01 * t * t; };
    auto df = [&](double t) { return vs.right_derivative(t) - 0.02 * t; };
    const auto tri = triangle_of(r0, curve_of(f, df, 0.0, end, 1025));
    const PrefixReport pre = check_prefixes(space, tri, 48);
    CHECK_FALSE(pre.first_failure);
    CHECK(pre.worst_margin >= -1e-7);
  }
}

TEST_CASE("swapping p and q swaps the side margins", "[comparison][property]") {
  const auto m = TestManifold::projective(3);
  const auto model = ModelSurface::lambda_sphere(-0.5);
  for (const auto& tri : sample_batch(m, 33, 12)) {
    const ComparisonReport a = build_comparison(model, tri), b = build_comparison(model, swapped(tri));
    REQUIRE(a.gamma_margin);
    REQUIRE(b.tau_margin);
    REQUIRE_THAT(*a.gamma_margin, WithinAbs(*b.tau_margin, 1e-9));
    REQUIRE_THAT(*a.tau_margin, WithinAbs(*b.gamma_margin, 1e-9));
  }
}

TEST_CASE("angle at the base is nonincreasing along the side from o", "[comparison][property]") {
  const auto m = TestManifold::projective(3);
  for (const auto& tri : sample_batch(m, 44, 10)) {
    const ReferenceSpace space(ModelSurface::lambda_sphere(-0.9), tri.d_op);
    const ReferenceCurve& g = *tri.gamma_profile;
    double prev = kInf;
    for (int i = 1; i <= 30; ++i) {
      const double s = tri.d_oq * i / 31.0;
      const double th = space.invert({g.y_at(s), s}).q.theta;
      REQUIRE(th <= prev + 1e-7);
      prev = th;
    }
  }
}

TEST_CASE("profiles beyond the model radius are rejected under the radius bound", "[comparison]") {
  const double r0 = 2.5;
  const auto tri = triangle_of(r0, curve_of([=](double t) { return r0 + t; }, [](double) { return 1.0; }, 0.0, 0.8));
  ComparisonOptions opt;
  opt.assume_wra = true;
  CHECK_THROWS_AS(build_comparison(ModelSurface::lambda_sphere(-0.5), tri, opt), ProfileInconsistent);
}

TEST_CASE("triangles outside the reference space have no comparison triangle", "[comparison]") {
  const double r0 = 2.5;
  const auto tri = triangle_of(r0, curve_of([=](double t) { return r0 + t; }, [](double) { return 1.0; }, 0.0, 0.8));
  CHECK_THROWS_AS(build_comparison(ModelSurface::lambda_sphere(-0.5), tri), OutsideReferenceSpace);
}
