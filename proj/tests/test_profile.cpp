#include <catch_amalgamated.hpp>

#include <cmath>
#include <fstream>
#include <string>

#include "toposphere/io.hpp"
#include "toposphere/mspace.hpp"
#include "toposphere/profile.hpp"

using namespace toposphere;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

// Oracle for the lambda-sphere curvature, written from y = sin r / sqrt(1 + l sin^2 r).
double lambda_curvature_oracle(double lambda, double r) {
  const double s2 = std::sin(r) * std::sin(r);
  const double w = 1.0 + lambda * s2;
  return (1.0 + 3.0 * lambda - 2.0 * lambda * s2) / (w * w);
}

std::string write_tmp(const std::string& name, const std::string& text) {
  const std::string path = "/tmp/toposphere_test_" + name;
  std::ofstream(path) << text;
  return path;
}

}  // namespace

TEST_CASE("built-in profile shapes", "[profile]") {
  const auto k = ModelSurface::constant_curvature(2.25);
  CHECK_THAT(k.ell(), WithinAbs(kPi / 1.5, 1e-15));
  CHECK_THAT(k.y(0.4), WithinAbs(std::sin(1.5 * 0.4) / 1.5, 1e-15));
  const auto l = ModelSurface::lambda_sphere(-0.5);
  CHECK_THAT(l.ell(), WithinAbs(kPi, 1e-15));
  CHECK_THAT(l.y(1.0), WithinAbs(std::sin(1.0) / std::sqrt(1.0 - 0.5 * std::sin(1.0) * std::sin(1.0)), 1e-15));
  CHECK_THAT(l.dy(0.0), WithinAbs(1.0, 1e-12));
  CHECK_THAT(l.dy(kPi), WithinAbs(-1.0, 1e-12));
  CHECK_THROWS_AS(ModelSurface::lambda_sphere(-1.0), DomainError);
  CHECK_THROWS_AS(ModelSurface::constant_curvature(0.0), DomainError);
}

TEST_CASE("gaussian curvature examples", "[profile]") {
  CHECK_THAT(gaussian_curvature(ModelSurface::lambda_sphere(0.0), 0.7), WithinAbs(1.0, 1e-12));
  CHECK_THAT(gaussian_curvature(ModelSurface::lambda_sphere(-0.5), kPi / 2.0), WithinAbs(2.0, 1e-12));
  const auto sp = sample_profile([](double r) { return std::sin(r); }, kPi, 512);
  CHECK_THAT(gaussian_curvature(sp, 0.3), WithinAbs(1.0, 1e-3));
  CHECK_THROWS_AS(gaussian_curvature(ModelSurface::lambda_sphere(0.2), 0.0), DomainError);
  CHECK_THROWS_AS(gaussian_curvature(ModelSurface::lambda_sphere(0.2), kPi), DomainError);
}

TEST_CASE("radial hessian examples", "[profile]") {
  CHECK_THAT(radial_hessian(ModelSurface::constant_curvature(1.0), kPi / 2.0), WithinAbs(0.0, 1e-14));
  CHECK_THAT(radial_hessian(ModelSurface::lambda_sphere(-0.5), kPi / 4.0), WithinAbs(4.0 / 3.0, 1e-13));
  const auto s = ModelSurface::lambda_sphere(-0.9);
  const double h = 1e-5, r = 1.2;
  const double fd = (std::log(s.y(r + h)) - std::log(s.y(r - h))) / (2.0 * h);
  CHECK_THAT(radial_hessian(s, r), WithinAbs(fd, 1e-8));
  CHECK_THROWS_AS(radial_hessian(s, -0.1), DomainError);
}

TEST_CASE("curvature matches second differences on random radii", "[profile][property]") {
  SplitMix64 g(11);
  for (const auto& s : {ModelSurface::constant_curvature(1.0), ModelSurface::constant_curvature(2.25),
                        ModelSurface::lambda_sphere(-0.9), ModelSurface::lambda_sphere(-0.5),
                        ModelSurface::lambda_sphere(0.7)}) {
    for (int i = 0; i < 1000; ++i) {
      const double r = g.uniform(0.01, s.ell() - 0.01);
      const double y = s.y(r);
      REQUIRE(y > 0.0);
      const double h = 1e-4;
      const double fd = -(s.y(r + h) - 2.0 * y + s.y(r - h)) / (h * h * y);
      const double k = gaussian_curvature(s, r);
      REQUIRE(std::abs(k - fd) <= 1e-5 * std::max(1.0, std::abs(k)));
    }
  }
}

TEST_CASE("lambda-sphere curvature formula", "[profile]") {
  SplitMix64 g(3);
  for (int i = 0; i < 200; ++i) {
    const double lambda = g.uniform(-0.99, 2.0), r = g.uniform(0.01, kPi - 0.01);
    REQUIRE_THAT(gaussian_curvature(ModelSurface::lambda_sphere(lambda), r),
                 WithinRel(lambda_curvature_oracle(lambda, r), 1e-10));
  }
}

TEST_CASE("negative lambda dominates the round hessian on (0, pi/2)", "[profile][property]") {
  const auto round = ModelSurface::lambda_sphere(0.0);
  for (double lambda = -0.95; lambda < 0.0; lambda += 0.05)
    for (int i = 1; i < 200; ++i) {
      const double r = kPi / 2.0 * i / 200.0;
      REQUIRE(radial_hessian(ModelSurface::lambda_sphere(lambda), r) >= radial_hessian(round, r) - 1e-14);
    }
}

TEST_CASE("sampled profile detects compactness", "[profile]") {
  const auto sp = sample_profile([](double r) { return std::sin(r); }, kPi, 512);
  CHECK(sp.compact());
  CHECK_THAT(sp.ell(), WithinAbs(kPi, kPi / 511.0));
  CHECK_THAT(sp.y(1.0), WithinAbs(std::sin(1.0), 1e-6));
  std::vector<double> r, y;
  for (int i = 0; i <= 100; ++i) {
    r.push_back(0.1 * i);
    y.push_back(std::sinh(0.1 * i));
  }
  const auto open = ModelSurface::sampled(r, y);
  CHECK_FALSE(open.compact());
  CHECK(std::isinf(open.ell()));
}

TEST_CASE("invalid samples report every problem", "[profile]") {
  try {
    ModelSurface::sampled({0.0, 0.2, 0.1, 0.3, 0.4}, {0.1, 0.2, -0.1, 0.3, 0.4});
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(e.problems().size() >= 3);
  }
}

TEST_CASE("profile documents", "[profile][io]") {
  const auto l = load_profile(write_tmp("lam.json", R"({"family":"lambda","lambda":-0.5})"));
  CHECK(l.family() == Family::LambdaSphere);
  CHECK_THAT(l.ell(), WithinAbs(kPi, 1e-15));
  const auto k = load_profile(write_tmp("kap.json", R"({"family":"kappa","kappa":2.25})"));
  CHECK(k.family() == Family::ConstantCurvature);
  CHECK_THAT(k.ell(), WithinAbs(kPi / 1.5, 1e-15));

  std::string doc = R"({"family":"profile","samples":[)";
  for (int i = 0; i < 512; ++i) {
    const double r = kPi * i / 511.0;
    const double y = i == 511 ? 0.0 : std::sin(r);
    doc += (i ? "," : "") + std::string("[") + std::to_string(r) + "," + std::to_string(y) + "]";
  }
  doc += "]}";
  const auto sp = load_profile(write_tmp("samples.json", doc));
  CHECK(sp.family() == Family::SampledProfile);
  CHECK_THAT(sp.ell(), WithinAbs(kPi, 1e-5));

  CHECK_THROWS_AS(load_profile(write_tmp("bad.json", "{ not json")), ValidationError);
  CHECK_THROWS_AS(load_profile(write_tmp("fam.json", R"({"family":"torus"})")), ValidationError);
}
