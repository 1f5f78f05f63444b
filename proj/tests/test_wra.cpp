#include <catch_amalgamated.hpp>

#include <cmath>

#include "toposphere/mspace.hpp"
#include "toposphere/wra.hpp"

using namespace toposphere;
using Catch::Matchers::WithinAbs;

namespace {

// Dense-grid maximum of a function on an open interval, with a local
// parabolic polish around the best grid point.
template <class F>
double grid_sup(F f, double a, double b, int n = 200000) {
  double best = -kInf, at = a;
  for (int i = 1; i < n; ++i) {
    const double x = a + (b - a) * i / n;
    const double v = f(x);
    if (v > best) best = v, at = x;
  }
  double h = (b - a) / n;
  for (int k = 0; k < 40; ++k) {
    for (double x : {at - h, at + h})
      if (x > a && x < b && f(x) > best) best = f(x), at = x;
    h *= 0.5;
  }
  return best;
}

double lambda_hat_oracle(double k) {
  return grid_sup([k](double r) { return (std::tan(k * r) / (std::tan(r) * k) - 1.0) / (std::sin(r) * std::sin(r)); },
                  kPi / 2.0, kPi / k);
}

double mu_hat_oracle(double k) {
  return grid_sup(
      [k](double r0) {
        const double c = std::cos(k * r0) / std::cos(k * (r0 - kPi));
        const double u = std::acos(std::clamp(c, -1.0, 1.0)) / (kPi * k);
        return (u * u - 1.0) / (std::sin(r0) * std::sin(r0));
      },
      kPi - kPi / k, kPi / 2.0);
}

ModelSurface tail_profile(double (*y)(double)) {
  std::vector<double> r, v;
  for (int i = 0; i <= 2000; ++i) {
    const double x = 0.05 * i;
    r.push_back(x);
    v.push_back(y(x));
  }
  return ModelSurface::sampled(r, v);
}

}  // namespace

TEST_CASE("table rows reproduce the printed values", "[wra]") {
  const auto rows = table1();
  const auto& ref = table1_reference();
  REQUIRE(rows.size() == ref.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    INFO("sqrt kappa " << ref[i][0]);
    CHECK(matches_printed(rows[i].mu_hat, ref[i][1]));
    CHECK(matches_printed(rows[i].lambda_hat, ref[i][2]));
    CHECK(matches_printed(rows[i].bound_4k, ref[i][3]));
  }
  CHECK_THAT(lambda_hat(1.1), WithinAbs(-0.50881, 5e-6));
  CHECK_THAT(lambda_hat(1.5), WithinAbs(-0.95764, 5e-6));
  CHECK(lambda_hat(1.0) == 0.0);
  CHECK_THAT(mu_hat(1.1), WithinAbs(-0.74446, 5e-6));
  CHECK_THAT(mu_hat(1.9), WithinAbs(-0.99972, 5e-6));
  CHECK(mu_hat(2.0) == -1.0);
  CHECK_THROWS_AS(lambda_hat(2.5), DomainError);
}

TEST_CASE("optimizers agree with dense grids", "[wra]") {
  for (double k : {1.05, 1.1, 1.3, 1.55, 1.8, 1.95}) {
    INFO("sqrt kappa " << k);
    CHECK_THAT(lambda_hat(k), WithinAbs(lambda_hat_oracle(k), 1e-8));
    CHECK_THAT(mu_hat(k), WithinAbs(mu_hat_oracle(k), 1e-8));
  }
}

TEST_CASE("table ordering", "[wra][property]") {
  for (const auto& row : table1()) {
    CHECK(row.mu_hat <= row.lambda_hat);
    CHECK(row.lambda_hat <= row.bound_4k);
    CHECK(row.bound_4k <= 0.0);
    if (row.sqrt_kappa > 1.0 && row.sqrt_kappa < 2.0) {
      CHECK(row.mu_hat < row.lambda_hat);
      CHECK(row.lambda_hat < row.bound_4k);
    }
  }
  SplitMix64 g(13);
  for (int i = 0; i < 30; ++i) {
    const double k = g.uniform(1.01, 1.99);
    const auto row = table_row(k);
    REQUIRE(row.mu_hat < row.lambda_hat);
    REQUIRE(row.lambda_hat < 4.0 / (k * k) - 4.0 / k);
  }
}

TEST_CASE("hessian comparison examples", "[wra]") {
  CHECK(check_wra(ModelSurface::lambda_sphere(-0.5), projective_hessian(), 0.0, kPi / 2.0).holds);

  // cot r - 2 cot 2r = tan r > 0 on (0, pi/2).
  const auto v = check_wra(ModelSurface::lambda_sphere(0.0), constant_curvature_hessian(4.0), 0.0, kPi / 2.0);
  CHECK(v.holds);
  CHECK(v.margin >= 0.0);

  const double k = 1.3, lh = lambda_hat(k);
  const double hi = kPi / k;
  const auto below = check_wra(ModelSurface::lambda_sphere(lh - 0.01), constant_curvature_hessian(k * k), 0.0, hi);
  CHECK_FALSE(below.holds);
  CHECK(below.witness_r > kPi / 2.0);
  CHECK(below.witness_r < hi);
  CHECK(check_wra(ModelSurface::lambda_sphere(lh + 0.01), constant_curvature_hessian(k * k), 0.0, hi).holds);
  CHECK_THROWS_AS(check_wra(ModelSurface::constant_curvature(4.0), projective_hessian(), 0.0, 3.0), DomainError);
}

TEST_CASE("negative lambda beats projective space", "[wra][property]") {
  for (int i = 1; i <= 20; ++i) {
    const double lambda = -1.0 + i / 21.0;
    const auto v = check_wra(ModelSurface::lambda_sphere(lambda), projective_hessian(), 0.0, kPi / 2.0);
    INFO("lambda " << lambda);
    REQUIRE(v.holds);
  }
}

TEST_CASE("critical radii pass the verifier", "[wra]") {
  for (double lambda : {0.0, -0.5, -0.95}) {
    const auto s = ModelSurface::lambda_sphere(lambda);
    const auto c = critical_radii(s);
    INFO("lambda " << lambda);
    CHECK(c.R > 0.0);
    CHECK(c.R < c.R_star);
    CHECK_THAT(s.y(c.R), WithinAbs(s.y(c.R_star), 1e-9));
    const auto rep = verify_critical_radii(s, c.R, c.R_star);
    CHECK(rep.ok());
    for (double th : rep.shot_theta) CHECK(th > kPi / 2.0);
  }
}

TEST_CASE("ends criterion", "[wra]") {
  const auto plane = ends_criterion(tail_profile([](double r) { return r; }), 10.0);
  CHECK_THAT(plane.liminf, WithinAbs(1.0, 1e-9));
  CHECK_FALSE(plane.one_end);

  const auto cyl = ends_criterion(tail_profile([](double r) { return r < 0.5 ? std::sin(r) : 0.5; }), 10.0);
  CHECK(cyl.one_end);
  CHECK(cyl.liminf < 0.06);

  const auto cone = ends_criterion(tail_profile([](double r) {
    const double c = 2.0 / kPi - 0.01;
    return c * r + (1.0 - c) * r * std::exp(-r);
  }), 10.0);
  CHECK(cone.one_end);
  CHECK_THAT(cone.liminf, WithinAbs(2.0 / kPi - 0.01, 1e-9));

  CHECK_THROWS_AS(ends_criterion(ModelSurface::lambda_sphere(-0.5), 1.0), NotNoncompact);
}
