#include <catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "toposphere/io.hpp"
#include "toposphere/mspace.hpp"
#include "toposphere/refspace.hpp"
#include "toposphere/wra.hpp"

using namespace toposphere;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string tmp(const std::string& name) { return "/tmp/toposphere_cli_" + name; }

Run cli(const std::string& args) {
  const std::string out = tmp("stdout"), err = tmp("stderr");
  const std::string cmd = std::string(TOPOSPHERE_CLI_PATH) + " " + args + " >" + out + " 2>" + err;
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

}  // namespace

TEST_CASE("usage errors exit 1", "[cli]") {
  CHECK(cli("").code == 1);
  CHECK(cli("no-such-command").code == 1);
  CHECK(cli("table1 --bogus").code == 1);
  CHECK(cli("slope-field --lambda -0.5").code == 1);
  CHECK(cli("slope-field --kappa 1 --lambda -0.5 --r0 1").code == 1);
}

TEST_CASE("help documents units and defaults", "[cli]") {
  const Run top = cli("--help");
  CHECK(top.code == 0);
  for (const char* sub : {"table1", "slope-field", "geodesic", "cutlocus", "check-wra", "critical-radii", "ends",
                          "compare"}) {
    CHECK_THAT(top.out, ContainsSubstring(sub));
    const Run h = cli(std::string(sub) + " --help");
    INFO(sub);
    CHECK(h.code == 0);
    CHECK_THAT(h.out, ContainsSubstring("radians"));
    CHECK_THAT(h.out, ContainsSubstring("unit-speed arclength"));
  }
  CHECK_THAT(cli("compare --help").out, ContainsSubstring("default 100"));
  CHECK_THAT(cli("slope-field --help").out, ContainsSubstring("default 50"));
}

TEST_CASE("table1 subcommand", "[cli]") {
  const Run all = cli("table1");
  CHECK(all.code == 0);
  const auto rows = csv_rows(all.out);
  REQUIRE(rows.size() == 12);
  CHECK(rows[0] == std::vector<std::string>{"sqrt_kappa", "mu_hat", "lambda_hat", "bound"});
  CHECK(rows[11] == std::vector<std::string>{"2.0", "-1.00000", "-1.00000", "-1.00000"});

  const Run one = cli("table1 --sqrt-kappa 1.4");
  CHECK(one.code == 0);
  CHECK(one.out == "sqrt_kappa,mu_hat,lambda_hat,bound\n1.4,-0.97071,-0.92212,-0.81633\n");

  const Run free = cli("table1 --no-check --sqrt-kappa 1.05");
  CHECK(free.code == 0);
  const auto fr = csv_rows(free.out);
  REQUIRE(fr.size() == 2);
  CHECK(fr[1][0] == "1.05");
  CHECK_THAT(std::stod(fr[1][2]), WithinAbs(lambda_hat(1.05), 6e-6));
  CHECK(cli("table1 --sqrt-kappa 1.05").code == 1);
  CHECK(cli("table1 --no-check --sqrt-kappa 2.5").code == 2);
}

TEST_CASE("slope-field subcommand", "[cli]") {
  const Run r = cli("slope-field --kappa 1 --r0 1.5707963267948966 --grid 100");
  REQUIRE(r.code == 0);
  const auto rows = csv_rows(r.out);
  REQUIRE(rows.size() > 100);
  int checked = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const double x = std::stod(rows[i][0]), y = std::stod(rows[i][1]), v = std::stod(rows[i][2]);
    if (rows[i][3] != "interior" || std::isnan(v)) continue;
    // With cos r0 = 0 the slope is -cot x cot y.
    REQUIRE_THAT(v, WithinAbs(-1.0 / (std::tan(x) * std::tan(y)), 1e-6));
    if (std::abs(std::cos(x)) > 1e-3 && std::abs(std::cos(y)) > 1e-3) {
      REQUIRE((v > 0) == (std::cos(x) * std::cos(y) < 0));
      ++checked;
    }
  }
  CHECK(checked > 1000);

  const Run l = cli("slope-field --lambda -0.5 --r0 1.0 --grid 40");
  REQUIRE(l.code == 0);
  const ReferenceSpace space(ModelSurface::lambda_sphere(-0.5), 1.0);
  const auto lrows = csv_rows(l.out);
  SplitMix64 g(2);
  for (int k = 0; k < 10; ++k) {
    const auto& row = lrows[1 + g.next() % (lrows.size() - 1)];
    const ReferencePoint pt{std::stod(row[0]), std::stod(row[1])};
    const SlopeSample s = space.sample_slope(pt);
    const double v = std::stod(row[2]);
    if (std::isnan(s.value)) {
      CHECK(std::isnan(v));
    } else {
      CHECK_THAT(v, WithinAbs(s.value, 1e-11 * std::max(1.0, std::abs(v))));
    }
  }

  const std::string svg = tmp("field.svg");
  REQUIRE(cli("slope-field --lambda -0.5 --r0 1.0 --grid 60 --svg " + svg).code == 0);
  const std::string text = slurp(svg);
  CHECK_THAT(text, ContainsSubstring("<svg"));
  CHECK_THAT(text, ContainsSubstring("viewBox=\"0 0 800 800\""));
  CHECK(cli("slope-field --lambda -0.5 --r0 4").code == 2);
}

TEST_CASE("geodesic and cutlocus subcommands", "[cli]") {
  const Run g = cli("geodesic --lambda 0 --r0 1 --phi 1.5707963267948966 --t-max 3.141592653589793");
  REQUIRE(g.code == 0);
  const auto rows = csv_rows(g.out);
  CHECK(rows[0] == std::vector<std::string>{"t", "r", "theta", "rdot", "nu"});
  CHECK_THAT(std::stod(rows.back()[1]), WithinAbs(kPi - 1.0, 1e-9));

  const Run c = cli("cutlocus --lambda -0.5 --r0 1 --samples 9");
  REQUIRE(c.code == 0);
  int branch = 0;
  for (const auto& row : csv_rows(c.out))
    if (row[0] == "branch") {
      CHECK_THAT(std::stod(row[3]), WithinAbs(kPi - 1.0, 1e-9));
      ++branch;
    }
  CHECK(branch == 9);
}

TEST_CASE("check-wra, critical-radii and ends subcommands", "[cli]") {
  const Run ok = cli("check-wra --lambda -0.5 --target-rpn");
  CHECK(ok.code == 0);
  CHECK(nlohmann::json::parse(ok.out)["holds"] == true);

  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12f", lambda_hat(1.3) - 0.01);
  const Run fail = cli(std::string("check-wra --lambda ") + buf + " --target-kappa 1.69");
  CHECK(fail.code == 2);
  const auto fj = nlohmann::json::parse(fail.out);
  CHECK(fj["holds"] == false);
  CHECK(fj["witness_r"].get<double>() > kPi / 2.0);

  const Run cr = cli("critical-radii --lambda -0.5");
  CHECK(cr.code == 0);
  const auto cj = nlohmann::json::parse(cr.out);
  CHECK(cj["R"].get<double>() < cj["R_star"].get<double>());

  std::string doc = R"({"r":[)", ys;
  for (int i = 0; i <= 400; ++i) {
    doc += (i ? "," : "") + std::to_string(0.05 * i);
    ys += (i ? "," : "") + std::to_string(0.05 * i);
  }
  doc += R"(],"y":[)" + ys + "]}";
  std::ofstream(tmp("plane.json")) << doc;
  const Run e = cli("ends --profile " + tmp("plane.json") + " --r-tail 5");
  CHECK(e.code == 0);
  CHECK(nlohmann::json::parse(e.out)["one_end"] == false);
  CHECK(cli("ends --lambda -0.5 --r-tail 1").code == 2);
}

TEST_CASE("compare subcommand", "[cli]") {
  const Run self = cli("compare --m sphere --kappa 1 --lambda 0 --samples 100");
  CHECK(self.code == 0);
  CHECK_THAT(self.out, ContainsSubstring("triangles=100 property_failures=0"));

  // A unit sphere triangle whose side profile dips below the comparison side.
  const auto m = TestManifold::sphere(2, 1.0);
  Vec w1(3, 0.0), w2(3, 0.0);
  w1[1] = 1.0;
  w2[2] = 1.0;
  TriangleData tri = triangle_from_points(m, m.point(1.2, w1), m.point(1.0, w2), 257);
  const double len = tri.d_pq, depth = 0.05;
  for (auto& s : tri.sigma_profile.samples) s.y -= depth * std::sin(kPi * s.t / len);
  *tri.sigma_profile.dy_start -= depth * kPi / len;
  *tri.sigma_profile.dy_end += depth * kPi / len;
  tri.gamma_profile.reset();
  tri.tau_profile.reset();
  std::ofstream(tmp("bad.json")) << triangle_to_json(tri).dump();
  const std::string reports = tmp("bad_reports.jsonl");
  const Run bad = cli("compare --triangles " + tmp("bad.json") + " --lambda 0 --json " + reports);
  CHECK(bad.code == 2);
  CHECK_THAT(bad.err, ContainsSubstring("triangle 0"));
  const auto rj = nlohmann::json::parse(slurp(reports));
  CHECK(rj["verdict"][1] == false);
  CHECK_THAT(rj["convexity_argmin"].get<double>(), WithinAbs(len / 2.0, 0.2));
  CHECK(cli("compare --triangles /nonexistent.json --lambda 0").code == 2);
}

TEST_CASE("runs are deterministic", "[cli]") {
  const std::vector<std::string> commands = {"compare --lambda -0.9 --samples 40 --seed 3 --json ", "table1 --out ",
                                             "cutlocus --lambda -0.3 --r0 0.7 --out "};
  for (const std::string& args : commands) {
    const std::string a = tmp("det_a"), b = tmp("det_b");
    REQUIRE(cli(args + a).code == 0);
    REQUIRE(cli(args + b).code == 0);
    const std::string ta = slurp(a);
    CHECK_FALSE(ta.empty());
    CHECK(ta == slurp(b));
  }
}
