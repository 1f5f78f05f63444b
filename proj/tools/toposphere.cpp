// Command-line front end. Exit codes: 0 success, 1 usage error, 2 verification failure.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "toposphere/comparison.hpp"
#include "toposphere/cutlocus.hpp"
#include "toposphere/geodesics.hpp"
#include "toposphere/io.hpp"
#include "toposphere/mspace.hpp"
#include "toposphere/profile.hpp"
#include "toposphere/refspace.hpp"
#include "toposphere/wra.hpp"

using namespace toposphere;

namespace {

constexpr int kUsage = 1;
constexpr int kFailure = 2;

/// Exactly one of --kappa, --lambda, --profile selects the model.
struct SurfaceFlags {
  std::optional<double> kappa;
  std::optional<double> lambda;
  std::string profile;

  void add(CLI::App* cmd, const std::string& kappa_flag = "--kappa") {
    auto* k = cmd->add_option(kappa_flag, kappa, "constant curvature model with curvature kappa > 0");
    auto* l = cmd->add_option("--lambda", lambda, "lambda-sphere model, lambda > -1");
    auto* p = cmd->add_option("--profile", profile,
                              "profile JSON: {\"r\": [...], \"y\": [...]} or "
                              "{\"family\": \"kappa\"|\"lambda\"|\"profile\", ...}");
    k->excludes(l)->excludes(p);
    l->excludes(p);
  }

  ModelSurface build() const {
    if (kappa) return ModelSurface::constant_curvature(*kappa);
    if (lambda) return ModelSurface::lambda_sphere(*lambda);
    if (!profile.empty()) return load_profile(profile);
    throw CLI::ValidationError("model", "one of the model flags is required");
  }
};

void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-")
    std::cout << text;
  else
    write_text(path, text);
}

std::string fmt(double v) { return format_double(v); }

int run_table1(bool no_check, std::optional<double> sqrt_kappa, const std::string& out) {
  if (sqrt_kappa && !no_check &&
      std::none_of(table1_reference().begin(), table1_reference().end(),
                   [&](const auto& ref) { return std::abs(ref[0] - *sqrt_kappa) <= 1e-9; })) {
    std::fprintf(stderr, "no printed row for sqrt_kappa=%g; pass --no-check\n", *sqrt_kappa);
    return kUsage;
  }
  std::vector<KappaLambdaRow> rows;
  if (sqrt_kappa)
    rows.push_back(table_row(*sqrt_kappa));
  else
    rows = table1();
  std::string csv = "sqrt_kappa,mu_hat,lambda_hat,bound\n";
  char buf[128];
  for (const auto& r : rows) {
    const bool tenth = std::abs(r.sqrt_kappa * 10.0 - std::round(r.sqrt_kappa * 10.0)) < 1e-9;
    std::snprintf(buf, sizeof buf, tenth ? "%.1f,%.5f,%.5f,%.5f\n" : "%g,%.5f,%.5f,%.5f\n", r.sqrt_kappa,
                  round5(r.mu_hat) + 0.0, round5(r.lambda_hat) + 0.0, round5(r.bound_4k) + 0.0);
    csv += buf;
  }
  emit(out, csv);
  if (no_check) return 0;
  int mismatches = 0;
  for (const auto& r : rows) {
    for (const auto& ref : table1_reference()) {
      if (std::abs(ref[0] - r.sqrt_kappa) > 1e-9) continue;
      const double got[3] = {r.mu_hat, r.lambda_hat, r.bound_4k};
      const char* names[3] = {"mu_hat", "lambda_hat", "bound"};
      for (int c = 0; c < 3; ++c) {
        if (!matches_printed(got[c], ref[c + 1])) {
          ++mismatches;
          std::fprintf(stderr, "mismatch sqrt_kappa=%g %s: computed %.7f printed %.5f\n", r.sqrt_kappa, names[c],
                       got[c], ref[c + 1]);
        }
      }
    }
  }
  return mismatches == 0 ? 0 : kFailure;
}

int run_slope_field(const SurfaceFlags& sf, double r0, std::size_t grid, const std::string& csv_path,
                    const std::string& svg_path) {
  const ReferenceSpace space(sf.build(), r0);
  const auto samples = slope_grid(space, grid);
  if (!svg_path.empty()) write_text(svg_path, slope_svg(space, samples, grid, reference_extent(space)));
  if (!csv_path.empty() || svg_path.empty()) emit(csv_path, slope_csv(samples));
  return 0;
}

int run_geodesic(const SurfaceFlags& sf, double r0, double phi, double t_max, double step, const std::string& out) {
  const ModelSurface s = sf.build();
  require_open_radius(s, r0);
  const Ray ray(s, r0, phi);
  std::string csv = "t,r,theta,rdot,nu\n";
  const auto n = static_cast<std::size_t>(std::ceil(t_max / step));
  for (std::size_t i = 0; i <= n; ++i) {
    const double t = std::min(t_max, step * static_cast<double>(i));
    const GeodesicState st = ray.at(t);
    csv += fmt(t) + "," + fmt(st.r) + "," + fmt(st.theta) + "," + fmt(st.rdot) + "," + fmt(st.nu) + "\n";
  }
  emit(out, csv);
  return 0;
}

int run_cutlocus(const SurfaceFlags& sf, double r0, std::size_t samples, std::size_t rays, const std::string& out) {
  CutOptions opt;
  opt.rays = rays;
  const CutStructure cs = cut_structure(sf.build(), r0, opt);
  std::string csv = "kind,arc,t,r,theta,psi_down,psi_up,phi_lo,phi_hi\n";
  auto dump = [&](const std::vector<CutArc>& arcs, const char* kind) {
    for (std::size_t a = 0; a < arcs.size(); ++a)
      for (const auto& c : arcs[a].sample(samples))
        csv += std::string(kind) + "," + std::to_string(a) + "," + fmt(c.t) + "," + fmt(c.r) + "," + fmt(c.theta) +
               "," + fmt(c.psi_down) + "," + fmt(c.psi_up) + "," + fmt(c.phi_lo) + "," + fmt(c.phi_hi) + "\n";
  };
  dump(cs.branches, "branch");
  dump(cs.trunk, "trunk");
  emit(out, csv);
  return 0;
}

int run_check_wra(const SurfaceFlags& sf, std::optional<double> target_kappa, bool target_rpn, double r_min,
                  double r_max) {
  const ModelSurface model = sf.build();
  RadialHessian target;
  double hi = model.compact() ? model.ell() : 10.0;
  if (target_rpn) {
    target = projective_hessian();
    hi = std::min(hi, kPi / 2.0);
  } else if (target_kappa) {
    target = constant_curvature_hessian(*target_kappa);
    hi = std::min(hi, kPi / std::sqrt(*target_kappa));
  } else {
    throw CLI::ValidationError("target", "pass --target-kappa or --target-rpn");
  }
  if (r_max > 0.0) hi = std::min(hi, r_max);
  const WraVerdict v = check_wra(model, target, r_min, hi);
  json j{{"holds", v.holds}, {"margin", v.margin}, {"witness_r", v.witness_r}, {"r_min", r_min}, {"r_max", hi}};
  std::cout << j.dump() << "\n";
  return v.holds ? 0 : kFailure;
}

int run_critical_radii(const SurfaceFlags& sf) {
  const ModelSurface s = sf.build();
  try {
    const CriticalRadii c = critical_radii(s);
    json j{{"R", c.R}, {"R_star", c.R_star}, {"conditions", c.report.conditions},
           {"shot_r0", c.report.shot_r0}, {"shot_theta", c.report.shot_theta}};
    std::cout << j.dump() << "\n";
    return 0;
  } catch (const NotFound& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return kFailure;
  }
}

int run_ends(const SurfaceFlags& sf, double r_tail) {
  const EndsEstimate e = ends_criterion(sf.build(), r_tail);
  std::cout << json{{"liminf_estimate", e.liminf}, {"one_end", e.one_end}}.dump() << "\n";
  return 0;
}

struct CompareFlags {
  std::string m = "rpn";
  std::size_t dim = 3;
  double m_kappa = 1.0;
  std::string triangles;
  std::size_t samples = 100;
  std::uint64_t seed = 1;
  double r0_min = 0.05;
  double r0_max = 0.0;
  double tol = 1e-7;
  std::string json_out;
};

int run_compare(const SurfaceFlags& sf, const CompareFlags& cf) {
  const ModelSurface model = sf.build();
  std::vector<TriangleData> tris;
  if (!cf.triangles.empty()) {
    tris = load_triangles(cf.triangles);
  } else {
    const TestManifold m =
        cf.m == "sphere" ? TestManifold::sphere(cf.dim, cf.m_kappa) : TestManifold::projective(cf.dim);
    SampleOptions so;
    so.r0_min = cf.r0_min;
    so.r0_max = cf.r0_max;
    tris = sample_batch(m, cf.seed, cf.samples, so);
  }
  ComparisonOptions opt;
  opt.tol = cf.tol;
  const std::size_t n = tris.size();
  std::vector<json> reports(n);
  std::vector<int> failed(n, 0), outside(n, 0), bad(n, 0), indeterminate(n, 0);
  std::vector<double> worst(n, kInf);
  parallel_for(n, [&](std::size_t i) {
    json j;
    j["index"] = i;
    try {
      const ComparisonReport r = build_comparison(model, tris[i], opt);
      j.update(report_to_json(r));
      failed[i] = r.passed() ? 0 : 1;
      bad[i] = static_cast<int>(r.bad_encounters());
      indeterminate[i] = static_cast<int>(r.indeterminate_encounters());
      worst[i] = r.convexity_margin;
    } catch (const OutsideReferenceSpace& e) {
      j["error"] = std::string("no comparison triangle: ") + e.what();
      outside[i] = 1;
    }
    reports[i] = std::move(j);
  });
  if (!cf.json_out.empty()) {
    std::string text;
    for (const auto& j : reports) text += j.dump() + "\n";
    emit(cf.json_out, text);
  }
  int n_failed = 0, n_outside = 0, n_bad = 0, n_ind = 0;
  double w = kInf;
  for (std::size_t i = 0; i < n; ++i) {
    n_failed += failed[i];
    n_outside += outside[i];
    n_bad += bad[i];
    n_ind += indeterminate[i];
    w = std::min(w, worst[i]);
    if (failed[i] || outside[i] || bad[i])
      std::fprintf(stderr, "triangle %zu: %s\n", i, reports[i].dump().substr(0, 400).c_str());
  }
  std::printf("triangles=%zu property_failures=%d outside=%d bad_encounters=%d indeterminate=%d worst_convexity=%s\n",
              n, n_failed, n_outside, n_bad, n_ind, fmt(w).c_str());
  return n_failed + n_outside + n_bad == 0 ? 0 : kFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Triangle comparison against rotationally symmetric model surfaces.\n"
               "Angles in radians, lengths in unit-speed arclength. TOPOSPHERE_THREADS caps worker threads."};
  app.require_subcommand(1);

  auto* t1 = app.add_subcommand("table1", "lambda-hat / mu-hat table for sqrt(kappa) = 1.0..2.0 as CSV");
  bool no_check = false;
  std::optional<double> sqrt_kappa;
  std::string t1_out;
  t1->add_flag("--no-check", no_check, "skip comparison with the printed values");
  t1->add_option("--sqrt-kappa", sqrt_kappa, "single row for this sqrt(kappa) in [1, 2]");
  t1->add_option("--out", t1_out, "CSV path (default stdout)");

  SurfaceFlags sf_slope, sf_geo, sf_cut, sf_wra, sf_crit, sf_ends, sf_cmp;
  double r0 = 1.0;

  auto* sl = app.add_subcommand("slope-field", "slope field on an N x N grid of the reference space");
  sf_slope.add(sl);
  std::size_t grid = 50;
  std::string csv_path, svg_path;
  sl->add_option("--r0", r0, "d(o, p) in (0, ell), radians")->required();
  sl->add_option("--grid", grid, "grid cells per side (default 50)")->check(CLI::Range(2, 2000));
  sl->add_option("--csv", csv_path, "CSV path x,y,value,regime (default stdout unless --svg)");
  sl->add_option("--svg", svg_path, "SVG sign map with nullclines and cut image");

  auto* ge = app.add_subcommand("geodesic", "geodesic from (r0, 0) at angle phi from the inward meridian, CSV");
  sf_geo.add(ge);
  double phi = kPi / 2.0, t_max = kPi, step = 0.01;
  std::string geo_out;
  ge->add_option("--r0", r0, "start radius, radians")->required();
  ge->add_option("--phi", phi, "launch angle in [0, pi] measured from the direction to o (default pi/2)");
  ge->add_option("--t-max", t_max, "unit-speed arclength to trace (default pi)");
  ge->add_option("--step", step, "output spacing (default 0.01)");
  ge->add_option("--out", geo_out, "CSV path (default stdout)");

  auto* cu = app.add_subcommand("cutlocus", "cut locus of (r0, 0): branch and trunk samples as CSV");
  sf_cut.add(cu);
  std::size_t cut_samples = 64, rays = 2048;
  std::string cut_out;
  cu->add_option("--r0", r0, "base radius, radians")->required();
  cu->add_option("--samples", cut_samples, "points per arc (default 64)");
  cu->add_option("--rays", rays, "fan size for sampled profiles (default 2048)");
  cu->add_option("--out", cut_out, "CSV path (default stdout)");

  auto* wr = app.add_subcommand("check-wra", "radial Hessian domination of a target by the model");
  sf_wra.add(wr);
  std::optional<double> target_kappa;
  bool target_rpn = false;
  double r_min = 0.0, r_max = 0.0;
  wr->add_option("--target-kappa", target_kappa, "target sphere of curvature kappa");
  wr->add_flag("--target-rpn", target_rpn, "target RP^n with curvature 1");
  wr->add_option("--r-min", r_min, "lower end of the radius range (default 0)");
  wr->add_option("--r-max", r_max, "upper end (default: smaller of the two radii)");

  auto* cr = app.add_subcommand("critical-radii", "radii R < R* with the four critical-radius conditions");
  sf_crit.add(cr);

  auto* en = app.add_subcommand("ends", "liminf y(r)/r over the profile tail against 2/pi");
  sf_ends.add(en);
  double r_tail = 1.0;
  en->add_option("--r-tail", r_tail, "start of the tail, radial distance")->required();

  auto* cm = app.add_subcommand("compare", "Alexandrov triangles for sampled or supplied triangles");
  sf_cmp.add(cm, "--model-kappa");
  CompareFlags cf;
  cm->add_option("--m", cf.m, "test manifold: sphere or rpn (default rpn)")->check(CLI::IsMember({"sphere", "rpn"}));
  cm->add_option("--dim", cf.dim, "dimension of the test manifold (default 3)");
  cm->add_option("--kappa", cf.m_kappa, "curvature of the test sphere (default 1)");
  cm->add_option("--triangles", cf.triangles, "triangle JSON instead of sampling");
  cm->add_option("--samples", cf.samples, "number of sampled triangles (default 100)");
  cm->add_option("--seed", cf.seed, "sampler seed (default 1)");
  cm->add_option("--r0-min", cf.r0_min, "smallest d(o, p) sampled (default 0.05)");
  cm->add_option("--r0-max", cf.r0_max, "largest d(o, p) sampled (default: manifold radius)");
  cm->add_option("--tol", cf.tol, "margin tolerance (default 1e-7)");
  cm->add_option("--json", cf.json_out, "write one JSON report per line");

  for (auto* sub : app.get_subcommands({}))
    sub->footer("Angles in radians, lengths in unit-speed arclength. Exit codes: 0 ok, 1 usage, 2 failure.");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*t1) return run_table1(no_check, sqrt_kappa, t1_out);
    if (*sl) return run_slope_field(sf_slope, r0, grid, csv_path, svg_path);
    if (*ge) return run_geodesic(sf_geo, r0, phi, t_max, step, geo_out);
    if (*cu) return run_cutlocus(sf_cut, r0, cut_samples, rays, cut_out);
    if (*wr) return run_check_wra(sf_wra, target_kappa, target_rpn, r_min, r_max);
    if (*cr) return run_critical_radii(sf_crit);
    if (*en) return run_ends(sf_ends, r_tail);
    if (*cm) return run_compare(sf_cmp, cf);
  } catch (const CLI::ValidationError& e) {
    std::fprintf(stderr, "usage: %s\n", e.what());
    return kUsage;
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "invalid input: %s\n", e.what());
    return kFailure;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kFailure;
  }
  return kUsage;
}
