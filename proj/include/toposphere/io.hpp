#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "toposphere/comparison.hpp"
#include "toposphere/cutlocus.hpp"
#include "toposphere/errors.hpp"
#include "toposphere/profile.hpp"
#include "toposphere/refspace.hpp"

namespace toposphere {

using json = nlohmann::json;

inline std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// {"family": "kappa", "kappa": k}, {"family": "lambda", "lambda": l},
/// {"family": "profile", "samples": [[r, y], ...]} or {"r": [...], "y": [...]}.
inline ModelSurface profile_from_json(const json& j) {
  if (j.contains("family")) {
    const auto family = j.at("family").get<std::string>();
    if (family == "kappa") return ModelSurface::constant_curvature(j.at("kappa").get<double>());
    if (family == "lambda") return ModelSurface::lambda_sphere(j.at("lambda").get<double>());
    if (family != "profile") throw ValidationError({"unknown family '" + family + "'"});
  }
  std::vector<double> r, y;
  if (j.contains("samples")) {
    for (const auto& row : j.at("samples")) {
      r.push_back(row.at(0).get<double>());
      y.push_back(row.at(1).get<double>());
    }
  } else {
    r = j.at("r").get<std::vector<double>>();
    y = j.at("y").get<std::vector<double>>();
  }
  return ModelSurface::sampled(std::move(r), std::move(y));
}

inline ModelSurface load_profile(const std::string& path) {
  try {
    return profile_from_json(json::parse(read_file(path)));
  } catch (const json::exception& e) {
    throw ValidationError({std::string("malformed profile JSON: ") + e.what()});
  }
}

inline json curve_to_json(const ReferenceCurve& c) {
  json rows = json::array();
  for (const auto& s : c.samples) rows.push_back({s.t, s.y});
  return rows;
}

inline ReferenceCurve curve_from_json(const json& rows) {
  ReferenceCurve c;
  for (const auto& row : rows) {
    const double t = row.at(0).get<double>();
    c.samples.push_back({t, t, row.at(1).get<double>()});
  }
  if (c.samples.size() < 2) throw ProfileInconsistent("profile needs at least 2 samples");
  return c;
}

inline json triangle_to_json(const TriangleData& tri) {
  json j;
  j["d_op"] = tri.d_op;
  j["d_oq"] = tri.d_oq;
  j["d_pq"] = tri.d_pq;
  j["sigma_profile"] = curve_to_json(tri.sigma_profile);
  if (tri.sigma_profile.dy_start) j["sigma_dy_start"] = *tri.sigma_profile.dy_start;
  if (tri.sigma_profile.dy_end) j["sigma_dy_end"] = *tri.sigma_profile.dy_end;
  if (tri.gamma_profile) {
    j["gamma_profile"] = curve_to_json(*tri.gamma_profile);
    if (tri.gamma_profile->dy_start) j["gamma_dy_start"] = *tri.gamma_profile->dy_start;
  }
  if (tri.tau_profile) {
    j["tau_profile"] = curve_to_json(*tri.tau_profile);
    if (tri.tau_profile->dy_start) j["tau_dy_start"] = *tri.tau_profile->dy_start;
  }
  return j;
}

inline TriangleData triangle_from_json(const json& j) {
  try {
    TriangleData tri;
    tri.d_op = j.at("d_op").get<double>();
    tri.d_oq = j.at("d_oq").get<double>();
    tri.d_pq = j.at("d_pq").get<double>();
    tri.sigma_profile = curve_from_json(j.at("sigma_profile"));
    if (j.contains("sigma_dy_start")) tri.sigma_profile.dy_start = j["sigma_dy_start"].get<double>();
    if (j.contains("sigma_dy_end")) tri.sigma_profile.dy_end = j["sigma_dy_end"].get<double>();
    if (j.contains("gamma_profile")) {
      tri.gamma_profile = curve_from_json(j["gamma_profile"]);
      if (j.contains("gamma_dy_start")) tri.gamma_profile->dy_start = j["gamma_dy_start"].get<double>();
    }
    if (j.contains("tau_profile")) {
      tri.tau_profile = curve_from_json(j["tau_profile"]);
      if (j.contains("tau_dy_start")) tri.tau_profile->dy_start = j["tau_dy_start"].get<double>();
    }
    return tri;
  } catch (const json::exception& e) {
    throw ProfileInconsistent(std::string("malformed triangle JSON: ") + e.what());
  }
}

/// A single triangle object, an array of them, or {"triangles": [...]}.
inline std::vector<TriangleData> load_triangles(const std::string& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw ProfileInconsistent(std::string("malformed triangle JSON: ") + e.what());
  }
  std::vector<TriangleData> out;
  const json& list = j.is_object() && j.contains("triangles") ? j["triangles"] : j;
  if (list.is_array()) {
    for (const auto& t : list) out.push_back(triangle_from_json(t));
  } else {
    out.push_back(triangle_from_json(list));
  }
  return out;
}

inline json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

inline json report_to_json(const ComparisonReport& r) {
  json j;
  j["q_tilde"] = {r.q_tilde.r, r.q_tilde.theta};
  j["phi"] = r.phi;
  j["q_is_cut"] = r.q_is_cut;
  j["angles"] = {{"p", r.angles.p}, {"q", r.angles.q}, {"o", optional_json(r.angles.o)}};
  j["model_angles"] = {{"p", r.model_angles.p}, {"q", r.model_angles.q}, {"o", optional_json(r.model_angles.o)}};
  j["side_error"] = r.side_error;
  j["convexity_margin"] = r.convexity_margin;
  j["convexity_argmin"] = r.convexity_argmin;
  j["angle_margin_p"] = r.angle_margin_p;
  j["angle_margin_q"] = r.angle_margin_q;
  j["base_angle_margin"] = optional_json(r.base_angle_margin);
  j["gamma_margin"] = optional_json(r.gamma_margin);
  j["tau_margin"] = optional_json(r.tau_margin);
  json enc = json::array();
  for (const auto& e : r.encounters)
    enc.push_back({{"t0", e.t0}, {"t1", e.t1}, {"branch", e.branch}, {"class", encounter_name(e.kind)}});
  j["encounters"] = enc;
  json v = json::array();
  for (const auto& b : r.verdict) v.push_back(b ? json(*b) : json(nullptr));
  j["verdict"] = v;
  j["passed"] = r.passed();
  return j;
}

/// Shortest text that parses back to the same double.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string slope_csv(const std::vector<SlopeSample>& samples) {
  std::string out = "x,y,value,regime\n";
  for (const auto& s : samples)
    out += format_double(s.point.x) + "," + format_double(s.point.y) + "," + format_double(s.value) + "," +
           regime_name(s.regime) + "\n";
  return out;
}

/// 800x800 sign map of the slope field on [0, extent]^2 with the cut image
/// and the sign-change cells marked.
inline std::string slope_svg(const ReferenceSpace& space, const std::vector<SlopeSample>& samples, std::size_t grid,
                             double extent) {
  const double px = 800.0 / extent;
  const double cell = extent / static_cast<double>(grid);
  auto X = [&](double x) { return x * px; };
  auto Y = [&](double y) { return 800.0 - y * px; };
  std::ostringstream svg;
  svg.precision(6);
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 800 800\" width=\"800\" height=\"800\">\n";
  svg << "<rect x=\"0\" y=\"0\" width=\"800\" height=\"800\" fill=\"white\"/>\n";
  std::vector<std::vector<double>> value(grid, std::vector<double>(grid, NAN));
  for (const auto& s : samples) {
    const auto i = static_cast<std::size_t>(s.point.x / cell), j = static_cast<std::size_t>(s.point.y / cell);
    if (i >= grid || j >= grid) continue;
    value[i][j] = s.value;
    const char* fill = s.regime == Regime::Boundary ? "#bbbbbb" : (s.value > 0 ? "#f4a582" : "#92c5de");
    svg << "<rect x=\"" << X(i * cell) << "\" y=\"" << Y((j + 1) * cell) << "\" width=\"" << cell * px
        << "\" height=\"" << cell * px << "\" fill=\"" << fill << "\"/>\n";
  }
  // Nullcline: segments between horizontally or vertically adjacent cells of opposite sign.
  svg << "<g stroke=\"black\" stroke-width=\"1.5\">\n";
  for (std::size_t i = 0; i < grid; ++i) {
    for (std::size_t j = 0; j < grid; ++j) {
      const double v = value[i][j];
      if (std::isnan(v)) continue;
      if (i + 1 < grid && !std::isnan(value[i + 1][j]) && (v > 0) != (value[i + 1][j] > 0))
        svg << "<line x1=\"" << X((i + 1) * cell) << "\" y1=\"" << Y(j * cell) << "\" x2=\"" << X((i + 1) * cell)
            << "\" y2=\"" << Y((j + 1) * cell) << "\"/>\n";
      if (j + 1 < grid && !std::isnan(value[i][j + 1]) && (v > 0) != (value[i][j + 1] > 0))
        svg << "<line x1=\"" << X(i * cell) << "\" y1=\"" << Y((j + 1) * cell) << "\" x2=\"" << X((i + 1) * cell)
            << "\" y2=\"" << Y((j + 1) * cell) << "\"/>\n";
    }
  }
  svg << "</g>\n";
  // Strip boundary.
  const double r0 = space.r0();
  svg << "<polyline fill=\"none\" stroke=\"#444\" stroke-dasharray=\"4 3\" points=\"" << X(r0) << "," << Y(0) << " "
      << X(0) << "," << Y(r0) << " " << X(extent - r0) << "," << Y(extent) << "\"/>\n";
  svg << "<polyline fill=\"none\" stroke=\"#444\" stroke-dasharray=\"4 3\" points=\"" << X(r0) << "," << Y(0) << " "
      << X(extent) << "," << Y(extent - r0) << "\"/>\n";
  // Cut image.
  if (space.surface().family() != Family::ConstantCurvature) {
    const CutStructure& cs = space.cut();
    auto draw = [&](const CutArc& arc, const char* color) {
      if (arc.degenerate()) {
        const CutPoint c = arc.at(arc.t_start);
        svg << "<circle cx=\"" << X(c.t) << "\" cy=\"" << Y(c.r) << "\" r=\"3\" fill=\"" << color << "\"/>\n";
        return;
      }
      svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2.5\" points=\"";
      for (const auto& c : arc.sample(64)) svg << X(c.t) << "," << Y(c.r) << " ";
      svg << "\"/>\n";
    };
    for (const auto& a : cs.branches) draw(a, "#b2182b");
    for (const auto& a : cs.trunk) draw(a, "#2166ac");
  }
  svg << "</svg>\n";
  return svg.str();
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << text;
}

}  // namespace toposphere
