#pragma once

#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include "toposphere/errors.hpp"
#include "toposphere/spline.hpp"

namespace toposphere {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class Family { ConstantCurvature, LambdaSphere, SampledProfile };

/// Rotationally symmetric surface dr^2 + y(r)^2 dtheta^2 with a smooth pole
/// at r = 0. Immutable; copies share the sampled spline.
class ModelSurface {
 public:
  static ModelSurface constant_curvature(double kappa) {
    if (!(kappa > 0.0)) throw DomainError("constant curvature requires kappa > 0");
    ModelSurface s;
    s.family_ = Family::ConstantCurvature;
    s.param_ = kappa;
    s.k_ = std::sqrt(kappa);
    s.ell_ = kPi / s.k_;
    return s;
  }

  static ModelSurface lambda_sphere(double lambda) {
    if (!(lambda > -1.0)) throw DomainError("lambda-sphere requires lambda > -1");
    ModelSurface s;
    s.family_ = Family::LambdaSphere;
    s.param_ = lambda;
    s.ell_ = kPi;
    return s;
  }

  /// Samples of y on an increasing grid starting at the pole. Throws
  /// ValidationError listing every problem found.
  static ModelSurface sampled(std::vector<double> r, std::vector<double> y) {
    std::vector<std::string> problems;
    if (r.size() != y.size()) problems.push_back("r and y sample counts differ");
    if (r.size() < 4) problems.push_back("need at least 4 samples");
    if (!problems.empty()) throw ValidationError(problems);
    if (r.front() != 0.0) problems.push_back("first abscissa must be 0");
    if (y.front() != 0.0) problems.push_back("y must vanish at the pole");
    for (std::size_t i = 1; i < r.size(); ++i) {
      if (!(r[i] > r[i - 1])) {
        problems.push_back("grid not strictly increasing at index " + std::to_string(i));
        break;
      }
    }
    const bool compact = std::abs(y.back()) < 1e-9;
    for (std::size_t i = 1; i + (compact ? 1 : 0) < y.size(); ++i) {
      if (!(y[i] > 0.0)) {
        problems.push_back("y not positive at r=" + std::to_string(r[i]));
        break;
      }
    }
    if (problems.empty()) {
      const double pole_slope = (y[1] - y[0]) / (r[1] - r[0]);
      if (std::abs(pole_slope - 1.0) > 0.05)
        problems.push_back("pole slope " + std::to_string(pole_slope) + " is not 1");
      if (compact) {
        const std::size_t n = r.size();
        const double end_slope = (y[n - 1] - y[n - 2]) / (r[n - 1] - r[n - 2]);
        if (std::abs(end_slope + 1.0) > 0.05)
          problems.push_back("end slope " + std::to_string(end_slope) + " is not -1");
      }
    }
    if (!problems.empty()) throw ValidationError(problems);

    ModelSurface s;
    s.family_ = Family::SampledProfile;
    s.ell_ = compact ? r.back() : kInf;
    if (compact) y.back() = 0.0;
    s.spline_ = std::make_shared<const CubicSpline>(
        std::move(r), std::move(y), 1.0,
        compact ? std::optional<double>(-1.0) : std::optional<double>());
    return s;
  }

  Family family() const { return family_; }
  double kappa() const { return family_ == Family::ConstantCurvature ? param_ : NAN; }
  double lambda() const { return family_ == Family::LambdaSphere ? param_ : NAN; }
  double ell() const { return ell_; }
  bool compact() const { return std::isfinite(ell_); }
  const CubicSpline* spline() const { return spline_.get(); }

  /// Largest sampled abscissa (sampled profiles), else ell.
  double sample_extent() const { return spline_ ? spline_->back() : ell_; }

  double y(double r) const {
    switch (family_) {
      case Family::ConstantCurvature:
        return std::sin(k_ * r) / k_;
      case Family::LambdaSphere: {
        const double s = std::sin(r);
        return s / std::sqrt(1.0 + param_ * s * s);
      }
      case Family::SampledProfile:
        if (r < 1e-6) return r;
        return spline_->value(r);
    }
    return NAN;
  }

  double dy(double r) const {
    switch (family_) {
      case Family::ConstantCurvature:
        return std::cos(k_ * r);
      case Family::LambdaSphere: {
        const double s = std::sin(r);
        return std::cos(r) / std::pow(1.0 + param_ * s * s, 1.5);
      }
      case Family::SampledProfile:
        if (r < 1e-6) return 1.0;
        return spline_->derivative(r);
    }
    return NAN;
  }

  double d2y(double r) const {
    switch (family_) {
      case Family::ConstantCurvature:
        return -k_ * std::sin(k_ * r);
      case Family::LambdaSphere: {
        const double s = std::sin(r);
        const double q = 1.0 + param_ * s * s;
        return -s * (1.0 + 3.0 * param_ - 2.0 * param_ * s * s) / std::pow(q, 2.5);
      }
      case Family::SampledProfile:
        return spline_->second_derivative(std::max(r, 1e-6));
    }
    return NAN;
  }

  /// -y''/y, evaluated without domain checks; the pole value is a limit.
  double curvature(double r) const {
    switch (family_) {
      case Family::ConstantCurvature:
        return param_;
      case Family::LambdaSphere: {
        const double s = std::sin(r);
        const double q = 1.0 + param_ * s * s;
        return (1.0 + 3.0 * param_ - 2.0 * param_ * s * s) / (q * q);
      }
      case Family::SampledProfile: {
        double rr = std::max(r, 1e-6);
        if (compact()) rr = std::min(rr, ell_ - 1e-6);
        return -spline_->second_derivative(rr) / spline_->value(rr);
      }
    }
    return NAN;
  }

  /// y'/y without domain checks; near the pole uses y ~ r.
  double hessian(double r) const {
    if (r < 1e-6) return 1.0 / r;
    switch (family_) {
      case Family::ConstantCurvature:
        return k_ * std::cos(k_ * r) / std::sin(k_ * r);
      case Family::LambdaSphere: {
        const double s = std::sin(r);
        return std::cos(r) / (s * (1.0 + param_ * s * s));
      }
      case Family::SampledProfile:
        return spline_->derivative(r) / spline_->value(r);
    }
    return NAN;
  }

 private:
  ModelSurface() = default;

  Family family_ = Family::ConstantCurvature;
  double param_ = 1.0;
  double k_ = 1.0;
  double ell_ = kPi;
  std::shared_ptr<const CubicSpline> spline_;
};

inline void require_open_radius(const ModelSurface& s, double r) {
  if (!(r > 0.0 && r < s.ell()))
    throw DomainError("radius " + std::to_string(r) + " outside (0, ell)");
}

inline double gaussian_curvature(const ModelSurface& s, double r) {
  require_open_radius(s, r);
  return s.curvature(r);
}

inline double radial_hessian(const ModelSurface& s, double r) {
  require_open_radius(s, r);
  return s.hessian(r);
}

/// Samples of a closed-form profile on a uniform grid over [0, ell].
template <class F>
ModelSurface sample_profile(F&& y, double ell, std::size_t n) {
  std::vector<double> r(n), v(n);
  for (std::size_t i = 0; i < n; ++i) {
    r[i] = ell * static_cast<double>(i) / static_cast<double>(n - 1);
    v[i] = i == 0 ? 0.0 : y(r[i]);
  }
  if (std::abs(v.back()) < 1e-9) v.back() = 0.0;
  return ModelSurface::sampled(std::move(r), std::move(v));
}

}  // namespace toposphere
