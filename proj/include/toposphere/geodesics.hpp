#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "toposphere/errors.hpp"
#include "toposphere/ode.hpp"
#include "toposphere/optimize.hpp"
#include "toposphere/profile.hpp"

namespace toposphere {

struct GeodesicState {
  double t = 0.0;
  double r = 0.0;
  double theta = 0.0;  // unwrapped
  double rdot = 0.0;
  double nu = 0.0;     // y(r)^2 dtheta/dt
};

/// Launch data: phi is the angle from the meridian direction toward the pole.
struct ShootSpec {
  double r0 = 1.0;
  double phi = 0.0;
};

struct SurfacePoint {
  double r = 0.0;
  double theta = 0.0;
};

enum class ShootMethod { Auto, Integrate };

namespace detail {

// Continuous branch of u -> atan(tan(u) / a) for a > 0.
inline double winding_atan(double u, double a) {
  double k = std::floor(u / kPi + 0.5);
  double v = u - k * kPi;
  if (v < -kPi / 2.0) {
    v += kPi;
    k -= 1.0;
  } else if (v > kPi / 2.0) {
    v -= kPi;
    k += 1.0;
  }
  return std::atan(std::tan(v) / a) + k * kPi;
}

// Unit-speed geodesics of dr^2 + sin^2(kr)/(k^2 (1 + lambda sin^2(kr))) dtheta^2.
// k = sqrt(kappa), lambda = 0 covers constant curvature; k = 1 the lambda-spheres.
class ClosedFormGeodesic {
 public:
  ClosedFormGeodesic(double lambda, double k, double r0, double phi)
      : lambda_(lambda), k_(k), R0_(k * r0) {
    rdot0_ = -std::cos(phi);
    const double s0 = std::sin(R0_);
    const double q = 1.0 + lambda_ * s0 * s0;
    nu_ = s0 / (k_ * std::sqrt(q)) * std::sin(phi);
    meridian_ = std::abs(std::sin(phi)) < 1e-15;
    if (meridian_) {
      rdot0_ = rdot0_ < 0 ? -1.0 : 1.0;
      return;
    }
    omega_ = std::sqrt((1.0 + rdot0_ * rdot0_ * lambda_ * s0 * s0) / q);
    A_ = std::cos(R0_);
    B_ = -rdot0_ * s0 / omega_;
    delta_ = std::atan2(B_, A_);
    // sin of the minimal radius, computed without cancellation.
    a_ = s0 * std::sqrt(std::max(0.0, 1.0 - rdot0_ * rdot0_ / (omega_ * omega_)));
    shift_ = -delta_ / omega_;
    theta_offset_ = angle(shift_);
  }

  GeodesicState at(double t) const {
    GeodesicState st;
    st.t = t;
    st.nu = nu_;
    const double tp = k_ * t;
    if (meridian_) {
      const double u = R0_ + rdot0_ * tp;
      const double m = std::floor(u / kPi);
      const bool even = std::fmod(std::abs(m), 2.0) == 0.0;
      const double R = even ? u - m * kPi : (m + 1.0) * kPi - u;
      st.r = R / k_;
      st.theta = kPi * std::abs(m);
      st.rdot = even ? rdot0_ : -rdot0_;
      return st;
    }
    const double wt = omega_ * tp;
    const double c = std::clamp(A_ * std::cos(wt) + B_ * std::sin(wt), -1.0, 1.0);
    const double dc = omega_ * (-A_ * std::sin(wt) + B_ * std::cos(wt));
    const double R = std::acos(c);
    const double sR = std::sqrt(std::max(0.0, (1.0 - c) * (1.0 + c)));
    st.r = R / k_;
    st.rdot = sR > 0.0 ? std::clamp(-dc / sR, -1.0, 1.0) : 0.0;
    st.theta = angle(tp + shift_) - theta_offset_;
    return st;
  }

  double theta_rate(double r) const {
    const double s = std::sin(k_ * r);
    return nu_ * k_ * k_ * (1.0 + lambda_ * s * s) / (s * s);
  }

  bool meridian() const { return meridian_; }
  double omega() const { return omega_; }
  double nu() const { return nu_; }

 private:
  double angle(double s) const {
    return s * omega_ * lambda_ * a_ + winding_atan(s * omega_, a_);
  }

  double lambda_, k_, R0_;
  double rdot0_ = 0.0, nu_ = 0.0, omega_ = 1.0, A_ = 1.0, B_ = 0.0, delta_ = 0.0, a_ = 1.0;
  double shift_ = 0.0, theta_offset_ = 0.0;
  bool meridian_ = false;
};

// Exact meridian on a sampled profile: reflects at the pole (and at ell if compact).
inline GeodesicState sampled_meridian(const ModelSurface& s, double r0, double rdot0, double t) {
  GeodesicState st;
  st.t = t;
  const double u = r0 + rdot0 * t;
  if (s.compact()) {
    const double L = s.ell();
    const double m = std::floor(u / L);
    const bool even = std::fmod(std::abs(m), 2.0) == 0.0;
    st.r = even ? u - m * L : (m + 1.0) * L - u;
    st.theta = kPi * std::abs(m);
    st.rdot = even ? rdot0 : -rdot0;
  } else {
    st.r = std::abs(u);
    st.theta = u < 0 ? kPi : 0.0;
    st.rdot = u < 0 ? -rdot0 : rdot0;
  }
  return st;
}

}  // namespace detail

/// A geodesic from (r0, 0) evaluated on demand. Built-in families use closed
/// forms; sampled profiles integrate lazily, extending as later times are
/// requested. Not safe to share between threads while being extended.
class Ray {
 public:
  Ray(const ModelSurface& surface, double r0, double phi,
      ShootMethod method = ShootMethod::Auto, double tol = 1e-10)
      : surface_(surface), r0_(r0), phi_(phi), tol_(tol) {
    if (!(r0 > 0.0 && r0 < surface.ell())) throw DomainError("r0 outside (0, ell)");
    if (!(phi >= 0.0 && phi <= kPi)) throw DomainError("launch angle outside [0, pi]");
    const bool meridian = std::abs(std::sin(phi)) < 1e-15;
    if (method == ShootMethod::Auto && surface.family() != Family::SampledProfile) {
      const double lam = surface.family() == Family::LambdaSphere ? surface.lambda() : 0.0;
      const double k = surface.family() == Family::ConstantCurvature ? std::sqrt(surface.kappa()) : 1.0;
      closed_.emplace(lam, k, r0, phi);
    } else if (meridian) {
      meridian_ = true;
      rdot0_ = std::cos(phi) > 0 ? -1.0 : 1.0;
    } else {
      store_ = std::make_shared<Store>();
      const double y0 = surface.y(r0);
      const double nu = y0 * std::sin(phi);
      store_->nu0 = nu;
      std::array<double, 4> s0{r0, 0.0, -std::cos(phi), nu / (y0 * y0)};
      store_->last = s0;
      push(0.0, s0);
    }
  }

  double r0() const { return r0_; }
  double phi() const { return phi_; }
  const ModelSurface& surface() const { return surface_; }
  bool closed_form() const { return closed_.has_value() || meridian_; }

  GeodesicState at(double t) const {
    if (t < 0.0) throw DomainError("negative arclength");
    if (closed_) return closed_->at(t);
    if (meridian_) return detail::sampled_meridian(surface_, r0_, rdot0_, t);
    extend(t);
    const Store& st = *store_;
    std::size_t i = static_cast<std::size_t>(std::upper_bound(st.t.begin(), st.t.end(), t) - st.t.begin());
    i = std::clamp<std::size_t>(i, 1, st.t.size() - 1) - 1;
    GeodesicState g;
    g.t = t;
    g.r = hermite(st.t[i], st.t[i + 1], st.r[i], st.r[i + 1], st.rdot[i], st.rdot[i + 1], t);
    g.theta = hermite(st.t[i], st.t[i + 1], st.theta[i], st.theta[i + 1], st.thetadot[i],
                      st.thetadot[i + 1], t);
    g.rdot = hermite(st.t[i], st.t[i + 1], st.rdot[i], st.rdot[i + 1], st.rddot[i], st.rddot[i + 1], t);
    const double w = (t - st.t[i]) / (st.t[i + 1] - st.t[i]);
    g.nu = (1.0 - w) * st.nu[i] + w * st.nu[i + 1];
    return g;
  }

  /// Samples produced by the integrator so far (empty for closed forms).
  std::vector<GeodesicState> integrator_samples() const {
    std::vector<GeodesicState> out;
    if (!store_) return out;
    for (std::size_t i = 0; i < store_->t.size(); ++i) {
      out.push_back({store_->t[i], store_->r[i], store_->theta[i], store_->rdot[i], store_->nu[i]});
    }
    return out;
  }

  /// Largest time reached by the integrator (infinite for closed forms).
  double integrated_until() const { return store_ ? store_->t.back() : kInf; }

  double dtheta(double t) const {
    const GeodesicState g = at(t);
    const double y = surface_.y(g.r);
    return g.nu / (y * y);
  }

 private:
  struct Store {
    std::vector<double> t, r, theta, rdot, thetadot, rddot, nu;
    std::array<double, 4> last{};
    double nu0 = 0.0;
  };

  std::array<double, 4> rhs(const std::array<double, 4>& s) const {
    const double y = surface_.y(s[0]);
    const double dy = surface_.dy(s[0]);
    return {s[2], s[3], y * dy * s[3] * s[3], -2.0 * (dy / y) * s[2] * s[3]};
  }

  void push(double t, const std::array<double, 4>& s) const {
    const auto d = rhs(s);
    store_->t.push_back(t);
    store_->r.push_back(s[0]);
    store_->theta.push_back(s[1]);
    store_->rdot.push_back(s[2]);
    store_->thetadot.push_back(s[3]);
    store_->rddot.push_back(d[2]);
    const double y = surface_.y(s[0]);
    store_->nu.push_back(y * y * s[3]);
    store_->last = s;
  }

  void extend(double t) const {
    Store& st = *store_;
    if (t <= st.t.back() && st.t.size() > 1) return;
    const double target = std::max(t, st.t.back() * 1.5 + 0.1);
    OdeOptions opt;
    opt.rtol = tol_;
    opt.atol = tol_;
    opt.h_max = 0.01;
    const double ell = surface_.ell();
    bool first = true;
    integrate_dopri<4>(
        [this](double, const std::array<double, 4>& s) { return rhs(s); }, st.t.back(), st.last,
        target, opt,
        [&](double tt, const std::array<double, 4>& s, const std::array<double, 4>&) {
          if (first) {
            first = false;
            return true;
          }
          if (!(s[0] > 0.0) || !(s[0] < ell))
            throw PoleCrossing("integrated geodesic reached a pole at t=" + std::to_string(tt));
          push(tt, s);
          return true;
        });
  }

  ModelSurface surface_;
  double r0_, phi_, tol_;
  std::optional<detail::ClosedFormGeodesic> closed_;
  bool meridian_ = false;
  double rdot0_ = 0.0;
  std::shared_ptr<Store> store_;
};

class GeodesicPath {
 public:
  GeodesicPath(std::vector<GeodesicState> samples, std::shared_ptr<const Ray> ray)
      : samples_(std::move(samples)), ray_(std::move(ray)) {}

  const std::vector<GeodesicState>& samples() const { return samples_; }
  double t_max() const { return samples_.back().t; }
  const Ray& ray() const { return *ray_; }

  GeodesicState at(double t) const {
    if (t < 0.0 || t > t_max() * (1.0 + 1e-12) + 1e-15)
      throw DomainError("time outside the path domain");
    return ray_->at(std::min(t, t_max()));
  }

 private:
  std::vector<GeodesicState> samples_;
  std::shared_ptr<const Ray> ray_;
};

inline GeodesicPath shoot(const ModelSurface& surface, ShootSpec start, double t_max,
                          double tol = 1e-10, ShootMethod method = ShootMethod::Auto) {
  if (!(t_max > 0.0)) throw DomainError("t_max must be positive");
  auto ray = std::make_shared<Ray>(surface, start.r0, start.phi, method, std::min(tol, 1e-10));
  std::vector<GeodesicState> samples;
  if (ray->closed_form()) {
    const std::size_t n = std::max<std::size_t>(17, static_cast<std::size_t>(std::ceil(t_max / 0.005)) + 1);
    for (std::size_t i = 0; i < n; ++i)
      samples.push_back(ray->at(t_max * static_cast<double>(i) / static_cast<double>(n - 1)));
  } else {
    ray->at(t_max);
    for (const auto& s : ray->integrator_samples())
      if (s.t < t_max) samples.push_back(s);
    samples.push_back(ray->at(t_max));
  }
  return GeodesicPath(std::move(samples), std::move(ray));
}

inline double radial_distance_along(const GeodesicPath& path, double t) { return path.at(t).r; }

/// Solution of f'' + G(r(t)) f = 0 along a geodesic, stored for dense lookup.
class JacobiSolution {
 public:
  double operator()(double t) const { return eval(t, false); }
  double derivative(double t) const { return eval(t, true); }
  double t_max() const { return t_.back(); }

  /// First time after t_min where f changes sign, refined by bisection.
  std::optional<double> first_sign_change(double t_min = 1e-9) const {
    for (std::size_t i = 1; i < t_.size(); ++i) {
      if (t_[i] <= t_min) continue;
      const double a = std::max(t_[i - 1], t_min);
      const double fa = eval(a, false);
      if (fa == 0.0 && a > t_min) return a;
      if ((fa < 0) != (f_[i] < 0) && f_[i] != 0.0) {
        return bisect_root([this](double s) { return eval(s, false); }, a, t_[i], 1e-13);
      }
    }
    return std::nullopt;
  }

  std::vector<double> t_, f_, df_, ddf_;

 private:
  double eval(double t, bool deriv) const {
    if (t < t_.front() || t > t_.back() + 1e-12) throw DomainError("time outside the Jacobi solution");
    std::size_t i = static_cast<std::size_t>(std::upper_bound(t_.begin(), t_.end(), t) - t_.begin());
    i = std::clamp<std::size_t>(i, 1, t_.size() - 1) - 1;
    if (deriv) return hermite(t_[i], t_[i + 1], df_[i], df_[i + 1], ddf_[i], ddf_[i + 1], t);
    return hermite(t_[i], t_[i + 1], f_[i], f_[i + 1], df_[i], df_[i + 1], t);
  }
};

inline JacobiSolution jacobi_along(const ModelSurface& surface, const Ray& ray, double t_max,
                                   double f0, double fdot0, bool stop_at_zero = false) {
  JacobiSolution sol;
  OdeOptions opt;
  opt.h_max = 0.01;
  auto rhs = [&](double t, const std::array<double, 2>& s) {
    const double G = surface.curvature(ray.at(t).r);
    return std::array<double, 2>{s[1], -G * s[0]};
  };
  integrate_dopri<2>(rhs, 0.0, {f0, fdot0}, t_max, opt,
                     [&](double t, const std::array<double, 2>& s, const std::array<double, 2>& d) {
                       sol.t_.push_back(t);
                       sol.f_.push_back(s[0]);
                       sol.df_.push_back(s[1]);
                       sol.ddf_.push_back(d[1]);
                       if (stop_at_zero && sol.t_.size() > 2 && t > 1e-6) {
                         const double prev = sol.f_[sol.f_.size() - 2];
                         if ((prev < 0) != (s[0] < 0)) return false;
                       }
                       return true;
                     });
  return sol;
}

inline JacobiSolution scalar_jacobi(const ModelSurface& surface, const GeodesicPath& path,
                                    double f0, double fdot0) {
  return jacobi_along(surface, path.ray(), path.t_max(), f0, fdot0);
}

/// First conjugate time along a ray (zero of the Jacobi field with f(0)=0, f'(0)=1).
inline std::optional<double> conjugate_time(const ModelSurface& surface, const Ray& ray, double t_max) {
  const JacobiSolution sol = jacobi_along(surface, ray, t_max, 0.0, 1.0, true);
  return sol.first_sign_change(1e-6);
}

struct DistanceResult {
  double length = kInf;
  double phi = 0.0;  // launch angle at a of a minimizing geodesic toward b (reduced frame)
};

namespace detail {

inline double fold_angle(double dtheta) {
  double d = std::fmod(std::abs(dtheta), 2.0 * kPi);
  if (d > kPi) d = 2.0 * kPi - d;
  return d;
}

struct Crossing {
  double t;
  double theta;
};

/// Times where the ray meets the parallel r = rb, including narrow double
/// crossings and tangential touches between grid points.
inline std::vector<Crossing> parallel_crossings(const Ray& ray, double rb, double T, std::size_t n) {
  std::vector<Crossing> out;
  auto g = [&](double s) { return ray.at(s).r - rb; };
  auto add = [&](double tc) { out.push_back({tc, ray.at(tc).theta}); };
  std::vector<double> ts(n + 1), gs(n + 1);
  for (std::size_t i = 0; i <= n; ++i) {
    ts[i] = T * static_cast<double>(i) / static_cast<double>(n);
    gs[i] = g(ts[i]);
  }
  for (std::size_t i = 1; i <= n; ++i) {
    if (gs[i] == 0.0 || (gs[i] < 0) != (gs[i - 1] < 0))
      add(gs[i] == 0.0 ? ts[i] : bisect_root(g, ts[i - 1], ts[i], 1e-14));
  }
  // Extremum of g between grid points that does not show up as a sign change.
  for (std::size_t i = 1; i < n; ++i) {
    const bool peak = gs[i] >= gs[i - 1] && gs[i] >= gs[i + 1] && gs[i] < 0.0;
    const bool dip = gs[i] <= gs[i - 1] && gs[i] <= gs[i + 1] && gs[i] > 0.0;
    if (!peak && !dip) continue;
    const double sgn = peak ? 1.0 : -1.0;
    const Extremum e = golden_section_max([&](double s) { return sgn * g(s); }, ts[i - 1], ts[i + 1], 1e-13);
    if (e.value < -1e-12) continue;
    if (e.value <= 1e-12) {
      add(e.x);
      continue;
    }
    add(bisect_root(g, ts[i - 1], e.x, 1e-14));
    add(bisect_root(g, e.x, ts[i + 1], 1e-14));
  }
  std::sort(out.begin(), out.end(), [](const Crossing& x, const Crossing& y) { return x.t < y.t; });
  return out;
}

}  // namespace detail

/// Geodesic distance between two points of the model surface.
inline DistanceResult distance_detail(const ModelSurface& surface, SurfacePoint a, SurfacePoint b) {
  const double ell = surface.ell();
  if (a.r < 0 || b.r < 0 || a.r > ell || b.r > ell) throw DomainError("point outside the surface");
  const double dth = detail::fold_angle(b.theta - a.theta);
  if (a.r < 1e-12) return {b.r, 0.0};
  if (b.r < 1e-12) return {a.r, 0.0};
  if (surface.compact() && ell - a.r < 1e-12) return {ell - b.r, kPi};
  if (surface.compact() && ell - b.r < 1e-12) return {ell - a.r, kPi};

  if (surface.family() == Family::ConstantCurvature) {
    const double k = std::sqrt(surface.kappa());
    const double ca = std::cos(k * a.r), sa = std::sin(k * a.r);
    const double cb = std::cos(k * b.r), sb = std::sin(k * b.r);
    const double c = std::clamp(ca * cb + sa * sb * std::cos(dth), -1.0, 1.0);
    const double d = std::acos(c) / k;
    double phi = 0.0;
    if (d > 0.0 && std::sin(k * d) > 0.0) {
      const double cphi = (cb - ca * std::cos(k * d)) / (sa * std::sin(k * d));
      phi = std::acos(std::clamp(cphi, -1.0, 1.0));
    }
    return {d, phi};
  }

  DistanceResult best;
  auto offer = [&](double len, double phi) {
    if (len < best.length - 1e-13 || (std::abs(len - best.length) <= 1e-13 && phi < best.phi)) {
      best.length = len;
      best.phi = phi;
    }
  };
  if (dth < 1e-13) offer(std::abs(a.r - b.r), a.r > b.r ? 0.0 : kPi);
  if (std::abs(dth - kPi) < 1e-13) {
    offer(a.r + b.r, 0.0);
    if (surface.compact()) offer(2.0 * ell - a.r - b.r, kPi);
  }

  double T = a.r + b.r;
  if (surface.compact()) T = std::min(T, 2.0 * ell - a.r - b.r);
  T = T * (1.0 + 1e-9) + 1e-9;
  const std::size_t n_rays = 720;
  const std::size_t n_scan = 256;
  auto crossings = [&](double phi) { return detail::parallel_crossings(Ray(surface, a.r, phi), b.r, T, n_scan); };
  auto targets_in = [&](double lo, double hi) {
    std::vector<double> out;
    for (int m = 0; 2.0 * kPi * m - kPi <= hi; ++m)
      for (double target : {dth + 2.0 * kPi * m, 2.0 * kPi * (m + 1) - dth})
        if (target >= lo && target <= hi) out.push_back(target);
    return out;
  };

  // Bisects the k-th crossing between two rays with matching crossing counts.
  auto refine = [&](double pa, const detail::Crossing& ca, double pb, const detail::Crossing& cb, std::size_t k) {
    for (double target : targets_in(std::min(ca.theta, cb.theta), std::max(ca.theta, cb.theta))) {
      if (ca.theta == target) {
        offer(ca.t, pa);
        continue;
      }
      double lo = pa, hi = pb, fa = ca.theta - target, t_hit = ca.t;
      bool ok = true;
      for (int it = 0; it < 60 && hi - lo > 1e-14; ++it) {
        const double mid = 0.5 * (lo + hi);
        const auto c = crossings(mid);
        if (k >= c.size()) {
          ok = false;
          break;
        }
        const double fm = c[k].theta - target;
        t_hit = c[k].t;
        if ((fm < 0) == (fa < 0)) {
          lo = mid;
          fa = fm;
        } else {
          hi = mid;
        }
      }
      if (ok) offer(t_hit, 0.5 * (lo + hi));
    }
  };

  // Rays with different crossing counts straddle a tangency; subdivide toward it.
  std::function<void(double, const std::vector<detail::Crossing>&, double, const std::vector<detail::Crossing>&, int)>
      span = [&](double pa, const std::vector<detail::Crossing>& ca, double pb,
                 const std::vector<detail::Crossing>& cb, int depth) {
        if (ca.size() == cb.size()) {
          for (std::size_t k = 0; k < ca.size(); ++k) refine(pa, ca[k], pb, cb[k], k);
          return;
        }
        if (depth >= 24) {
          // Merged pair on the richer side: the tangency point is within the leaf.
          const auto& rich = ca.size() > cb.size() ? ca : cb;
          const double pr = ca.size() > cb.size() ? pa : pb;
          for (std::size_t k = 0; k + 1 < rich.size(); ++k) {
            const double lo = std::min(rich[k].theta, rich[k + 1].theta);
            const double hi = std::max(rich[k].theta, rich[k + 1].theta);
            if (!targets_in(lo, hi).empty() && rich[k + 1].t - rich[k].t < 1e-4)
              offer(0.5 * (rich[k].t + rich[k + 1].t), pr);
          }
          return;
        }
        const double mid = 0.5 * (pa + pb);
        const auto cm = crossings(mid);
        span(pa, ca, mid, cm, depth + 1);
        span(mid, cm, pb, cb, depth + 1);
      };

  std::vector<double> phis(n_rays);
  std::vector<std::vector<detail::Crossing>> cross(n_rays);
  for (std::size_t i = 0; i < n_rays; ++i) {
    phis[i] = std::min(kPi, kPi * static_cast<double>(i) / static_cast<double>(n_rays - 1));
    cross[i] = crossings(phis[i]);
  }
  for (std::size_t i = 0; i + 1 < n_rays; ++i) span(phis[i], cross[i], phis[i + 1], cross[i + 1], 0);
  if (!std::isfinite(best.length))
    throw ConvergenceError("no connecting geodesic found between (" + std::to_string(a.r) + "," +
                           std::to_string(a.theta) + ") and (" + std::to_string(b.r) + "," +
                           std::to_string(b.theta) + ")");
  return best;
}

inline double distance(const ModelSurface& surface, SurfacePoint a, SurfacePoint b) {
  return distance_detail(surface, a, b).length;
}

}  // namespace toposphere
