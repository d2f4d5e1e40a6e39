#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "degenflow/errors.hpp"

namespace degenflow {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

enum class PotentialKind { power_q, custom_table };

// Radial cubic spline used by custom-table potentials: H(z) = phi(|z|) with
// phi sampled on a uniform knot grid.  Natural end conditions.
class RadialSpline {
 public:
  RadialSpline() = default;
  RadialSpline(double r_max, std::vector<double> values)
      : r_max_(r_max), y_(std::move(values)) {
    if (y_.size() < 4 || r_max_ <= 0.0)
      throw std::invalid_argument("RadialSpline: need >= 4 knots and r_max > 0");
    const int n = static_cast<int>(y_.size());
    h_ = r_max_ / (n - 1);
    // second derivatives from the natural-spline tridiagonal system
    // (a = 1, b = 4, c = 1 on the interior knots), solved by Thomas
    m_.assign(n, 0.0);
    const int m = n - 2;
    if (m >= 1) {
      std::vector<double> b(m, 4.0), d(m);
      for (int i = 0; i < m; ++i)
        d[i] = 6.0 * (y_[i + 2] - 2.0 * y_[i + 1] + y_[i]) / (h_ * h_);
      for (int i = 1; i < m; ++i) {
        const double w = 1.0 / b[i - 1];
        b[i] -= w;
        d[i] -= w * d[i - 1];
      }
      m_[m] = d[m - 1] / b[m - 1];
      for (int i = m - 1; i >= 1; --i) m_[i] = (d[i - 1] - m_[i + 1]) / b[i - 1];
    }
  }

  bool empty() const { return y_.empty(); }
  double r_max() const { return r_max_; }

  double value(double r) const {
    auto [i, t] = locate(r);
    const double a = y_[i], b = y_[i + 1];
    return a + t * (b - a) -
           t * (1.0 - t) * ((2.0 - t) * m_[i] + (1.0 + t) * m_[i + 1]) * h_ * h_ / 6.0;
  }
  double deriv(double r) const {
    auto [i, t] = locate(r);
    return (y_[i + 1] - y_[i]) / h_ +
           h_ / 6.0 * (-(2.0 - 6.0 * t + 3.0 * t * t) * m_[i] +
                       (3.0 * t * t - 1.0) * m_[i + 1]);
  }
  double deriv2(double r) const {
    auto [i, t] = locate(r);
    return (1.0 - t) * m_[i] + t * m_[i + 1];
  }

 private:
  std::pair<int, double> locate(double r) const {
    r = std::clamp(r, 0.0, r_max_);
    int i = std::min(static_cast<int>(r / h_), static_cast<int>(y_.size()) - 2);
    return {i, (r - i * h_) / h_};
  }
  double r_max_ = 0.0, h_ = 0.0;
  std::vector<double> y_, m_;
};

// A degenerate convex potential H with its force F = grad H.  The stock
// family is H_q(z) = (1/q)(|z|-1)_+^q, which vanishes together with its
// Hessian on the closed unit ball; an optional quadratic regularizer
// (reg_eps/2)|z|^2 restores uniform ellipticity for continuation solves.
struct PotentialSpec {
  PotentialKind kind = PotentialKind::power_q;
  double q = 2.0;        // exponent > 1
  double p = 2.0;        // conjugate exponent, 1/p + 1/q = 1
  double reg_eps = 0.0;  // quadratic regularization strength, 0 = pure
  double hess_cap = 0.0; // upper bound on D^2 H over the working range
  double work_radius = 4.0;
  // C2 mollification width of the activation ramp (r - 1)_+ used by the
  // continuation solver; 0 = exact potential.  Smoothed stages keep the
  // Hessian continuous across the dead-zone boundary, which plain damped
  // Newton needs near the free boundary.
  double kink_smoothing = 0.0;
  RadialSpline table;    // radial profile for custom_table potentials

  static PotentialSpec power(double q_exp, double reg = 0.0,
                             double radius = 4.0) {
    if (!(q_exp > 1.0)) throw std::invalid_argument("potential: need q > 1");
    if (reg < 0.0) throw std::invalid_argument("potential: reg_eps >= 0");
    PotentialSpec s;
    s.kind = PotentialKind::power_q;
    s.q = q_exp;
    s.p = q_exp / (q_exp - 1.0);
    s.reg_eps = reg;
    s.work_radius = radius;
    // max radial eigenvalue of D^2 H_q on [0, R] sits at R for q >= 2;
    // sample to cover q < 2 as well
    s.hess_cap = s.sampled_hessian_extreme(/*want_max=*/true, 0.0, radius);
    return s;
  }

  static PotentialSpec custom(double r_max, std::vector<double> radial_values,
                              double reg = 0.0) {
    PotentialSpec s;
    s.kind = PotentialKind::custom_table;
    s.q = 2.0;
    s.p = 2.0;
    s.reg_eps = reg;
    s.work_radius = r_max;
    s.table = RadialSpline(r_max, std::move(radial_values));
    s.hess_cap = s.sampled_hessian_extreme(true, 0.0, r_max);
    return s;
  }

  bool valid() const {
    return q > 1.0 && std::abs(1.0 / p + 1.0 / q - 1.0) < 1e-12 &&
           reg_eps >= 0.0 && hess_cap > 0.0;
  }

  // Huber-type ramp replacing t_+ when kink_smoothing > 0
  double ramp(double t) const {
    const double d = kink_smoothing;
    if (t <= 0.0) return 0.0;
    if (d > 0.0 && t < d) return 0.5 * t * t / d;
    return t - 0.5 * d;
  }
  double ramp_d(double t) const {
    const double d = kink_smoothing;
    if (t <= 0.0) return 0.0;
    return (d > 0.0 && t < d) ? t / d : 1.0;
  }

  // radial profile phi with H(z) = phi(|z|) + (reg_eps/2)|z|^2
  double phi(double r) const {
    if (kind != PotentialKind::power_q) return table.value(r);
    const double t = r - 1.0, d = kink_smoothing;
    if (t <= 0.0) return 0.0;
    if (d == 0.0 || t >= d)
      return (std::pow(ramp(t), q) - (d > 0.0 ? std::pow(0.5 * d, q) : 0.0)) /
                 q +
             (d > 0.0 ? std::pow(2.0 * d, 1.0 - q) *
                            std::pow(d, 2.0 * q - 1.0) / (2.0 * q - 1.0)
                      : 0.0);
    return std::pow(2.0 * d, 1.0 - q) * std::pow(t, 2.0 * q - 1.0) /
           (2.0 * q - 1.0);
  }
  double phi_d(double r) const {
    if (kind != PotentialKind::power_q) return table.deriv(r);
    return std::pow(ramp(r - 1.0), q - 1.0);
  }
  double phi_dd(double r) const {
    if (kind != PotentialKind::power_q) return table.deriv2(r);
    const double t = r - 1.0, d = kink_smoothing;
    if (t <= 0.0) return (t == 0.0 && q == 2.0 && d == 0.0) ? 1.0 : 0.0;
    if (d == 0.0)
      return (q - 1.0) * std::pow(t, q - 2.0);
    return (q - 1.0) * std::pow(ramp(t), q - 2.0) * ramp_d(t);
  }

  double sampled_hessian_extreme(bool want_max, double r_lo, double r_hi,
                                 int samples = 4096) const {
    double best = want_max ? 0.0 : std::numeric_limits<double>::infinity();
    for (int i = 0; i <= samples; ++i) {
      double r = r_lo + (r_hi - r_lo) * i / samples;
      if (kind == PotentialKind::power_q && q < 2.0 && std::abs(r - 1.0) < 1e-9)
        r = 1.0 + 1e-9;  // step off the kink
      const double lr = phi_dd(r) + reg_eps;
      const double lt = (r > 0.0 ? phi_d(r) / r : phi_dd(r)) + reg_eps;
      if (want_max)
        best = std::max({best, lr, lt});
      else
        best = std::min({best, lr, lt});
    }
    return want_max ? best * (1.0 + 1e-9) + (best == 0.0 ? 1e-12 : 0.0) : best;
  }
};

inline double eval_potential(const PotentialSpec& spec, const Vec2& z) {
  const double r = z.norm();
  double v = spec.phi(r);
  if (spec.reg_eps > 0.0) v += 0.5 * spec.reg_eps * z.squaredNorm();
  return v;
}

inline Vec2 eval_force(const PotentialSpec& spec, const Vec2& z) {
  const double r = z.norm();
  Vec2 f = Vec2::Zero();
  if (r > 0.0) {
    const double s = spec.phi_d(r);
    if (s != 0.0) f = (s / r) * z;
  }
  if (spec.reg_eps > 0.0) f += spec.reg_eps * z;
  return f;
}

inline Mat2 eval_hessian(const PotentialSpec& spec, const Vec2& z) {
  const double r = z.norm();
  if (spec.kind == PotentialKind::power_q && spec.q < 2.0 &&
      spec.kink_smoothing == 0.0 && std::abs(r - 1.0) < 1e-14)
    throw DegenerateKink("eval_hessian: D^2 H_q unbounded at |z| = 1 for q < 2");
  Mat2 h = spec.reg_eps * Mat2::Identity();
  if (r > 0.0) {
    const Mat2 pr = z * z.transpose() / (r * r);
    const Mat2 pt = Mat2::Identity() - pr;
    h += spec.phi_dd(r) * pr + (spec.phi_d(r) / r) * pt;
  } else {
    h += spec.phi_dd(0.0) * Mat2::Identity();
  }
  return h;
}

// Certified lower bound c_delta on the smallest eigenvalue of D^2 H over
// the annulus {1 + delta <= |z| <= r_max}.  Sampled on a fine radial grid;
// for a radial potential the eigenvalues are phi'' and phi'/r, so the
// sampling is exact up to the spline/pow evaluation itself.
inline double ellipticity_floor(const PotentialSpec& spec, double delta,
                                double r_max = 0.0) {
  if (!(delta > 0.0)) throw std::invalid_argument("ellipticity_floor: delta > 0");
  if (r_max <= 0.0) r_max = std::max(4.0, spec.work_radius);
  const double m =
      spec.sampled_hessian_extreme(/*want_max=*/false, 1.0 + delta, r_max, 8192);
  if (!(m > 0.0))
    throw NotElliptic("ellipticity_floor: sampled Hessian minimum <= 0");
  return m * (1.0 - 1e-9);
}

// Legendre conjugate H*(sigma).  For the power family this is the closed
// form |s| + (1/p)|s|^p; custom tables fall back to a sampled transform
// (conjugate_is_closed_form reports which branch applies).
inline bool conjugate_is_closed_form(const PotentialSpec& spec) {
  return spec.kind == PotentialKind::power_q;
}

inline double numerical_legendre_transform(const PotentialSpec& spec, double s,
                                           double r_hi = 0.0, int n = 200000) {
  if (r_hi <= 0.0) r_hi = 2.0 * spec.work_radius;
  double best = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double r = r_hi * i / n;
    best = std::max(best, r * s - spec.phi(r));
  }
  return best;
}

inline double eval_conjugate(const PotentialSpec& spec, const Vec2& sigma) {
  if (spec.reg_eps != 0.0)
    throw std::invalid_argument("eval_conjugate: defined for reg_eps = 0");
  const double s = sigma.norm();
  if (conjugate_is_closed_form(spec))
    return s + std::pow(s, spec.p) / spec.p;
  return numerical_legendre_transform(spec, s);
}

// prox of tau * H*: argmin_s (1/2)|s - s0|^2 + tau(|s| + (1/p)|s|^p).
// Radial and strictly convex in the magnitude; the nonsmooth |s| term
// gives a dead band |s0| <= tau.  Solved by bisection on the stationarity
// residual g(t) = t + tau t^{p-1} - (|s0| - tau).
inline Vec2 prox_conjugate(const PotentialSpec& spec, const Vec2& sigma0,
                           double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("prox_conjugate: tau > 0");
  if (spec.reg_eps != 0.0)
    throw std::invalid_argument("prox_conjugate: defined for reg_eps = 0");
  const double m = sigma0.norm();
  if (m <= tau) return Vec2::Zero();
  const double target = m - tau;
  double lo = 0.0, hi = target;  // g(lo) < 0 <= g(hi)
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double g = mid + tau * std::pow(mid, spec.p - 1.0) - target;
    (g < 0.0 ? lo : hi) = mid;
    if (hi - lo < 1e-15 * std::max(1.0, m)) break;
  }
  return (0.5 * (lo + hi) / m) * sigma0;
}

// Inverts F radially: given a in the range of F, the unique |z| with
// phi'(|z|) = |a| (unique once |a| > 0; every preimage of 0 lies in the
// dead ball and is killed by the truncation below).
inline double invert_force_radius(const PotentialSpec& spec, double a_norm) {
  if (a_norm == 0.0) return 1.0;
  if (spec.kind == PotentialKind::power_q)
    return 1.0 + std::pow(a_norm, 1.0 / (spec.q - 1.0));
  double lo = 0.0, hi = spec.table.r_max();
  if (spec.phi_d(hi) < a_norm)
    throw InversionFailed("invert_force_radius: |a| above table range");
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (spec.phi_d(mid) < a_norm ? lo : hi) = mid;
    if (hi - lo < 1e-14 * std::max(1.0, hi)) break;
  }
  return 0.5 * (lo + hi);
}

// gamma_delta(a) = h_{1+delta}(z . e) where F(z) = a, h_k(t) = (t - k)_+.
// Well-defined (all preimages of a = 0 are truncated away) and Lipschitz
// with constant at most 1 / ellipticity_floor(delta).
inline double gamma_delta(const PotentialSpec& spec, const Vec2& a,
                          double delta, const Vec2& e) {
  if (!(delta > 0.0)) throw std::invalid_argument("gamma_delta: delta > 0");
  const double an = a.norm();
  if (an == 0.0) return 0.0;
  const double r = invert_force_radius(spec, an);
  const double ze = r * a.dot(e) / an;
  return std::max(ze - (1.0 + delta), 0.0);
}

// --- serialization -------------------------------------------------------

inline void to_json(nlohmann::json& j, const PotentialSpec& s) {
  j = nlohmann::json{{"kind", s.kind == PotentialKind::power_q ? "power_q"
                                                               : "custom_table"},
                     {"q", s.q},
                     {"reg_eps", s.reg_eps},
                     {"hess_cap", s.hess_cap}};
  if (s.work_radius != 4.0) j["work_radius"] = s.work_radius;
}

inline void from_json(const nlohmann::json& j, PotentialSpec& s) {
  const std::string kind = j.value("kind", "power_q");
  const double q = j.value("q", 2.0);
  const double reg = j.value("reg_eps", 0.0);
  const double radius = j.value("work_radius", 4.0);
  if (kind == "power_q") {
    s = PotentialSpec::power(q, reg, radius);
  } else if (kind == "custom_table") {
    if (!j.contains("table"))
      throw ConfigInvalid("potential: custom_table needs a 'table' object");
    s = PotentialSpec::custom(j["table"].value("r_max", radius),
                              j["table"]["values"].get<std::vector<double>>(),
                              reg);
  } else {
    throw ConfigInvalid("potential: unknown kind '" + kind + "'");
  }
  if (j.contains("hess_cap")) s.hess_cap = j["hess_cap"].get<double>();
  if (j.contains("p")) {
    const double p = j["p"].get<double>();
    if (std::abs(1.0 / p + 1.0 / q - 1.0) > 1e-12)
      throw ConfigInvalid("potential: 1/p + 1/q must equal 1");
  }
}

}  // namespace degenflow
