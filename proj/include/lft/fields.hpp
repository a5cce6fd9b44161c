#pragma once

// Time-dependent electromagnetic pulses in the Weyl gauge (scalar potential
// zero, E = -dA/dt).  The default mode is the space-homogeneous pulse: the
// vector potential equals amp(t) * w inside the cube [-R, R]^d and vanishes
// outside, so the electric field is homogeneous in the cube.  Line integrals
// along bonds are exact in that mode; the sampled mode (smooth spatial
// envelope) uses Gauss-Legendre quadrature of order 8.

#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "lattice.hpp"

namespace lft {

// 8-point Gauss-Legendre nodes/weights on [0,1].
inline const std::vector<std::pair<double, double>>& gauss_legendre8() {
  static const std::vector<std::pair<double, double>> gl = [] {
    const double x[4] = {0.1834346424956498, 0.5255324099163290,
                         0.7966664774136267, 0.9602898564975363};
    const double w[4] = {0.3626837833783620, 0.3137066458778873,
                         0.2223810344533745, 0.1012285362903763};
    std::vector<std::pair<double, double>> v;
    for (int i = 3; i >= 0; --i) v.push_back({0.5 * (1.0 - x[i]), 0.5 * w[i]});
    for (int i = 0; i < 4; ++i) v.push_back({0.5 * (1.0 + x[i]), 0.5 * w[i]});
    return v;
  }();
  return gl;
}

enum class PulseProfile { smooth_bump, poly_bump };
enum class PulseMode { homogeneous, sampled };

struct Pulse {
  PulseProfile profile = PulseProfile::smooth_bump;
  PulseMode mode = PulseMode::homogeneous;
  double t0 = 0.0;
  double t1 = 1.0;
  double amplitude = 1.0;       // peak of the time profile of A
  VectorXd direction;           // unit vector w
  double support_radius = 1.0;  // A vanishes outside [-R, R]^d (after scaling)
  double space_scale = 1.0;     // rescaled pulse A_l(t, x) = A(t, x / l)
  double strength = 1.0;        // eta
  double coupling_sign = 1.0;   // sign of the charge coupling in the phases
  double envelope_sigma = 0.0;  // sampled mode: Gaussian spatial envelope

  double radius() const { return support_radius * space_scale; }

  void validate() const {
    if (!(t1 > t0)) throw std::invalid_argument("Pulse: need t1 > t0");
    if (direction.size() == 0) throw std::invalid_argument("Pulse: missing direction");
    if (std::abs(direction.norm() - 1.0) > 1e-12)
      throw std::invalid_argument("Pulse: direction must be a unit vector");
    if (!(support_radius > 0) || !(space_scale > 0))
      throw std::invalid_argument("Pulse: support radius must be positive");
  }

  // Smooth-in-time amplitude, supported on (t0, t1), peak value `amplitude`.
  double time_profile(double t) const {
    double u = (2.0 * t - (t0 + t1)) / (t1 - t0);
    if (u <= -1.0 || u >= 1.0) return 0.0;
    double g;
    if (profile == PulseProfile::smooth_bump)
      g = std::exp(1.0 - 1.0 / (1.0 - u * u));
    else
      g = std::pow(1.0 - u * u, 4);
    return strength * amplitude * g;
  }

  double time_profile_dt(double t) const {
    double u = (2.0 * t - (t0 + t1)) / (t1 - t0);
    if (u <= -1.0 || u >= 1.0) return 0.0;
    double du = 2.0 / (t1 - t0);
    double s = 1.0 - u * u;
    double g, dg_du;
    if (profile == PulseProfile::smooth_bump) {
      g = std::exp(1.0 - 1.0 / s);
      dg_du = g * (-2.0 * u / (s * s));
    } else {
      dg_du = -8.0 * u * std::pow(s, 3);
    }
    return strength * amplitude * dg_du * du;
  }

  bool active(double t) const { return t > t0 && t < t1; }

  // Spatial envelope at a real-space point.
  double envelope(const VectorXd& x) const {
    double R = radius();
    for (int i = 0; i < x.size(); ++i)
      if (std::abs(x[i]) > R) return 0.0;
    if (mode == PulseMode::homogeneous) return 1.0;
    double s2 = envelope_sigma > 0 ? envelope_sigma * envelope_sigma
                                   : 0.25 * R * R;
    return std::exp(-x.squaredNorm() / (2.0 * s2 * space_scale * space_scale));
  }

  VectorXd vector_potential(double t, const VectorXd& x) const {
    return time_profile(t) * envelope(x) * direction;
  }

  VectorXd electric_field(double t, const VectorXd& x) const {
    return -time_profile_dt(t) * envelope(x) * direction;
  }
};

inline Pulse scale_strength(Pulse p, double eta) {
  p.strength *= eta;
  return p;
}

inline Pulse rescale_pulse(Pulse p, double l) {
  if (!(l > 0)) throw std::invalid_argument("rescale_pulse: l must be positive");
  p.space_scale *= l;
  return p;
}

namespace detail {

// Fraction of the segment x -> y (integration variable alpha in [0,1])
// lying inside the cube [-R, R]^d, exact by interval intersection.
inline double inside_fraction(const Coords& x, const Coords& y, double R) {
  double lo = 0.0, hi = 1.0;
  for (size_t i = 0; i < x.size(); ++i) {
    double a = x[i], dlt = double(y[i]) - double(x[i]);
    // need |a + alpha*dlt| <= R
    if (dlt == 0.0) {
      if (std::abs(a) > R) return 0.0;
      continue;
    }
    double c1 = (-R - a) / dlt, c2 = (R - a) / dlt;
    lo = std::max(lo, std::min(c1, c2));
    hi = std::min(hi, std::max(c1, c2));
  }
  return std::max(0.0, hi - lo);
}

inline VectorXd to_vec(const Coords& x) {
  VectorXd v(x.size());
  for (size_t i = 0; i < x.size(); ++i) v[i] = x[i];
  return v;
}

}  // namespace detail

// int_0^1 [A(t, x + alpha (y - x))] . (y - x) d alpha, the line integral of
// the vector potential along the bond from x to y.
inline double line_integral_A(const Pulse& p, double t, const Coords& x,
                              const Coords& y) {
  VectorXd xv = detail::to_vec(x), yv = detail::to_vec(y);
  VectorXd delta = yv - xv;
  double proj = p.direction.dot(delta);
  if (proj == 0.0) return 0.0;
  if (p.mode == PulseMode::homogeneous)
    return p.time_profile(t) * proj * detail::inside_fraction(x, y, p.radius());
  double acc = 0;
  for (auto [node, wt] : gauss_legendre8())
    acc += wt * p.envelope(xv + node * delta);
  return p.time_profile(t) * proj * acc;
}

// d/dt of the line integral above (the profile is the only time dependence).
inline double line_integral_A_dt(const Pulse& p, double t, const Coords& x,
                                 const Coords& y) {
  double prof = p.time_profile(t);
  if (prof != 0.0) return line_integral_A(p, t, x, y) * p.time_profile_dt(t) / prof;
  // at the support edge the profile vanishes to all orders; inside zeros the
  // profile never vanishes for the bump shapes used here
  return 0.0;
}

// Bond tension of the electric field: int_0^1 [E(t, ...)] . (x2 - x1) d alpha.
// With E = -dA/dt this is minus the time derivative of line_integral_A.
inline double bond_tension(const Pulse& p, double t, const Coords& x1,
                           const Coords& x2) {
  VectorXd xv = detail::to_vec(x1), yv = detail::to_vec(x2);
  VectorXd delta = yv - xv;
  double proj = p.direction.dot(delta);
  if (proj == 0.0) return 0.0;
  if (p.mode == PulseMode::homogeneous)
    return -p.time_profile_dt(t) * proj * detail::inside_fraction(x1, x2, p.radius());
  double acc = 0;
  for (auto [node, wt] : gauss_legendre8())
    acc += wt * p.envelope(xv + node * delta);
  return -p.time_profile_dt(t) * proj * acc;
}

// Peierls phase attached to the (x, y) hopping entry.
inline Complex peierls_phase(const Pulse& p, double t, const Coords& x,
                             const Coords& y) {
  double u = p.coupling_sign * line_integral_A(p, t, x, y);
  return std::exp(Complex(0, u));
}

}  // namespace lft
