#pragma once

// Finite boxes of the cubic lattice, disorder realizations, decay functions
// and interaction norms.  Everything downstream (Fock space, Hamiltonians,
// transport coefficients) is built on top of the types in this header.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace lft {

using Complex = std::complex<double>;
using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXd;

using Coords = std::vector<int>;  // one lattice point, d entries

// Default ceiling on the number of sites a box may carry.  Boxes are used
// both for one-particle objects (where a few thousand sites are fine) and
// as the support of Fock spaces (where the hard limit is much smaller and
// enforced separately by FockBasis).
inline constexpr int kDefaultSiteCap = 4096;

struct Box {
  int d = 1;         // spatial dimension
  int radius = 1;    // box is {-radius,...,radius}^d
  std::vector<Coords> sites;                 // lexicographic order
  std::vector<std::pair<int, int>> bonds;    // NN pairs (i,j), i<j, lex order

  int n_sites() const { return static_cast<int>(sites.size()); }
  int n_bonds() const { return static_cast<int>(bonds.size()); }

  bool contains(const Coords& x) const {
    for (int c : x)
      if (std::abs(c) > radius) return false;
    return static_cast<int>(x.size()) == d;
  }

  // Lexicographic rank of a coordinate tuple; -1 if outside the box.
  int index_of(const Coords& x) const {
    if (!contains(x)) return -1;
    int side = 2 * radius + 1, idx = 0;
    for (int i = 0; i < d; ++i) idx = idx * side + (x[i] + radius);
    return idx;
  }

  int bond_index(int i, int j) const {
    if (i > j) std::swap(i, j);
    auto it = bond_lookup_.find({i, j});
    return it == bond_lookup_.end() ? -1 : it->second;
  }

  std::map<std::pair<int, int>, int> bond_lookup_;
};

inline double euclid_dist(const Coords& x, const Coords& y) {
  double s = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    double t = x[i] - y[i];
    s += t * t;
  }
  return std::sqrt(s);
}

inline bool nearest_neighbors(const Coords& x, const Coords& y) {
  int diff = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    int a = std::abs(x[i] - y[i]);
    if (a > 1) return false;
    diff += a;
  }
  return diff == 1;
}

inline Box enumerate_box(int d, int radius, int site_cap = kDefaultSiteCap) {
  if (d < 1) throw std::invalid_argument("enumerate_box: dimension must be >= 1");
  if (radius < 0) throw std::invalid_argument("enumerate_box: radius must be >= 0");
  double count = std::pow(2.0 * radius + 1.0, d);
  if (count > site_cap)
    throw std::length_error("enumerate_box: box exceeds the site cap");

  Box box;
  box.d = d;
  box.radius = radius;
  int side = 2 * radius + 1;
  int n = static_cast<int>(std::lround(count));
  box.sites.reserve(n);
  for (int idx = 0; idx < n; ++idx) {
    Coords x(d);
    int rem = idx;
    for (int i = d - 1; i >= 0; --i) {
      x[i] = rem % side - radius;
      rem /= side;
    }
    box.sites.push_back(std::move(x));
  }
  // Bonds in lexicographic order of (i,j): for each site, partner at +e_k.
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < d; ++k) {
      Coords y = box.sites[i];
      y[k] += 1;
      int j = box.index_of(y);
      if (j >= 0) {
        box.bond_lookup_[{std::min(i, j), std::max(i, j)}] =
            static_cast<int>(box.bonds.size());
        box.bonds.emplace_back(std::min(i, j), std::max(i, j));
      }
    }
  }
  return box;
}

// ------------------------------------------------------------------------
// Counter-based PRNG.  splitmix64 applied to seed+counter; one stream per
// realization.  Layout: site fields first (one draw per site, lex order),
// then bond fields (two draws per rejection attempt, bonds in lex order).
// ------------------------------------------------------------------------

struct CounterRng {
  uint64_t seed = 0;
  uint64_t counter = 0;

  uint64_t next_u64() {
    uint64_t z = seed + (++counter) * 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }
  // uniform on [0,1)
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
  // uniform on [-1,1]
  double next_symmetric() { return 2.0 * next_unit() - 1.0; }
};

enum class DisorderMode { iid_uniform, deterministic_zero, user_table };

struct Disorder {
  uint64_t seed = 0;
  int d = 1;
  int radius = 1;
  std::vector<double> omega1;    // per site, in [-1,1]
  std::vector<Complex> omega2;   // per bond, |.| <= 1
};

inline Disorder sample_disorder(uint64_t seed, const Box& box,
                                DisorderMode mode = DisorderMode::iid_uniform,
                                const Disorder* table = nullptr) {
  Disorder w;
  w.seed = seed;
  w.d = box.d;
  w.radius = box.radius;
  if (mode == DisorderMode::deterministic_zero) {
    w.omega1.assign(box.n_sites(), 0.0);
    w.omega2.assign(box.n_bonds(), Complex(0, 0));
    return w;
  }
  if (mode == DisorderMode::user_table) {
    if (!table) throw std::invalid_argument("sample_disorder: missing user table");
    if (static_cast<int>(table->omega1.size()) != box.n_sites() ||
        static_cast<int>(table->omega2.size()) != box.n_bonds())
      throw std::invalid_argument("sample_disorder: table shape mismatch");
    for (double v : table->omega1)
      if (!(v >= -1.0 && v <= 1.0))
        throw std::domain_error("sample_disorder: omega1 entry outside [-1,1]");
    for (Complex z : table->omega2)
      if (!(std::abs(z) <= 1.0 + 1e-15))
        throw std::domain_error("sample_disorder: omega2 entry outside unit disc");
    w.omega1 = table->omega1;
    w.omega2 = table->omega2;
    return w;
  }
  CounterRng rng{seed, 0};
  w.omega1.resize(box.n_sites());
  for (int i = 0; i < box.n_sites(); ++i) w.omega1[i] = rng.next_symmetric();
  w.omega2.resize(box.n_bonds());
  for (int b = 0; b < box.n_bonds(); ++b) {
    // rejection sampling from the bounding square onto the closed unit disc
    for (;;) {
      double re = rng.next_symmetric();
      double im = rng.next_symmetric();
      if (re * re + im * im <= 1.0) {
        w.omega2[b] = Complex(re, im);
        break;
      }
    }
  }
  return w;
}

inline nlohmann::json disorder_to_json(const Disorder& w, const Box& box) {
  nlohmann::json j;
  j["seed"] = w.seed;
  j["d"] = w.d;
  j["L"] = w.radius;
  j["omega1"] = w.omega1;
  nlohmann::json bonds = nlohmann::json::array();
  for (int b = 0; b < box.n_bonds(); ++b) {
    auto [i, k] = box.bonds[b];
    bonds.push_back({{"bond", {box.sites[i], box.sites[k]}},
                     {"re", w.omega2[b].real()},
                     {"im", w.omega2[b].imag()}});
  }
  j["omega2"] = bonds;
  return j;
}

inline Disorder disorder_from_json(const nlohmann::json& j, const Box& box) {
  Disorder w;
  w.seed = j.at("seed").get<uint64_t>();
  w.d = j.at("d").get<int>();
  w.radius = j.at("L").get<int>();
  if (w.d != box.d || w.radius != box.radius)
    throw std::invalid_argument("disorder_from_json: box mismatch");
  w.omega1 = j.at("omega1").get<std::vector<double>>();
  w.omega2.assign(box.n_bonds(), Complex(0, 0));
  for (const auto& e : j.at("omega2")) {
    Coords x = e.at("bond").at(0).get<Coords>();
    Coords y = e.at("bond").at(1).get<Coords>();
    int b = box.bond_index(box.index_of(x), box.index_of(y));
    if (b < 0) throw std::invalid_argument("disorder_from_json: unknown bond");
    w.omega2[b] = Complex(e.at("re").get<double>(), e.at("im").get<double>());
  }
  return w;
}

// ------------------------------------------------------------------------
// One-particle hopping matrix.  Diagonal 2d everywhere (open boundary:
// missing neighbors only remove off-diagonal entries), off-diagonal
// -(1 + vartheta*omega2) on nearest-neighbor bonds, Hermitian by pairing
// the bond field with its conjugate on the reversed orientation.
// ------------------------------------------------------------------------

inline MatrixXcd one_particle_hopping(const Box& box, const Disorder& w,
                                      double vartheta) {
  if (vartheta < 0) throw std::invalid_argument("one_particle_hopping: vartheta < 0");
  int n = box.n_sites();
  MatrixXcd h = MatrixXcd::Zero(n, n);
  for (int i = 0; i < n; ++i) h(i, i) = 2.0 * box.d;
  for (int b = 0; b < box.n_bonds(); ++b) {
    auto [i, j] = box.bonds[b];
    // orientation convention: omega2 is attached to the (i,j) entry with
    // i < j; Hermiticity fixes the conjugate on (j,i).
    Complex c = -(1.0 + vartheta * w.omega2[b]);
    h(i, j) = c;
    h(j, i) = std::conj(c);
  }
  return h;
}

// ------------------------------------------------------------------------
// Decay functions and the finite-box surrogates of their norm constants.
// ------------------------------------------------------------------------

struct DecayFn {
  std::function<double(double)> f;
  std::string label;

  double operator()(double r) const { return f(r); }
};

inline DecayFn polynomial_decay(int d, double eps) {
  if (eps <= 0) throw std::invalid_argument("polynomial_decay: eps must be > 0");
  return {[d, eps](double r) { return std::pow(1.0 + r, -(d + eps)); },
          "poly(d=" + std::to_string(d) + ",eps=" + std::to_string(eps) + ")"};
}

inline DecayFn exponential_decay(double rate, double power) {
  if (rate < 0 || power < 0)
    throw std::invalid_argument("exponential_decay: negative parameter");
  return {[rate, power](double r) {
            return std::exp(-rate * r) * std::pow(1.0 + r, -power);
          },
          "exp(rate=" + std::to_string(rate) + ",power=" + std::to_string(power) + ")"};
}

inline void check_decay_fn(const DecayFn& F, double rmax = 32.0) {
  double prev = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= 256; ++i) {
    double r = rmax * i / 256.0;
    double v = F(r);
    if (!(v > 0)) throw std::domain_error("decay function must be positive");
    if (v > prev + 1e-12) throw std::domain_error("decay function must be nonincreasing");
    prev = v;
  }
}

struct DecayConstants {
  double norm1 = 0;        // sum over the box of F(|x|)
  double convolution = 0;  // max over pairs of sum_z F(|x-z|)F(|z-y|)/F(|x-y|)
};

inline DecayConstants decay_constants(const DecayFn& F, const Box& box) {
  check_decay_fn(F, 2.0 * box.radius * std::sqrt(double(box.d)) + 1.0);
  DecayConstants c;
  int n = box.n_sites();
  Coords origin(box.d, 0);
  for (int i = 0; i < n; ++i) c.norm1 += F(euclid_dist(box.sites[i], origin));
  MatrixXd dist(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) dist(i, j) = F(euclid_dist(box.sites[i], box.sites[j]));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double s = 0;
      for (int z = 0; z < n; ++z) s += dist(i, z) * dist(z, j);
      c.convolution = std::max(c.convolution, s / dist(i, j));
    }
  return c;
}

// ------------------------------------------------------------------------
// Interaction families.  A term is a finite-support operator; we carry the
// support (site indices), enough structure to build the operator on a Fock
// space, and its exact operator norm on the local factor.
// ------------------------------------------------------------------------

struct InteractionTerm {
  std::vector<int> support;  // sorted site indices
  // density-density data: coefficient * n_{support[0]} * n_{support[1]} ...
  // For |support|==1 this is coefficient * n_x.
  double coefficient = 0;
  double norm = 0;  // operator norm on the local factor
};

struct InteractionSpec {
  std::vector<InteractionTerm> terms;
};

// Yukawa profile v(r) = D exp(-m r) / (1 + r).
inline std::function<double(double)> yukawa_profile(double D, double m) {
  return [D, m](double r) { return D * std::exp(-m * r) / (1.0 + r); };
}

// Gauge-invariant pair interactions sum_{x,y} v(|x-y|) n_x n_y collected per
// unordered pair; the ordered double count makes the pair coefficient 2v.
// The x == y diagonal contributes v(0) n_x since n_x^2 = n_x.
inline InteractionSpec density_density(const Box& box,
                                       const std::function<double(double)>& v,
                                       double range_cut = 1e300) {
  InteractionSpec spec;
  int n = box.n_sites();
  for (int i = 0; i < n; ++i) {
    double c = v(0.0);
    if (c != 0.0) spec.terms.push_back({{i}, c, std::abs(c)});
    for (int j = i + 1; j < n; ++j) {
      double r = euclid_dist(box.sites[i], box.sites[j]);
      if (r > range_cut) continue;
      double cij = 2.0 * v(r);
      if (cij != 0.0) spec.terms.push_back({{i, j}, cij, std::abs(cij)});
    }
  }
  return spec;
}

// sup_{x,y} sum over terms whose support contains both x and y of
// ||term|| / F(|x-y|), the finite-box interaction norm surrogate.
inline double interaction_norm(const InteractionSpec& spec, const DecayFn& F,
                               const Box& box) {
  int n = box.n_sites();
  MatrixXd acc = MatrixXd::Zero(n, n);
  for (const auto& t : spec.terms)
    for (int a : t.support)
      for (int b : t.support) acc(a, b) += t.norm;
  double best = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (acc(i, j) > 0)
        best = std::max(best, acc(i, j) / F(euclid_dist(box.sites[i], box.sites[j])));
  return best;
}

}  // namespace lft
