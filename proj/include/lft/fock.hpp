#pragma once

// Fock space over a finite box via the Jordan-Wigner encoding.  Basis
// states are occupation bitmasks; bit i is the occupation of the site with
// lexicographic index i.  Creation/annihilation matrices carry the sign
// string over lower site indices.

#include <bit>
#include <cstdint>
#include <stdexcept>

#include <Eigen/Dense>

#include "lattice.hpp"

namespace lft {

// Dense matrices throughout; the hard cap keeps dimensions manageable.
inline constexpr int kMaxFockSites = 14;

struct FockBasis {
  Box box;
  int n_sites = 0;
  int dim = 0;
  uint64_t hash = 0;

  explicit FockBasis(const Box& b) : box(b), n_sites(b.n_sites()) {
    if (n_sites > kMaxFockSites)
      throw std::length_error("FockBasis: box too large for a dense Fock space");
    dim = 1 << n_sites;
    hash = (uint64_t(b.d) << 40) ^ (uint64_t(b.radius) << 20) ^ uint64_t(n_sites);
    hash = hash * 0x9e3779b97f4a7c15ull + 0x2545f4914f6cdd1dull;
  }

  int occupation(int state, int site) const { return (state >> site) & 1; }
  int total_number(int state) const { return std::popcount(unsigned(state)); }
  // Jordan-Wigner sign: parity of occupied sites with index below `site`.
  double jw_sign(int state, int site) const {
    return (std::popcount(unsigned(state) & ((1u << site) - 1)) & 1) ? -1.0 : 1.0;
  }
};

struct Operator {
  MatrixXcd mat;
  uint64_t basis_hash = 0;

  Operator() = default;
  Operator(MatrixXcd m, uint64_t h) : mat(std::move(m)), basis_hash(h) {}

  void check_compatible(const Operator& o) const {
    if (basis_hash != o.basis_hash)
      throw std::invalid_argument("Operator: basis tag mismatch");
  }
  Operator operator+(const Operator& o) const {
    check_compatible(o);
    return {mat + o.mat, basis_hash};
  }
  Operator operator-(const Operator& o) const {
    check_compatible(o);
    return {mat - o.mat, basis_hash};
  }
  Operator operator*(const Operator& o) const {
    check_compatible(o);
    return {mat * o.mat, basis_hash};
  }
  Operator adjoint() const { return {mat.adjoint(), basis_hash}; }
  friend Operator operator*(Complex c, const Operator& o) {
    return {c * o.mat, o.basis_hash};
  }
  Operator commutator(const Operator& o) const {
    check_compatible(o);
    return {mat * o.mat - o.mat * mat, basis_hash};
  }
  // spectral norm
  double norm() const {
    Eigen::SelfAdjointEigenSolver<MatrixXcd> es(mat.adjoint() * mat,
                                                Eigen::EigenvaluesOnly);
    return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
  }
  bool is_hermitian(double tol = 1e-12) const {
    return (mat - mat.adjoint()).cwiseAbs().maxCoeff() <= tol;
  }
};

inline Operator annihilation(const FockBasis& fb, int site) {
  if (site < 0 || site >= fb.n_sites)
    throw std::out_of_range("annihilation: site index outside the box");
  MatrixXcd a = MatrixXcd::Zero(fb.dim, fb.dim);
  for (int s = 0; s < fb.dim; ++s)
    if (fb.occupation(s, site)) a(s ^ (1 << site), s) = fb.jw_sign(s, site);
  return {std::move(a), fb.hash};
}

inline Operator creation(const FockBasis& fb, int site) {
  return annihilation(fb, site).adjoint();
}

inline Operator number_op(const FockBasis& fb, int site) {
  MatrixXcd n = MatrixXcd::Zero(fb.dim, fb.dim);
  for (int s = 0; s < fb.dim; ++s)
    if (fb.occupation(s, site)) n(s, s) = 1.0;
  return {std::move(n), fb.hash};
}

inline Operator total_number(const FockBasis& fb) {
  MatrixXcd n = MatrixXcd::Zero(fb.dim, fb.dim);
  for (int s = 0; s < fb.dim; ++s) n(s, s) = fb.total_number(s);
  return {std::move(n), fb.hash};
}

inline Operator identity_op(const FockBasis& fb) {
  return {MatrixXcd::Identity(fb.dim, fb.dim), fb.hash};
}

// In-place B += c * a_x^dag a_y, done bitwise (no matrix products).
inline void add_hopping(MatrixXcd& B, const FockBasis& fb, int x, int y, Complex c) {
  if (c == Complex(0, 0)) return;
  if (x == y) {
    for (int s = 0; s < fb.dim; ++s)
      if (fb.occupation(s, x)) B(s, s) += c;
    return;
  }
  for (int s = 0; s < fb.dim; ++s) {
    if (!fb.occupation(s, y)) continue;
    int mid = s ^ (1 << y);
    if (fb.occupation(mid, x)) continue;
    double sign = fb.jw_sign(s, y) * fb.jw_sign(mid, x);
    B(mid ^ (1 << x), s) += c * sign;
  }
}

// Second quantization of a one-particle matrix: sum_{x,y} h_{xy} a_x^dag a_y.
inline Operator quadratic_operator(const FockBasis& fb, const MatrixXcd& h) {
  if (h.rows() != fb.n_sites || h.cols() != fb.n_sites)
    throw std::invalid_argument("quadratic_operator: one-particle shape mismatch");
  MatrixXcd B = MatrixXcd::Zero(fb.dim, fb.dim);
  for (int x = 0; x < fb.n_sites; ++x)
    for (int y = 0; y < fb.n_sites; ++y) add_hopping(B, fb, x, y, h(x, y));
  return {std::move(B), fb.hash};
}

// Gauge automorphism: B -> e^{i theta N} B e^{-i theta N}; annihilation
// operators pick up the phase e^{-i theta}.
inline Operator gauge_transform(const FockBasis& fb, const Operator& B, double theta) {
  if (B.basis_hash != fb.hash)
    throw std::invalid_argument("gauge_transform: basis tag mismatch");
  MatrixXcd out(fb.dim, fb.dim);
  for (int r = 0; r < fb.dim; ++r)
    for (int c = 0; c < fb.dim; ++c) {
      int dn = fb.total_number(r) - fb.total_number(c);
      out(r, c) = B.mat(r, c) * std::exp(Complex(0, theta * dn));
    }
  return {std::move(out), fb.hash};
}

enum class Parity { even, odd, neither };

inline Parity parity_class(const FockBasis& fb, const Operator& B, double tol = 1e-12) {
  Operator flipped = gauge_transform(fb, B, M_PI);
  double scale = std::max(1.0, B.mat.cwiseAbs().maxCoeff());
  if ((flipped.mat - B.mat).cwiseAbs().maxCoeff() <= tol * scale) return Parity::even;
  if ((flipped.mat + B.mat).cwiseAbs().maxCoeff() <= tol * scale) return Parity::odd;
  return Parity::neither;
}

// Interaction terms are products of number operators: diagonal matrices.
inline Operator interaction_operator(const FockBasis& fb, const InteractionSpec& spec) {
  MatrixXcd B = MatrixXcd::Zero(fb.dim, fb.dim);
  for (const auto& t : spec.terms) {
    for (int s = 0; s < fb.dim; ++s) {
      bool all = true;
      for (int site : t.support)
        if (!fb.occupation(s, site)) {
          all = false;
          break;
        }
      if (all) B(s, s) += t.coefficient;
    }
  }
  return {std::move(B), fb.hash};
}

}  // namespace lft
