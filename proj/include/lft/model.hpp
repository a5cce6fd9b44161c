#pragma once

// Many-body Hamiltonian pieces: internal Hamiltonian, electromagnetic
// perturbation from the Peierls substitution, and the current observables.

#include <stdexcept>

#include "fields.hpp"
#include "fock.hpp"
#include "lattice.hpp"

namespace lft {

struct OrientedBond {
  int from = 0;  // site index x1
  int to = 0;    // site index x2
};

struct ModelParams {
  Box box;
  Disorder disorder;
  double vartheta = 0.0;
  double lambda = 0.0;
  double beta = 1.0;
  InteractionSpec interaction;

  MatrixXcd hopping() const {
    return one_particle_hopping(box, disorder, vartheta);
  }
  MatrixXcd one_particle() const {
    MatrixXcd h = hopping();
    for (int i = 0; i < box.n_sites(); ++i) h(i, i) += lambda * disorder.omega1[i];
    return h;
  }
};

// H = sum_{x,y} <e_x, (Delta + lambda V) e_y> a_x^dag a_y + interactions.
inline Operator internal_energy(const FockBasis& fb, const ModelParams& mp) {
  Operator H = quadratic_operator(fb, mp.one_particle());
  if (!mp.interaction.terms.empty())
    H = H + interaction_operator(fb, mp.interaction);
  return H;
}

// All oriented nearest-neighbor bonds of the box, both orientations, ordered
// by (from, to).
inline std::vector<OrientedBond> oriented_bonds(const Box& box) {
  std::vector<OrientedBond> out;
  out.reserve(2 * box.n_bonds());
  for (int i = 0; i < box.n_sites(); ++i)
    for (int j = 0; j < box.n_sites(); ++j)
      if (i != j && nearest_neighbors(box.sites[i], box.sites[j]))
        out.push_back({i, j});
  return out;
}

// W_t: hopping entries multiplied by (Peierls phase - 1).  Only bonds with a
// nonzero line integral contribute; the diagonal never does.
inline Operator em_potential(const FockBasis& fb, const ModelParams& mp,
                             const Pulse& pulse, double t) {
  MatrixXcd h = mp.hopping();
  MatrixXcd W = MatrixXcd::Zero(fb.dim, fb.dim);
  for (int b = 0; b < mp.box.n_bonds(); ++b) {
    auto [i, j] = mp.box.bonds[b];
    Complex pij = peierls_phase(pulse, t, mp.box.sites[i], mp.box.sites[j]);
    if (pij == Complex(1, 0)) continue;
    add_hopping(W, fb, i, j, (pij - 1.0) * h(i, j));
    add_hopping(W, fb, j, i, (std::conj(pij) - 1.0) * h(j, i));
  }
  return {std::move(W), fb.hash};
}

// dW_t/dt, needed for the work integral in the energy balance.
inline Operator em_potential_dt(const FockBasis& fb, const ModelParams& mp,
                                const Pulse& pulse, double t) {
  MatrixXcd h = mp.hopping();
  MatrixXcd W = MatrixXcd::Zero(fb.dim, fb.dim);
  for (int b = 0; b < mp.box.n_bonds(); ++b) {
    auto [i, j] = mp.box.bonds[b];
    const Coords& x = mp.box.sites[i];
    const Coords& y = mp.box.sites[j];
    double u = pulse.coupling_sign * line_integral_A(pulse, t, x, y);
    double du = pulse.coupling_sign * line_integral_A_dt(pulse, t, x, y);
    if (du == 0.0) continue;
    Complex dphase = Complex(0, du) * std::exp(Complex(0, u));
    add_hopping(W, fb, i, j, dphase * h(i, j));
    add_hopping(W, fb, j, i, std::conj(dphase) * h(j, i));
  }
  return {std::move(W), fb.hash};
}

// Paramagnetic current on the oriented bond (x1, x2):
//   I = -2 Im(<e_x1, Delta e_x2> a_x1^dag a_x2) = i (c B - conj(c) B^dag).
inline Operator paramagnetic_current(const FockBasis& fb, const ModelParams& mp,
                                     const OrientedBond& bond) {
  if (!nearest_neighbors(mp.box.sites[bond.from], mp.box.sites[bond.to]))
    throw std::invalid_argument("paramagnetic_current: not a nearest-neighbor bond");
  MatrixXcd h = mp.hopping();
  Complex c = h(bond.from, bond.to);
  MatrixXcd I = MatrixXcd::Zero(fb.dim, fb.dim);
  add_hopping(I, fb, bond.from, bond.to, Complex(0, 1) * c);
  add_hopping(I, fb, bond.to, bond.from, Complex(0, -1) * std::conj(c));
  return {std::move(I), fb.hash};
}

// Diamagnetic kernel P = 2 Re(<e_x1, Delta e_x2> a_x1^dag a_x2).
inline Operator diamagnetic_kernel(const FockBasis& fb, const ModelParams& mp,
                                   const OrientedBond& bond) {
  if (bond.from != bond.to &&
      !nearest_neighbors(mp.box.sites[bond.from], mp.box.sites[bond.to]))
    throw std::invalid_argument("diamagnetic_kernel: not a nearest-neighbor bond");
  if (bond.from == bond.to) {  // diagonal entry of the Laplacian, P = 2*2d*n_x
    MatrixXcd P = MatrixXcd::Zero(fb.dim, fb.dim);
    add_hopping(P, fb, bond.from, bond.from, Complex(4.0 * mp.box.d, 0));
    return {std::move(P), fb.hash};
  }
  MatrixXcd h = mp.hopping();
  Complex c = h(bond.from, bond.to);
  MatrixXcd P = MatrixXcd::Zero(fb.dim, fb.dim);
  add_hopping(P, fb, bond.from, bond.to, c);
  add_hopping(P, fb, bond.to, bond.from, std::conj(c));
  return {std::move(P), fb.hash};
}

// Field-dressed current: I^(A) = -2 Im((e^{-i u} - 1) <e_x1, Delta e_x2>
// a_x1^dag a_x2) with u the line integral of A from x1 to x2.  Reduces to
// zero at zero field and to u * P + O(u^2) at small field.
inline Operator diamagnetic_current(const FockBasis& fb, const ModelParams& mp,
                                    const Pulse& pulse, double t,
                                    const OrientedBond& bond) {
  if (!nearest_neighbors(mp.box.sites[bond.from], mp.box.sites[bond.to]))
    throw std::invalid_argument("diamagnetic_current: not a nearest-neighbor bond");
  MatrixXcd h = mp.hopping();
  double u = pulse.coupling_sign *
             line_integral_A(pulse, t, mp.box.sites[bond.from], mp.box.sites[bond.to]);
  Complex c = (std::exp(Complex(0, -u)) - 1.0) * h(bond.from, bond.to);
  MatrixXcd I = MatrixXcd::Zero(fb.dim, fb.dim);
  add_hopping(I, fb, bond.from, bond.to, Complex(0, 1) * c);
  add_hopping(I, fb, bond.to, bond.from, Complex(0, -1) * std::conj(c));
  return {std::move(I), fb.hash};
}

// Discrete continuity check: with gauge-invariant interactions,
// i[H, n_x] + sum_{y ~ x} I_{(x,y)} = 0 exactly at finite volume.
// Returns the spectral norm of the left-hand side.
inline double continuity_residual(const FockBasis& fb, const ModelParams& mp,
                                  int site) {
  Operator H = internal_energy(fb, mp);
  Operator n = number_op(fb, site);
  // interactions must commute with every number operator (they are diagonal)
  Operator lhs = Complex(0, 1) * H.commutator(n);
  for (int j = 0; j < mp.box.n_sites(); ++j)
    if (j != site && nearest_neighbors(mp.box.sites[site], mp.box.sites[j]))
      lhs = lhs + paramagnetic_current(fb, mp, {site, j});
  return lhs.norm();
}

}  // namespace lft
