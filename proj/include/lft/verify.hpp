#pragma once

// Certified inequalities: the Lieb-Robinson commutator bound and the
// equicontinuity bound for the paramagnetic transport matrix.  All norm
// constants use finite-box surrogates (sums over the given box; suprema over
// the sampled disorder realizations), which is what makes the checks
// computable at desk scale.

#include "transport.hpp"

namespace lft {

// Interaction family of the internal dynamics: single-site terms 2d n_x,
// nearest-neighbor hopping terms c a_x^dag a_y + h.c., plus the pair
// interaction.  Only the norms enter the interaction-norm surrogate; the
// hopping pair term has operator norm |c| on the local factor.
inline InteractionSpec dynamics_family(const Box& box, const Disorder& w,
                                       double vartheta,
                                       const InteractionSpec& pair_terms) {
  InteractionSpec fam = pair_terms;
  MatrixXcd h = one_particle_hopping(box, w, vartheta);
  for (int i = 0; i < box.n_sites(); ++i)
    fam.terms.push_back({{i}, 2.0 * box.d, 2.0 * box.d});
  for (int b = 0; b < box.n_bonds(); ++b) {
    auto [i, j] = box.bonds[b];
    double c = std::abs(h(i, j));
    fam.terms.push_back({{i, j}, 0.0, c});  // norm-only entry
  }
  return fam;
}

// Finite-box surrogate of sup_omega ||Psi^(omega, vartheta)||_W over a
// disorder sample of size n_samples (seeds seed0, seed0+1, ...).
inline double interaction_norm_bound(const Box& box, double vartheta,
                                     const InteractionSpec& pair_terms,
                                     const DecayFn& F, uint64_t seed0,
                                     int n_samples) {
  double best = 0;
  for (int s = 0; s < n_samples; ++s) {
    Disorder w = sample_disorder(seed0 + s, box);
    InteractionSpec fam = dynamics_family(box, w, vartheta, pair_terms);
    best = std::max(best, interaction_norm(fam, F, box));
  }
  return best;
}

struct LrVerdict {
  std::vector<double> times;
  std::vector<double> measured;  // ||[tau_t(B1), B2]||
  std::vector<double> bound;
  std::vector<double> margin;    // bound - measured
  bool pass = true;
};

// Checks || [tau_t(B1), B2] || <= 2 D^{-1} ||B1|| ||B2|| (e^{2 D |t| J} - 1)
//            * sum_{x in S1} sum_{y in S2} F(|x - y|)
// where D is the convolution constant surrogate and J the interaction-norm
// surrogate.  B1 must be even; supports must be disjoint.
inline LrVerdict lr_bound_check(const FockBasis& fb, const ModelParams& mp,
                                const Operator& B1, const std::vector<int>& supp1,
                                const Operator& B2, const std::vector<int>& supp2,
                                const DecayFn& F, double conv_const,
                                double interaction_bound,
                                const std::vector<double>& times) {
  if (parity_class(fb, B1) != Parity::even)
    throw std::invalid_argument("lr_bound_check: B1 must be even");
  for (int a : supp1)
    for (int b : supp2)
      if (a == b) throw std::invalid_argument("lr_bound_check: supports overlap");

  double fsum = 0;
  for (int a : supp1)
    for (int b : supp2)
      fsum += F(euclid_dist(mp.box.sites[a], mp.box.sites[b]));
  double n1 = B1.norm(), n2 = B2.norm();

  Operator H = internal_energy(fb, mp);
  SpectralData S = spectral(H);
  // slack for the rounding noise of the eigenbasis conjugation (relevant only
  // where the bound itself vanishes, i.e. at t = 0)
  double slack = 1e-12 * std::max(1.0, n1 * n2);
  LrVerdict v;
  for (double t : times) {
    Operator Bt = heisenberg(S, B1, t);
    double meas = Bt.commutator(B2).norm();
    double bnd = 2.0 / conv_const * n1 * n2 *
                 (std::exp(2.0 * conv_const * std::abs(t) * interaction_bound) - 1.0) *
                 fsum;
    v.times.push_back(t);
    v.measured.push_back(meas);
    v.bound.push_back(bnd);
    v.margin.push_back(bnd - meas);
    if (meas > bnd * (1.0 + 1e-12) + slack) v.pass = false;
  }
  return v;
}

struct EquicontinuityVerdict {
  std::vector<double> t1, t2;
  std::vector<double> measured;  // max-entry norm of Xi_p(t1) - Xi_p(t2)
  std::vector<double> bound;
  std::vector<double> margin;
  double lipschitz_constant = 0;
  bool pass = true;
};

// || Xi_p(t1) - Xi_p(t2) ||_max <= 32 (1 + vartheta)^2
//   (D^{-1} ||F||_1 e^{4 D T J} + 1) |t1 - t2|  for |t1|, |t2| <= T.
inline EquicontinuityVerdict equicontinuity_check(
    const FockBasis& fb, const ModelParams& mp, const GibbsState& g,
    const TransportSetup& ts, const DecayConstants& dc, double interaction_bound,
    double T, int n_grid = 20) {
  EquicontinuityVerdict v;
  v.lipschitz_constant =
      32.0 * std::pow(1.0 + mp.vartheta, 2) *
      (dc.norm1 / dc.convolution *
           std::exp(4.0 * dc.convolution * T * interaction_bound) +
       1.0);
  XiKernels X = xi_p_kernels(fb, mp, g, ts);
  std::vector<double> grid;
  for (int i = 0; i <= n_grid; ++i) grid.push_back(T * i / n_grid);
  std::vector<MatrixXd> vals;
  for (double t : grid) vals.push_back(X.eval(t));
  for (int i = 0; i <= n_grid; ++i)
    for (int j = i + 1; j <= n_grid; ++j) {
      double meas = (vals[i] - vals[j]).cwiseAbs().maxCoeff();
      double bnd = v.lipschitz_constant * std::abs(grid[i] - grid[j]);
      v.t1.push_back(grid[i]);
      v.t2.push_back(grid[j]);
      v.measured.push_back(meas);
      v.bound.push_back(bnd);
      v.margin.push_back(bnd - meas);
      if (meas > bnd * (1.0 + 1e-12) + 1e-14) v.pass = false;
    }
  return v;
}

}  // namespace lft
