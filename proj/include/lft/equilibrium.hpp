#pragma once

// Gibbs states, quasi-free (one-particle) equilibrium, and evolved states.

#include <stdexcept>

#include "dynamics.hpp"

namespace lft {

struct GibbsState {
  MatrixXcd rho;
  double beta = 1.0;
  SpectralData hspec;        // spectral data of H
  Eigen::VectorXd weights;   // Boltzmann weights in the eigenbasis, sum 1
  uint64_t basis_hash = 0;

  double expect(const Operator& B) const {
    if (basis_hash != B.basis_hash)
      throw std::invalid_argument("GibbsState: basis tag mismatch");
    return (rho * B.mat).trace().real();
  }
};

inline GibbsState gibbs(const Operator& H, double beta) {
  if (!(beta > 0)) throw std::invalid_argument("gibbs: beta must be positive");
  GibbsState g;
  g.beta = beta;
  g.hspec = spectral(H);
  g.basis_hash = H.basis_hash;
  double e0 = g.hspec.evals.minCoeff();  // shift against overflow
  Eigen::VectorXd w(g.hspec.evals.size());
  for (Eigen::Index m = 0; m < w.size(); ++m)
    w[m] = std::exp(-beta * (g.hspec.evals[m] - e0));
  w /= w.sum();
  g.weights = w;
  g.rho = g.hspec.evecs * w.asDiagonal() * g.hspec.evecs.adjoint();
  return g;
}

inline double state_expectation(const MatrixXcd& rho, const Operator& B) {
  return (rho * B.mat).trace().real();
}

// KMS residual |w(A tau_{i beta}(B)) - w(B A)| for bounded A, B, where
// tau_{i beta}(B) = e^{-beta H} B e^{beta H} evaluated spectrally.
inline double kms_residual(const GibbsState& g, const Operator& A, const Operator& B) {
  const SpectralData& S = g.hspec;
  MatrixXcd Bt = S.evecs.adjoint() * B.mat * S.evecs;
  double e0 = S.evals.minCoeff();
  for (Eigen::Index m = 0; m < Bt.rows(); ++m)
    for (Eigen::Index n = 0; n < Bt.cols(); ++n)
      Bt(m, n) *= std::exp(-g.beta * ((S.evals[m] - e0) - (S.evals[n] - e0)));
  MatrixXcd Bshift = S.evecs * Bt * S.evecs.adjoint();
  Complex lhs = (g.rho * A.mat * Bshift).trace();
  Complex rhs = (g.rho * B.mat * A.mat).trace();
  return std::abs(lhs - rhs);
}

// ------------------------------------------------------------------------
// Quasi-free pipeline on the one-particle space.  For quadratic H with
// one-particle matrix h, the equilibrium two-point function is
//   G_{xy} = w(a_x^dag a_y) = [f(h)]_{yx},  f(e) = 1 / (1 + e^{beta e}).
// The index transposition is fixed by cross-validation against exact
// diagonalization (see tests); it comes from a_x^dag carrying the conjugate
// eigenvector amplitudes.
// ------------------------------------------------------------------------

struct QuasiFreeState {
  MatrixXcd h;   // one-particle Hamiltonian
  MatrixXcd G;   // G_{xy} = <a_x^dag a_y>
  double beta = 1.0;
  Eigen::VectorXd evals;
  MatrixXcd evecs;
};

inline QuasiFreeState quasifree_twopoint(const MatrixXcd& h, double beta) {
  if ((h - h.adjoint()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, h.cwiseAbs().maxCoeff()))
    throw std::invalid_argument("quasifree_twopoint: h must be Hermitian");
  QuasiFreeState q;
  q.h = h;
  q.beta = beta;
  Eigen::SelfAdjointEigenSolver<MatrixXcd> es(h);
  q.evals = es.eigenvalues();
  q.evecs = es.eigenvectors();
  Eigen::VectorXd f(q.evals.size());
  for (Eigen::Index k = 0; k < f.size(); ++k)
    f[k] = 1.0 / (1.0 + std::exp(beta * q.evals[k]));
  MatrixXcd fh = q.evecs * f.asDiagonal() * q.evecs.adjoint();
  q.G = fh.transpose();
  return q;
}

// Expectation of the quadratic observable sum_{xy} M_{xy} a_x^dag a_y.
inline double quasifree_expect(const QuasiFreeState& q, const MatrixXcd& M) {
  return (M.cwiseProduct(q.G)).sum().real();
}

// ------------------------------------------------------------------------
// Evolved state rho_t = U_{t,t0} d U_{t,t0}^dag.
// ------------------------------------------------------------------------

struct EvolvedState {
  double t = 0;
  MatrixXcd rho;
};

inline std::vector<EvolvedState> evolve_state(const Evolver& ev, const GibbsState& g,
                                              double t_start,
                                              const std::vector<double>& sample_times) {
  std::vector<EvolvedState> out;
  out.reserve(sample_times.size());
  propagate_visit(ev, t_start, sample_times,
                  [&](double t, const MatrixXcd& U) {
                    out.push_back({t, U * g.rho * U.adjoint()});
                  });
  return out;
}

}  // namespace lft
