#pragma once

// Heisenberg dynamics (spectral, exact) and the non-autonomous propagator
// for the pulsed Hamiltonian H + W_t.  The propagator integrates the
// Schroedinger-picture unitary i dU/dt = (H + W_t) U, so states evolve as
// rho_t = U rho U^dag and observables as tau_{t,s}(B) = U^dag B U.

#include <functional>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "model.hpp"

namespace lft {

struct SpectralData {
  Eigen::VectorXd evals;
  MatrixXcd evecs;
  uint64_t basis_hash = 0;
};

inline SpectralData spectral(const Operator& H) {
  if (!H.is_hermitian(1e-10 * std::max(1.0, H.mat.cwiseAbs().maxCoeff())))
    throw std::invalid_argument("spectral: operator is not Hermitian");
  Eigen::SelfAdjointEigenSolver<MatrixXcd> es(H.mat);
  return {es.eigenvalues(), es.eigenvectors(), H.basis_hash};
}

// tau_t(B) = e^{itH} B e^{-itH}
inline Operator heisenberg(const SpectralData& S, const Operator& B, double t) {
  if (S.basis_hash != B.basis_hash)
    throw std::invalid_argument("heisenberg: basis tag mismatch");
  MatrixXcd M = S.evecs.adjoint() * B.mat * S.evecs;
  for (Eigen::Index m = 0; m < M.rows(); ++m)
    for (Eigen::Index n = 0; n < M.cols(); ++n)
      M(m, n) *= std::exp(Complex(0, t * (S.evals[m] - S.evals[n])));
  return {S.evecs * M * S.evecs.adjoint(), B.basis_hash};
}

// e^{-itH} from cached spectral data
inline MatrixXcd propagator_matrix(const SpectralData& S, double t) {
  Eigen::VectorXcd ph(S.evals.size());
  for (Eigen::Index m = 0; m < S.evals.size(); ++m)
    ph[m] = std::exp(Complex(0, -t * S.evals[m]));
  return S.evecs * ph.asDiagonal() * S.evecs.adjoint();
}

enum class Scheme { magnus2, rk4 };

struct PropagatorOptions {
  Scheme scheme = Scheme::magnus2;
  double dt = 1e-3;
};

// Step engine for U(t).  Holds the spectral data of the static H so that
// field-free stretches are advanced by one exact matrix exponential.
class Evolver {
 public:
  Evolver(const FockBasis& fb, const ModelParams& mp, const Pulse& pulse,
          PropagatorOptions opts)
      : fb_(fb), mp_(mp), pulse_(pulse), opts_(opts),
        H_(internal_energy(fb, mp)), hspec_(spectral(H_)) {
    if (!(opts_.dt > 0)) throw std::invalid_argument("Evolver: dt must be positive");
  }

  const Operator& hamiltonian() const { return H_; }
  const SpectralData& h_spectral() const { return hspec_; }
  const Pulse& pulse() const { return pulse_; }

  // Advance U from time s to time t (t > s) in place.
  void advance(MatrixXcd& U, double s, double t) const {
    if (t < s) throw std::invalid_argument("Evolver: backwards step");
    if (t == s) return;
    // outside the pulse support the generator is the static H
    if (t <= pulse_.t0 || s >= pulse_.t1) {
      U = propagator_matrix(hspec_, t - s) * U;
      return;
    }
    if (s < pulse_.t0) {
      advance(U, s, pulse_.t0);
      s = pulse_.t0;
    }
    double tend = std::min(t, pulse_.t1);
    long nsteps = std::max(1l, std::lround(std::ceil((tend - s) / opts_.dt - 1e-12)));
    double h = (tend - s) / nsteps;
    for (long k = 0; k < nsteps; ++k) {
      double a = s + k * h;
      if (opts_.scheme == Scheme::magnus2)
        step_magnus2(U, a, h);
      else
        step_rk4(U, a, h);
    }
    if (t > tend) U = propagator_matrix(hspec_, t - tend) * U;
  }

  MatrixXcd generator(double t) const {
    MatrixXcd K = H_.mat;
    if (pulse_.active(t)) K += em_potential(fb_, mp_, pulse_, t).mat;
    return K;
  }

 private:
  void step_magnus2(MatrixXcd& U, double a, double h) const {
    MatrixXcd K = generator(a + 0.5 * h);
    Eigen::SelfAdjointEigenSolver<MatrixXcd> es(K);
    Eigen::VectorXcd ph(es.eigenvalues().size());
    for (Eigen::Index m = 0; m < ph.size(); ++m)
      ph[m] = std::exp(Complex(0, -h * es.eigenvalues()[m]));
    U = es.eigenvectors() * ph.asDiagonal() * es.eigenvectors().adjoint() * U;
  }

  void step_rk4(MatrixXcd& U, double a, double h) const {
    auto f = [&](double t, const MatrixXcd& V) -> MatrixXcd {
      return Complex(0, -1) * (generator(t) * V);
    };
    MatrixXcd k1 = f(a, U);
    MatrixXcd k2 = f(a + 0.5 * h, U + 0.5 * h * k1);
    MatrixXcd k3 = f(a + 0.5 * h, U + 0.5 * h * k2);
    MatrixXcd k4 = f(a + h, U + h * k3);
    U += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    // project back onto the unitary group (polar factor)
    Eigen::JacobiSVD<MatrixXcd> svd(U, Eigen::ComputeThinU | Eigen::ComputeThinV);
    U = svd.matrixU() * svd.matrixV().adjoint();
  }

  const FockBasis& fb_;
  ModelParams mp_;
  Pulse pulse_;
  PropagatorOptions opts_;
  Operator H_;
  SpectralData hspec_;
};

// U(t_k) at the requested sample times (nondecreasing, first >= start).
struct PropagatorTrace {
  std::vector<double> times;
  std::vector<MatrixXcd> unitaries;
};

inline PropagatorTrace propagate(const Evolver& ev, double start,
                                 const std::vector<double>& sample_times) {
  PropagatorTrace tr;
  Eigen::Index dim = ev.hamiltonian().mat.rows();
  MatrixXcd U = MatrixXcd::Identity(dim, dim);
  double cur = start;
  for (double t : sample_times) {
    if (t < cur - 1e-12) throw std::invalid_argument("propagate: times not sorted");
    ev.advance(U, cur, std::max(t, cur));
    cur = std::max(t, cur);
    tr.times.push_back(t);
    tr.unitaries.push_back(U);
  }
  return tr;
}

// Streaming variant: call visit(t, U) at each sample time without storing.
inline void propagate_visit(
    const Evolver& ev, double start, const std::vector<double>& sample_times,
    const std::function<void(double, const MatrixXcd&)>& visit) {
  Eigen::Index dim = ev.hamiltonian().mat.rows();
  MatrixXcd U = MatrixXcd::Identity(dim, dim);
  double cur = start;
  for (double t : sample_times) {
    ev.advance(U, cur, std::max(t, cur));
    cur = std::max(t, cur);
    visit(t, U);
  }
}

inline double unitarity_defect(const MatrixXcd& U) {
  return (U.adjoint() * U - MatrixXcd::Identity(U.rows(), U.cols()))
      .cwiseAbs()
      .maxCoeff();
}

// ------------------------------------------------------------------------
// Dyson series for the interaction-picture unitary
//   D_{t,s} = 1 + sum_k (-i)^k int_s^t ds1 ... int_s^{s_{k-1}} ds_k
//             tau_{s1-t}(W_{s1}) ... tau_{sk-t}(W_{sk}),
// truncated at order K.  The nested simplex integrals are evaluated by the
// recursion T_k(u) = int_s^u G(r) T_{k-1}(r) dr with G(r) = tau_{r-t}(W_r),
// using cumulative composite Simpson quadrature on a uniform grid.
// The a-posteriori tail estimate (sup||W|| (t-s))^{K+1} / (K+1)! is returned
// alongside.
// ------------------------------------------------------------------------

struct DysonResult {
  MatrixXcd unitary;
  double tail_bound = 0;
};

inline DysonResult dyson_unitary(const FockBasis& fb, const ModelParams& mp,
                                 const Pulse& pulse, double s, double t,
                                 int order, int n_panels = 200) {
  if (order < 1) throw std::invalid_argument("dyson_unitary: order must be >= 1");
  if (!(t > s)) throw std::invalid_argument("dyson_unitary: need t > s");
  Operator H = internal_energy(fb, mp);
  SpectralData S = spectral(H);
  int n = 2 * n_panels;  // even number of intervals for Simpson
  double h = (t - s) / n;
  int dim = fb.dim;

  std::vector<MatrixXcd> G(n + 1);
  double wmax = 0;
  for (int j = 0; j <= n; ++j) {
    double u = s + j * h;
    Operator W = em_potential(fb, mp, pulse, u);
    wmax = std::max(wmax, W.mat.cwiseAbs().rowwise().sum().maxCoeff());
    G[j] = heisenberg(S, W, u - t).mat;
  }

  MatrixXcd total = MatrixXcd::Identity(dim, dim);
  std::vector<MatrixXcd> Tk(n + 1, MatrixXcd::Identity(dim, dim));
  Complex factor(1, 0);
  for (int k = 1; k <= order; ++k) {
    std::vector<MatrixXcd> integrand(n + 1);
    for (int j = 0; j <= n; ++j) integrand[j] = G[j] * Tk[j];
    std::vector<MatrixXcd> next(n + 1);
    next[0] = MatrixXcd::Zero(dim, dim);
    for (int j = 2; j <= n; j += 2)
      next[j] = next[j - 2] +
                (h / 3.0) * (integrand[j - 2] + 4.0 * integrand[j - 1] + integrand[j]);
    for (int j = 1; j <= n; j += 2)  // first-interval Newton-Cotes on a parabola
      next[j] = next[j - 1] + (h / 12.0) * (5.0 * integrand[j - 1] +
                                            8.0 * integrand[j] -
                                            integrand[std::min(j + 1, n)]);
    Tk = std::move(next);
    factor *= Complex(0, -1);
    total += factor * Tk[n];
  }

  double z = wmax * (t - s);
  double tail = std::pow(z, order + 1);
  for (int k = 2; k <= order + 1; ++k) tail /= k;
  tail *= std::exp(std::max(0.0, z));  // crude sum of the remaining series
  return {std::move(total), tail};
}

}  // namespace lft
