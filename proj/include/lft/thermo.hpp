#pragma once

// Heat production, energy increments, electromagnetic work and the Joule
// split.  All quantities are relative to the initial Gibbs state.

#include <limits>

#include "equilibrium.hpp"

namespace lft {

// Relative entropy S(rho1 | rho2) = tr(rho1 (ln rho1 - ln rho2)) with the
// conventions x ln x = 0 at x = 0 and +infinity when supp rho1 is not
// contained in supp rho2.  Eigenvalues below eig_tol * max are treated as
// exact zeros.
inline double relative_entropy(const MatrixXcd& rho1, const MatrixXcd& rho2,
                               double eig_tol = 1e-13) {
  Eigen::SelfAdjointEigenSolver<MatrixXcd> e1(rho1), e2(rho2);
  double cut1 = eig_tol * std::max(1e-300, e1.eigenvalues().maxCoeff());
  double cut2 = eig_tol * std::max(1e-300, e2.eigenvalues().maxCoeff());

  double s1 = 0;  // tr rho1 ln rho1
  for (Eigen::Index m = 0; m < e1.eigenvalues().size(); ++m) {
    double p = e1.eigenvalues()[m];
    if (p > cut1) s1 += p * std::log(p);
  }
  // support check and tr rho1 ln rho2 via the eigenbasis of rho2
  MatrixXcd R = e2.eigenvectors().adjoint() * rho1 * e2.eigenvectors();
  double s2 = 0;
  for (Eigen::Index m = 0; m < e2.eigenvalues().size(); ++m) {
    double q = e2.eigenvalues()[m];
    double w = R(m, m).real();
    if (q > cut2) {
      s2 += w * std::log(q);
    } else if (w > cut1) {
      return std::numeric_limits<double>::infinity();
    }
  }
  return s1 - s2;
}

// Q(t) = beta^{-1} S(rho_t | Gibbs)
inline double heat_production(const GibbsState& g, const MatrixXcd& rho_t) {
  return relative_entropy(rho_t, g.rho) / g.beta;
}

struct LedgerRow {
  double t = 0;
  double Q = 0;      // heat production
  double S = 0;      // internal energy increment rho_t(H) - w(H)
  double P = 0;      // potential energy rho_t(W_t)
  double Work = 0;   // int_{t0}^t rho_s(dW_s/ds) ds
  double Ip = 0;     // paramagnetic energy increment
  double Id = 0;     // diamagnetic energy w(W_t)
};

// One full propagation producing the ledger on `sample_times`.  The work
// integral is accumulated with composite Simpson on a refinement of the
// sample grid; with work_refine <= 0 the refinement is chosen so that the
// integrand is sampled on (roughly) the propagation grid itself, which keeps
// the quadrature error aligned with the propagation error.
inline std::vector<LedgerRow> energy_ledger(const FockBasis& fb,
                                            const ModelParams& mp,
                                            const Pulse& pulse,
                                            const GibbsState& g,
                                            double t_start,
                                            const std::vector<double>& sample_times,
                                            PropagatorOptions opts,
                                            int work_refine = 0) {
  Evolver ev(fb, mp, pulse, opts);
  const Operator& H = ev.hamiltonian();
  double wH = g.expect(H);

  // dense grid carrying the work integrand between ledger samples
  std::vector<double> grid;
  std::vector<int> sample_at;  // index into sample_times, or -1
  grid.push_back(t_start);
  sample_at.push_back(-1);
  double prev = t_start;
  for (size_t i = 0; i < sample_times.size(); ++i) {
    double t = sample_times[i];
    int refine = work_refine;
    if (refine <= 0) {
      refine = static_cast<int>(std::ceil((t - prev) / opts.dt));
      refine = std::max(refine, 2);
    }
    if (refine % 2) ++refine;
    for (int k = 1; k <= refine; ++k) {
      grid.push_back(prev + (t - prev) * k / refine);
      sample_at.push_back(k == refine ? static_cast<int>(i) : -1);
    }
    prev = t;
  }

  std::vector<LedgerRow> rows(sample_times.size());
  std::vector<double> integrand;
  integrand.reserve(grid.size());
  double work = 0;
  size_t gi = 0;
  propagate_visit(ev, t_start, grid, [&](double t, const MatrixXcd& U) {
    MatrixXcd rho = U * g.rho * U.adjoint();
    bool in_pulse = pulse.active(t);
    double dwdt = 0;
    if (in_pulse)
      dwdt = state_expectation(rho, em_potential_dt(fb, mp, pulse, t));
    integrand.push_back(dwdt);
    // fold completed Simpson pairs into the running work integral
    size_t j = integrand.size() - 1;
    if (j >= 2 && j % 2 == 0) {
      double h2 = (grid[j] - grid[j - 2]) / 2.0;
      work += (h2 / 3.0) *
              (integrand[j - 2] + 4.0 * integrand[j - 1] + integrand[j]);
    }
    int si = sample_at[gi];
    if (si >= 0) {
      LedgerRow& r = rows[si];
      r.t = t;
      Operator W = in_pulse ? em_potential(fb, mp, pulse, t)
                            : Operator{MatrixXcd::Zero(fb.dim, fb.dim), fb.hash};
      r.S = state_expectation(rho, H) - wH;
      r.P = state_expectation(rho, W);
      r.Q = heat_production(g, rho);
      r.Id = g.expect(W);
      r.Ip = state_expectation(rho, H + W) - g.expect(H + W);
      // Work at this sample: completed pairs plus, if we sit on an odd grid
      // node, a trapezoid correction for the dangling interval.
      r.Work = work;
      if (j % 2 == 1)
        r.Work += 0.5 * (grid[j] - grid[j - 1]) * (integrand[j - 1] + integrand[j]);
    }
    ++gi;
  });
  return rows;
}

// First law defect |Q - S| and balance defect |S + P - Work| for a row.
inline double first_law_defect(const LedgerRow& r) { return std::abs(r.Q - r.S); }
inline double balance_defect(const LedgerRow& r) {
  return std::abs(r.S + r.P - r.Work);
}

}  // namespace lft
