#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <lft/transport.hpp>

using namespace lft;

static ModelParams chain_params(int L, uint64_t seed, bool interacting = true) {
  ModelParams mp;
  mp.box = enumerate_box(1, L);
  mp.disorder = sample_disorder(seed, mp.box);
  mp.vartheta = 0.4;
  mp.lambda = 0.7;
  mp.beta = 1.0;
  if (interacting)
    mp.interaction = density_density(mp.box, yukawa_profile(1.0, 1.0));
  return mp;
}

static Pulse chain_pulse(double eta, double radius = 1.0, double amp = 0.8) {
  Pulse p;
  p.t0 = 0.0;
  p.t1 = 1.5;
  p.amplitude = amp;
  p.direction = VectorXd::Ones(1);
  p.support_radius = radius;
  return scale_strength(p, eta);
}

TEST_CASE("sigma_p matches direct time integration of the Duhamel integrand") {
  ModelParams mp = chain_params(1, 11);
  FockBasis fb(mp.box);
  GibbsState g = gibbs(internal_energy(fb, mp), mp.beta);
  OrientedBond bx{1, 0}, by{2, 1};
  Operator A = paramagnetic_current(fb, mp, bx);
  Operator B = paramagnetic_current(fb, mp, by);
  for (double t : {0.4, 0.9, 2.3}) {
    int n = 400;
    double h = t / n;
    std::vector<double> f(n + 1);
    for (int j = 0; j <= n; ++j) {
      Operator As = heisenberg(g.hspec, A, j * h);
      f[j] = g.expect(Complex(0, 1) * B.commutator(As));
    }
    double oracle = cumulative_simpson(f, h)[n];
    CHECK(sigma_p(fb, mp, g, bx, by, t) == doctest::Approx(oracle).epsilon(1e-9));
  }
  // sigma_p(0) = 0 for every bond pair
  CHECK(std::abs(sigma_p(fb, mp, g, bx, bx, 0.0)) <= 1e-14);
}

TEST_CASE("sigma_d cross-checks against the quasi-free two-point function") {
  ModelParams mp = chain_params(2, 4, false);
  FockBasis fb(mp.box);
  GibbsState g = gibbs(internal_energy(fb, mp), mp.beta);
  QuasiFreeState qs = quasifree_twopoint(mp.one_particle(), mp.beta);
  MatrixXcd h = mp.hopping();
  for (const auto& b : oriented_bonds(mp.box)) {
    MatrixXcd M = MatrixXcd::Zero(h.rows(), h.cols());
    M(b.from, b.to) = h(b.from, b.to);
    M(b.to, b.from) = std::conj(h(b.from, b.to));
    double oracle = quasifree_expect(qs, M);
    CHECK(sigma_d(fb, mp, g, b) == doctest::Approx(oracle).epsilon(1e-10));
  }
}

TEST_CASE("transport_setup geometry and validation") {
  Box box = enumerate_box(1, 2);
  CHECK_THROWS_AS(transport_setup(box, 3), std::invalid_argument);
  CHECK_THROWS_AS(transport_setup(box, 0, 1), std::invalid_argument);
  TransportSetup ts = transport_setup(box, 1, 1);
  CHECK(ts.n_avg == 1);
  REQUIRE(ts.dir_bonds.size() == 1);
  REQUIRE(ts.dir_bonds[0].size() == 1);
  // the single averaged bond is (e_1, 0)
  CHECK(box.sites[ts.dir_bonds[0][0].from] == Coords{1});
  CHECK(box.sites[ts.dir_bonds[0][0].to] == Coords{0});

  // without a shell every site of the sub-box is averaged
  TransportSetup full = transport_setup(box, 1, 0);
  CHECK(full.n_avg == 3);
  CHECK(full.dir_bonds[0].size() == 3);

  Box box2 = enumerate_box(2, 2);
  TransportSetup ts2 = transport_setup(box2, 2, 1);
  CHECK(ts2.n_avg == 9);
  CHECK(ts2.dir_bonds[0].size() == 9);
  CHECK(ts2.dir_bonds[1].size() == 9);
}

TEST_CASE("xi_p transpose law and time-reversal in two dimensions") {
  ModelParams mp;
  mp.box = enumerate_box(2, 1);
  mp.disorder = sample_disorder(3, mp.box);
  mp.vartheta = 0.4;
  mp.beta = 1.0;
  FockBasis fb(mp.box);
  GibbsState g = gibbs(internal_energy(fb, mp), mp.beta);
  TransportSetup ts = transport_setup(mp.box, 1, 1);
  XiKernels X = xi_p_kernels(fb, mp, g, ts);

  CHECK(X.eval(0.0).cwiseAbs().maxCoeff() <= 1e-12);
  for (double t : {0.3, 1.1, 2.7}) {
    MatrixXd Xt = X.eval(t);
    // Xi_p(-t) = Xi_p(t)^T
    CHECK((X.eval(-t) - Xt.transpose()).cwiseAbs().maxCoeff() <= 1e-10);
    // hence the antisymmetric part equals the odd-in-time part
    MatrixXd odd = 0.5 * (Xt - X.eval(-t));
    CHECK((antisymm_part(Xt) - odd).cwiseAbs().maxCoeff() <= 1e-12);
  }

  // real hopping (no bond disorder): time-reversal kills the odd part
  ModelParams mpr = mp;
  mpr.disorder = sample_disorder(0, mp.box, DisorderMode::deterministic_zero);
  GibbsState gr = gibbs(internal_energy(fb, mpr), mpr.beta);
  XiKernels Xr = xi_p_kernels(fb, mpr, gr, ts);
  for (double t : {0.3, 1.1, 2.7})
    CHECK(antisymm_part(Xr.eval(t)).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("xi_d is diagonal with the expected scale") {
  ModelParams mp = chain_params(2, 4);
  FockBasis fb(mp.box);
  GibbsState g = gibbs(internal_energy(fb, mp), mp.beta);
  TransportSetup ts = transport_setup(mp.box, 1, 1);
  MatrixXd Xd = xi_d(fb, mp, g, ts);
  CHECK(Xd.rows() == 1);
  // averaged expectation of a single diamagnetic kernel, bounded by its norm
  OrientedBond b = ts.dir_bonds[0][0];
  CHECK(Xd(0, 0) == doctest::Approx(sigma_d(fb, mp, g, b)).epsilon(1e-14));
  CHECK(std::abs(Xd(0, 0)) <= diamagnetic_kernel(fb, mp, b).norm() + 1e-12);
}

TEST_CASE("symmetric and antisymmetric splits") {
  MatrixXd X(2, 2);
  X << 1, 2, 3, 4;
  CHECK((symm_part(X) + antisymm_part(X) - X).cwiseAbs().maxCoeff() == 0.0);
  CHECK((symm_part(X) - symm_part(X).transpose()).cwiseAbs().maxCoeff() == 0.0);
  CHECK((antisymm_part(X) + antisymm_part(X).transpose()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("conductivity measure: reconstruction, positivity, Cesaro mean") {
  ModelParams mp = chain_params(1, 11, false);
  FockBasis fb(mp.box);
  GibbsState g = gibbs(internal_energy(fb, mp), mp.beta);
  TransportSetup ts = transport_setup(mp.box, 1, 1);
  ConductivityMeasure cm = conductivity_measure(fb, mp, g, ts);
  CHECK(cm.reconstruction_defect <= 1e-10);
  REQUIRE(!cm.atoms.empty());
  for (size_t i = 0; i < cm.atoms.size(); ++i) {
    CHECK(cm.atoms[i].nu > 0.0);
    if (i) CHECK(cm.atoms[i].nu > cm.atoms[i - 1].nu);
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(symm_part(cm.atoms[i].M));
    CHECK(es.eigenvalues().minCoeff() >= -1e-12);
    CHECK((cm.atoms[i].M - cm.atoms[i].M.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
  }

  // xi_plus matches the symmetric part of the direct kernel
  XiKernels X = xi_p_kernels(fb, mp, g, ts);
  for (double t : {0.5, 1.7})
    CHECK((cm.xi_plus(t) - symm_part(X.eval(t))).cwiseAbs().maxCoeff() <= 1e-10);

  // Cesaro closed form vs direct quadrature of xi_plus
  double T = 2.4;
  int n = 400;
  std::vector<double> f(n + 1);
  for (int j = 0; j <= n; ++j) f[j] = cm.xi_plus(j * T / n)(0, 0);
  double avg = cumulative_simpson(f, T / n)[n] / T;
  CHECK(cm.cesaro(T)(0, 0) == doctest::Approx(avg).epsilon(1e-9));

  // Cesaro mean tends to minus the total weight off zero
  MatrixXd limit = -cm.total_weight();
  CHECK((cm.cesaro(1e7) - limit).cwiseAbs().maxCoeff() <=
        1e-6 * std::max(1.0, limit.cwiseAbs().maxCoeff()));

  // minus xi_plus(t) is positive semidefinite (as a limit of PSD sums)
  for (double t : {0.3, 0.9, 2.1}) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(-cm.xi_plus(t));
    CHECK(es.eigenvalues().minCoeff() >= -1e-12);
  }

  // interacting case reconstructs too
  ModelParams mpi = chain_params(2, 6);
  FockBasis fbi(mpi.box);
  GibbsState gi = gibbs(internal_energy(fbi, mpi), mpi.beta);
  TransportSetup tsi = transport_setup(mpi.box, 1, 1);
  ConductivityMeasure cmi = conductivity_measure(fbi, mpi, gi, tsi);
  CHECK(cmi.reconstruction_defect <= 1e-8);
}

TEST_CASE("viscosity-like coefficient") {
  ModelParams mp = chain_params(2, 6);
  FockBasis fb(mp.box);
  GibbsState g = gibbs(internal_energy(fb, mp), mp.beta);
  TransportSetup ts = transport_setup(mp.box, 1, 1);
  ConductivityMeasure cm = conductivity_measure(fb, mp, g, ts);
  MatrixXd Xd = xi_d(fb, mp, g, ts);

  CHECK(viscosity(cm, Xd, 0.0).cwiseAbs().maxCoeff() <= 1e-14);
  double t = 0.7;
  CHECK((viscosity(cm, Xd, -t) + viscosity(cm, Xd, t)).cwiseAbs().maxCoeff() <= 1e-12);
  // xi_plus_dt against a central difference
  double h = 1e-5;
  MatrixXd fd = (cm.xi_plus(t + h) - cm.xi_plus(t - h)) / (2 * h);
  CHECK((cm.xi_plus_dt(t) - fd).cwiseAbs().maxCoeff() <= 1e-7);

  MatrixXd sing = MatrixXd::Zero(1, 1);
  CHECK_THROWS_AS(viscosity(cm, sing, t), std::domain_error);
}

TEST_CASE("cumulative Simpson quadrature") {
  // exact on quadratics, including the odd-index parabola rule
  int n = 8;
  double h = 0.25;
  std::vector<double> f(n + 1);
  for (int j = 0; j <= n; ++j) {
    double s = j * h;
    f[j] = 3 * s * s - 2 * s + 1;
  }
  auto F = cumulative_simpson(f, h);
  for (int j = 0; j <= n; ++j) {
    double s = j * h;
    CHECK(F[j] == doctest::Approx(s * s * s - s * s + s).epsilon(1e-14));
  }
  // convergent on sin
  int m = 200;
  double T = 2.0;
  std::vector<double> sf(m + 1);
  for (int j = 0; j <= m; ++j) sf[j] = std::sin(j * T / m);
  CHECK(cumulative_simpson(sf, T / m)[m] ==
        doctest::Approx(1.0 - std::cos(T)).epsilon(1e-9));
}

TEST_CASE("measured current densities vanish without a field") {
  ModelParams mp = chain_params(2, 5);
  FockBasis fb(mp.box);
  GibbsState g = gibbs(internal_energy(fb, mp), mp.beta);
  TransportSetup ts = transport_setup(mp.box, 1, 1);
  Pulse off = chain_pulse(0.0);
  CurrentTrace tr = current_densities(fb, mp, off, g, ts, 0.0, {0.5, 1.0},
                                      {Scheme::magnus2, 1e-2});
  for (size_t i = 0; i < tr.times.size(); ++i) {
    CHECK(tr.J_p[i].cwiseAbs().maxCoeff() <= 1e-10);
    CHECK(tr.J_d[i].cwiseAbs().maxCoeff() <= 1e-12);
  }
  // real hopping carries no persistent thermal current
  ModelParams mpr = mp;
  mpr.disorder = sample_disorder(0, mp.box, DisorderMode::deterministic_zero);
  mpr.interaction = density_density(mp.box, yukawa_profile(1.0, 1.0));
  GibbsState gr = gibbs(internal_energy(fb, mpr), mpr.beta);
  CurrentTrace trr = current_densities(fb, mpr, off, gr, ts, 0.0, {0.5},
                                       {Scheme::magnus2, 1e-2});
  CHECK(trr.J_th.cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("linear response currents: zeros and grid convergence") {
  ModelParams mp = chain_params(2, 5);
  FockBasis fb(mp.box);
  GibbsState g = gibbs(internal_energy(fb, mp), mp.beta);
  TransportSetup ts = transport_setup(mp.box, 1, 1);
  MatrixXd Xd = xi_d(fb, mp, g, ts);
  Pulse base = chain_pulse(1.0);
  std::vector<double> times{0.5, 1.0, 2.0};

  LinearResponse coarse =
      linear_response_currents(fb, mp, g, ts, base, 0.0, times, 400);
  LinearResponse fine =
      linear_response_currents(fb, mp, g, ts, base, 0.0, times, 1600);
  for (size_t i = 0; i < times.size(); ++i) {
    CHECK((coarse.J_p[i] - fine.J_p[i]).cwiseAbs().maxCoeff() <= 1e-8);
    CHECK((coarse.J_d[i] - fine.J_d[i]).cwiseAbs().maxCoeff() <= 1e-14);
  }
  // diamagnetic linear response follows the profile exactly
  for (size_t i = 0; i < times.size(); ++i) {
    VectorXd expect = -(Xd * base.direction) * base.time_profile(times[i]);
    CHECK((fine.J_d[i] - expect).cwiseAbs().maxCoeff() <= 1e-14);
  }
  // after the pulse the diamagnetic response is off again
  CHECK(fine.J_d.back().cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("log-log fit") {
  std::vector<double> xs{1e-1, 3e-2, 1e-2, 3e-3};
  std::vector<double> ys;
  for (double x : xs) ys.push_back(3.0 * std::pow(x, 2.5));
  LogLogFit fit = fit_loglog(xs, ys);
  CHECK(!fit.degenerate);
  CHECK(fit.slope == doctest::Approx(2.5).epsilon(1e-12));
  CHECK(fit.intercept == doctest::Approx(std::log(3.0)).epsilon(1e-10));

  std::vector<double> tiny(xs.size(), 1e-15);
  CHECK(fit_loglog(xs, tiny).degenerate);
}

TEST_CASE("Ohm scan: residuals shrink quadratically in the field strength") {
  ModelParams mp = chain_params(2, 5);
  FockBasis fb(mp.box);
  GibbsState g = gibbs(internal_energy(fb, mp), mp.beta);
  TransportSetup ts = transport_setup(mp.box, 1, 1);
  // weak base pulse keeps the cubic correction from biasing the fitted slope
  Pulse base = chain_pulse(1.0, 1.0, 0.4);
  std::vector<double> etas{0.05, 0.02, 0.01, 0.005};
  std::vector<double> times{0.6, 1.2};
  OhmScanResult res = ohm_scan(fb, mp, base, g, ts, etas, 0.0, times,
                               {Scheme::magnus2, 2e-4});
  CHECK(!res.fit_p.degenerate);
  CHECK(!res.fit_d.degenerate);
  CHECK(res.fit_p.slope >= 1.9);
  CHECK(res.fit_d.slope >= 1.9);
  // the measured currents themselves are first order, not zero
  CHECK(res.measured[0].J_p[0].cwiseAbs().maxCoeff() > 1e-4);
}

TEST_CASE("Joule scan: all four items are second-order accurate") {
  ModelParams mp = chain_params(2, 5);
  FockBasis fb(mp.box);
  GibbsState g = gibbs(internal_energy(fb, mp), mp.beta);
  Pulse base = chain_pulse(1.0);
  std::vector<double> etas{0.4, 0.2, 0.1};
  JouleScanResult res = joule_scan(fb, mp, base, g, etas, 0.0, 1.2,
                                   {Scheme::magnus2, 2e-4});
  CHECK(res.fit_p.slope >= 2.9);
  CHECK(res.fit_d.slope >= 2.9);
  CHECK(res.fit_Q.slope >= 2.9);
  CHECK(res.fit_P.slope >= 2.9);
  // sanity: the measured items are not all at the floor
  CHECK(std::abs(res.measured[0].S) > 1e-6);
  // the predicted split respects the measured balance identity
  for (size_t i = 0; i < etas.size(); ++i) {
    double m = res.measured[i].Ip + res.measured[i].Id;
    double s = res.measured[i].S + res.measured[i].P;
    CHECK(std::abs(m - s) <= 1e-10 * std::max(1.0, std::abs(m)));
  }
}
