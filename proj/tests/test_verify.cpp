#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <lft/verify.hpp>

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

TEST_CASE("dynamics family enumerates on-site, hopping, and pair terms") {
  Box box = enumerate_box(1, 1);
  Disorder w = sample_disorder(9, box);
  InteractionSpec pair = density_density(box, yukawa_profile(1.0, 1.0));
  InteractionSpec fam = dynamics_family(box, w, 0.4, pair);
  CHECK(fam.terms.size() == pair.terms.size() + 3 + 2);
  MatrixXcd h = one_particle_hopping(box, w, 0.4);
  size_t base = pair.terms.size();
  for (int i = 0; i < 3; ++i) {
    CHECK(fam.terms[base + i].support == std::vector<int>{i});
    CHECK(fam.terms[base + i].norm == doctest::Approx(2.0));
  }
  for (int b = 0; b < box.n_bonds(); ++b) {
    auto [i, j] = box.bonds[b];
    CHECK(fam.terms[base + 3 + b].norm == doctest::Approx(std::abs(h(i, j))));
  }
}

TEST_CASE("interaction norm surrogate is a max over samples") {
  Box box = enumerate_box(1, 2);
  InteractionSpec pair = density_density(box, yukawa_profile(1.0, 1.0));
  DecayFn F = polynomial_decay(1, 1.0);
  double one = interaction_norm_bound(box, 0.4, pair, F, 3, 1);
  double five = interaction_norm_bound(box, 0.4, pair, F, 3, 5);
  CHECK(five >= one);
  CHECK(one > 0.0);
  // each sampled norm is dominated by the surrogate
  for (int s = 0; s < 5; ++s) {
    Disorder w = sample_disorder(3 + s, box);
    double n = interaction_norm(dynamics_family(box, w, 0.4, pair), F, box);
    CHECK(n <= five * (1 + 1e-12));
  }
}

TEST_CASE("lr_bound_check rejects odd observables and overlapping supports") {
  ModelParams mp = chain_params(1, 7);
  FockBasis fb(mp.box);
  DecayFn F = polynomial_decay(1, 1.0);
  DecayConstants dc = decay_constants(F, mp.box);
  Operator odd = annihilation(fb, 0);
  Operator n0 = number_op(fb, 0), n2 = number_op(fb, 2);
  CHECK_THROWS_AS(lr_bound_check(fb, mp, odd, {0}, n2, {2}, F, dc.convolution,
                                 1.0, {0.5}),
                  std::invalid_argument);
  CHECK_THROWS_AS(lr_bound_check(fb, mp, n0, {0}, n0, {0}, F, dc.convolution,
                                 1.0, {0.5}),
                  std::invalid_argument);
}

TEST_CASE("Lieb-Robinson bound holds on a disordered chain") {
  ModelParams mp = chain_params(4, 2);  // 9 sites
  FockBasis fb(mp.box);
  DecayFn F = polynomial_decay(1, 1.0);
  DecayConstants dc = decay_constants(F, mp.box);
  double J = interaction_norm_bound(mp.box, mp.vartheta, mp.interaction, F, 2, 3);
  std::vector<double> times{0.0, 0.25, 0.5, 1.0, 1.5, 2.0};

  // even local observables at increasing separation
  Operator B1 = number_op(fb, 0);  // site -4
  for (int target : {4, 6, 8}) {   // sites 0, +2, +4
    Operator B2 = number_op(fb, target);
    LrVerdict v = lr_bound_check(fb, mp, B1, {0}, B2, {target}, F,
                                 dc.convolution, J, times);
    CHECK(v.pass);
    CHECK(v.measured[0] <= 1e-12);  // commuting at t = 0, up to rounding
    for (size_t i = 1; i < times.size(); ++i) CHECK(v.margin[i] >= 0.0);
  }

  // the bound shrinks with separation through the F-sum
  LrVerdict near = lr_bound_check(fb, mp, B1, {0}, number_op(fb, 4), {4}, F,
                                  dc.convolution, J, {1.0});
  LrVerdict far = lr_bound_check(fb, mp, B1, {0}, number_op(fb, 8), {8}, F,
                                 dc.convolution, J, {1.0});
  CHECK(far.bound[0] < near.bound[0]);
  CHECK(far.measured[0] < near.measured[0]);

  // a hopping-type even observable across two sites
  MatrixXcd h = mp.hopping();
  MatrixXcd m = MatrixXcd::Zero(fb.dim, fb.dim);
  add_hopping(m, fb, 0, 1, Complex(0.3, 0.1));
  add_hopping(m, fb, 1, 0, Complex(0.3, -0.1));
  Operator hop{std::move(m), fb.hash};
  LrVerdict vh = lr_bound_check(fb, mp, hop, {0, 1}, number_op(fb, 7), {7}, F,
                                dc.convolution, J, times);
  CHECK(vh.pass);
}

TEST_CASE("equicontinuity of the paramagnetic matrix") {
  ModelParams mp = chain_params(2, 5);
  FockBasis fb(mp.box);
  GibbsState g = gibbs(internal_energy(fb, mp), mp.beta);
  TransportSetup ts = transport_setup(mp.box, 1, 1);
  DecayFn F = polynomial_decay(1, 1.0);
  DecayConstants dc = decay_constants(F, mp.box);
  double J = interaction_norm_bound(mp.box, mp.vartheta, mp.interaction, F, 5, 3);
  EquicontinuityVerdict v = equicontinuity_check(fb, mp, g, ts, dc, J, 1.0);
  CHECK(v.pass);
  CHECK(v.lipschitz_constant > 0.0);
  CHECK(v.measured.size() == 21 * 20 / 2);
  // the kernel actually moves, so the check is not vacuous on the measured side
  double m = 0;
  for (double x : v.measured) m = std::max(m, x);
  CHECK(m > 1e-6);
  for (size_t i = 0; i < v.measured.size(); ++i) CHECK(v.margin[i] >= 0.0);
}
