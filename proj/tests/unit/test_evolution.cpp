#include <cmath>
#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "pinem/evolution.hpp"

using namespace pinem;

namespace {

struct TwoCavityCase {
  ElectronLadder ladder;
  PhotonMode mode1;
  PhotonMode mode2;
  cplx g;
  double phi;
};

KrausSet kraus_for(const TwoCavityCase& c, const PureState& electron) {
  const auto d1 = ladder_decompose(c.ladder, c.mode1, c.g);
  const auto d2 = ladder_decompose(c.ladder, c.mode2, c.g);
  return build_two_cavity_kraus(d1, d2, c.ladder, electron, c.phi);
}

DensityMatrix product(const DensityMatrix& a, const DensityMatrix& b) {
  const DensityMatrix x(HilbertLayout::single(kCavity1Label, a.dim()), a.matrix());
  const DensityMatrix y(HilbertLayout::single(kCavity2Label, b.dim()), b.matrix());
  return kron(x, y);
}

DensityMatrix pure_density(const PureState& s) { return DensityMatrix::from_pure(s); }

// Brute-force reference: trace the electron out of the exact joint evolution.
DensityMatrix oracle_channel(const TwoCavityCase& c, const PureState& electron,
                             const DensityMatrix& rho1, const DensityMatrix& rho2) {
  const JointSetup setup{c.ladder, c.mode1, c.mode2, CouplingConfig(c.g, c.phi)};
  const auto full = joint_evolve_full(pure_density(electron), rho1, rho2, setup);
  return partial_trace(full, {kCavity1Label, kCavity2Label});
}

}  // namespace

TEST_CASE("zero coupling gives the identity channel") {
  const TwoCavityCase c{ElectronLadder::symmetric(4), PhotonMode(3), PhotonMode(3), 0.0, 0.7};
  const auto kraus = kraus_for(c, delta_electron(c.ladder));
  REQUIRE(kraus.losses() == std::vector<int>{0});
  CHECK(max_abs(kraus.op(0).matrix() - Matrix::Identity(16, 16)) == 0.0);
  std::mt19937 rng(3);
  const auto rho = testing_helpers::random_density(kraus.layout, rng);
  CHECK(max_abs(apply_channel(rho, kraus).matrix() - rho.matrix()) == 0.0);
}

TEST_CASE("first-order emission carries the propagation phase on cavity 1") {
  const double phi = 0.9;
  const cplx g = 1e-4;
  const TwoCavityCase c{ElectronLadder::symmetric(6), PhotonMode(2), PhotonMode(2), g, phi};
  const auto kraus = kraus_for(c, delta_electron(c.ladder));
  const Matrix k1 = kraus.op(1).matrix();
  // Column of |00>: amplitudes on |10> (index 3) and |01> (index 1).
  const cplx a10 = k1(3, 0), a01 = k1(1, 0);
  CHECK(std::abs(a10 / a01 - std::polar(1.0, -phi)) < 1e-12);
  CHECK(std::abs(a01 - g) < 1e-7);
  double other = 0.0;
  for (Eigen::Index i = 0; i < 9; ++i)
    if (i != 1 && i != 3) other = std::max(other, std::abs(k1(i, 0)));
  CHECK(other == 0.0);
}

TEST_CASE("completeness at moderate coupling") {
  const TwoCavityCase c{ElectronLadder::symmetric(24), PhotonMode(10), PhotonMode(10), 0.3, 1.0};
  const auto kraus = kraus_for(c, delta_electron(c.ladder));
  CHECK(kraus.leakage < 1e-8);
  CHECK(kraus.completeness_deficit() == doctest::Approx(kraus.leakage));

  SUBCASE("a ladder too short to hold the losses fails the completeness check") {
    const auto short_ladder = ElectronLadder::symmetric(3);
    const auto d = ladder_decompose(short_ladder, c.mode1, c.g);
    CHECK_THROWS_AS(build_two_cavity_kraus(d, d, short_ladder, delta_electron(short_ladder), c.phi),
                    TruncationError);
  }
}

TEST_CASE("channel matches the full-space oracle") {
  std::mt19937 rng(11);
  SUBCASE("delta electron, random mixed inputs") {
    const TwoCavityCase c{ElectronLadder::symmetric(8), PhotonMode(4), PhotonMode(4), {0.25, 0.1}, 1.3};
    const auto e = delta_electron(c.ladder);
    const auto kraus = kraus_for(c, e);
    const auto r1 = testing_helpers::random_density(HilbertLayout::single("ph", 5), rng);
    const auto r2 = testing_helpers::random_density(HilbertLayout::single("ph", 5), rng);
    const auto out = apply_channel(product(r1, r2), kraus);
    CHECK(max_abs(out.matrix() - oracle_channel(c, e, r1, r2).matrix()) < 1e-9);
  }
  SUBCASE("three-peak electron") {
    const TwoCavityCase c{ElectronLadder::symmetric(10), PhotonMode(4), PhotonMode(3), 0.3, 0.4};
    const auto e = comb_electron(c.ladder, 3, {0.0, 1.0, -0.5});
    const auto kraus = kraus_for(c, e);
    const auto r1 = pure_density(coherent_state(c.mode1, 0.2, "ph"));
    const auto r2 = testing_helpers::random_density(HilbertLayout::single("ph", 4), rng);
    const auto out = apply_channel(product(r1, r2), kraus);
    CHECK(max_abs(out.matrix() - oracle_channel(c, e, r1, r2).matrix()) < 1e-9);
  }
}

TEST_CASE("emission from vacuum at weak coupling") {
  const TwoCavityCase c{ElectronLadder::symmetric(16), PhotonMode(6), PhotonMode(6), 0.1, 0.5};
  const auto kraus = kraus_for(c, delta_electron(c.ladder));
  const auto vac = pure_density(vacuum_state(c.mode1));
  const auto out = apply_channel(product(vac, vac), kraus);
  const Matrix n1 = kron(number_operator(c.mode1, kCavity1Label),
                         OperatorMatrix::identity(HilbertLayout::single(kCavity2Label, 7)))
                        .matrix();
  const Matrix n2 = kron(OperatorMatrix::identity(HilbertLayout::single(kCavity1Label, 7)),
                         number_operator(c.mode2, kCavity2Label))
                        .matrix();
  const double total = (out.matrix() * (n1 + n2)).trace().real();
  CHECK(std::abs(total / 0.02 - 1.0) < 0.1);
  const auto p = loss_probabilities(product(vac, vac), kraus);
  CHECK(p.at(1) == doctest::Approx(0.02).epsilon(0.1));
}

TEST_CASE("trajectory bookkeeping") {
  const TwoCavityCase c{ElectronLadder::symmetric(16), PhotonMode(8), PhotonMode(8), 0.2, 0.5};
  const auto kraus = kraus_for(c, delta_electron(c.ladder));
  const auto vac = pure_density(vacuum_state(c.mode1));
  const auto rho0 = product(vac, vac);
  const auto none = iterate_channel(rho0, kraus, 0);
  REQUIRE(none.states.size() == 1);
  CHECK(max_abs(none.states[0].matrix() - rho0.matrix()) == 0.0);

  int seen = 0;
  const auto traj = iterate_channel(rho0, kraus, 3, [&](int, const DensityMatrix&) { ++seen; });
  CHECK(seen == 4);
  CHECK(traj.states.size() == 4);
  for (const auto& d : traj.diagnostics) CHECK(d.trace_deficit < 1e-8);
  CHECK(max_abs(traj.states[2].matrix() - apply_channel(apply_channel(rho0, kraus), kraus).matrix()) <
        1e-14);
  // Unitary truncated blocks keep the trace, so an undersized cutoff shows up as edge population.
  const auto long_run = iterate_channel(rho0, kraus, 40, {}, false);
  CHECK(traj.diagnostics.back().edge_population < 1e-8);
  CHECK(long_run.diagnostics.back().edge_population > 1e-4);
  CHECK_THROWS_AS(iterate_channel(rho0, kraus, -1), ArgumentError);
}

TEST_CASE("post-selection on one lost quantum gives a Bell state") {
  for (double g : {0.1, 0.7, 1.2}) {
    const double phi = 0.6;
    const TwoCavityCase c{ElectronLadder::symmetric(40), PhotonMode(20), PhotonMode(20), g, phi};
    const auto kraus = kraus_for(c, delta_electron(c.ladder));
    const PureState vac2 = kron(vacuum_state(c.mode1, kCavity1Label), vacuum_state(c.mode2, kCavity2Label));
    const auto sel = post_select(vac2, kraus, 1);
    const Vector& v = sel.state.amplitudes();
    // |10> sits at index 21, |01> at index 1.
    CHECK(std::abs(std::abs(v(21)) - 1.0 / std::sqrt(2.0)) < 1e-12);
    CHECK(std::abs(v(21) / v(1) - std::polar(1.0, -phi)) < 1e-12);
    CHECK(sel.probability == doctest::Approx(2 * g * g * std::exp(-2 * g * g)).epsilon(1e-10));
    if (g == 0.7) CHECK(std::abs(sel.probability - 0.37) < 0.01);
    if (g == 0.1) CHECK(std::abs(sel.probability / 0.02 - 1.0) < 0.1);
  }
}

TEST_CASE("post-selection errors and consistency") {
  std::mt19937 rng(5);
  const TwoCavityCase c{ElectronLadder::symmetric(20), PhotonMode(5), PhotonMode(5), 0.35, 1.1};
  const auto kraus = kraus_for(c, delta_electron(c.ladder));
  const PureState vac2 = kron(vacuum_state(c.mode1, kCavity1Label), vacuum_state(c.mode2, kCavity2Label));
  // Absorption is impossible from vacuum.
  CHECK_THROWS_AS(post_select(vac2, kraus, -1), DegenerateError);
  CHECK_THROWS_AS(post_select(vac2, kraus, 40), DegenerateError);

  const auto rho = testing_helpers::random_density(kraus.layout, rng);
  const auto probs = loss_probabilities(rho, kraus);
  double total = 0.0;
  Matrix mix = Matrix::Zero(36, 36);
  for (const auto& [q, p] : probs) {
    total += p;
    if (p < kDegenerateProbability) continue;
    const auto sel = post_select(rho, kraus, q);
    CHECK(sel.probability == doctest::Approx(p).epsilon(1e-12));
    mix += p * sel.state.matrix();
  }
  CHECK(std::abs(total - 1.0) < 1e-8);
  CHECK(max_abs(mix - apply_channel(rho, kraus).matrix()) < 1e-10);
}

TEST_CASE("marginal invariances") {
  const auto ladder = ElectronLadder::symmetric(12);
  const PhotonMode mode(4);
  const auto e = delta_electron(ladder);
  std::mt19937 rng(9);
  const auto r1a = testing_helpers::random_density(HilbertLayout::single("ph", 5), rng);
  const auto r1b = pure_density(fock_state(mode, 2));
  const auto r2a = testing_helpers::random_density(HilbertLayout::single("ph", 5), rng);
  const auto r2b = pure_density(vacuum_state(mode));

  SUBCASE("cavity 1 ignores cavity 2 and the propagation phase") {
    const TwoCavityCase c1{ladder, mode, mode, 0.3, 0.0};
    const TwoCavityCase c2{ladder, mode, mode, 0.3, 2.1};
    const auto a = partial_trace(apply_channel(product(r1a, r2a), kraus_for(c1, e)), {kCavity1Label});
    const auto b = partial_trace(apply_channel(product(r1a, r2b), kraus_for(c2, e)), {kCavity1Label});
    CHECK(max_abs(a.matrix() - b.matrix()) < 1e-10);

    const auto single = build_single_cavity_kraus(ladder_decompose(ladder, mode, 0.3), ladder, e);
    const DensityMatrix r1(HilbertLayout::single(kCavity1Label, 5), r1a.matrix());
    CHECK(max_abs(apply_channel(r1, single).matrix() - a.matrix()) < 1e-10);

    const JointSetup setup{ladder, mode, mode, CouplingConfig(0.3, 2.1)};
    const auto full = joint_evolve_full(pure_density(e), r1a, r2b, setup);
    CHECK(max_abs(partial_trace(full, {kCavity1Label}).matrix() - a.matrix()) < 1e-9);
  }
  SUBCASE("without propagation phase cavity 2 ignores cavity 1") {
    const TwoCavityCase c{ladder, mode, mode, 0.3, 0.0};
    const auto kraus = kraus_for(c, e);
    const auto a = partial_trace(apply_channel(product(r1a, r2a), kraus), {kCavity2Label});
    const auto b = partial_trace(apply_channel(product(r1b, r2a), kraus), {kCavity2Label});
    CHECK(max_abs(a.matrix() - b.matrix()) < 1e-10);
  }
}

TEST_CASE("propagation phase lets cavity 1 steer cavity 2") {
  const cplx g = 0.2;
  const auto ladder = ElectronLadder::symmetric(40);
  const int electrons = 5;
  const PhotonMode big(default_coherent_n_max(5.0) + growth_margin(electrons, g));
  const PhotonMode small(default_fock_n_max(1, g) + growth_margin(electrons, g));
  const PhotonMode m2(growth_margin(electrons, g) + 6);
  const auto e = delta_electron(ladder);
  const auto d2 = ladder_decompose(ladder, m2, g);
  auto mean_n2 = [&](const PhotonMode& m1, const PureState& in1) {
    const auto kraus = build_two_cavity_kraus(ladder_decompose(ladder, m1, g), d2, ladder, e, 1.0);
    auto rho = product(pure_density(in1), pure_density(vacuum_state(m2)));
    for (int i = 0; i < electrons; ++i) rho = apply_channel(rho, kraus);
    const auto r2 = partial_trace(rho, {kCavity2Label});
    double n = 0.0;
    for (Eigen::Index k = 0; k < r2.matrix().rows(); ++k) n += double(k) * r2.matrix()(k, k).real();
    return n;
  };
  const double coh = mean_n2(big, coherent_state(big, 5.0));
  const double fock = mean_n2(small, fock_state(small, 1));
  CHECK(std::abs(coh - fock) > 1e-3);
}

TEST_CASE("full-space evolution") {
  const auto ladder = ElectronLadder::symmetric(6);
  const PhotonMode mode(3);
  const auto e = delta_electron(ladder);
  std::mt19937 rng(21);
  const auto r1 = testing_helpers::random_density(HilbertLayout::single("ph", 4), rng);
  const auto r2 = testing_helpers::random_density(HilbertLayout::single("ph", 4), rng);

  SUBCASE("zero coupling leaves the state unchanged") {
    const JointSetup setup{ladder, mode, mode, CouplingConfig(0.0, 1.0)};
    const auto full = joint_evolve_full(pure_density(e), r1, r2, setup);
    const auto ref = kron(kron(DensityMatrix(ladder.layout(), pure_density(e).matrix()),
                               DensityMatrix(HilbertLayout::single(kCavity1Label, 4), r1.matrix())),
                          DensityMatrix(HilbertLayout::single(kCavity2Label, 4), r2.matrix()));
    CHECK(max_abs(full.matrix() - ref.matrix()) < 1e-14);
    const RealVector spec = electron_spectrum(full);
    CHECK(spec(6) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(spec.sum() == doctest::Approx(1.0).epsilon(1e-14));
  }
  SUBCASE("pure and mixed paths agree") {
    const JointSetup setup{ladder, mode, mode, CouplingConfig(0.3, 0.8)};
    const auto p1 = coherent_state(mode, 0.1, "ph");
    const auto p2 = fock_state(mode, 1);
    const auto psi = joint_evolve_pure(e, p1, p2, setup);
    const auto rho = joint_evolve_full(pure_density(e), pure_density(p1), pure_density(p2), setup);
    CHECK(max_abs(DensityMatrix::from_pure(psi).matrix() - rho.matrix()) < 1e-12);
    CHECK(max_abs(electron_spectrum(psi) - electron_spectrum(rho)) < 1e-12);
    CHECK(electron_spectrum(psi).sum() == doctest::Approx(1.0).epsilon(1e-8));
  }
  SUBCASE("no absorption from vacuum") {
    const JointSetup setup{ladder, mode, mode, CouplingConfig(0.1, 0.8)};
    const auto psi = joint_evolve_pure(e, vacuum_state(mode), vacuum_state(mode), setup);
    const RealVector spec = electron_spectrum(psi);
    for (int k = 1; k <= 6; ++k) CHECK(spec(ladder.index_of(k)) == 0.0);
    CHECK(spec(ladder.index_of(-1)) == doctest::Approx(0.02).epsilon(0.1));
  }
  SUBCASE("sizing guard") {
    const JointSetup setup{ElectronLadder::symmetric(200), PhotonMode(10), PhotonMode(10),
                           CouplingConfig(0.1, 0.0)};
    CHECK_THROWS_AS(joint_evolve_full(pure_density(delta_electron(setup.ladder)),
                                      pure_density(vacuum_state(setup.mode1)),
                                      pure_density(vacuum_state(setup.mode2)), setup),
                    SizingError);
  }
}

TEST_CASE("coherent light broadens the electron more than a single photon") {
  const cplx g = 0.2;
  const auto ladder = ElectronLadder::symmetric(30);
  const PhotonMode big(default_coherent_n_max(5.0));
  const PhotonMode small(default_fock_n_max(1, g));
  const PhotonMode m2(3);
  auto variance = [&](const PhotonMode& m1, const PureState& in1) {
    const JointSetup setup{ladder, m1, m2, CouplingConfig(g, 0.0)};
    const auto psi = joint_evolve_pure(delta_electron(ladder), in1, vacuum_state(m2), setup);
    return electron_energy_variance(electron_spectrum(psi), ladder);
  };
  CHECK(variance(big, coherent_state(big, 5.0)) > variance(small, fock_state(small, 1)));
}

TEST_CASE("collective mode reproduces the two-cavity channel without propagation phase") {
  const cplx g = 0.4;
  const int electrons = 4;
  const auto ladder = ElectronLadder::symmetric(44);
  const auto e = delta_electron(ladder);
  const cplx alpha1 = 0.5, alpha2 = {0.3, -0.4};
  const PhotonMode mode(20);
  const auto dec = ladder_decompose(ladder, mode, g);
  const auto kraus = build_two_cavity_kraus(dec, dec, ladder, e, 0.0);
  const Matrix n1 = kron(number_operator(mode, kCavity1Label),
                         OperatorMatrix::identity(HilbertLayout::single(kCavity2Label, 21)))
                        .matrix();
  const Matrix n2 = kron(OperatorMatrix::identity(HilbertLayout::single(kCavity1Label, 21)),
                         number_operator(mode, kCavity2Label))
                        .matrix();
  const auto rho0 = DensityMatrix::from_pure(
      kron(coherent_state(mode, alpha1, kCavity1Label), coherent_state(mode, alpha2, kCavity2Label)));
  std::vector<TwoModeMoments> direct;
  iterate_channel(rho0, kraus, electrons, [&](int m, const DensityMatrix& rho) {
    TwoModeMoments row;
    row.m = m;
    row.mean_n1 = (rho.matrix() * n1).trace().real();
    row.mean_n2 = (rho.matrix() * n2).trace().real();
    row.n1n2 = (rho.matrix() * n1 * n2).trace().real();
    direct.push_back(row);
  }, false);
  const auto collective = collective_mode_moments(alpha1, alpha2, g, ladder, e, electrons);
  REQUIRE(collective.size() == direct.size());
  for (std::size_t m = 0; m < direct.size(); ++m) {
    CHECK(std::abs(collective[m].mean_n1 - direct[m].mean_n1) < 1e-8);
    CHECK(std::abs(collective[m].mean_n2 - direct[m].mean_n2) < 1e-8);
    CHECK(std::abs(collective[m].n1n2 - direct[m].n1n2) < 1e-8);
  }
}

TEST_CASE("collective mode from vacuum follows (2N-1)/N") {
  const cplx g = 0.4;
  const auto ladder = ElectronLadder::symmetric(60);
  const auto moments = collective_mode_moments(0.0, 0.0, g, ladder, delta_electron(ladder), 10);
  CHECK_THROWS_AS(moments[0].g2(), UndefinedG2Error);
  for (int n = 1; n <= 10; ++n) {
    CHECK(std::abs(moments[n].g2() - (2.0 * n - 1.0) / n) < 1e-6);
    CHECK(moments[n].mean_n1 == doctest::Approx(moments[n].mean_n2).epsilon(1e-12));
  }
}
