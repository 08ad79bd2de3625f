#include <cmath>

#include "doctest.h"
#include "pinem/operators.hpp"

using namespace pinem;

namespace {

Vector apply(const OperatorMatrix& op, const PureState& s) { return op.matrix() * s.amplitudes(); }

double interior_column_defect(const ScatteringMatrix& sm, const ElectronLadder& ladder,
                              const PhotonMode& mode) {
  // Norm of each interior column restricted to rows away from the outermost ladder states.
  const auto dp = static_cast<Eigen::Index>(mode.dim());
  const Eigen::Index de = static_cast<Eigen::Index>(ladder.dim());
  double worst = 0.0;
  for (int k = -sm.interior; k <= sm.interior; ++k) {
    for (Eigen::Index n = 0; n < dp; ++n) {
      const auto col = static_cast<Eigen::Index>(ladder.index_of(k)) * dp + n;
      const double inner = sm.s.matrix().col(col).segment(dp, (de - 2) * dp).squaredNorm();
      worst = std::max(worst, std::abs(inner - 1.0));
    }
  }
  return worst;
}

}  // namespace

TEST_CASE("photon ladder operators") {
  const PhotonMode mode(5);
  const auto a = annihilation(mode);
  CHECK(max_abs(apply(a, fock_state(mode, 1)) - fock_state(mode, 0).amplitudes()) < 1e-15);
  CHECK(apply(a, fock_state(mode, 0)).norm() == 0.0);
  const Matrix n = (creation(mode) * a).matrix();
  for (int k = 0; k <= mode.n_max; ++k) CHECK(std::abs(n(k, k) - double(k)) < 1e-14);
  CHECK(max_abs(n - number_operator(mode).matrix()) < 1e-14);
  CHECK_THROWS_AS(PhotonMode(0), ArgumentError);
}

TEST_CASE("electron shift with open boundary") {
  const ElectronLadder ladder(-3, 3);
  const auto b = electron_shift(ladder);
  const Vector down = b.matrix() * delta_electron(ladder).amplitudes();
  CHECK(std::abs(down(static_cast<Eigen::Index>(ladder.index_of(-1))) - 1.0) < 1e-15);
  const Vector edge = b.matrix() * PureState::basis(ladder.layout(), 0).amplitudes();
  CHECK(edge.norm() == 0.0);
  Matrix expect = Matrix::Identity(7, 7);
  expect(0, 0) = 0.0;
  CHECK(max_abs((b.adjoint() * b).matrix() - expect) == 0.0);
  CHECK_THROWS_AS(ElectronLadder(1, 3), ArgumentError);
}

TEST_CASE("free-space propagation phase") {
  const ElectronLadder ladder(-3, 3);
  CHECK(max_abs(fsp_operator(ladder, 0.0).matrix() - Matrix::Identity(7, 7)) == 0.0);
  const Matrix u = fsp_operator(ladder, M_PI).matrix();
  CHECK(std::abs(u(ladder.index_of(1), ladder.index_of(1)) - cplx(-1.0)) < 1e-15);
  CHECK(std::abs(u(ladder.index_of(2), ladder.index_of(2)) - cplx(1.0)) < 1e-14);
  const Matrix prod = fsp_operator(ladder, 0.3).matrix() * fsp_operator(ladder, 0.9).matrix();
  CHECK(max_abs(prod - fsp_operator(ladder, 1.2).matrix()) < 1e-14);
  CHECK(max_abs(u.adjoint() * u - Matrix::Identity(7, 7)) < 1e-15);
}

TEST_CASE("dispersion phase") {
  PhysicalParams p{200e3, 0.8, 0.0};
  CHECK(dispersion_phase(p) == 0.0);
  p.z_m = dispersion_length(p);
  CHECK(dispersion_phase(p) == doctest::Approx(2.0 * M_PI).epsilon(1e-14));
  // 200 keV electron, 0.8 eV photons, 1 mm: gamma = 1.3913902367118367,
  // v = 2.0845003442e8 m/s, z_D = 1.7927801187775564 m, evaluated independently at
  // 30 significant digits.
  p.z_m = 1e-3;
  CHECK(dispersion_length(p) == doctest::Approx(1.7927801187775564).epsilon(1e-13));
  CHECK(dispersion_phase(p) == doctest::Approx(0.0035047160783241530).epsilon(1e-13));
  CHECK_THROWS_AS(dispersion_phase(PhysicalParams{0.0, 0.8, 1.0}), ArgumentError);
}

TEST_CASE("scattering matrix") {
  SUBCASE("zero coupling is the identity") {
    const ElectronLadder ladder = ElectronLadder::symmetric(4);
    const auto sm = scattering_matrix(ladder, PhotonMode(3), 0.0);
    CHECK(max_abs(sm.s.matrix() - Matrix::Identity(36, 36)) == 0.0);
  }
  SUBCASE("single emission amplitude") {
    const ElectronLadder ladder = ElectronLadder::symmetric(10);
    const PhotonMode mode(4);
    const cplx g(0.1, 0.0);
    const auto sm = scattering_matrix(ladder, mode, g);
    const auto dp = static_cast<Eigen::Index>(mode.dim());
    const auto row = static_cast<Eigen::Index>(ladder.index_of(-1)) * dp + 1;
    const auto col = static_cast<Eigen::Index>(ladder.index_of(0)) * dp + 0;
    const cplx amp = sm.s.matrix()(row, col);
    CHECK(std::abs(amp - g) < 1e-3);
    // Exact value on the untruncated ladder: g e^{-|g|^2/2}.
    CHECK(std::abs(amp - g * std::exp(-0.005)) < 1e-12);
  }
  SUBCASE("interior columns are normalized") {
    const ElectronLadder ladder = ElectronLadder::symmetric(16);
    const PhotonMode mode(6);
    const auto sm = scattering_matrix(ladder, mode, cplx(0.3, 0.2));
    CHECK(sm.interior > 0);
    CHECK(sm.leakage < 1e-8);
    CHECK(interior_column_defect(sm, ladder, mode) < 1e-8);
  }
  SUBCASE("undersized ladder") {
    try {
      scattering_matrix(ElectronLadder::symmetric(2), PhotonMode(10), 0.5);
      FAIL("expected TruncationError");
    } catch (const TruncationError& e) {
      REQUIRE(e.suggested_k_max().has_value());
      CHECK(*e.suggested_k_max() > 2);
    }
  }
  SUBCASE("scattering operators on distinct modes commute on the interior") {
    const ElectronLadder ladder = ElectronLadder::symmetric(8);
    const PhotonMode m1(3), m2(3);
    const cplx g(0.2, -0.1);
    const auto s1 = scattering_matrix(ladder, m1, g, kCavity1Label);
    const auto s2 = scattering_matrix(ladder, m2, g, kCavity2Label);
    const HilbertLayout full({kElectronLabel, kCavity1Label, kCavity2Label}, {ladder.dim(), 4, 4});
    // Embed by applying each factor to every basis column.
    Matrix e1(full.total_dim(), full.total_dim()), e2(full.total_dim(), full.total_dim());
    for (std::size_t c = 0; c < full.total_dim(); ++c) {
      const auto basis = PureState::basis(full, c);
      e1.col(c) = apply_local(s1.s, basis).amplitudes();
      e2.col(c) = apply_local(s2.s, basis).amplitudes();
    }
    const Matrix comm = e1 * e2 - e2 * e1;
    // Columns whose full reach under both factors stays inside the ladder.
    const int interior = ladder.k_max - m1.n_max - m2.n_max;
    REQUIRE(interior >= 1);
    double worst = 0.0;
    for (int k = -interior; k <= interior; ++k) {
      for (int c = 0; c < 16; ++c) {
        const auto col = static_cast<Eigen::Index>(ladder.index_of(k)) * 16 + c;
        worst = std::max(worst, comm.col(col).cwiseAbs().maxCoeff());
      }
    }
    CHECK(worst < 1e-9);
  }
}

TEST_CASE("F_k series") {
  const PhotonMode mode(6);
  CHECK(max_abs(f_series(mode, 0.0, 0).matrix() - Matrix::Identity(7, 7)) < 1e-15);
  CHECK(max_abs(f_series(mode, 0.0, 1).matrix() - creation(mode).matrix()) < 1e-15);
  CHECK(max_abs(f_series(mode, 0.0, -1).matrix()) == 0.0);

  // With coefficient C_1 = e^{|g|^2/2} g F_1(a) the series reproduces the exact band.
  const cplx g(0.2, 0.0);
  const auto oracle =
      ladder_decompose(ElectronLadder::symmetric(40), mode, g, DecompositionMethod::kOracle, 30);
  const Matrix c1 = f_series(mode, g, 1).matrix() * (g * std::exp(0.5 * std::norm(g)));
  CHECK(max_abs(c1 - oracle.coeff(1).matrix()) < 1e-10);
}

TEST_CASE("ladder decomposition") {
  SUBCASE("zero coupling") {
    const auto dec = ladder_decompose(ElectronLadder::symmetric(12), PhotonMode(4), 0.0);
    CHECK(max_abs(dec.coeff(0).matrix() - Matrix::Identity(5, 5)) == 0.0);
    for (int k = -4; k <= 4; ++k) {
      if (k != 0) CHECK(dec.band_max(k) == 0.0);
    }
  }
  SUBCASE("completeness") {
    const ElectronLadder ladder = ElectronLadder::symmetric(12);
    const PhotonMode mode(10);
    for (auto method : {DecompositionMethod::kOracle, DecompositionMethod::kDisplacement}) {
      const auto dec = ladder_decompose(ladder, mode, cplx(0.3, 0.0), method);
      Matrix sum = Matrix::Zero(11, 11);
      for (int k = dec.min_shift(); k <= dec.max_shift(); ++k) {
        const Matrix c = dec.coeff(k).matrix();
        sum += c.adjoint() * c;
      }
      CHECK(max_abs(sum - Matrix::Identity(11, 11)) < 1e-8);
      CHECK(dec.completeness_deficit < 1e-8);
    }
  }
  SUBCASE("single-photon emission from vacuum") {
    const auto dec = ladder_decompose(ElectronLadder::symmetric(12), PhotonMode(6), 0.1);
    CHECK(std::abs(std::abs(dec.element(1, 0)) - 0.1) < 1e-3);
  }
  SUBCASE("series agrees with the padded oracle") {
    const PhotonMode mode(10);
    const ElectronLadder ladder = ElectronLadder::symmetric(42);
    for (cplx g : {cplx(0.1, 0.0), cplx(0.3, -0.2), cplx(0.0, 0.5), cplx(-0.35, 0.35)}) {
      const auto series = ladder_decompose(ladder, mode, g, DecompositionMethod::kSeries);
      const auto oracle = ladder_decompose(ladder, mode, g, DecompositionMethod::kOracle, 30);
      CHECK(max_coefficient_difference(series, oracle) < 1e-8);
    }
  }
  SUBCASE("displacement bands equal the unpadded oracle") {
    const PhotonMode mode(8);
    const ElectronLadder ladder = ElectronLadder::symmetric(10);
    const auto disp = ladder_decompose(ladder, mode, cplx(0.4, 0.1));
    const auto oracle =
        ladder_decompose(ladder, mode, cplx(0.4, 0.1), DecompositionMethod::kOracle, 0);
    CHECK(max_coefficient_difference(disp, oracle) < 1e-12);
  }
  SUBCASE("narrow ladder trips the spread check") {
    CHECK_THROWS_AS(ladder_decompose(ElectronLadder::symmetric(3), PhotonMode(8), 0.8,
                                     DecompositionMethod::kOracle),
                    TruncationError);
  }
}

TEST_CASE("state factories") {
  const PhotonMode mode(16);
  const Vector n = number_operator(mode).matrix().diagonal();
  SUBCASE("coherent") {
    CHECK(max_abs(coherent_state(mode, 0.0).amplitudes() - vacuum_state(mode).amplitudes()) == 0.0);
    const Vector p = coherent_state(mode, 1.0).amplitudes().cwiseAbs2();
    const double mean = (p.array() * n.array()).real().sum();
    const double second = (p.array() * n.array() * n.array()).real().sum();
    CHECK(std::abs(mean - 1.0) < 1e-8);
    CHECK(std::abs(second - mean * mean - 1.0) < 1e-6);
    CHECK_THROWS_AS(coherent_state(PhotonMode(10), 2.0), TruncationError);
    try {
      coherent_state(PhotonMode(6), 1.0);  // passes the guard, tail too heavy
      FAIL("expected TruncationError");
    } catch (const TruncationError& e) {
      CHECK(e.suggested_n_max().value() == default_coherent_n_max(1.0));
    }
    CHECK_NOTHROW(coherent_state(PhotonMode(default_coherent_n_max(cplx(0.0, 3.0))), cplx(0.0, 3.0)));
  }
  SUBCASE("fock, delta and comb") {
    const auto f = fock_state(mode, 1);
    CHECK(std::abs((f.amplitudes().cwiseAbs2().array() * n.array()).real().sum() - 1.0) < 1e-15);
    CHECK_THROWS_AS(fock_state(mode, 17), ArgumentError);
    const ElectronLadder ladder = ElectronLadder::symmetric(5);
    const auto d = delta_electron(ladder);
    CHECK(std::abs(d.amplitudes()(5) - 1.0) == 0.0);
    const auto comb = comb_electron(ladder, 5);
    CHECK(std::abs(comb.amplitudes().norm() - 1.0) < 1e-14);
    for (int k = -2; k <= 2; ++k)
      CHECK(std::abs(std::norm(comb.amplitudes()(ladder.index_of(k))) - 0.2) < 1e-14);
    CHECK(comb_support(4) == std::vector<int>{-2, -1, 0, 1});
    CHECK_THROWS_AS(comb_electron(ladder, 13), ArgumentError);
    CHECK_THROWS_AS(comb_electron(ladder, 3, {0.0, 1.0}), ArgumentError);
  }
}

TEST_CASE("default truncations") {
  CHECK(default_coherent_n_max(1.0) == 12);
  CHECK(default_coherent_n_max(1.5) == 17);
  CHECK(default_coherent_n_max(3.0) == 34);
  CHECK(default_fock_n_max(2, 0.2) == 8);
  CHECK(default_ladder_half_width(0.1, 9) == 11);
  CHECK(growth_margin(0, 0.1) == 0);
  CHECK(growth_margin(100, 0.1) == 7);
}
