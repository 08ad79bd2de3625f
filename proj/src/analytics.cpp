#include "pinem/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "pinem/evolution.hpp"
#include "pinem/measures.hpp"

namespace pinem {

HbtInitialMoments HbtInitialMoments::coherent(cplx alpha1, cplx alpha2) {
  HbtInitialMoments m;
  m.mean_n1 = std::norm(alpha1);
  m.mean_n2 = std::norm(alpha2);
  m.g2_0 = 1.0;
  m.a1_dag_mean = std::conj(alpha1);
  m.a2_mean = alpha2;
  return m;
}

double g2_closed_form(const HbtInitialMoments& m, int n_electrons, cplx g) {
  if (n_electrons < 0) throw ArgumentError("g2_closed_form: negative electron count");
  const double n = static_cast<double>(n_electrons);
  const double g2 = std::norm(g);
  const double den = (m.mean_n1 + n * g2) * (m.mean_n2 + n * g2);
  if (!(den > 1e-14)) {
    std::ostringstream os;
    os << "g2_closed_form: denominator " << den << " vanishes";
    throw UndefinedG2Error(os.str());
  }
  const double cross = 2.0 * (m.a1_dag_mean * m.a2_mean).real();
  const double num = m.g2_0 * m.mean_n1 * m.mean_n2 +
                     n * g2 * (m.mean_n1 + m.mean_n2 + cross + (2.0 * n - 1.0) * g2);
  return num / den;
}

PhaseScan g2_phase_scan(cplx alpha1, cplx alpha2, int n_electrons, cplx g, int points) {
  if (points < 1) throw ArgumentError("g2_phase_scan: need at least one grid point");
  PhaseScan scan;
  scan.step = 2.0 * std::numbers::pi / points;
  for (int i = 0; i < points; ++i) {
    const double phase = i * scan.step;
    const auto m = HbtInitialMoments::coherent(alpha1, alpha2 * std::polar(1.0, phase));
    const PhaseScanPoint p{phase, g2_closed_form(m, n_electrons, g)};
    if (i == 0 || p.g2 < scan.minimum.g2) scan.minimum = p;
    scan.points.push_back(p);
  }
  return scan;
}

BellProbability bell_probability(cplx g) {
  BellProbability out;
  out.approx = 2.0 * std::norm(g);
  const PhotonMode mode(default_fock_n_max(0, g));
  const auto ladder = ElectronLadder::symmetric(2 * mode.n_max + default_ladder_half_width(g, mode.n_max));
  const auto dec = ladder_decompose(ladder, mode, g);
  const auto kraus = build_two_cavity_kraus(dec, dec, ladder, delta_electron(ladder), 0.0);
  const auto vac = kron(vacuum_state(mode, kCavity1Label), vacuum_state(mode, kCavity2Label));
  if (!kraus.has(1)) return out;
  out.exact = (kraus.sparse(1) * vac.amplitudes()).squaredNorm();
  return out;
}

namespace {

// Rows and columns 0..d-1 of exp(r a^dag - r a) exponentiated on a padded space.
Matrix real_displacement_block(Eigen::Index d, double r) {
  const auto padded = d + static_cast<Eigen::Index>(std::ceil(r * r + 10.0 * r + 20.0));
  Matrix gen = Matrix::Zero(padded, padded);
  for (Eigen::Index n = 1; n < padded; ++n) {
    const double s = r * std::sqrt(static_cast<double>(n));
    gen(n, n - 1) = s;
    gen(n - 1, n) = -s;
  }
  return expm_antihermitian(gen).topLeftCorner(d, d);
}

// D(r e^{i theta}) = e^{i theta n} D(r) e^{-i theta n}.
Vector rotate(const Vector& v, double theta) {
  Vector out(v.size());
  for (Eigen::Index n = 0; n < v.size(); ++n) out(n) = v(n) * std::polar(1.0, theta * double(n));
  return out;
}

}  // namespace

PureState displaced_state(const PureState& psi0, cplx beta) {
  const auto d = static_cast<Eigen::Index>(psi0.dim());
  const double theta = std::arg(beta);
  const Vector out = rotate(real_displacement_block(d, std::abs(beta)) * rotate(psi0.amplitudes(), -theta), theta);
  return PureState::normalized(psi0.layout(), out);
}

DisplacementFit comb_displacement_fit(const DensityMatrix& rho_out, const PureState& psi0, cplx g,
                                      const DisplacementGrid& grid) {
  if (rho_out.layout().size() != 1 || psi0.layout().size() != 1 || rho_out.dim() != psi0.dim()) {
    throw ArgumentError("comb_displacement_fit: expects single-mode states of equal dimension");
  }
  if (grid.magnitudes < 2 || grid.phases < 1 || grid.refine_points < 1) {
    throw ArgumentError("comb_displacement_fit: degenerate grid");
  }
  const auto d = static_cast<Eigen::Index>(psi0.dim());
  const Matrix& rho = rho_out.matrix();
  DisplacementFit best;
  double best_r = 0.0, best_theta = 0.0;
  // Scores every phase in `thetas` at magnitude r with one exponential.
  auto scan_ring = [&](double r, const std::vector<double>& thetas) {
    const Matrix block = real_displacement_block(d, r);
    for (double theta : thetas) {
      Vector t = rotate(block * rotate(psi0.amplitudes(), -theta), theta);
      t.normalize();
      const double f = std::clamp(t.dot(rho * t).real(), 0.0, 1.0);
      if (f > best.fidelity) {
        best = {f, std::polar(r, theta)};
        best_r = r;
        best_theta = theta;
      }
    }
  };
  const double r_max = grid.max_magnitude_factor * std::abs(g);
  const double dr = r_max / (grid.magnitudes - 1);
  const double dtheta = 2.0 * std::numbers::pi / grid.phases;
  std::vector<double> coarse;
  for (int j = 0; j < grid.phases; ++j) coarse.push_back(j * dtheta);
  scan_ring(0.0, {0.0});
  for (int i = 1; i < grid.magnitudes; ++i) scan_ring(i * dr, coarse);
  if (dr > 0.0 && grid.refine_points > 1) {
    const int h = grid.refine_points / 2;
    const double r0 = best_r, theta0 = best_theta;
    std::vector<double> fine;
    for (int j = -h; j <= h; ++j) fine.push_back(theta0 + j * dtheta / h);
    for (int i = -h; i <= h; ++i) {
      const double r = r0 + i * dr / h;
      if (r > 0.0) scan_ring(r, fine);
    }
  }
  return best;
}

}  // namespace pinem
