#include "pinem/operators.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace pinem {

namespace {

constexpr double kBandThreshold = 1e-6;
constexpr double kSpreadBound = 1e-6;
constexpr double kCoherentTailBound = 1e-8;
constexpr double kDefaultTailMass = 1e-10;

Matrix ladder_matrix(int n_max) {
  const Eigen::Index d = n_max + 1;
  Matrix a = Matrix::Zero(d, d);
  for (Eigen::Index n = 1; n < d; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
  return a;
}

// exp(g a^dag - g* a) on the truncated mode.
Matrix truncated_displacement(int n_max, cplx g) {
  const Matrix a = ladder_matrix(n_max);
  const Matrix gen = g * a.adjoint() - std::conj(g) * a;
  return expm_antihermitian(gen);
}

// <n + k| e^{|g|^2/2} g^k F_k(a) |n> using untruncated matrix elements
// <n+k| a^m (a^dag)^{k+m} |n> = (n+k+m)! / sqrt(n! (n+k)!).
// The coefficient g^k (-1)^m |g|^{2m} is written as g^{k+m} (-g*)^m, which stays
// finite at g = 0 for negative k.
cplx series_element(cplx g, int k, int n) {
  if (n + k < 0) return 0.0;
  const double mag = std::abs(g);
  const int m0 = std::max(0, -k);
  const double log_norm = 0.5 * (std::lgamma(n + 1.0) + std::lgamma(n + k + 1.0));
  if (mag == 0.0) return (k == 0) ? cplx(1.0) : cplx(0.0);
  const cplx unit = g / mag;
  cplx sum = 0.0;
  double prev = 0.0;
  for (int m = m0; m < m0 + 2000; ++m) {
    const double log_term = (k + 2.0 * m) * std::log(mag) + std::lgamma(n + k + m + 1.0) -
                            std::lgamma(m + 1.0) - std::lgamma(k + m + 1.0) - log_norm;
    const double term = std::exp(log_term);
    const cplx phase = std::pow(unit, k + m) * std::pow(-std::conj(unit), m);
    sum += term * phase;
    if (m > m0 && term < prev && term < 1e-18) break;
    prev = term;
  }
  return std::exp(0.5 * mag * mag) * sum;
}

double table_completeness(const Matrix& table) {
  double worst = 0.0;
  for (Eigen::Index c = 0; c < table.cols(); ++c) {
    worst = std::max(worst, std::abs(table.col(c).squaredNorm() - 1.0));
  }
  return worst;
}

}  // namespace

// ---------------------------------------------------------------------------
// Types

PhotonMode::PhotonMode(int n_max_, double omega_) : n_max(n_max_), omega(omega_) {
  if (n_max < 1) throw ArgumentError("PhotonMode: n_max must be >= 1");
}

ElectronLadder::ElectronLadder(int k_min_, int k_max_, double e0, double hw)
    : k_min(k_min_), k_max(k_max_), e0_ev(e0), hbar_omega_ev(hw) {
  if (!(k_min <= 0 && 0 <= k_max)) throw ArgumentError("ElectronLadder: need k_min <= 0 <= k_max");
}

ElectronLadder ElectronLadder::symmetric(int half_width) {
  if (half_width < 0) throw ArgumentError("ElectronLadder: negative half width");
  return ElectronLadder(-half_width, half_width);
}

std::size_t ElectronLadder::index_of(int k) const {
  if (!contains(k)) {
    std::ostringstream os;
    os << "ladder index " << k << " outside [" << k_min << ", " << k_max << "]";
    throw ArgumentError(os.str());
  }
  return static_cast<std::size_t>(k - k_min);
}

CouplingConfig::CouplingConfig(cplx g_, double phi_, double guard) : g(g_), phi(phi_) {
  if (!(std::abs(g) < guard)) {
    std::ostringstream os;
    os << "|g| = " << std::abs(g) << " exceeds the coupling guard " << guard;
    throw ArgumentError(os.str());
  }
  if (!std::isfinite(phi)) throw ArgumentError("CouplingConfig: phi is not finite");
}

// ---------------------------------------------------------------------------
// Elementary operators

OperatorMatrix annihilation(const PhotonMode& mode, const std::string& label) {
  return {HilbertLayout::single(label, mode.dim()), ladder_matrix(mode.n_max)};
}

OperatorMatrix creation(const PhotonMode& mode, const std::string& label) {
  return annihilation(mode, label).adjoint();
}

OperatorMatrix number_operator(const PhotonMode& mode, const std::string& label) {
  const auto d = static_cast<Eigen::Index>(mode.dim());
  Matrix n = Matrix::Zero(d, d);
  for (Eigen::Index i = 0; i < d; ++i) n(i, i) = static_cast<double>(i);
  return {HilbertLayout::single(label, mode.dim()), std::move(n)};
}

OperatorMatrix electron_shift(const ElectronLadder& ladder) {
  const auto d = static_cast<Eigen::Index>(ladder.dim());
  Matrix b = Matrix::Zero(d, d);
  for (Eigen::Index i = 1; i < d; ++i) b(i - 1, i) = 1.0;
  return {ladder.layout(), std::move(b)};
}

OperatorMatrix fsp_operator(const ElectronLadder& ladder, double phi) {
  const auto d = static_cast<Eigen::Index>(ladder.dim());
  Matrix u = Matrix::Zero(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    const double k = static_cast<double>(ladder.k_min + i);
    u(i, i) = std::polar(1.0, -phi * k * k);
  }
  return {ladder.layout(), std::move(u)};
}

double dispersion_length(const PhysicalParams& p) {
  using namespace constants;
  if (!(p.kinetic_energy_ev > 0.0 && p.photon_energy_ev > 0.0)) {
    throw ArgumentError("dispersion_length: energies must be positive");
  }
  const double gamma = 1.0 + p.kinetic_energy_ev / kElectronRestEnergyEv;
  const double beta = std::sqrt(1.0 - 1.0 / (gamma * gamma));
  const double v = beta * kSpeedOfLight;
  const double m_e = kElectronRestEnergyEv * kElementaryCharge / (kSpeedOfLight * kSpeedOfLight);
  const double omega = p.photon_energy_ev * kElementaryCharge / kHbar;
  return 4.0 * kPi * gamma * gamma * gamma * m_e * v * v * v / (kHbar * omega * omega);
}

double dispersion_phase(const PhysicalParams& p) {
  if (!(p.z_m >= 0.0)) throw ArgumentError("dispersion_phase: z must be non-negative");
  return 2.0 * constants::kPi * p.z_m / dispersion_length(p);
}

// ---------------------------------------------------------------------------
// Scattering matrix

ScatteringMatrix scattering_matrix(const ElectronLadder& ladder, const PhotonMode& mode, cplx g,
                                   const std::string& photon_label, double leakage_bound) {
  const auto b = electron_shift(ladder);
  const auto a = annihilation(mode, photon_label);
  const auto gen = kron(b, a.adjoint()) * g - kron(b.adjoint(), a) * std::conj(g);
  ScatteringMatrix out{expm_antihermitian(gen), 0, 0.0};

  const Matrix disp = truncated_displacement(mode.n_max, g);
  int band = 0;
  for (Eigen::Index j = 0; j < disp.cols(); ++j) {
    for (Eigen::Index i = 0; i < disp.rows(); ++i) {
      if (std::abs(disp(i, j)) >= kBandThreshold) {
        band = std::max(band, static_cast<int>(std::abs(i - j)));
      }
    }
  }
  const int spec_margin =
      static_cast<int>(std::ceil(4.0 * std::abs(g) * std::sqrt(static_cast<double>(mode.n_max))));
  const int margin = std::max(spec_margin, band + 1);
  const int half = std::min(ladder.k_max, -ladder.k_min);
  out.interior = half - margin;
  const int suggestion = margin + std::max(4, margin);
  if (out.interior < 0) {
    std::ostringstream os;
    os << "scattering_matrix: ladder half width " << half << " leaves no interior (margin "
       << margin << ")";
    throw TruncationError(os.str(), std::nullopt, suggestion);
  }

  const auto dp = static_cast<Eigen::Index>(mode.dim());
  const Matrix& s = out.s.matrix();
  const Eigen::Index top = static_cast<Eigen::Index>(ladder.dim()) - 1;
  for (int k = -out.interior; k <= out.interior; ++k) {
    const auto ki = static_cast<Eigen::Index>(ladder.index_of(k));
    for (Eigen::Index n = 0; n < dp; ++n) {
      const Eigen::Index col = ki * dp + n;
      const double edge = s.col(col).segment(0, dp).squaredNorm() +
                          s.col(col).segment(top * dp, dp).squaredNorm();
      out.leakage = std::max(out.leakage, edge);
    }
  }
  if (out.leakage > leakage_bound) {
    std::ostringstream os;
    os << "scattering_matrix: leakage " << out.leakage << " exceeds bound " << leakage_bound;
    throw TruncationError(os.str(), std::nullopt, half + suggestion);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Ladder-coefficient decomposition

OperatorMatrix f_series(const PhotonMode& mode, cplx g, int k, const std::string& label) {
  const auto d = static_cast<Eigen::Index>(mode.dim());
  Matrix f = Matrix::Zero(d, d);
  const double mag = std::abs(g);
  for (int n = 0; n < d; ++n) {
    if (n + k < 0 || n + k >= d) continue;
    const double log_norm = 0.5 * (std::lgamma(n + 1.0) + std::lgamma(n + k + 1.0));
    const int m0 = std::max(0, -k);
    double sum = 0.0;
    double prev = 0.0;
    for (int m = m0; m < m0 + 2000; ++m) {
      if (mag == 0.0 && m > 0) break;
      const double log_mag = (m == 0) ? 0.0 : 2.0 * m * std::log(mag);
      const double term = std::exp(log_mag + std::lgamma(n + k + m + 1.0) - std::lgamma(m + 1.0) -
                                   std::lgamma(k + m + 1.0) - log_norm);
      sum += (m % 2 == 0) ? term : -term;
      if (m > m0 && term < prev && term < 1e-18) break;
      prev = term;
    }
    f(n + k, n) = sum;
  }
  return {HilbertLayout::single(label, mode.dim()), std::move(f)};
}

OperatorMatrix LadderDecomposition::coeff(int k, const std::string& label) const {
  const auto d = static_cast<Eigen::Index>(mode.dim());
  Matrix c = Matrix::Zero(d, d);
  for (Eigen::Index n = 0; n < d; ++n) {
    if (n + k >= 0 && n + k < d) c(n + k, n) = table(n + k, n);
  }
  return {HilbertLayout::single(label, mode.dim()), std::move(c)};
}

cplx LadderDecomposition::element(int k, int n) const {
  if (n < 0 || n > mode.n_max || n + k < 0 || n + k > mode.n_max) return 0.0;
  return table(n + k, n);
}

double LadderDecomposition::band_max(int k) const {
  double m = 0.0;
  for (int n = 0; n <= mode.n_max; ++n) m = std::max(m, std::abs(element(k, n)));
  return m;
}

LadderDecomposition ladder_decompose(const ElectronLadder& ladder, const PhotonMode& mode, cplx g,
                                     DecompositionMethod method, int fock_padding) {
  if (fock_padding < 0) throw ArgumentError("ladder_decompose: negative padding");
  LadderDecomposition dec;
  dec.mode = mode;
  dec.g = g;
  dec.source = method;
  const auto d = static_cast<Eigen::Index>(mode.dim());

  switch (method) {
    case DecompositionMethod::kDisplacement: {
      dec.table = truncated_displacement(mode.n_max + fock_padding, g).topLeftCorner(d, d);
      break;
    }
    case DecompositionMethod::kSeries: {
      dec.table = Matrix::Zero(d, d);
      for (int n = 0; n < d; ++n) {
        for (int np = 0; np < d; ++np) dec.table(np, n) = series_element(g, np - n, n);
      }
      break;
    }
    case DecompositionMethod::kOracle: {
      const PhotonMode padded(mode.n_max + fock_padding, mode.omega);
      const auto dp = static_cast<Eigen::Index>(padded.dim());
      if (!(ladder.contains(-1) && ladder.contains(1))) {
        throw TruncationError("ladder_decompose: oracle needs ladder indices -1..1", std::nullopt,
                              padded.n_max + 2);
      }
      const auto b = electron_shift(ladder);
      const auto a = annihilation(padded);
      const auto gen = kron(b, a.adjoint()) * g - kron(b.adjoint(), a) * std::conj(g);
      const Matrix s = expm_antihermitian(gen).matrix();
      // C_k(n', n) = <j - k, n'| S |j, n> with n' = n + k.
      auto extract = [&](int j) {
        Matrix t = Matrix::Zero(d, d);
        for (Eigen::Index n = 0; n < d; ++n) {
          for (Eigen::Index np = 0; np < d; ++np) {
            const int k = static_cast<int>(np - n);
            if (!ladder.contains(j - k)) continue;
            const auto row = static_cast<Eigen::Index>(ladder.index_of(j - k)) * dp + np;
            const auto col = static_cast<Eigen::Index>(ladder.index_of(j)) * dp + n;
            t(np, n) = s(row, col);
          }
        }
        return t;
      };
      dec.table = extract(0);
      const double spread = std::max(max_abs(extract(-1) - dec.table), max_abs(extract(1) - dec.table));
      if (spread > kSpreadBound) {
        std::ostringstream os;
        os << "ladder_decompose: interior-column spread " << spread << " exceeds " << kSpreadBound;
        throw TruncationError(os.str(), std::nullopt, padded.n_max + 2);
      }
      break;
    }
  }
  dec.completeness_deficit = table_completeness(dec.table);
  return dec;
}

double max_coefficient_difference(const LadderDecomposition& a, const LadderDecomposition& b) {
  if (a.mode.n_max != b.mode.n_max) {
    throw ArgumentError("max_coefficient_difference: Fock cutoffs differ");
  }
  return max_abs(a.table - b.table);
}

// ---------------------------------------------------------------------------
// State factories

PureState coherent_state(const PhotonMode& mode, cplx alpha, const std::string& label) {
  const double r = std::abs(alpha);
  if (r * r + 5.0 * r > mode.n_max) {
    std::ostringstream os;
    os << "coherent_state: |alpha| = " << r << " needs n_max >= " << r * r + 5.0 * r;
    throw TruncationError(os.str(), default_coherent_n_max(alpha));
  }
  const auto d = static_cast<Eigen::Index>(mode.dim());
  Vector v(d);
  const double theta = std::arg(alpha);
  for (Eigen::Index n = 0; n < d; ++n) {
    if (r == 0.0) {
      v(n) = (n == 0) ? 1.0 : 0.0;
      continue;
    }
    const double log_mag = -0.5 * r * r + n * std::log(r) - 0.5 * std::lgamma(n + 1.0);
    v(n) = std::polar(std::exp(log_mag), theta * static_cast<double>(n));
  }
  const double tail = 1.0 - v.squaredNorm();
  if (tail > kCoherentTailBound) {
    std::ostringstream os;
    os << "coherent_state: truncated tail " << tail << " exceeds " << kCoherentTailBound;
    throw TruncationError(os.str(), default_coherent_n_max(alpha));
  }
  return PureState::normalized(HilbertLayout::single(label, mode.dim()), std::move(v));
}

PureState fock_state(const PhotonMode& mode, int n, const std::string& label) {
  if (n < 0 || n > mode.n_max) throw ArgumentError("fock_state: n outside [0, n_max]");
  return PureState::basis(HilbertLayout::single(label, mode.dim()), static_cast<std::size_t>(n));
}

PureState vacuum_state(const PhotonMode& mode, const std::string& label) {
  return fock_state(mode, 0, label);
}

PureState delta_electron(const ElectronLadder& ladder) {
  return PureState::basis(ladder.layout(), ladder.index_of(0));
}

std::vector<int> comb_support(int peaks) {
  if (peaks < 1) throw ArgumentError("comb_electron: need at least one peak");
  std::vector<int> ks(peaks);
  const int first = -(peaks / 2);
  for (int i = 0; i < peaks; ++i) ks[i] = first + i;
  return ks;
}

PureState comb_electron(const ElectronLadder& ladder, int peaks, const std::vector<double>& phases) {
  const auto ks = comb_support(peaks);
  if (!phases.empty() && phases.size() != ks.size()) {
    throw ArgumentError("comb_electron: phase profile length differs from peak count");
  }
  Vector v = Vector::Zero(static_cast<Eigen::Index>(ladder.dim()));
  const double amp = 1.0 / std::sqrt(static_cast<double>(peaks));
  for (std::size_t i = 0; i < ks.size(); ++i) {
    const double theta = phases.empty() ? 0.0 : phases[i];
    v(static_cast<Eigen::Index>(ladder.index_of(ks[i]))) = std::polar(amp, theta);
  }
  return PureState::normalized(ladder.layout(), std::move(v));
}

// ---------------------------------------------------------------------------
// Default truncations

int default_ladder_half_width(cplx g, int n_max) {
  return 8 + static_cast<int>(std::ceil(6.0 * std::abs(g) * (1.0 + std::sqrt(double(n_max)))));
}

int default_coherent_n_max(cplx alpha) {
  const double r = std::abs(alpha);
  int n_max = static_cast<int>(std::ceil(r * r + 5.0 * r + 5.0 - 1e-9));
  if (r == 0.0) return n_max;
  // Grow until the Poisson tail beyond n_max is below kDefaultTailMass.
  const double mean = r * r;
  auto log_p = [&](int n) { return -mean + n * std::log(mean) - std::lgamma(n + 1.0); };
  double tail = 1.0;
  while (true) {
    tail = 0.0;
    for (int n = n_max + 1; n < n_max + 400; ++n) {
      const double p = std::exp(log_p(n));
      tail += p;
      if (n > mean && p < 1e-30) break;
    }
    if (tail < kDefaultTailMass) return n_max;
    ++n_max;
  }
}

int default_fock_n_max(int n, cplx g) {
  return n + 4 + static_cast<int>(std::ceil(10.0 * std::abs(g)));
}

int growth_margin(int electrons, cplx g) {
  if (electrons <= 0) return 0;
  const double added = electrons * std::norm(g);
  return static_cast<int>(std::ceil(3.0 * added + 4.0 * std::sqrt(added) - 1e-9));
}

}  // namespace pinem
