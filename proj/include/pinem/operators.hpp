#pragma once

// Photonic and electronic operators for a free electron passing optical cavities.
//
// Ladder convention: b|k> = |k-1>, and photon emission lowers the electron index.
// A ladder coefficient C_k is the photonic operator multiplying b^k, so it raises
// the photon number by k: <n'|C_k|n> is nonzero only for n' - n = k.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pinem/tensor_core.hpp"

namespace pinem {

namespace constants {
inline constexpr double kElectronRestEnergyEv = 510998.95;
inline constexpr double kSpeedOfLight = 299792458.0;          // m/s
inline constexpr double kElementaryCharge = 1.602176634e-19;  // C
inline constexpr double kHbar = 1.054571817e-34;              // J s
inline constexpr double kPi = 3.14159265358979323846;
}  // namespace constants

inline const std::string kElectronLabel = "e";
inline const std::string kCavity1Label = "ph1";
inline const std::string kCavity2Label = "ph2";

struct PhotonMode {
  int n_max = 1;
  double omega = 0.0;  // rad/s, bookkeeping only

  PhotonMode() = default;
  explicit PhotonMode(int n_max, double omega = 0.0);

  std::size_t dim() const { return static_cast<std::size_t>(n_max) + 1; }
};

struct ElectronLadder {
  int k_min = 0;
  int k_max = 0;
  double e0_ev = 0.0;
  double hbar_omega_ev = 0.0;

  ElectronLadder() = default;
  ElectronLadder(int k_min, int k_max, double e0_ev = 0.0, double hbar_omega_ev = 0.0);
  static ElectronLadder symmetric(int half_width);

  std::size_t dim() const { return static_cast<std::size_t>(k_max - k_min) + 1; }
  bool contains(int k) const { return k >= k_min && k <= k_max; }
  /// Position of ladder index k in the electron basis; throws ArgumentError if absent.
  std::size_t index_of(int k) const;
  HilbertLayout layout() const { return HilbertLayout::single(kElectronLabel, dim()); }
};

struct CouplingConfig {
  static constexpr double kDefaultGuard = 2.0;

  cplx g{0.0, 0.0};
  double phi = 0.0;

  CouplingConfig() = default;
  CouplingConfig(cplx g, double phi, double guard = kDefaultGuard);
};

struct PhysicalParams {
  double kinetic_energy_ev = 0.0;
  double photon_energy_ev = 0.0;
  double z_m = 0.0;
};

// ---------------------------------------------------------------------------
// Elementary operators

OperatorMatrix annihilation(const PhotonMode& mode, const std::string& label = "ph");
OperatorMatrix creation(const PhotonMode& mode, const std::string& label = "ph");
OperatorMatrix number_operator(const PhotonMode& mode, const std::string& label = "ph");

/// Lowers the ladder index; b|k_min> = 0.
OperatorMatrix electron_shift(const ElectronLadder& ladder);

/// diag(exp(-i phi k^2)).
OperatorMatrix fsp_operator(const ElectronLadder& ladder, double phi);

/// Characteristic dispersion length z_D in metres.
double dispersion_length(const PhysicalParams& p);
/// phi = 2 pi z / z_D.
double dispersion_phase(const PhysicalParams& p);

// ---------------------------------------------------------------------------
// Scattering matrix

struct ScatteringMatrix {
  OperatorMatrix s;      // on e x <photon label>
  int interior = 0;      // columns with |k| <= interior are treated as interior
  double leakage = 0.0;  // max weight reaching the outermost ladder rows from an interior column
};

inline constexpr double kDefaultLeakageBound = 1e-8;

/// exp(g b a^dag - g* b^dag a) on e x ph. The interior half-width is
/// min(k_max, -k_min) minus a margin of at least ceil(4|g| sqrt(n_max)), widened
/// until displacement amplitudes beyond the margin fall below 1e-6.
/// Throws TruncationError (with a suggested k_max) when the interior is empty or
/// the leakage exceeds `leakage_bound`.
ScatteringMatrix scattering_matrix(const ElectronLadder& ladder, const PhotonMode& mode, cplx g,
                                   const std::string& photon_label = "ph",
                                   double leakage_bound = kDefaultLeakageBound);

// ---------------------------------------------------------------------------
// Ladder-coefficient decomposition

/// F_k(a) = sum_m (-1)^m |g|^{2m} a^m (a^dag)^{k+m} / (m! (k+m)!), m >= max(0, -k),
/// with matrix elements taken in the untruncated Fock space.
OperatorMatrix f_series(const PhotonMode& mode, cplx g, int k, const std::string& label = "ph");

enum class DecompositionMethod {
  kSeries,        // e^{|g|^2/2} g^k F_k(a), untruncated elements projected onto the Fock cutoff
  kOracle,        // bands extracted from expm on e x ph
  kDisplacement,  // bands of the truncated displacement exp(g a^dag - g* a)
};

struct LadderDecomposition {
  PhotonMode mode;
  cplx g;
  DecompositionMethod source = DecompositionMethod::kDisplacement;
  /// table(n', n) = <n'|C_{n'-n}|n>; every band of the table is one coefficient.
  Matrix table;
  double completeness_deficit = 0.0;  // max |sum_k C_k^dag C_k - I|

  int min_shift() const { return -mode.n_max; }
  int max_shift() const { return mode.n_max; }
  /// C_k as an operator on one mode; zero outside [min_shift, max_shift].
  OperatorMatrix coeff(int k, const std::string& label = "ph") const;
  /// <n + k|C_k|n>, zero outside the Fock cutoff.
  cplx element(int k, int n) const;
  /// Largest |entry| of C_k.
  double band_max(int k) const;
};

/// Decomposes the single-cavity scattering matrix into photonic coefficients of b^k.
///
/// kOracle builds S on e x ph with the Fock cutoff raised by `fock_padding`, reads
/// C_k from the zero-loss column and checks that the neighbouring columns agree;
/// a spread above 1e-6 throws TruncationError. The ladder must be wide enough to
/// hold the padded photon range. kSeries and kDisplacement ignore the ladder.
/// Coefficients are returned on `mode`'s cutoff in every case.
LadderDecomposition ladder_decompose(const ElectronLadder& ladder, const PhotonMode& mode, cplx g,
                                     DecompositionMethod method = DecompositionMethod::kDisplacement,
                                     int fock_padding = 0);

/// Maximum elementwise difference over all shifts present in either decomposition.
double max_coefficient_difference(const LadderDecomposition& a, const LadderDecomposition& b);

// ---------------------------------------------------------------------------
// State factories

/// Coherent state truncated at the mode cutoff and renormalized. Throws
/// TruncationError when |alpha|^2 + 5|alpha| > n_max or when the discarded tail
/// exceeds 1e-8.
PureState coherent_state(const PhotonMode& mode, cplx alpha, const std::string& label = "ph");
PureState fock_state(const PhotonMode& mode, int n, const std::string& label = "ph");
PureState vacuum_state(const PhotonMode& mode, const std::string& label = "ph");

PureState delta_electron(const ElectronLadder& ladder);
/// (1/sqrt M) sum_j e^{i theta_j} |k_j> over M consecutive ladder states centred
/// on k = 0 (for even M the extra state sits at negative k). Empty `phases`
/// means uniform phases.
PureState comb_electron(const ElectronLadder& ladder, int peaks,
                        const std::vector<double>& phases = {});
/// Ladder indices occupied by comb_electron(ladder, peaks).
std::vector<int> comb_support(int peaks);

// ---------------------------------------------------------------------------
// Default truncations

int default_ladder_half_width(cplx g, int n_max);
/// max(ceil(|alpha|^2 + 5|alpha| + 5), smallest cutoff with Poisson tail < 1e-10).
int default_coherent_n_max(cplx alpha);
int default_fock_n_max(int n, cplx g);
/// Extra Fock levels that cover the photon-number growth of `electrons` passes.
int growth_margin(int electrons, cplx g);

}  // namespace pinem
