#pragma once

// One electron pass through two cavities (cavity 1, free-space propagation,
// cavity 2), the traced-out photonic channel, its iteration over independent
// electrons, and post-selection on the measured electron energy.

#include <functional>
#include <map>
#include <optional>
#include <vector>

#include <Eigen/Sparse>

#include "pinem/operators.hpp"

namespace pinem {

using SparseMatrix = Eigen::SparseMatrix<cplx>;

/// Kraus elements with a largest entry at or below this are dropped.
inline constexpr double kKrausKeepThreshold = 1e-12;
/// Individual Kraus entries below this magnitude are not stored.
inline constexpr double kKrausEntryCutoff = 1e-15;

/// Photonic operation elements of one electron pass, indexed by the net electron
/// energy loss q (final ladder index -q). Operators are stored sparse.
struct KrausSet {
  HilbertLayout layout;
  std::map<int, SparseMatrix> ops;
  ElectronLadder ladder;
  PureState electron;
  double phi = 0.0;
  /// Worst-case probability (over basis inputs) carried by dropped elements,
  /// including final electron states outside the ladder.
  double discarded_mass = 0.0;
  /// max |sum_q K_q^dag K_q - I|, evaluated at construction.
  double leakage = 0.0;

  std::vector<int> losses() const;
  bool has(int q) const { return ops.count(q) != 0; }
  /// Throws ArgumentError for an absent loss index.
  const SparseMatrix& sparse(int q) const;
  OperatorMatrix op(int q) const;
  double completeness_deficit() const;
};

using TwoCavityKraus = KrausSet;

/// K_{-l} = sum_j c_j sum_k e^{-i phi (j-k)^2} C2_{j-k-l} (x) C1_k on ph1 x ph2, for the
/// electron input sum_j c_j |j>. Throws ArgumentError when the electron does not live
/// on `ladder` and TruncationError when the leakage exceeds `leakage_bound`.
KrausSet build_two_cavity_kraus(const LadderDecomposition& dec1, const LadderDecomposition& dec2,
                                const ElectronLadder& ladder, const PureState& electron,
                                double phi, double leakage_bound = kDefaultLeakageBound);

/// K_{-l} = sum_j c_j C_{j-l} on a single cavity labelled `label`.
KrausSet build_single_cavity_kraus(const LadderDecomposition& dec, const ElectronLadder& ladder,
                                   const PureState& electron, const std::string& label = kCavity1Label,
                                   double leakage_bound = kDefaultLeakageBound);

/// sum_q K_q rho K_q^dag. Throws ArgumentError on a layout mismatch. When `losses` is
/// given it receives P(q) = Tr(K_q rho K_q^dag) at no extra product cost.
DensityMatrix apply_channel(const DensityMatrix& rho, const KrausSet& kraus,
                            std::map<int, double>* losses = nullptr);

/// P(q) = Tr(rho K_q^dag K_q) for every retained q.
std::map<int, double> loss_probabilities(const DensityMatrix& rho, const KrausSet& kraus);

struct StepDiagnostics {
  int m = 0;
  double trace = 1.0;
  double trace_deficit = 0.0;    // |1 - trace|
  double edge_population = 0.0;  // largest population on a top Fock level
};

struct ChannelTrajectory {
  std::vector<DensityMatrix> states;  // m = 0..M, empty when not kept
  std::vector<StepDiagnostics> diagnostics;
  double leakage = 0.0;
};

using StepObserver = std::function<void(int m, const DensityMatrix& rho)>;

inline constexpr double kTrajectoryTraceBound = 1e-6;

/// Applies the same channel `electrons` times. The observer sees every state,
/// including m = 0. Throws TruncationError once the trace deficit exceeds `trace_bound`.
ChannelTrajectory iterate_channel(const DensityMatrix& rho0, const KrausSet& kraus, int electrons,
                                  const StepObserver& observer = {}, bool keep_states = true,
                                  double trace_bound = kTrajectoryTraceBound);

/// Population on the top Fock level of each photonic subsystem, maximized.
double edge_population(const DensityMatrix& rho);

// ---------------------------------------------------------------------------
// Post-selection

inline constexpr double kDegenerateProbability = 1e-14;

struct PostSelectedPure {
  PureState state;
  double probability = 0.0;
};

struct PostSelectedMixed {
  DensityMatrix state;
  double probability = 0.0;
};

/// Conditions on net electron energy loss q. Throws DegenerateError when P(q) < 1e-14
/// (including a q with no retained Kraus element).
PostSelectedPure post_select(const PureState& psi, const KrausSet& kraus, int q);
PostSelectedMixed post_select(const DensityMatrix& rho, const KrausSet& kraus, int q);

// ---------------------------------------------------------------------------
// Full-space evolution

struct JointSetup {
  ElectronLadder ladder;
  PhotonMode mode1;
  PhotonMode mode2;
  CouplingConfig coupling;
};

/// Dense density matrices above this dimension are refused regardless of max_dim.
inline constexpr std::size_t kDenseDensityCap = 6000;

/// S2 U_phi S1 rho S1^dag U_phi^dag S2^dag on e x ph1 x ph2 with rho = rho_e x rho1 x rho2.
/// Inputs are relabelled to (e, ph1, ph2); dimensions must match the setup.
DensityMatrix joint_evolve_full(const DensityMatrix& rho_e, const DensityMatrix& rho1,
                                const DensityMatrix& rho2, const JointSetup& setup,
                                std::size_t max_dim = kDefaultMaxDim);
PureState joint_evolve_pure(const PureState& e, const PureState& p1, const PureState& p2,
                            const JointSetup& setup, std::size_t max_dim = kDefaultMaxDim);

/// Electron energy distribution over ladder indices k_min..k_max.
RealVector electron_spectrum(const DensityMatrix& full);
RealVector electron_spectrum(const PureState& full);
/// Variance of k under `spectrum` on `ladder`.
double electron_energy_variance(const RealVector& spectrum, const ElectronLadder& ladder);

// ---------------------------------------------------------------------------
// Collective-mode evolution without free-space propagation

struct TwoModeMoments {
  int m = 0;
  double mean_n1 = 0.0;
  double mean_n2 = 0.0;
  double n1n2 = 0.0;  // <n1 n2>
  double trace = 1.0;
  double edge_population = 0.0;

  /// Throws UndefinedG2Error when either mean is below 1e-12.
  double g2() const;
};

/// Fock cutoff of the collective mode covering `electrons` passes from coherent inputs.
int collective_mode_cutoff(cplx alpha1, cplx alpha2, cplx g, int electrons);

/// Moments after m = 0..electrons passes at phi = 0, for coherent (or vacuum) cavity
/// inputs and equal couplings. Without propagation phase both cavities couple to
/// A = (a1 + a2)/sqrt2 with strength sqrt2 g while B = (a1 - a2)/sqrt2 keeps its
/// coherent amplitude, so the run evolves A alone. `cutoff` <= 0 selects
/// collective_mode_cutoff.
std::vector<TwoModeMoments> collective_mode_moments(cplx alpha1, cplx alpha2, cplx g,
                                                    const ElectronLadder& ladder,
                                                    const PureState& electron, int electrons,
                                                    int cutoff = 0);

}  // namespace pinem
