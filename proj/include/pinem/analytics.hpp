#pragma once

// Closed-form predictions used as oracles: the multi-electron cross correlation
// for unshaped electrons, its relative-phase dependence, the single-loss
// probability, and a displacement fit for comb-shaped electrons.

#include <vector>

#include "pinem/operators.hpp"
#include "pinem/tensor_core.hpp"

namespace pinem {

struct HbtInitialMoments {
  double mean_n1 = 0.0;
  double mean_n2 = 0.0;
  double g2_0 = 1.0;
  cplx a1_dag_mean{0.0, 0.0};  // <a1^dag>
  cplx a2_mean{0.0, 0.0};      // <a2>

  /// Product of coherent states: means |alpha|^2, g2_0 = 1.
  static HbtInitialMoments coherent(cplx alpha1, cplx alpha2);
};

/// g2 after N unshaped electrons without propagation phase:
/// [g2_0 n1 n2 + N|g|^2 (n1 + n2 + 2 Re<a1^dag><a2> + (2N-1)|g|^2)] / [(n1 + N|g|^2)(n2 + N|g|^2)].
/// Throws ArgumentError for N < 0 and UndefinedG2Error when the denominator is below 1e-14.
double g2_closed_form(const HbtInitialMoments& m, int n_electrons, cplx g);

/// Large-N limit of g2_closed_form (= 2 for any fixed initial moments).
inline constexpr double kThermalG2Limit = 2.0;

struct PhaseScanPoint {
  double phase = 0.0;
  double g2 = 0.0;
};

struct PhaseScan {
  std::vector<PhaseScanPoint> points;
  PhaseScanPoint minimum;
  double step = 0.0;
};

/// g2_closed_form for coherent inputs with alpha2 -> alpha2 e^{i phase}, phase on a uniform
/// grid of `points` values over [0, 2 pi).
PhaseScan g2_phase_scan(cplx alpha1, cplx alpha2, int n_electrons, cplx g, int points = 360);

struct BellProbability {
  double approx = 0.0;  // 2|g|^2
  double exact = 0.0;   // simulated P(loss 1) from empty cavities
};

BellProbability bell_probability(cplx g);

struct DisplacementGrid {
  int magnitudes = 61;
  int phases = 64;
  double max_magnitude_factor = 3.0;  // grid spans [0, factor |g|]
  int refine_points = 21;             // per axis, spanning one coarse step each way
};

struct DisplacementFit {
  double fidelity = 0.0;
  cplx beta{0.0, 0.0};
};

/// D(beta)|psi0> computed by exponentiating on a padded Fock space and cropping.
PureState displaced_state(const PureState& psi0, cplx beta);

/// Best fidelity <psi0| D(beta)^dag rho D(beta) |psi0> over a polar grid of beta, refined once
/// around the coarse maximum. rho and psi0 must be single-mode states of equal dimension.
DisplacementFit comb_displacement_fit(const DensityMatrix& rho_out, const PureState& psi0, cplx g,
                                      const DisplacementGrid& grid = {});

}  // namespace pinem
