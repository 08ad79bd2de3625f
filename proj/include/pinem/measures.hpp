#pragma once

// Observables and entanglement quantifiers for photonic states: Fock-basis
// statistics, entropies in bits, the PPT and realignment criteria, the cross
// second-order correlation and fidelity to a pure target.

#include <optional>
#include <string>

#include "pinem/tensor_core.hpp"

namespace pinem {

using RealMatrix = Eigen::MatrixXd;

struct JointDistribution {
  RealMatrix joint;  // P(n1, n2)
  RealVector p1;     // P(n1)
  RealVector p2;     // P(n2)
};

/// Diagonal of a two-subsystem state in the product Fock basis. Throws
/// ArgumentError unless the layout has exactly two subsystems.
JointDistribution joint_distribution(const DensityMatrix& rho);

/// Eigenvalues below this are treated as exact zeros in entropy sums.
inline constexpr double kEntropyEigenFloor = 1e-15;
/// Mutual information in (-kMutualInformationSlack, 0) is reported as 0.
inline constexpr double kMutualInformationSlack = 1e-9;
/// A density matrix with Tr rho^2 below 1 - this is not accepted as pure.
inline constexpr double kPurityTolerance = 1e-8;

/// -sum lambda log2 lambda over eigenvalues clamped into [0, 1].
double von_neumann_entropy(const DensityMatrix& rho);
double entropy_of_spectrum(const RealVector& eigenvalues);

/// The two-subsystem split of a bipartite layout, in layout order.
Bipartition default_bipartition(const HilbertLayout& layout);

/// S(A) + S(B) - S(AB) in bits.
double mutual_information(const DensityMatrix& rho, const Bipartition& parts);
double mutual_information(const DensityMatrix& rho);

/// Entropy of the Schmidt weights of a pure bipartite state, in bits.
double entanglement_entropy(const PureState& psi, const Bipartition& parts);
double entanglement_entropy(const PureState& psi);
/// Same for a density matrix; throws ArgumentError when Tr rho^2 < 1 - 1e-8.
double entanglement_entropy(const DensityMatrix& rho, const Bipartition& parts);
double entanglement_entropy(const DensityMatrix& rho);

/// Schmidt coefficients (singular values of the A x B amplitude matrix), descending.
RealVector schmidt_coefficients(const PureState& psi, const Bipartition& parts);

/// Smallest eigenvalue of the partial transpose on `subsystem`
/// (default: the last subsystem of the layout).
double ppt_check(const DensityMatrix& rho, const std::string& subsystem);
double ppt_check(const DensityMatrix& rho);

/// Trace norm of the realigned matrix.
double realignment_check(const DensityMatrix& rho, const Bipartition& parts);
double realignment_check(const DensityMatrix& rho);

/// Criterion values within this distance of their separability threshold are inconclusive.
inline constexpr double kInconclusiveBand = 1e-6;

enum class Verdict { kEntangled, kInconclusive, kNotDetected };

/// Threshold 0: below -band entangled.
Verdict classify_ppt(double min_eigenvalue);
/// Threshold 1: above 1 + band entangled.
Verdict classify_realignment(double trace_norm);
std::string to_string(Verdict v);

struct PhotonMoments {
  double mean_n1 = 0.0;
  double mean_n2 = 0.0;
  double n1n2 = 0.0;
};

/// <n1>, <n2>, <n1 n2> of a two-subsystem state in the Fock basis.
PhotonMoments photon_moments(const DensityMatrix& rho);

/// <n1 n2> / (<n1><n2>). Throws UndefinedG2Error when either mean is below 1e-12.
double g2_cross(const DensityMatrix& rho);
double g2_from_moments(const PhotonMoments& m);

/// <t|rho|t>. Throws ArgumentError when the layouts differ.
double fidelity(const DensityMatrix& rho, const PureState& target);
double fidelity(const PureState& psi, const PureState& target);

struct CorrelationReport {
  std::optional<double> g2;  // absent when a mean photon number vanishes
  double mean_n1 = 0.0;
  double mean_n2 = 0.0;
  double mutual_information = 0.0;
  double ppt_min_eig = 0.0;
  double realignment_sum = 0.0;
  std::optional<double> entanglement_entropy;  // pure states only
};

struct ReportOptions {
  bool criteria = true;  // PPT and realignment are the expensive part
};

CorrelationReport correlation_report(const DensityMatrix& rho, const ReportOptions& options = {});

}  // namespace pinem
