#pragma once

// Dense complex tensor-product algebra over composite truncated Hilbert spaces.
//
// Index convention: subsystems are stored in layout order and the leftmost
// subsystem varies slowest (row-major Kronecker ordering).

#include <complex>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "pinem/errors.hpp"

namespace pinem {

using cplx = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;

inline constexpr std::size_t kDefaultMaxDim = 20000;

inline constexpr double kHermitianTol = 1e-10;
inline constexpr double kTraceTol = 1e-8;
inline constexpr double kPsdTol = 1e-10;
inline constexpr double kPureNormTol = 1e-12;

class HilbertLayout {
 public:
  HilbertLayout() = default;
  HilbertLayout(std::vector<std::string> labels, std::vector<std::size_t> dims);

  static HilbertLayout single(std::string label, std::size_t dim);

  std::size_t total_dim() const;
  std::size_t size() const { return dims_.size(); }
  const std::vector<std::size_t>& dims() const { return dims_; }
  const std::vector<std::string>& labels() const { return labels_; }

  bool contains(const std::string& label) const;
  /// Throws ArgumentError for an unknown label.
  std::size_t position(const std::string& label) const;
  std::size_t dim_of(const std::string& label) const { return dims_[position(label)]; }

  /// Stride of each subsystem in the flattened index.
  std::vector<std::size_t> strides() const;

  HilbertLayout concat(const HilbertLayout& other) const;
  /// Layout restricted to `keep`, in this layout's original order.
  HilbertLayout subset(std::span<const std::string> keep) const;

  bool operator==(const HilbertLayout&) const = default;

  std::string describe() const;

 private:
  std::vector<std::string> labels_;
  std::vector<std::size_t> dims_;
};

/// Square complex matrix acting on a HilbertLayout.
class OperatorMatrix {
 public:
  OperatorMatrix() = default;
  OperatorMatrix(HilbertLayout layout, Matrix entries);

  static OperatorMatrix identity(const HilbertLayout& layout);
  static OperatorMatrix zero(const HilbertLayout& layout);

  const HilbertLayout& layout() const { return layout_; }
  const Matrix& matrix() const { return m_; }
  std::size_t dim() const { return static_cast<std::size_t>(m_.rows()); }

  OperatorMatrix adjoint() const { return {layout_, m_.adjoint()}; }

  OperatorMatrix operator*(const OperatorMatrix& rhs) const;
  OperatorMatrix operator+(const OperatorMatrix& rhs) const;
  OperatorMatrix operator-(const OperatorMatrix& rhs) const;
  OperatorMatrix operator*(cplx s) const { return {layout_, m_ * s}; }

 private:
  HilbertLayout layout_;
  Matrix m_;
};

class PureState {
 public:
  PureState() = default;
  /// Throws ContractError unless the amplitudes have unit norm within kPureNormTol.
  PureState(HilbertLayout layout, Vector amplitudes);

  /// Normalizes `amplitudes`; throws ContractError on a zero vector.
  static PureState normalized(HilbertLayout layout, Vector amplitudes);
  static PureState basis(HilbertLayout layout, std::size_t index);

  const HilbertLayout& layout() const { return layout_; }
  const Vector& amplitudes() const { return v_; }
  std::size_t dim() const { return static_cast<std::size_t>(v_.size()); }

 private:
  HilbertLayout layout_;
  Vector v_;
};

/// Hermitian, positive semidefinite, unit-trace matrix.
class DensityMatrix {
 public:
  enum class Normalization { kUnit, kSubNormalized };

  DensityMatrix() = default;
  /// Validates Hermiticity, trace and positivity. Sub-normalized states only
  /// need 0 <= trace <= 1 + kTraceTol.
  DensityMatrix(HilbertLayout layout, Matrix entries, Normalization norm = Normalization::kUnit);

  static DensityMatrix from_pure(const PureState& psi);

  /// Skips the eigenvalue check. For outputs of positivity-preserving maps
  /// (Kraus sums, partial traces); Hermiticity is enforced by symmetrization.
  static DensityMatrix trusted(HilbertLayout layout, Matrix entries,
                               Normalization norm = Normalization::kUnit);

  const HilbertLayout& layout() const { return layout_; }
  const Matrix& matrix() const { return m_; }
  std::size_t dim() const { return static_cast<std::size_t>(m_.rows()); }
  Normalization normalization() const { return norm_; }

  double trace() const { return m_.trace().real(); }
  double purity() const;

 private:
  struct TrustedTag {};
  DensityMatrix(TrustedTag, HilbertLayout layout, Matrix entries, Normalization norm);

  HilbertLayout layout_;
  Matrix m_;
  Normalization norm_ = Normalization::kUnit;
};

// ---------------------------------------------------------------------------
// Products and reductions

OperatorMatrix kron(const OperatorMatrix& a, const OperatorMatrix& b,
                    std::size_t max_dim = kDefaultMaxDim);
DensityMatrix kron(const DensityMatrix& a, const DensityMatrix& b,
                   std::size_t max_dim = kDefaultMaxDim);
PureState kron(const PureState& a, const PureState& b, std::size_t max_dim = kDefaultMaxDim);

DensityMatrix partial_trace(const DensityMatrix& rho, std::span<const std::string> keep);
DensityMatrix partial_trace(const DensityMatrix& rho, std::initializer_list<std::string> keep);

/// Transposes the indices of one subsystem. The result is Hermitian but in
/// general not positive.
OperatorMatrix partial_transpose(const DensityMatrix& rho, const std::string& subsystem);
OperatorMatrix partial_transpose(const OperatorMatrix& op, const std::string& subsystem);

/// Reorders subsystems; `order` must be a permutation of the layout labels.
Matrix permute_subsystems(const Matrix& m, const HilbertLayout& layout,
                          std::span<const std::string> order);

struct Bipartition {
  std::vector<std::string> a;
  std::vector<std::string> b;
};

/// R[(i,i'),(j,j')] = rho[(i,j),(i',j')] with i in A and j in B.
/// Result is dA^2 x dB^2.
Matrix realign(const DensityMatrix& rho, const Bipartition& parts);
/// Inverse of realign for a state already ordered (A, B).
Matrix unrealign(const Matrix& r, std::size_t dim_a, std::size_t dim_b);

// ---------------------------------------------------------------------------
// Local operator application

/// (op ⊗ I) |psi>, where op's labels are a subset of psi's labels (any order).
PureState apply_local(const OperatorMatrix& op, const PureState& psi);
/// (op ⊗ I) rho (op ⊗ I)^†.
DensityMatrix conjugate_local(const OperatorMatrix& op, const DensityMatrix& rho);

// ---------------------------------------------------------------------------
// Spectral routines

/// exp(G) for anti-Hermitian G. Scaling-and-squaring Taylor kernel applied
/// independently to each connected block of G's sparsity graph.
OperatorMatrix expm_antihermitian(const OperatorMatrix& g);
Matrix expm_antihermitian(const Matrix& g);

struct EigenDecomposition {
  RealVector values;              // ascending
  std::optional<Matrix> vectors;  // columns, when requested
};

EigenDecomposition eig_hermitian(const Matrix& h, bool with_vectors = false);
EigenDecomposition eig_hermitian(const OperatorMatrix& h, bool with_vectors = false);

/// Nonnegative, descending.
RealVector singular_values(const Matrix& m);

// ---------------------------------------------------------------------------
// Small helpers

double max_abs(const Matrix& m);
double hermiticity_residual(const Matrix& m);

}  // namespace pinem
