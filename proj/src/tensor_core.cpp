#include "pinem/tensor_core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include <lapacke.h>

namespace pinem {

namespace {

std::size_t checked_product(const std::vector<std::size_t>& dims) {
  std::size_t total = 1;
  for (auto d : dims) total *= d;
  return total;
}

void require_cap(std::size_t dim, std::size_t cap, const char* what) {
  if (dim > cap) {
    std::ostringstream os;
    os << what << ": total dimension " << dim << " exceeds cap " << cap;
    throw SizingError(os.str());
  }
}

// Flattened offsets contributed by the subsystems at `positions` (in the given
// order, first slowest), enumerated over their joint index.
std::vector<std::size_t> offsets_for(const HilbertLayout& layout,
                                     const std::vector<std::size_t>& positions) {
  const auto strides = layout.strides();
  std::size_t n = 1;
  for (auto p : positions) n *= layout.dims()[p];
  std::vector<std::size_t> out(n, 0);
  for (std::size_t idx = 0; idx < n; ++idx) {
    std::size_t rem = idx;
    std::size_t off = 0;
    for (std::size_t q = positions.size(); q-- > 0;) {
      const auto d = layout.dims()[positions[q]];
      off += (rem % d) * strides[positions[q]];
      rem /= d;
    }
    out[idx] = off;
  }
  return out;
}

std::vector<std::size_t> complement(std::size_t n, const std::vector<std::size_t>& taken) {
  std::vector<std::size_t> rest;
  for (std::size_t i = 0; i < n; ++i) {
    if (std::find(taken.begin(), taken.end(), i) == taken.end()) rest.push_back(i);
  }
  return rest;
}

std::vector<std::size_t> positions_of(const HilbertLayout& layout,
                                      const std::vector<std::string>& labels) {
  std::vector<std::size_t> pos;
  pos.reserve(labels.size());
  for (const auto& l : labels) pos.push_back(layout.position(l));
  return pos;
}

// Permutation p with p[r * d_op + a] = flattened index of (op index a, rest index r),
// so that in permuted order the operator's subsystems form the fast index.
std::vector<int> local_permutation(const HilbertLayout& full, const HilbertLayout& op_layout) {
  const auto op_pos = positions_of(full, op_layout.labels());
  for (std::size_t i = 0; i < op_pos.size(); ++i) {
    if (full.dims()[op_pos[i]] != op_layout.dims()[i]) {
      throw ArgumentError("apply_local: dimension mismatch for subsystem '" +
                          op_layout.labels()[i] + "'");
    }
  }
  const auto rest_pos = complement(full.size(), op_pos);
  const auto off_op = offsets_for(full, op_pos);
  const auto off_rest = offsets_for(full, rest_pos);
  std::vector<int> perm(off_op.size() * off_rest.size());
  for (std::size_t r = 0; r < off_rest.size(); ++r) {
    for (std::size_t a = 0; a < off_op.size(); ++a) {
      perm[r * off_op.size() + a] = static_cast<int>(off_op[a] + off_rest[r]);
    }
  }
  return perm;
}

// Applies op to the fast index of a matrix whose rows are in permuted order.
Matrix left_apply_fast(const Matrix& op, const Matrix& x) {
  const Eigen::Index d_op = op.rows();
  const Eigen::Index blocks = x.size() / d_op;
  Matrix contiguous = x;  // column-major: each run of d_op entries is one op vector
  Eigen::Map<Matrix> view(contiguous.data(), d_op, blocks);
  Matrix out(x.rows(), x.cols());
  Eigen::Map<Matrix>(out.data(), d_op, blocks).noalias() = op * view;
  return out;
}

Matrix taylor_expm(const Matrix& a) {
  const Eigen::Index n = a.rows();
  const double norm1 = a.cwiseAbs().colwise().sum().maxCoeff();
  int squarings = 0;
  if (norm1 > 0.5) squarings = static_cast<int>(std::ceil(std::log2(norm1 / 0.5)));
  const Matrix scaled = a / std::ldexp(1.0, squarings);
  // Degree 16 at norm <= 1/2: remainder below 1e-19.
  constexpr int kDegree = 16;
  Matrix p = Matrix::Identity(n, n);
  for (int k = kDegree; k >= 1; --k) {
    Matrix next = scaled * p;
    next /= static_cast<double>(k);
    next.diagonal().array() += 1.0;
    p = std::move(next);
  }
  for (int s = 0; s < squarings; ++s) p = (p * p).eval();
  return p;
}

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(int a, int b) { parent[find(a)] = find(b); }
};

}  // namespace

// ---------------------------------------------------------------------------
// HilbertLayout

HilbertLayout::HilbertLayout(std::vector<std::string> labels, std::vector<std::size_t> dims)
    : labels_(std::move(labels)), dims_(std::move(dims)) {
  if (labels_.size() != dims_.size()) {
    throw ArgumentError("HilbertLayout: labels and dims differ in length");
  }
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < dims_.size(); ++i) {
    if (dims_[i] < 1) throw ArgumentError("HilbertLayout: subsystem dimension must be >= 1");
    if (!seen.insert(labels_[i]).second) {
      throw ArgumentError("HilbertLayout: duplicate label '" + labels_[i] + "'");
    }
  }
}

HilbertLayout HilbertLayout::single(std::string label, std::size_t dim) {
  return HilbertLayout({std::move(label)}, {dim});
}

std::size_t HilbertLayout::total_dim() const { return checked_product(dims_); }

bool HilbertLayout::contains(const std::string& label) const {
  return std::find(labels_.begin(), labels_.end(), label) != labels_.end();
}

std::size_t HilbertLayout::position(const std::string& label) const {
  auto it = std::find(labels_.begin(), labels_.end(), label);
  if (it == labels_.end()) {
    throw ArgumentError("unknown subsystem label '" + label + "' in layout " + describe());
  }
  return static_cast<std::size_t>(it - labels_.begin());
}

std::vector<std::size_t> HilbertLayout::strides() const {
  std::vector<std::size_t> s(dims_.size(), 1);
  for (std::size_t i = dims_.size(); i-- > 1;) s[i - 1] = s[i] * dims_[i];
  return s;
}

HilbertLayout HilbertLayout::concat(const HilbertLayout& other) const {
  auto labels = labels_;
  auto dims = dims_;
  labels.insert(labels.end(), other.labels_.begin(), other.labels_.end());
  dims.insert(dims.end(), other.dims_.begin(), other.dims_.end());
  return HilbertLayout(std::move(labels), std::move(dims));
}

HilbertLayout HilbertLayout::subset(std::span<const std::string> keep) const {
  if (keep.empty()) throw ArgumentError("subset: keep list is empty");
  for (const auto& k : keep) position(k);
  std::vector<std::string> labels;
  std::vector<std::size_t> dims;
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (std::find(keep.begin(), keep.end(), labels_[i]) != keep.end()) {
      labels.push_back(labels_[i]);
      dims.push_back(dims_[i]);
    }
  }
  return HilbertLayout(std::move(labels), std::move(dims));
}

std::string HilbertLayout::describe() const {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (i) os << " x ";
    os << labels_[i] << ':' << dims_[i];
  }
  os << ')';
  return os.str();
}

// ---------------------------------------------------------------------------
// OperatorMatrix

OperatorMatrix::OperatorMatrix(HilbertLayout layout, Matrix entries)
    : layout_(std::move(layout)), m_(std::move(entries)) {
  if (m_.rows() != m_.cols()) throw ArgumentError("OperatorMatrix: matrix is not square");
  if (static_cast<std::size_t>(m_.rows()) != layout_.total_dim()) {
    throw ArgumentError("OperatorMatrix: dimension does not match layout " + layout_.describe());
  }
}

OperatorMatrix OperatorMatrix::identity(const HilbertLayout& layout) {
  const auto d = static_cast<Eigen::Index>(layout.total_dim());
  return {layout, Matrix::Identity(d, d)};
}

OperatorMatrix OperatorMatrix::zero(const HilbertLayout& layout) {
  const auto d = static_cast<Eigen::Index>(layout.total_dim());
  return {layout, Matrix::Zero(d, d)};
}

OperatorMatrix OperatorMatrix::operator*(const OperatorMatrix& rhs) const {
  if (!(layout_ == rhs.layout_)) throw ArgumentError("operator product: layout mismatch");
  return {layout_, m_ * rhs.m_};
}

OperatorMatrix OperatorMatrix::operator+(const OperatorMatrix& rhs) const {
  if (!(layout_ == rhs.layout_)) throw ArgumentError("operator sum: layout mismatch");
  return {layout_, m_ + rhs.m_};
}

OperatorMatrix OperatorMatrix::operator-(const OperatorMatrix& rhs) const {
  if (!(layout_ == rhs.layout_)) throw ArgumentError("operator difference: layout mismatch");
  return {layout_, m_ - rhs.m_};
}

// ---------------------------------------------------------------------------
// PureState

PureState::PureState(HilbertLayout layout, Vector amplitudes)
    : layout_(std::move(layout)), v_(std::move(amplitudes)) {
  if (static_cast<std::size_t>(v_.size()) != layout_.total_dim()) {
    throw ArgumentError("PureState: amplitude count does not match layout " + layout_.describe());
  }
  const double dev = std::abs(v_.norm() - 1.0);
  if (!(dev < kPureNormTol)) {
    std::ostringstream os;
    os << "PureState: norm deviates from 1 by " << dev;
    throw ContractError(os.str());
  }
}

PureState PureState::normalized(HilbertLayout layout, Vector amplitudes) {
  const double n = amplitudes.norm();
  if (!(n > 0.0)) throw ContractError("PureState: cannot normalize a zero vector");
  amplitudes /= n;
  return PureState(std::move(layout), std::move(amplitudes));
}

PureState PureState::basis(HilbertLayout layout, std::size_t index) {
  const auto d = layout.total_dim();
  if (index >= d) throw ArgumentError("PureState::basis: index out of range");
  Vector v = Vector::Zero(static_cast<Eigen::Index>(d));
  v(static_cast<Eigen::Index>(index)) = 1.0;
  return PureState(std::move(layout), std::move(v));
}

// ---------------------------------------------------------------------------
// DensityMatrix

DensityMatrix::DensityMatrix(HilbertLayout layout, Matrix entries, Normalization norm)
    : layout_(std::move(layout)), m_(std::move(entries)), norm_(norm) {
  if (m_.rows() != m_.cols()) throw ArgumentError("DensityMatrix: matrix is not square");
  if (static_cast<std::size_t>(m_.rows()) != layout_.total_dim()) {
    throw ArgumentError("DensityMatrix: dimension does not match layout " + layout_.describe());
  }
  const double herm = hermiticity_residual(m_);
  if (!(herm <= kHermitianTol)) {
    std::ostringstream os;
    os << "DensityMatrix: Hermiticity residual " << herm;
    throw ContractError(os.str());
  }
  m_ = (0.5 * (m_ + m_.adjoint())).eval();
  const cplx tr = m_.trace();
  if (norm_ == Normalization::kUnit && !(std::abs(tr - 1.0) <= kTraceTol)) {
    std::ostringstream os;
    os << "DensityMatrix: trace " << tr.real() << " is not 1";
    throw ContractError(os.str());
  }
  if (norm_ == Normalization::kSubNormalized && !(tr.real() <= 1.0 + kTraceTol)) {
    throw ContractError("DensityMatrix: sub-normalized trace exceeds 1");
  }
  const double min_eig = eig_hermitian(m_).values.minCoeff();
  if (min_eig < -kPsdTol) {
    std::ostringstream os;
    os << "DensityMatrix: negative eigenvalue " << min_eig;
    throw ContractError(os.str());
  }
}

DensityMatrix::DensityMatrix(TrustedTag, HilbertLayout layout, Matrix entries,
                             Normalization norm)
    : layout_(std::move(layout)), m_(std::move(entries)), norm_(norm) {
  if (m_.rows() != m_.cols() ||
      static_cast<std::size_t>(m_.rows()) != layout_.total_dim()) {
    throw ArgumentError("DensityMatrix: dimension does not match layout " + layout_.describe());
  }
  m_ = (0.5 * (m_ + m_.adjoint())).eval();
}

DensityMatrix DensityMatrix::trusted(HilbertLayout layout, Matrix entries, Normalization norm) {
  return DensityMatrix(TrustedTag{}, std::move(layout), std::move(entries), norm);
}

DensityMatrix DensityMatrix::from_pure(const PureState& psi) {
  const auto& v = psi.amplitudes();
  return trusted(psi.layout(), v * v.adjoint());
}

double DensityMatrix::purity() const { return (m_ * m_).trace().real(); }

// ---------------------------------------------------------------------------
// Products and reductions

OperatorMatrix kron(const OperatorMatrix& a, const OperatorMatrix& b, std::size_t max_dim) {
  require_cap(a.dim() * b.dim(), max_dim, "kron");
  const auto layout = a.layout().concat(b.layout());
  const auto& ma = a.matrix();
  const auto& mb = b.matrix();
  Matrix out(ma.rows() * mb.rows(), ma.cols() * mb.cols());
  for (Eigen::Index i = 0; i < ma.rows(); ++i) {
    for (Eigen::Index j = 0; j < ma.cols(); ++j) {
      out.block(i * mb.rows(), j * mb.cols(), mb.rows(), mb.cols()) = ma(i, j) * mb;
    }
  }
  return {layout, std::move(out)};
}

DensityMatrix kron(const DensityMatrix& a, const DensityMatrix& b, std::size_t max_dim) {
  const auto op = kron(OperatorMatrix(a.layout(), a.matrix()),
                       OperatorMatrix(b.layout(), b.matrix()), max_dim);
  const bool sub = a.normalization() == DensityMatrix::Normalization::kSubNormalized ||
                   b.normalization() == DensityMatrix::Normalization::kSubNormalized;
  return DensityMatrix::trusted(op.layout(), op.matrix(),
                                sub ? DensityMatrix::Normalization::kSubNormalized
                                    : DensityMatrix::Normalization::kUnit);
}

PureState kron(const PureState& a, const PureState& b, std::size_t max_dim) {
  require_cap(a.dim() * b.dim(), max_dim, "kron");
  const auto& va = a.amplitudes();
  const auto& vb = b.amplitudes();
  Vector out(va.size() * vb.size());
  for (Eigen::Index i = 0; i < va.size(); ++i) out.segment(i * vb.size(), vb.size()) = va(i) * vb;
  return PureState::normalized(a.layout().concat(b.layout()), std::move(out));
}

DensityMatrix partial_trace(const DensityMatrix& rho, std::span<const std::string> keep) {
  const auto& layout = rho.layout();
  const auto kept_layout = layout.subset(keep);
  const auto keep_pos = positions_of(layout, kept_layout.labels());
  const auto traced_pos = complement(layout.size(), keep_pos);
  const auto off_k = offsets_for(layout, keep_pos);
  const auto off_t = offsets_for(layout, traced_pos);
  const auto& m = rho.matrix();
  const auto dk = static_cast<Eigen::Index>(off_k.size());
  Matrix out = Matrix::Zero(dk, dk);
  for (Eigen::Index b = 0; b < dk; ++b) {
    for (Eigen::Index a = 0; a < dk; ++a) {
      cplx acc = 0.0;
      for (auto t : off_t) acc += m(off_k[a] + t, off_k[b] + t);
      out(a, b) = acc;
    }
  }
  return DensityMatrix::trusted(kept_layout, std::move(out), rho.normalization());
}

DensityMatrix partial_trace(const DensityMatrix& rho, std::initializer_list<std::string> keep) {
  std::vector<std::string> k(keep);
  return partial_trace(rho, std::span<const std::string>(k));
}

OperatorMatrix partial_transpose(const OperatorMatrix& op, const std::string& subsystem) {
  const auto& layout = op.layout();
  const auto pos = layout.position(subsystem);
  const auto stride = static_cast<Eigen::Index>(layout.strides()[pos]);
  const auto d = static_cast<Eigen::Index>(layout.dims()[pos]);
  const auto& m = op.matrix();
  Matrix out(m.rows(), m.cols());
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    const Eigen::Index sj = (j / stride) % d;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      const Eigen::Index si = (i / stride) % d;
      out(i + (sj - si) * stride, j + (si - sj) * stride) = m(i, j);
    }
  }
  return {layout, std::move(out)};
}

OperatorMatrix partial_transpose(const DensityMatrix& rho, const std::string& subsystem) {
  return partial_transpose(OperatorMatrix(rho.layout(), rho.matrix()), subsystem);
}

Matrix permute_subsystems(const Matrix& m, const HilbertLayout& layout,
                          std::span<const std::string> order) {
  if (order.size() != layout.size()) {
    throw ArgumentError("permute_subsystems: order is not a permutation of the layout labels");
  }
  std::vector<std::string> ord(order.begin(), order.end());
  const auto pos = positions_of(layout, ord);
  std::vector<std::size_t> sorted = pos;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw ArgumentError("permute_subsystems: repeated label");
  }
  const auto offs = offsets_for(layout, pos);
  std::vector<int> perm(offs.begin(), offs.end());
  return m(perm, perm);
}

Matrix realign(const DensityMatrix& rho, const Bipartition& parts) {
  const auto& layout = rho.layout();
  if (parts.a.empty() || parts.b.empty() || parts.a.size() + parts.b.size() != layout.size()) {
    throw ArgumentError("realign: labels do not partition the layout");
  }
  std::vector<std::string> order = parts.a;
  order.insert(order.end(), parts.b.begin(), parts.b.end());
  const Matrix m = permute_subsystems(rho.matrix(), layout, order);
  std::size_t da = 1;
  for (const auto& l : parts.a) da = da * layout.dim_of(l);
  const std::size_t db = layout.total_dim() / da;
  const auto a = static_cast<Eigen::Index>(da);
  const auto b = static_cast<Eigen::Index>(db);
  Matrix r(a * a, b * b);
  for (Eigen::Index i = 0; i < a; ++i) {
    for (Eigen::Index ip = 0; ip < a; ++ip) {
      for (Eigen::Index j = 0; j < b; ++j) {
        for (Eigen::Index jp = 0; jp < b; ++jp) {
          r(i * a + ip, j * b + jp) = m(i * b + j, ip * b + jp);
        }
      }
    }
  }
  return r;
}

Matrix unrealign(const Matrix& r, std::size_t dim_a, std::size_t dim_b) {
  const auto a = static_cast<Eigen::Index>(dim_a);
  const auto b = static_cast<Eigen::Index>(dim_b);
  if (r.rows() != a * a || r.cols() != b * b) throw ArgumentError("unrealign: shape mismatch");
  Matrix m(a * b, a * b);
  for (Eigen::Index i = 0; i < a; ++i) {
    for (Eigen::Index ip = 0; ip < a; ++ip) {
      for (Eigen::Index j = 0; j < b; ++j) {
        for (Eigen::Index jp = 0; jp < b; ++jp) {
          m(i * b + j, ip * b + jp) = r(i * a + ip, j * b + jp);
        }
      }
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// Local operator application

PureState apply_local(const OperatorMatrix& op, const PureState& psi) {
  const auto perm = local_permutation(psi.layout(), op.layout());
  const Matrix x = psi.amplitudes()(perm);
  const Matrix y = left_apply_fast(op.matrix(), x);
  Vector out(psi.amplitudes().size());
  for (std::size_t i = 0; i < perm.size(); ++i) out(perm[i]) = y(static_cast<Eigen::Index>(i), 0);
  return PureState::normalized(psi.layout(), std::move(out));
}

DensityMatrix conjugate_local(const OperatorMatrix& op, const DensityMatrix& rho) {
  const auto perm = local_permutation(rho.layout(), op.layout());
  const Matrix p = rho.matrix()(perm, perm);
  const Matrix left = left_apply_fast(op.matrix(), p);
  const Matrix both = left_apply_fast(op.matrix(), left.adjoint()).adjoint();
  Matrix out(both.rows(), both.cols());
  out(perm, perm) = both;
  return DensityMatrix::trusted(rho.layout(), std::move(out), rho.normalization());
}

// ---------------------------------------------------------------------------
// Spectral routines

Matrix expm_antihermitian(const Matrix& g) {
  if (g.rows() != g.cols()) throw ArgumentError("expm_antihermitian: matrix is not square");
  const double residual = max_abs(g + g.adjoint());
  if (!(residual <= kHermitianTol)) {
    std::ostringstream os;
    os << "expm_antihermitian: generator is not anti-Hermitian (residual " << residual << ")";
    throw ContractError(os.str());
  }
  const int n = static_cast<int>(g.rows());
  UnionFind uf(n);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < j; ++i) {
      if (g(i, j) != cplx(0.0) || g(j, i) != cplx(0.0)) uf.unite(i, j);
    }
  }
  std::vector<std::vector<int>> components(n);
  for (int i = 0; i < n; ++i) components[uf.find(i)].push_back(i);

  Matrix u = Matrix::Zero(n, n);
  for (const auto& comp : components) {
    if (comp.empty()) continue;
    if (comp.size() == 1) {
      u(comp[0], comp[0]) = std::exp(g(comp[0], comp[0]));
      continue;
    }
    const Matrix block = taylor_expm(g(comp, comp));
    const double dev = max_abs(block.adjoint() * block -
                               Matrix::Identity(block.rows(), block.cols()));
    if (!(dev < kHermitianTol)) {
      std::ostringstream os;
      os << "expm_antihermitian: unitarity lost (residual " << dev << ")";
      throw ContractError(os.str());
    }
    u(comp, comp) = block;
  }
  return u;
}

OperatorMatrix expm_antihermitian(const OperatorMatrix& g) {
  return {g.layout(), expm_antihermitian(g.matrix())};
}

EigenDecomposition eig_hermitian(const Matrix& h, bool with_vectors) {
  if (h.rows() != h.cols()) throw ArgumentError("eig_hermitian: matrix is not square");
  const double residual = hermiticity_residual(h);
  if (!(residual <= kHermitianTol)) {
    std::ostringstream os;
    os << "eig_hermitian: matrix is not Hermitian (residual " << residual << ")";
    throw ContractError(os.str());
  }
  // LAPACK's divide-and-conquer drivers are markedly faster than Eigen's on the large
  // single-threaded problems here (entropies and partial transposes of two-mode states).
  EigenDecomposition out;
  const auto n = static_cast<lapack_int>(h.rows());
  out.values.resize(n);
  if (n == 0) return out;
  Matrix a = h;
  const lapack_int info = LAPACKE_zheevd(LAPACK_COL_MAJOR, with_vectors ? 'V' : 'N', 'L', n,
                                         reinterpret_cast<lapack_complex_double*>(a.data()), n, out.values.data());
  if (info != 0) throw ContractError("eig_hermitian: solver failed (info " + std::to_string(info) + ")");
  if (with_vectors) out.vectors = std::move(a);
  return out;
}

EigenDecomposition eig_hermitian(const OperatorMatrix& h, bool with_vectors) {
  return eig_hermitian(h.matrix(), with_vectors);
}

RealVector singular_values(const Matrix& m) {
  if (m.size() == 0) return RealVector();
  Matrix a = m;
  const auto rows = static_cast<lapack_int>(m.rows()), cols = static_cast<lapack_int>(m.cols());
  RealVector s(std::min(rows, cols));
  const lapack_int info = LAPACKE_zgesdd(LAPACK_COL_MAJOR, 'N', rows, cols,
                                         reinterpret_cast<lapack_complex_double*>(a.data()), rows, s.data(), nullptr,
                                         1, nullptr, 1);
  if (info != 0) throw ContractError("singular_values: solver failed (info " + std::to_string(info) + ")");
  return s;
}

double max_abs(const Matrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

double hermiticity_residual(const Matrix& m) { return max_abs(m - m.adjoint()); }

}  // namespace pinem
