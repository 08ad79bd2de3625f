#include "pinem/measures.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "pinem/errors.hpp"

namespace pinem {

namespace {

void require_two_subsystems(const HilbertLayout& layout, const char* what) {
  if (layout.size() != 2) {
    std::ostringstream os;
    os << what << ": expected a two-subsystem layout, got " << layout.describe();
    throw ArgumentError(os.str());
  }
}

void require_partition(const HilbertLayout& layout, const Bipartition& parts, const char* what) {
  if (parts.a.empty() || parts.b.empty()) {
    throw ArgumentError(std::string(what) + ": both sides of the bipartition must be nonempty");
  }
  std::set<std::string> seen;
  for (const auto* side : {&parts.a, &parts.b}) {
    for (const auto& l : *side) {
      layout.position(l);  // throws for unknown labels
      if (!seen.insert(l).second) throw ArgumentError(std::string(what) + ": label repeated: " + l);
    }
  }
  if (seen.size() != layout.size()) {
    throw ArgumentError(std::string(what) + ": bipartition does not cover " + layout.describe());
  }
}

// Combined index of a basis state restricted to `labels`, leftmost label slowest.
std::vector<std::size_t> side_index(const HilbertLayout& layout, const std::vector<std::string>& labels,
                                    std::size_t& side_dim) {
  const auto strides = layout.strides();
  std::vector<std::size_t> pos;
  side_dim = 1;
  for (const auto& l : labels) {
    pos.push_back(layout.position(l));
    side_dim *= layout.dims()[pos.back()];
  }
  std::vector<std::size_t> out(layout.total_dim());
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::size_t idx = 0;
    for (auto p : pos) idx = idx * layout.dims()[p] + (i / strides[p]) % layout.dims()[p];
    out[i] = idx;
  }
  return out;
}

}  // namespace

JointDistribution joint_distribution(const DensityMatrix& rho) {
  const auto& layout = rho.layout();
  require_two_subsystems(layout, "joint_distribution");
  const auto d1 = static_cast<Eigen::Index>(layout.dims()[0]);
  const auto d2 = static_cast<Eigen::Index>(layout.dims()[1]);
  JointDistribution out;
  out.joint.resize(d1, d2);
  for (Eigen::Index i = 0; i < d1; ++i)
    for (Eigen::Index j = 0; j < d2; ++j) out.joint(i, j) = rho.matrix()(i * d2 + j, i * d2 + j).real();
  out.p1 = out.joint.rowwise().sum();
  out.p2 = out.joint.colwise().sum().transpose();
  return out;
}

double entropy_of_spectrum(const RealVector& eigenvalues) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < eigenvalues.size(); ++i) {
    const double l = std::min(eigenvalues(i), 1.0);
    if (l > kEntropyEigenFloor) s -= l * std::log2(l);
  }
  return s;
}

double von_neumann_entropy(const DensityMatrix& rho) {
  return entropy_of_spectrum(eig_hermitian(rho.matrix()).values);
}

Bipartition default_bipartition(const HilbertLayout& layout) {
  require_two_subsystems(layout, "default_bipartition");
  return {{layout.labels()[0]}, {layout.labels()[1]}};
}

double mutual_information(const DensityMatrix& rho, const Bipartition& parts) {
  require_partition(rho.layout(), parts, "mutual_information");
  const double sa = von_neumann_entropy(partial_trace(rho, std::span<const std::string>(parts.a)));
  const double sb = von_neumann_entropy(partial_trace(rho, std::span<const std::string>(parts.b)));
  const double mi = sa + sb - von_neumann_entropy(rho);
  return (mi < 0.0 && mi > -kMutualInformationSlack) ? 0.0 : mi;
}

double mutual_information(const DensityMatrix& rho) {
  return mutual_information(rho, default_bipartition(rho.layout()));
}

RealVector schmidt_coefficients(const PureState& psi, const Bipartition& parts) {
  const auto& layout = psi.layout();
  require_partition(layout, parts, "schmidt_coefficients");
  std::size_t da = 0, db = 0;
  const auto ia = side_index(layout, parts.a, da);
  const auto ib = side_index(layout, parts.b, db);
  Matrix m = Matrix::Zero(static_cast<Eigen::Index>(da), static_cast<Eigen::Index>(db));
  const Vector& v = psi.amplitudes();
  for (std::size_t i = 0; i < layout.total_dim(); ++i) {
    m(static_cast<Eigen::Index>(ia[i]), static_cast<Eigen::Index>(ib[i])) = v(static_cast<Eigen::Index>(i));
  }
  return singular_values(m);
}

double entanglement_entropy(const PureState& psi, const Bipartition& parts) {
  const RealVector s = schmidt_coefficients(psi, parts);
  return entropy_of_spectrum(s.array().square().matrix());
}

double entanglement_entropy(const PureState& psi) {
  return entanglement_entropy(psi, default_bipartition(psi.layout()));
}

double entanglement_entropy(const DensityMatrix& rho, const Bipartition& parts) {
  require_partition(rho.layout(), parts, "entanglement_entropy");
  const double purity = rho.matrix().squaredNorm();
  if (purity < 1.0 - kPurityTolerance) {
    std::ostringstream os;
    os << "entanglement_entropy: state is not pure (Tr rho^2 = " << purity << ")";
    throw ArgumentError(os.str());
  }
  return von_neumann_entropy(partial_trace(rho, std::span<const std::string>(parts.a)));
}

double entanglement_entropy(const DensityMatrix& rho) {
  return entanglement_entropy(rho, default_bipartition(rho.layout()));
}

double ppt_check(const DensityMatrix& rho, const std::string& subsystem) {
  return eig_hermitian(partial_transpose(rho, subsystem)).values(0);
}

double ppt_check(const DensityMatrix& rho) {
  if (rho.layout().size() < 2) throw ArgumentError("ppt_check: state is not multipartite");
  return ppt_check(rho, rho.layout().labels().back());
}

double realignment_check(const DensityMatrix& rho, const Bipartition& parts) {
  require_partition(rho.layout(), parts, "realignment_check");
  return singular_values(realign(rho, parts)).sum();
}

double realignment_check(const DensityMatrix& rho) {
  return realignment_check(rho, default_bipartition(rho.layout()));
}

Verdict classify_ppt(double min_eigenvalue) {
  if (min_eigenvalue < -kInconclusiveBand) return Verdict::kEntangled;
  if (min_eigenvalue <= kInconclusiveBand) return Verdict::kInconclusive;
  return Verdict::kNotDetected;
}

Verdict classify_realignment(double trace_norm) {
  if (trace_norm > 1.0 + kInconclusiveBand) return Verdict::kEntangled;
  if (trace_norm >= 1.0 - kInconclusiveBand) return Verdict::kInconclusive;
  return Verdict::kNotDetected;
}

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::kEntangled: return "entangled";
    case Verdict::kInconclusive: return "inconclusive";
    case Verdict::kNotDetected: return "not_detected";
  }
  return "unknown";
}

PhotonMoments photon_moments(const DensityMatrix& rho) {
  const auto& layout = rho.layout();
  require_two_subsystems(layout, "photon_moments");
  const auto d1 = static_cast<Eigen::Index>(layout.dims()[0]);
  const auto d2 = static_cast<Eigen::Index>(layout.dims()[1]);
  PhotonMoments m;
  for (Eigen::Index i = 0; i < d1; ++i) {
    for (Eigen::Index j = 0; j < d2; ++j) {
      const double p = rho.matrix()(i * d2 + j, i * d2 + j).real();
      m.mean_n1 += double(i) * p;
      m.mean_n2 += double(j) * p;
      m.n1n2 += double(i) * double(j) * p;
    }
  }
  return m;
}

double g2_from_moments(const PhotonMoments& m) {
  if (!(m.mean_n1 > 1e-12 && m.mean_n2 > 1e-12)) {
    std::ostringstream os;
    os << "g2 undefined: mean photon numbers " << m.mean_n1 << ", " << m.mean_n2;
    throw UndefinedG2Error(os.str());
  }
  return m.n1n2 / (m.mean_n1 * m.mean_n2);
}

double g2_cross(const DensityMatrix& rho) { return g2_from_moments(photon_moments(rho)); }

double fidelity(const DensityMatrix& rho, const PureState& target) {
  if (!(rho.layout() == target.layout())) {
    throw ArgumentError("fidelity: layout " + rho.layout().describe() + " differs from target " +
                        target.layout().describe());
  }
  const Vector& t = target.amplitudes();
  return std::clamp(t.dot(rho.matrix() * t).real(), 0.0, 1.0);
}

double fidelity(const PureState& psi, const PureState& target) {
  if (!(psi.layout() == target.layout())) {
    throw ArgumentError("fidelity: layout " + psi.layout().describe() + " differs from target " +
                        target.layout().describe());
  }
  return std::clamp(std::norm(target.amplitudes().dot(psi.amplitudes())), 0.0, 1.0);
}

CorrelationReport correlation_report(const DensityMatrix& rho, const ReportOptions& options) {
  CorrelationReport r;
  const auto m = photon_moments(rho);
  r.mean_n1 = m.mean_n1;
  r.mean_n2 = m.mean_n2;
  if (m.mean_n1 > 1e-12 && m.mean_n2 > 1e-12) r.g2 = g2_from_moments(m);
  r.mutual_information = mutual_information(rho);
  if (options.criteria) {
    r.ppt_min_eig = ppt_check(rho);
    r.realignment_sum = realignment_check(rho);
  }
  if (rho.matrix().squaredNorm() >= 1.0 - kPurityTolerance) r.entanglement_entropy = entanglement_entropy(rho);
  return r;
}

}  // namespace pinem
