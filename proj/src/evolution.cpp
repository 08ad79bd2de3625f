#include "pinem/evolution.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace pinem {

namespace {

using Triplet = Eigen::Triplet<cplx>;

struct BandEntry {
  int from;
  int to;
  cplx value;
};

// Nonzero entries of a decomposition table that can contribute above the entry cutoff.
std::vector<BandEntry> band_entries(const LadderDecomposition& dec) {
  std::vector<BandEntry> out;
  const int d = static_cast<int>(dec.mode.dim());
  for (int n = 0; n < d; ++n) {
    for (int np = 0; np < d; ++np) {
      const cplx v = dec.table(np, n);
      if (std::abs(v) >= kKrausEntryCutoff) out.push_back({n, np, v});
    }
  }
  return out;
}

void require_electron_on_ladder(const ElectronLadder& ladder, const PureState& electron) {
  if (electron.dim() != ladder.dim()) {
    std::ostringstream os;
    os << "electron state has dimension " << electron.dim() << " but the ladder has "
       << ladder.dim();
    throw ArgumentError(os.str());
  }
}

// Moves triplet groups into the Kraus set, dropping negligible elements and those whose
// final electron index falls outside the ladder.
void finalize(KrausSet& set, std::map<int, std::vector<Triplet>>& groups, double leakage_bound) {
  const auto d = static_cast<Eigen::Index>(set.layout.total_dim());
  RealVector lost = RealVector::Zero(d);
  int widest_dropped = 0;
  for (auto& [q, trips] : groups) {
    SparseMatrix k(d, d);
    k.setFromTriplets(trips.begin(), trips.end());
    k.makeCompressed();
    double biggest = 0.0;
    for (Eigen::Index i = 0; i < k.nonZeros(); ++i) biggest = std::max(biggest, std::abs(k.valuePtr()[i]));
    const bool inside = set.ladder.contains(-q);
    if (biggest > kKrausKeepThreshold && inside) {
      set.ops.emplace(q, std::move(k));
      continue;
    }
    for (int c = 0; c < k.outerSize(); ++c) {
      for (SparseMatrix::InnerIterator it(k, c); it; ++it) lost(c) += std::norm(it.value());
    }
    if (!inside && biggest > kKrausKeepThreshold) widest_dropped = std::max(widest_dropped, std::abs(q));
  }
  set.discarded_mass = d > 0 ? lost.maxCoeff() : 0.0;
  set.leakage = set.completeness_deficit();
  if (set.leakage > leakage_bound) {
    std::ostringstream os;
    os << "Kraus completeness deficit " << set.leakage << " exceeds " << leakage_bound
       << " (discarded mass " << set.discarded_mass << ")";
    std::optional<int> k_suggest;
    if (widest_dropped > 0) k_suggest = widest_dropped + 2;
    throw TruncationError(os.str(), std::nullopt, k_suggest);
  }
}

HilbertLayout relabel_single(const HilbertLayout& layout, const std::string& label,
                             std::size_t expected_dim, const char* what) {
  if (layout.total_dim() != expected_dim) {
    std::ostringstream os;
    os << what << ": dimension " << layout.total_dim() << " does not match " << expected_dim;
    throw ArgumentError(os.str());
  }
  return HilbertLayout::single(label, expected_dim);
}

}  // namespace

// ---------------------------------------------------------------------------
// KrausSet

std::vector<int> KrausSet::losses() const {
  std::vector<int> out;
  out.reserve(ops.size());
  for (const auto& [q, k] : ops) out.push_back(q);
  return out;
}

const SparseMatrix& KrausSet::sparse(int q) const {
  auto it = ops.find(q);
  if (it == ops.end()) {
    std::ostringstream os;
    os << "no Kraus element for loss index " << q;
    throw ArgumentError(os.str());
  }
  return it->second;
}

OperatorMatrix KrausSet::op(int q) const { return {layout, Matrix(sparse(q))}; }

double KrausSet::completeness_deficit() const {
  const auto d = static_cast<Eigen::Index>(layout.total_dim());
  Matrix acc = Matrix::Zero(d, d);
  for (const auto& [q, k] : ops) {
    const SparseMatrix kk = SparseMatrix(k.adjoint()) * k;
    for (int c = 0; c < kk.outerSize(); ++c) {
      for (SparseMatrix::InnerIterator it(kk, c); it; ++it) acc(it.row(), it.col()) += it.value();
    }
  }
  acc.diagonal().array() -= 1.0;
  return max_abs(acc);
}

KrausSet build_two_cavity_kraus(const LadderDecomposition& dec1, const LadderDecomposition& dec2,
                                const ElectronLadder& ladder, const PureState& electron, double phi,
                                double leakage_bound) {
  require_electron_on_ladder(ladder, electron);
  KrausSet set;
  set.layout = HilbertLayout({kCavity1Label, kCavity2Label}, {dec1.mode.dim(), dec2.mode.dim()});
  set.ladder = ladder;
  set.electron = electron;
  set.phi = phi;

  const auto e1 = band_entries(dec1);
  const auto e2 = band_entries(dec2);
  const int d2 = static_cast<int>(dec2.mode.dim());
  std::map<int, std::vector<Triplet>> groups;
  const Vector& c = electron.amplitudes();
  for (Eigen::Index i = 0; i < c.size(); ++i) {
    if (c(i) == cplx(0.0)) continue;
    const int j = ladder.k_min + static_cast<int>(i);
    for (const auto& a : e1) {
      const int s1 = a.to - a.from;
      const double mid = static_cast<double>(j - s1);
      const cplx head = c(i) * std::polar(1.0, -phi * mid * mid) * a.value;
      if (std::abs(head) < kKrausEntryCutoff) continue;
      for (const auto& b : e2) {
        const cplx v = head * b.value;
        if (std::abs(v) < kKrausEntryCutoff) continue;
        const int s2 = b.to - b.from;
        const int q = s1 + s2 - j;
        groups[q].emplace_back(a.to * d2 + b.to, a.from * d2 + b.from, v);
      }
    }
  }
  finalize(set, groups, leakage_bound);
  return set;
}

KrausSet build_single_cavity_kraus(const LadderDecomposition& dec, const ElectronLadder& ladder,
                                   const PureState& electron, const std::string& label,
                                   double leakage_bound) {
  require_electron_on_ladder(ladder, electron);
  KrausSet set;
  set.layout = HilbertLayout::single(label, dec.mode.dim());
  set.ladder = ladder;
  set.electron = electron;

  const auto entries = band_entries(dec);
  std::map<int, std::vector<Triplet>> groups;
  const Vector& c = electron.amplitudes();
  for (Eigen::Index i = 0; i < c.size(); ++i) {
    if (c(i) == cplx(0.0)) continue;
    const int j = ladder.k_min + static_cast<int>(i);
    for (const auto& a : entries) {
      const cplx v = c(i) * a.value;
      if (std::abs(v) < kKrausEntryCutoff) continue;
      groups[(a.to - a.from) - j].emplace_back(a.to, a.from, v);
    }
  }
  finalize(set, groups, leakage_bound);
  return set;
}

// ---------------------------------------------------------------------------
// Channel application

namespace {

// Re Tr(t K^dag), touching only the stored entries of K.
double trace_against(const SparseMatrix& k, const Matrix& t) {
  cplx p = 0.0;
  for (int c = 0; c < k.outerSize(); ++c) {
    for (SparseMatrix::InnerIterator it(k, c); it; ++it) p += std::conj(it.value()) * t(it.row(), it.col());
  }
  return p.real();
}

}  // namespace

DensityMatrix apply_channel(const DensityMatrix& rho, const KrausSet& kraus,
                            std::map<int, double>* losses) {
  if (!(rho.layout() == kraus.layout)) {
    throw ArgumentError("apply_channel: state layout " + rho.layout().describe() +
                        " does not match Kraus layout " + kraus.layout.describe());
  }
  const auto d = static_cast<Eigen::Index>(rho.dim());
  Matrix out = Matrix::Zero(d, d);
  Matrix t(d, d);
  if (losses) losses->clear();
  for (const auto& [q, k] : kraus.ops) {
    t.noalias() = k * rho.matrix();
    out.noalias() += t * k.adjoint();
    if (losses) {
      (*losses)[q] = trace_against(k, t);
    }
  }
  return DensityMatrix::trusted(rho.layout(), std::move(out), rho.normalization());
}

std::map<int, double> loss_probabilities(const DensityMatrix& rho, const KrausSet& kraus) {
  if (!(rho.layout() == kraus.layout)) {
    throw ArgumentError("loss_probabilities: layout mismatch");
  }
  std::map<int, double> out;
  const auto d = static_cast<Eigen::Index>(rho.dim());
  Matrix t(d, d);
  for (const auto& [q, k] : kraus.ops) {
    t.noalias() = k * rho.matrix();
    out[q] = trace_against(k, t);
  }
  return out;
}

double edge_population(const DensityMatrix& rho) {
  const auto& layout = rho.layout();
  const auto strides = layout.strides();
  double worst = 0.0;
  for (std::size_t s = 0; s < layout.size(); ++s) {
    const std::size_t top = layout.dims()[s] - 1;
    double pop = 0.0;
    for (std::size_t i = 0; i < layout.total_dim(); ++i) {
      if ((i / strides[s]) % layout.dims()[s] == top) {
        pop += rho.matrix()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)).real();
      }
    }
    worst = std::max(worst, pop);
  }
  return worst;
}

ChannelTrajectory iterate_channel(const DensityMatrix& rho0, const KrausSet& kraus, int electrons,
                                  const StepObserver& observer, bool keep_states,
                                  double trace_bound) {
  if (electrons < 0) throw ArgumentError("iterate_channel: negative electron count");
  ChannelTrajectory traj;
  traj.leakage = kraus.leakage;
  const double start = rho0.trace();
  auto record = [&](int m, const DensityMatrix& rho) {
    StepDiagnostics diag;
    diag.m = m;
    diag.trace = rho.trace();
    diag.trace_deficit = std::abs(diag.trace - start);
    diag.edge_population = edge_population(rho);
    traj.diagnostics.push_back(diag);
    if (observer) observer(m, rho);
    if (keep_states) traj.states.push_back(rho);
    if (diag.trace_deficit > trace_bound) {
      std::ostringstream os;
      os << "iterate_channel: trace deficit " << diag.trace_deficit << " after " << m
         << " electrons exceeds " << trace_bound;
      throw TruncationError(os.str());
    }
  };
  DensityMatrix rho = rho0;
  record(0, rho);
  for (int m = 1; m <= electrons; ++m) {
    rho = apply_channel(rho, kraus);
    record(m, rho);
  }
  return traj;
}

// ---------------------------------------------------------------------------
// Post-selection

PostSelectedPure post_select(const PureState& psi, const KrausSet& kraus, int q) {
  if (!(psi.layout() == kraus.layout)) throw ArgumentError("post_select: layout mismatch");
  if (!kraus.has(q)) {
    std::ostringstream os;
    os << "post_select: loss " << q << " has no retained Kraus element";
    throw DegenerateError(os.str());
  }
  const Vector v = kraus.sparse(q) * psi.amplitudes();
  const double p = v.squaredNorm();
  if (!(p >= kDegenerateProbability)) {
    std::ostringstream os;
    os << "post_select: probability " << p << " of loss " << q << " is degenerate";
    throw DegenerateError(os.str());
  }
  return {PureState::normalized(psi.layout(), v), p};
}

PostSelectedMixed post_select(const DensityMatrix& rho, const KrausSet& kraus, int q) {
  if (!(rho.layout() == kraus.layout)) throw ArgumentError("post_select: layout mismatch");
  if (!kraus.has(q)) {
    std::ostringstream os;
    os << "post_select: loss " << q << " has no retained Kraus element";
    throw DegenerateError(os.str());
  }
  const SparseMatrix& k = kraus.sparse(q);
  Matrix t = k * rho.matrix();
  Matrix out = t * k.adjoint();
  const double p = out.trace().real();
  if (!(p >= kDegenerateProbability)) {
    std::ostringstream os;
    os << "post_select: probability " << p << " of loss " << q << " is degenerate";
    throw DegenerateError(os.str());
  }
  out /= p;
  return {DensityMatrix::trusted(rho.layout(), std::move(out)), p};
}

// ---------------------------------------------------------------------------
// Full-space evolution

namespace {

struct FullOperators {
  OperatorMatrix s1;
  OperatorMatrix u;
  OperatorMatrix s2;
};

FullOperators full_operators(const JointSetup& setup) {
  const auto& g = setup.coupling.g;
  return {scattering_matrix(setup.ladder, setup.mode1, g, kCavity1Label).s,
          fsp_operator(setup.ladder, setup.coupling.phi),
          scattering_matrix(setup.ladder, setup.mode2, g, kCavity2Label).s};
}

}  // namespace

DensityMatrix joint_evolve_full(const DensityMatrix& rho_e, const DensityMatrix& rho1,
                                const DensityMatrix& rho2, const JointSetup& setup,
                                std::size_t max_dim) {
  const std::size_t total = setup.ladder.dim() * setup.mode1.dim() * setup.mode2.dim();
  if (total > max_dim || total > kDenseDensityCap) {
    std::ostringstream os;
    os << "joint_evolve_full: dimension " << total << " exceeds cap "
       << std::min(max_dim, kDenseDensityCap);
    throw SizingError(os.str());
  }
  const auto e = DensityMatrix::trusted(
      relabel_single(rho_e.layout(), kElectronLabel, setup.ladder.dim(), "electron state"),
      rho_e.matrix(), rho_e.normalization());
  const auto p1 = DensityMatrix::trusted(
      relabel_single(rho1.layout(), kCavity1Label, setup.mode1.dim(), "cavity-1 state"),
      rho1.matrix(), rho1.normalization());
  const auto p2 = DensityMatrix::trusted(
      relabel_single(rho2.layout(), kCavity2Label, setup.mode2.dim(), "cavity-2 state"),
      rho2.matrix(), rho2.normalization());
  const auto ops = full_operators(setup);
  DensityMatrix rho = kron(kron(e, p1, max_dim), p2, max_dim);
  rho = conjugate_local(ops.s1, rho);
  rho = conjugate_local(ops.u, rho);
  rho = conjugate_local(ops.s2, rho);
  return rho;
}

PureState joint_evolve_pure(const PureState& e, const PureState& p1, const PureState& p2,
                            const JointSetup& setup, std::size_t max_dim) {
  const PureState ee(relabel_single(e.layout(), kElectronLabel, setup.ladder.dim(), "electron state"),
                     e.amplitudes());
  const PureState a(relabel_single(p1.layout(), kCavity1Label, setup.mode1.dim(), "cavity-1 state"),
                    p1.amplitudes());
  const PureState b(relabel_single(p2.layout(), kCavity2Label, setup.mode2.dim(), "cavity-2 state"),
                    p2.amplitudes());
  const auto ops = full_operators(setup);
  PureState psi = kron(kron(ee, a, max_dim), b, max_dim);
  psi = apply_local(ops.s1, psi);
  psi = apply_local(ops.u, psi);
  psi = apply_local(ops.s2, psi);
  return psi;
}

RealVector electron_spectrum(const DensityMatrix& full) {
  const auto reduced = partial_trace(full, {kElectronLabel});
  return reduced.matrix().diagonal().real();
}

RealVector electron_spectrum(const PureState& full) {
  const auto& layout = full.layout();
  const auto pos = layout.position(kElectronLabel);
  const auto stride = layout.strides()[pos];
  const auto de = layout.dims()[pos];
  RealVector p = RealVector::Zero(static_cast<Eigen::Index>(de));
  const Vector& v = full.amplitudes();
  for (std::size_t i = 0; i < layout.total_dim(); ++i) {
    p(static_cast<Eigen::Index>((i / stride) % de)) += std::norm(v(static_cast<Eigen::Index>(i)));
  }
  return p;
}

double electron_energy_variance(const RealVector& spectrum, const ElectronLadder& ladder) {
  if (static_cast<std::size_t>(spectrum.size()) != ladder.dim()) {
    throw ArgumentError("electron_energy_variance: spectrum length does not match the ladder");
  }
  double mean = 0.0, second = 0.0, norm = 0.0;
  for (Eigen::Index i = 0; i < spectrum.size(); ++i) {
    const double k = static_cast<double>(ladder.k_min + i);
    norm += spectrum(i);
    mean += k * spectrum(i);
    second += k * k * spectrum(i);
  }
  mean /= norm;
  return second / norm - mean * mean;
}

// ---------------------------------------------------------------------------
// Collective mode

double TwoModeMoments::g2() const {
  if (!(mean_n1 > 1e-12 && mean_n2 > 1e-12)) {
    std::ostringstream os;
    os << "g2 undefined: mean photon numbers " << mean_n1 << ", " << mean_n2;
    throw UndefinedG2Error(os.str());
  }
  return n1n2 / (mean_n1 * mean_n2);
}

int collective_mode_cutoff(cplx alpha1, cplx alpha2, cplx g, int electrons) {
  const cplx alpha_a = (alpha1 + alpha2) / std::sqrt(2.0);
  // Repeated passes spread the collective mode towards a displaced thermal state of
  // added mean 2 N |g|^2, whose geometric tail falls by e^-28 per (mean + 1) levels.
  const double added = 2.0 * std::max(electrons, 0) * std::norm(g);
  return default_coherent_n_max(alpha_a) + static_cast<int>(std::ceil(28.0 * (added + 1.0)));
}

std::vector<TwoModeMoments> collective_mode_moments(cplx alpha1, cplx alpha2, cplx g,
                                                    const ElectronLadder& ladder,
                                                    const PureState& electron, int electrons,
                                                    int cutoff) {
  if (electrons < 0) throw ArgumentError("collective_mode_moments: negative electron count");
  if (cutoff <= 0) cutoff = collective_mode_cutoff(alpha1, alpha2, g, electrons);
  const double r2 = std::sqrt(2.0);
  const cplx alpha_a = (alpha1 + alpha2) / r2;
  const cplx beta = (alpha1 - alpha2) / r2;
  const PhotonMode mode(cutoff);
  const auto dec = ladder_decompose(ladder, mode, r2 * g);
  const auto kraus = build_single_cavity_kraus(dec, ladder, electron, "A");
  const auto rho0 = DensityMatrix::from_pure(coherent_state(mode, alpha_a, "A"));

  std::vector<TwoModeMoments> out;
  const double b2 = std::norm(beta);
  auto observe = [&](int m, const DensityMatrix& rho) {
    const Matrix& r = rho.matrix();
    const double tr = rho.trace();
    cplx a1 = 0.0, a2 = 0.0;  // <A>, <A^2>
    double n = 0.0, nn = 0.0;  // <A^dag A>, <A^dag^2 A^2>
    for (Eigen::Index k = 0; k < r.rows(); ++k) {
      const double kd = static_cast<double>(k);
      n += kd * r(k, k).real();
      nn += kd * (kd - 1.0) * r(k, k).real();
      if (k >= 1) a1 += std::sqrt(kd) * r(k, k - 1);
      if (k >= 2) a2 += std::sqrt(kd * (kd - 1.0)) * r(k, k - 2);
    }
    a1 /= tr;
    a2 /= tr;
    n /= tr;
    nn /= tr;
    const double cross = 2.0 * (std::conj(a1) * beta).real();
    TwoModeMoments row;
    row.m = m;
    row.trace = tr;
    row.mean_n1 = 0.5 * (n + cross + b2);
    row.mean_n2 = 0.5 * (n - cross + b2);
    row.n1n2 = 0.25 * (nn - 2.0 * (std::conj(a2) * beta * beta).real() + b2 * b2);
    row.edge_population = r(r.rows() - 1, r.rows() - 1).real();
    out.push_back(row);
  };
  iterate_channel(rho0, kraus, electrons, observe, false);
  return out;
}

}  // namespace pinem
