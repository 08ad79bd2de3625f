#pragma once

// Config-driven scenario runner: JSON configs, per-step observables, parameter
// sweeps over a worker pool, CSV/JSON persistence and the invariant suite.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "pinem/operators.hpp"

namespace pinem {

inline constexpr const char* kToolVersion = "0.1.0";

enum class Scenario { kFig2MutualInfo, kFig3Transfer, kFig4PostselectMap, kFig5Hbt, kCustom };

std::string to_string(Scenario s);
Scenario scenario_from_string(const std::string& s);  // throws ConfigError

struct CavityDescriptor {
  enum class Kind { kVacuum, kFock, kCoherent };
  Kind kind = Kind::kVacuum;
  int n = 0;               // Fock photon number
  double amplitude = 0.0;  // |alpha|
  double phase = 0.0;      // arg alpha, the relative light phase

  cplx alpha() const { return std::polar(amplitude, phase); }
  bool operator==(const CavityDescriptor&) const = default;
};

struct ElectronDescriptor {
  enum class Kind { kDelta, kComb };
  Kind kind = Kind::kDelta;
  int peaks = 1;
  std::vector<double> phases;

  bool operator==(const ElectronDescriptor&) const = default;
};

/// Post-selection map axes: g from g_start to g_stop in steps of g_step, both cavities in
/// Fock |n> for n in [n_min, n_max].
struct MapSpec {
  double g_start = 0.05;
  double g_stop = 1.0;
  double g_step = 0.05;
  int n_min = 0;
  int n_max = 5;
  int loss = 1;

  std::vector<double> g_values() const;
  bool operator==(const MapSpec&) const = default;
};

struct ExperimentConfig {
  Scenario scenario = Scenario::kCustom;
  cplx g{0.1, 0.0};
  double phi = 0.0;                       // used when `physical` is absent
  std::optional<PhysicalParams> physical;  // phi from the dispersion phase
  CavityDescriptor cavity1;
  CavityDescriptor cavity2;
  ElectronDescriptor electron;
  int electrons = 0;
  std::optional<int> n_max1;
  std::optional<int> n_max2;
  std::optional<int> k_max;
  std::string output;
  std::uint64_t rng_seed = 0;  // reserved; every computation is deterministic
  MapSpec map;
  bool criteria = true;  // PPT and realignment per step

  double effective_phi() const;
  bool operator==(const ExperimentConfig& o) const;
};

/// Built-in defaults for the figure scenarios. `large_scale` raises the fig2 amplitudes to 2 and 3.
ExperimentConfig default_config(Scenario s, bool large_scale = false);

/// Parses a JSON config. Unknown keys, wrong types and failed guards raise ConfigError
/// naming the field (and line/column for syntax errors).
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);
nlohmann::ordered_json to_json(const ExperimentConfig& c);
/// Re-checks ranges and cross-field rules; throws ConfigError.
void validate_config(const ExperimentConfig& c);

/// FNV-1a 64-bit hash of the canonical config JSON, as 16 hex digits.
std::string config_hash(const ExperimentConfig& c);

struct Truncation {
  int n_max1 = 0;
  int n_max2 = 0;
  int k_max = 0;
};

/// Starting cutoffs: explicit overrides, else input-state defaults; ladder wide enough for both
/// cavities' bands. Automatic cutoffs grow during a run (see RunResult::adaptive_cutoffs).
Truncation resolve_truncation(const ExperimentConfig& c);

struct StepRecord {
  int m = 0;
  double mean_n1 = 0.0;
  double mean_n2 = 0.0;
  std::optional<double> g2;
  std::optional<double> g2_closed_form;
  std::optional<double> mutual_information;
  std::optional<double> ppt_min_eig;
  std::optional<double> realignment_sum;
  double trace = 1.0;
  double edge_population = 0.0;
  /// Loss distribution of the electron that produced this state (empty at m = 0).
  std::map<int, double> loss_probabilities;
};

struct MapCell {
  double g = 0.0;
  int n = 0;
  double probability = 0.0;
  std::optional<double> entanglement_entropy;  // absent when the post-selection is degenerate
};

struct RunResult {
  ExperimentConfig config;
  std::string hash;
  Truncation truncation;
  std::string method;  // "kraus", "collective" or "postselect_map"
  double phi = 0.0;
  double leakage = 0.0;
  double discarded_mass = 0.0;
  /// Automatic photon cutoffs are raised whenever a cavity's top level holds more than 1e-9;
  /// the state is embedded and the Kraus set rebuilt. `truncation` then holds the final sizes.
  bool adaptive_cutoffs = false;
  int cutoff_resizes = 0;
  std::vector<StepRecord> steps;
  std::vector<MapCell> map;
  std::vector<double> final_p_n1;
  std::vector<double> final_p_n2;
  std::optional<double> first_pass_energy_variance;
  double wall_seconds = 0.0;
};

/// Population allowed on the top Fock level before a run is declared truncated.
inline constexpr double kEdgePopulationBound = 1e-6;

/// Called after each recorded step with the cutoffs in force.
using ProgressFn = std::function<void(const StepRecord&, const Truncation&)>;

/// Runs one config in memory. Throws TruncationError (with suggestions) when a guard trips.
RunResult run_experiment(const ExperimentConfig& c, const ProgressFn& progress = {});

/// Writes series.csv (or map.csv) and meta.json under `dir`.
void write_result(const RunResult& r, const std::filesystem::path& dir);

// ---------------------------------------------------------------------------
// Sweeps

struct SweepAxis {
  std::string name;  // g_Q, phi, electrons, cavity1.amplitude, cavity1.phase, cavity1.n, cavity2.*
  double start = 0.0;
  double stop = 0.0;
  double step = 1.0;

  std::vector<double> values() const;
};

/// Parses "name=start:stop:step"; throws ConfigError.
SweepAxis parse_axis(const std::string& spec);
/// Applies one axis value to a config copy; throws ConfigError for unknown names.
void apply_axis(ExperimentConfig& c, const std::string& name, double value);

inline constexpr std::size_t kMaxSweepCells = 10000;
inline constexpr std::size_t kMaxSweepAxes = 2;

struct SweepCell {
  std::size_t index = 0;
  std::vector<double> values;
  std::string directory;
  std::string status;  // "ok" or the error message
  int exit_code = 0;
  std::optional<StepRecord> final_step;
};

struct SweepSummary {
  std::vector<SweepAxis> axes;
  std::vector<SweepCell> cells;
};

/// Worker count: explicit value when positive, else PINEM_WORKERS, else hardware threads.
int resolve_workers(int requested);

/// Runs every grid cell into out_dir/cell_XXXXX and writes manifest.json and summary.csv.
SweepSummary run_sweep(const ExperimentConfig& base, const std::vector<SweepAxis>& axes,
                       const std::filesystem::path& out_dir, int workers);

// ---------------------------------------------------------------------------
// Invariant suite

struct InvariantResult {
  std::string name;
  double residual = 0.0;
  double tolerance = 0.0;
  bool passed = false;
  std::string note;
};

struct ValidateOptions {
  bool strict = false;          // tolerances divided by 10
  std::optional<int> k_max;     // ladder half width override for the completeness check
  std::optional<int> n_max;     // photon cutoff override for the completeness check
};

std::vector<InvariantResult> run_validation(const ValidateOptions& options = {});

}  // namespace pinem
