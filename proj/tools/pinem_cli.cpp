// pinem: run scenarios, sweeps, figure presets and the invariant suite from the command line.
//
// Exit codes: 0 success, 1 unexpected failure, 2 bad config or arguments,
// 3 truncation guard tripped, 4 invariant suite failed.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pinem/analytics.hpp"
#include "pinem/experiments.hpp"

using namespace pinem;
namespace fs = std::filesystem;

namespace {

struct Overrides {
  std::string out;
  int n_max = 0;
  int k_max = 0;
};

void apply(ExperimentConfig& c, const Overrides& o) {
  if (!o.out.empty()) c.output = o.out;
  if (o.n_max > 0) c.n_max1 = c.n_max2 = o.n_max;
  if (o.k_max > 0) c.k_max = o.k_max;
  if (c.output.empty()) c.output = "results/" + config_hash(c);
  validate_config(c);
}

void report(const RunResult& r, const fs::path& dir) {
  std::cout << to_string(r.config.scenario) << " [" << r.method << "] hash " << r.hash << "\n"
            << "  truncation n_max " << r.truncation.n_max1 << "/" << r.truncation.n_max2 << ", k_max "
            << r.truncation.k_max << ", leakage " << r.leakage << "\n";
  if (!r.steps.empty()) {
    const auto& s = r.steps.back();
    std::cout << "  after " << s.m << " electrons: <n1> " << s.mean_n1 << ", <n2> " << s.mean_n2;
    if (s.g2) std::cout << ", g2 " << *s.g2;
    if (s.mutual_information) std::cout << ", MI " << *s.mutual_information;
    std::cout << "\n";
  }
  if (!r.map.empty()) std::cout << "  " << r.map.size() << " map cells\n";
  std::cout << "  wrote " << dir.string() << " (" << r.wall_seconds << " s)\n";
}

void run_one(ExperimentConfig c) {
  // Long runs report every tenth step on stderr.
  const auto r = run_experiment(c, [](const StepRecord& s, const Truncation& t) {
    if (s.m > 0 && s.m % 10 == 0) {
      std::cerr << "  m " << s.m << ", cutoffs " << t.n_max1 << "/" << t.n_max2 << "\n";
    }
  });
  write_result(r, c.output);
  report(r, c.output);
}

void write_phase_scan(const fs::path& path, cplx a1, cplx a2, int n, cplx g) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << "phase,g2\r\n";
  char buf[80];
  for (const auto& p : g2_phase_scan(a1, a2, n, g).points) {
    std::snprintf(buf, sizeof buf, "%.16e,%.16e\r\n", p.phase, p.g2);
    out << buf;
  }
}

void run_figure(const std::string& name, bool large_scale, const Overrides& o) {
  const auto scenario = scenario_from_string(name == "fig2"   ? "fig2_mutual_info"
                                             : name == "fig3" ? "fig3_transfer"
                                             : name == "fig4" ? "fig4_postselect_map"
                                                              : "fig5_hbt");
  auto base = default_config(scenario, large_scale);
  const fs::path root = o.out.empty() ? fs::path(base.output) : fs::path(o.out);
  Overrides inner = o;
  if (scenario == Scenario::kFig3Transfer) {
    // Same mean photon number in two preparations: coherent alpha = 5 and Fock |1>.
    for (const auto& [tag, cav] : {std::pair{"coherent", CavityDescriptor{CavityDescriptor::Kind::kCoherent, 0, 5.0, 0.0}},
                                   std::pair{"fock", CavityDescriptor{CavityDescriptor::Kind::kFock, 1, 0.0, 0.0}}}) {
      auto c = base;
      c.cavity1 = cav;
      inner.out = (root / tag).string();
      apply(c, inner);
      run_one(c);
    }
    return;
  }
  inner.out = root.string();
  if (scenario == Scenario::kFig5Hbt) {
    inner.out = (root / "vacuum").string();
    auto c = base;
    apply(c, inner);
    run_one(c);
    write_phase_scan(root / "phase_scan.csv", 1.0, 1.0, 1, base.g);
    std::cout << "  wrote " << (root / "phase_scan.csv").string() << "\n";
    return;
  }
  apply(base, inner);
  run_one(base);
}

int run_validate(const std::string& profile, int k_max, int n_max) {
  ValidateOptions opt;
  opt.strict = profile == "strict";
  if (k_max > 0) opt.k_max = k_max;
  if (n_max > 0) opt.n_max = n_max;
  bool ok = true;
  for (const auto& r : run_validation(opt)) {
    std::printf("%-34s %s  residual %.3e  tolerance %.1e%s%s\n", r.name.c_str(), r.passed ? "PASS" : "FAIL",
                r.residual, r.tolerance, r.note.empty() ? "" : "  ", r.note.c_str());
    ok = ok && r.passed;
  }
  return ok ? 0 : 4;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Free-electron two-cavity simulator"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);

  Overrides o;
  auto add_overrides = [&](CLI::App* cmd) {
    cmd->add_option("--out", o.out, "Output directory");
    cmd->add_option("--nmax", o.n_max, "Photon cutoff for both cavities")->check(CLI::PositiveNumber);
    cmd->add_option("--kmax", o.k_max, "Electron ladder half width")->check(CLI::PositiveNumber);
  };

  std::string config_path;
  auto* run = app.add_subcommand("run", "Run one JSON config");
  run->add_option("config", config_path, "Config file")->required()->check(CLI::ExistingFile);
  add_overrides(run);

  std::vector<std::string> axes;
  int workers = 0;
  auto* sweep = app.add_subcommand("sweep", "Grid sweep over one or two config parameters");
  sweep->add_option("config", config_path, "Base config file")->required()->check(CLI::ExistingFile);
  sweep->add_option("--axis", axes, "name=start:stop:step (repeatable, at most two)")->required();
  sweep->add_option("--workers", workers, "Worker threads (default PINEM_WORKERS or all cores)");
  add_overrides(sweep);

  std::string figure;
  bool large_scale = false;
  auto* fig = app.add_subcommand("figure", "Run a built-in figure preset");
  fig->add_option("name", figure, "fig2, fig3, fig4 or fig5")
      ->required()
      ->check(CLI::IsMember({"fig2", "fig3", "fig4", "fig5"}));
  fig->add_flag("--large-scale", large_scale, "Use the larger fig2 amplitudes");
  add_overrides(fig);

  std::string profile = "default";
  auto* validate = app.add_subcommand("validate", "Run the invariant suite");
  validate->add_option("--tolerance-profile", profile)->check(CLI::IsMember({"default", "strict"}));
  validate->add_option("--kmax", o.k_max, "Ladder half width for the completeness check");
  validate->add_option("--nmax", o.n_max, "Photon cutoff for the completeness check");

  PhysicalParams pp;
  auto* phase = app.add_subcommand("phase", "Print the propagation phase for physical parameters");
  phase->add_option("--ke", pp.kinetic_energy_ev, "Electron kinetic energy [eV]")->required();
  phase->add_option("--photon", pp.photon_energy_ev, "Photon energy [eV]")->required();
  phase->add_option("--z", pp.z_m, "Cavity separation [m]")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*run) {
      auto c = load_config(config_path);
      apply(c, o);
      run_one(c);
    } else if (*sweep) {
      auto c = load_config(config_path);
      apply(c, o);
      std::vector<SweepAxis> parsed;
      for (const auto& a : axes) parsed.push_back(parse_axis(a));
      const auto summary = run_sweep(c, parsed, c.output, resolve_workers(workers));
      int worst = 0;
      for (const auto& cell : summary.cells) {
        if (cell.exit_code) std::cerr << cell.directory << ": " << cell.status << "\n";
        worst = std::max(worst, cell.exit_code);
      }
      std::cout << summary.cells.size() << " cells written to " << c.output << "\n";
      return worst;
    } else if (*fig) {
      run_figure(figure, large_scale, o);
    } else if (*validate) {
      return run_validate(profile, o.k_max, o.n_max);
    } else if (*phase) {
      std::printf("%.17g\n", dispersion_phase(pp));
    }
  } catch (const TruncationError& e) {
    std::cerr << "truncation: " << e.what() << "\n";
    if (e.suggested_n_max()) std::cerr << "  try --nmax " << *e.suggested_n_max() << "\n";
    if (e.suggested_k_max()) std::cerr << "  try --kmax " << *e.suggested_k_max() << "\n";
    return 3;
  } catch (const ConfigError& e) {
    std::cerr << "config: " << e.what() << "\n";
    return 2;
  } catch (const ArgumentError& e) {
    std::cerr << "argument: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
