#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "pinem/analytics.hpp"
#include "pinem/experiments.hpp"

using namespace pinem;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("pinem_test_" + name);
  fs::remove_all(p);
  return p;
}

ExperimentConfig small_two_cavity() {
  auto c = default_config(Scenario::kCustom);
  c.g = 0.15;
  c.phi = 0.8;
  c.cavity1 = {CavityDescriptor::Kind::kCoherent, 0, 0.6, 0.3};
  c.cavity2 = {CavityDescriptor::Kind::kFock, 1, 0.0, 0.0};
  c.electrons = 3;
  return c;
}

}  // namespace

TEST_CASE("config parsing") {
  const std::string text = R"({
    "scenario": "custom",
    "g_Q": {"re": 0.2, "im": -0.05},
    "phi": {"kinetic_energy_ev": 200000, "photon_energy_ev": 1.5, "z_m": 0.001},
    "cavity1": {"state": "coherent", "alpha": 1.5, "phase": 0.4},
    "cavity2": {"state": "fock", "n": 2},
    "electron": {"type": "comb", "peaks": 5, "phases": [0, 0.1, 0.2, 0.3, 0.4]},
    "electrons": 7,
    "n_max": {"cavity1": 12, "cavity2": 9},
    "k_max": 30,
    "output": "out/x",
    "criteria": false
  })";
  const auto c = parse_config(text);
  CHECK(c.g == cplx(0.2, -0.05));
  REQUIRE(c.physical);
  CHECK(c.cavity1.kind == CavityDescriptor::Kind::kCoherent);
  CHECK(c.cavity2.n == 2);
  CHECK(c.electron.peaks == 5);
  CHECK(*c.n_max1 == 12);
  CHECK(*c.n_max2 == 9);
  CHECK_FALSE(c.criteria);
  CHECK(parse_config(to_json(c).dump()) == c);

  for (auto s : {Scenario::kFig2MutualInfo, Scenario::kFig3Transfer, Scenario::kFig4PostselectMap,
                 Scenario::kFig5Hbt}) {
    const auto d = default_config(s);
    CHECK(parse_config(to_json(d).dump()) == d);
  }

  auto error_of = [](const std::string& t) {
    try {
      parse_config(t);
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(error_of(R"({"scenario": "custom", "cavity1": {"state": "fock", "n": 1, "alpha": 2}})")
            .find("cavity1.alpha") != std::string::npos);
  CHECK(error_of(R"({"scenario": "custom", "electons": 3})").find("electons") != std::string::npos);
  CHECK(error_of(R"({"scenario": "custom", "g_Q": 9.0})").find("g_Q") != std::string::npos);
  CHECK(error_of(R"({"scenario": "custom", "electrons": -1})").find("electrons") != std::string::npos);
  CHECK(error_of("{\n  \"scenario\": \"custom\",\n  \"electrons\": }").find("line 3") != std::string::npos);
  CHECK(error_of(R"({"scenario": "fig9"})").find("scenario") != std::string::npos);
}

TEST_CASE("hash ignores the output directory") {
  auto a = small_two_cavity();
  auto b = a;
  b.output = "elsewhere";
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a).size() == 16);
  b.electrons = 4;
  CHECK(config_hash(a) != config_hash(b));
}

TEST_CASE("runs are deterministic and byte-identical on disk") {
  const auto c = small_two_cavity();
  const auto d1 = scratch("det1"), d2 = scratch("det2");
  write_result(run_experiment(c), d1);
  write_result(run_experiment(c), d2);
  CHECK(slurp(d1 / "series.csv") == slurp(d2 / "series.csv"));
  const auto meta = nlohmann::json::parse(slurp(d1 / "meta.json"));
  CHECK(meta["config_hash"] == config_hash(c));
  CHECK(meta["method"] == "kraus");
  CHECK(meta["loss_table"].size() == 3);
}

TEST_CASE("zero electrons reports only the initial state") {
  auto c = small_two_cavity();
  c.electrons = 0;
  const auto r = run_experiment(c);
  REQUIRE(r.steps.size() == 1);
  CHECK(r.steps[0].mean_n1 == doctest::Approx(0.36).epsilon(1e-10));
  CHECK(r.steps[0].mean_n2 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(*r.steps[0].mutual_information < 1e-9);
  CHECK_FALSE(r.first_pass_energy_variance);
}

TEST_CASE("kraus run bookkeeping") {
  const auto r = run_experiment(small_two_cavity());
  REQUIRE(r.steps.size() == 4);
  for (const auto& s : r.steps) {
    CHECK(s.trace == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(s.edge_population < kEdgePopulationBound);
  }
  // Every electron reaches the first cavity unshaped and adds |g|^2 there.
  CHECK(r.steps[3].mean_n1 - r.steps[0].mean_n1 == doctest::Approx(3 * 0.0225).epsilon(1e-8));
  REQUIRE(r.first_pass_energy_variance);
  CHECK(*r.first_pass_energy_variance > 0.0);

  auto tight = small_two_cavity();
  tight.n_max1 = 3;
  CHECK_THROWS_AS(run_experiment(tight), TruncationError);
}

TEST_CASE("empty-cavity cross correlation thermalizes") {
  auto c = default_config(Scenario::kFig5Hbt);
  c.electrons = 30;
  const auto r = run_experiment(c);
  CHECK(r.method == "collective");
  REQUIRE(r.steps.size() == 31);
  CHECK_FALSE(r.steps[0].g2);
  for (int n = 1; n <= 30; ++n) CHECK(std::abs(*r.steps[n].g2 - (2.0 * n - 1.0) / n) < 1e-4);
}

TEST_CASE("post-selection map") {
  auto c = default_config(Scenario::kFig4PostselectMap);
  c.map = {0.1, 0.7, 0.3, 0, 1, 1};
  const auto r = run_experiment(c);
  REQUIRE(r.map.size() == 6);
  for (const auto& cell : r.map) {
    if (cell.n == 0) {
      CHECK(cell.probability == doctest::Approx(bell_probability(cell.g).exact).epsilon(1e-10));
      REQUIRE(cell.entanglement_entropy);
      CHECK(*cell.entanglement_entropy == doctest::Approx(1.0).epsilon(1e-8));
    }
    CHECK(cell.probability > 0.0);
  }
  const auto dir = scratch("map");
  write_result(r, dir);
  CHECK(fs::exists(dir / "map.csv"));
}

TEST_CASE("sweeps") {
  SUBCASE("axis parsing") {
    const auto a = parse_axis("g_Q=0.1:0.3:0.1");
    CHECK(a.values().size() == 3);
    CHECK_THROWS_AS(parse_axis("g_Q=0.1:0.3"), ConfigError);
    CHECK_THROWS_AS(parse_axis("bogus=0:1:1"), ConfigError);
    CHECK_THROWS_AS(parse_axis("g_Q=0.3:0.1:0.1"), ConfigError);
  }
  SUBCASE("grid bound") {
    const auto dir = scratch("big");
    CHECK_THROWS_AS(run_sweep(small_two_cavity(), {parse_axis("phi=0:1:0.001"), parse_axis("g_Q=0.01:0.2:0.01")},
                              dir, 1),
                    ConfigError);
  }
  SUBCASE("one cell equals a run") {
    const auto base = small_two_cavity();
    const auto dir = scratch("one");
    const auto s = run_sweep(base, {parse_axis("g_Q=0.15:0.15:1")}, dir, 2);
    REQUIRE(s.cells.size() == 1);
    CHECK(s.cells[0].status == "ok");
    const auto single = scratch("single");
    auto same = base;
    same.g = 0.15;
    write_result(run_experiment(same), single);
    CHECK(slurp(dir / "cell_00000" / "series.csv") == slurp(single / "series.csv"));
    CHECK(fs::exists(dir / "manifest.json"));
    CHECK(fs::exists(dir / "summary.csv"));
  }
  SUBCASE("without propagation the second cavity ignores the first one's phase") {
    auto base = small_two_cavity();
    base.phi = 0.0;
    base.cavity2 = {};
    base.criteria = false;
    const auto s = run_sweep(base, {parse_axis("cavity1.phase=0:3:1.5")}, scratch("phase"), 2);
    REQUIRE(s.cells.size() == 3);
    for (const auto& cell : s.cells) {
      REQUIRE(cell.final_step);
      CHECK(std::abs(cell.final_step->mean_n2 - s.cells[0].final_step->mean_n2) < 1e-12);
    }
  }
  SUBCASE("relative phase lowers g2 below one") {
    auto base = default_config(Scenario::kFig5Hbt);
    base.cavity1 = {CavityDescriptor::Kind::kCoherent, 0, 1.0, 0.0};
    base.cavity2 = {CavityDescriptor::Kind::kCoherent, 0, 1.0, 0.0};
    base.electrons = 3;
    base.g = 0.3;
    const auto s = run_sweep(base, {parse_axis("cavity2.phase=0:6.2:0.2")}, scratch("b3"), 1);
    double lowest = 10.0;
    for (const auto& cell : s.cells) lowest = std::min(lowest, *cell.final_step->g2);
    CHECK(lowest < 1.0);
  }
}

TEST_CASE("invariant suite") {
  const auto results = run_validation();
  CHECK(results.size() >= 9);
  for (const auto& r : results) {
    INFO(r.name << " residual " << r.residual << " tolerance " << r.tolerance);
    CHECK(r.passed);
  }
  ValidateOptions narrow;
  narrow.k_max = 6;
  const auto bad = run_validation(narrow);
  CHECK_FALSE(bad[0].passed);
  CHECK(bad[0].note.find("suggested k_max") != std::string::npos);
}
