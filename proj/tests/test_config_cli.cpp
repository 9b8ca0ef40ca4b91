#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "biloc/cli.hpp"
#include "biloc/config.hpp"
#include "biloc/io.hpp"

using namespace biloc;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("bilocnet_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

int run_cli(const std::string& args) {
  std::string cmd = std::string(BILOCNET_BIN) + " " + args + " >/dev/null 2>&1";
  int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

// Small, fast run for file-level tests.
ExperimentConfig small_config() {
  ExperimentConfig c = calibrated_config();
  c.net.source1 = {SourceModel::Kind::cw, 0, 500, singlet_state()};
  c.net.source2 = {SourceModel::Kind::cw, 0, 400, singlet_state()};
  c.duration_s = 5.0;
  c.schedule = SettingsSchedule::all_triples(0.25);
  c.seed = 7;
  return c;
}

}  // namespace

TEST_CASE("config round-trip is the identity") {
  for (ExperimentConfig cfg : {calibrated_config(), ideal_config()}) {
    nlohmann::json j1 = dump_config(cfg);
    ExperimentConfig re = parse_config(j1);
    nlohmann::json j2 = dump_config(re);
    REQUIRE(j1 == j2);
    REQUIRE(config_hash(cfg) == config_hash(re));
  }

  SECTION("HWP-angle observables survive the round trip") {
    ExperimentConfig cfg = calibrated_config();
    cfg.net.plan.a_settings[1] = hwp_to_observable(10.0);
    ExperimentConfig re = parse_config(dump_config(cfg));
    CHECK((re.net.plan.a_settings[1].bloch -
           cfg.net.plan.a_settings[1].bloch)
              .norm() < 1e-12);
    CHECK(dump_config(cfg) == dump_config(re));
  }
}

TEST_CASE("config validation failures carry diagnostics") {
  nlohmann::json good = dump_config(calibrated_config());

  SECTION("missing section") {
    nlohmann::json j = good;
    j.erase("sources");
    CHECK_THROWS_AS(parse_config(j), ConfigError);
  }
  SECTION("unknown observable name") {
    nlohmann::json j = good;
    j["plan"]["a"][0] = "sigma_y";
    CHECK_THROWS_MATCHES(parse_config(j), ConfigError,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("sigma_y")));
  }
  SECTION("bad convention") {
    nlohmann::json j = good;
    j["analysis"]["convention"] = "sideways";
    CHECK_THROWS_AS(parse_config(j), ConfigError);
  }
  SECTION("bad state type") {
    nlohmann::json j = good;
    j["sources"]["source1"]["state"]["type"] = "ghz";
    CHECK_THROWS_AS(parse_config(j), ConfigError);
  }
  SECTION("semantic violations surface as ConfigError") {
    nlohmann::json j = good;
    j["channels"]["source1_to_a"]["transmission"] = 0.0;
    CHECK_THROWS_AS(parse_config(j), ConfigError);
    j = good;
    j["sources"]["source1"]["pair_rate_hz"] = 400e6;  // > rep rate
    CHECK_THROWS_AS(parse_config(j), ConfigError);
  }
  SECTION("missing file") {
    CHECK_THROWS_AS(load_config("/nonexistent/nope.json"), ConfigError);
  }
}

TEST_CASE("analytic command values") {
  AnalyticReport ideal = cmd_analytic(ideal_config());
  CHECK(std::abs(ideal.peripheral.B - std::sqrt(2.0)) < 1e-9);
  CHECK(std::abs(ideal.literal.B - 1.0) < 1e-9);
  CHECK(std::abs(ideal.S_AB - 2.0 * std::sqrt(2.0)) < 1e-9);
  CHECK(std::abs(ideal.S_BC - 2.0 * std::sqrt(2.0)) < 1e-9);

  AnalyticReport cal = cmd_analytic(calibrated_config());
  double v1 = 2.484 / (2.0 * std::sqrt(2.0));
  double v2 = 2.699 / (2.0 * std::sqrt(2.0));
  CHECK(std::abs(cal.S_AB - 2.484) < 1e-9);
  CHECK(std::abs(cal.S_BC - 2.699) < 1e-9);
  CHECK(cal.peripheral.B ==
        Catch::Approx(std::sqrt(2.0) * std::sqrt(v1 * v2)).margin(1e-9));
  CHECK(cal.peripheral.B == Catch::Approx(1.2947).margin(1e-4));
}

TEST_CASE("oracle command") {
  fs::path dir = fresh_dir("oracle");
  OracleReport rep = cmd_oracle(2, 11, dir.string());
  CHECK(rep.bilocal_bound.converged);
  CHECK(rep.bilocal_bound.value == Catch::Approx(1.0).margin(1e-6));
  CHECK(rep.local_bound == Catch::Approx(1.0).margin(1e-9));

  std::string csv = slurp(dir / "region.csv");
  long rows = std::count(csv.begin(), csv.end(), '\n');
  CHECK(rows == 11 * 11 + 1);  // grid + header
}

TEST_CASE("simulate command writes reproducible runs") {
  ExperimentConfig cfg = small_config();

  fs::path d1 = fresh_dir("sim1"), d2 = fresh_dir("sim2");
  RunManifest m1 = cmd_simulate(cfg, d1.string());
  RunManifest m2 = cmd_simulate(cfg, d2.string());
  CHECK(m1.config_hash == m2.config_hash);
  for (const auto& [name, n] : m1.files) {
    CAPTURE(name);
    REQUIRE(slurp(d1 / name) == slurp(d2 / name));
    if (name.rfind("stream_", 0) == 0) CHECK(n > 0);
  }

  SECTION("round-trips through the CSV layer") {
    RunData rd = read_run(d1.string());
    RunOutput direct = simulate_run(cfg.net, cfg.schedule, cfg.duration_s,
                                    cfg.seed);
    for (int i = 0; i < 4; ++i) {
      REQUIRE(rd.streams[i].size() == direct.streams[i].size());
      for (std::size_t k = 0; k < rd.streams[i].size(); ++k) {
        REQUIRE(rd.streams[i][k].tick == direct.streams[i][k].tick);
        REQUIRE(rd.streams[i][k].detector == direct.streams[i][k].detector);
      }
    }
    REQUIRE(rd.ref10k_fermi.edges == direct.ref10k_fermi.edges);
    REQUIRE(rd.pulse1_marconi.edges == direct.pulse1_marconi.edges);
  }

  SECTION("different seed changes the streams") {
    cfg.seed = 8;
    fs::path d3 = fresh_dir("sim3");
    cmd_simulate(cfg, d3.string());
    CHECK(slurp(d1 / "stream_A.csv") != slurp(d3 / "stream_A.csv"));
  }

  SECTION("zero duration gives empty streams and a valid manifest") {
    cfg.duration_s = 0;
    fs::path d0 = fresh_dir("sim0");
    RunManifest m0 = cmd_simulate(cfg, d0.string());
    for (const auto& [name, n] : m0.files)
      if (name.rfind("stream_", 0) == 0) CHECK(n == 0);
    CHECK(fs::exists(d0 / "manifest.json"));
  }
}

TEST_CASE("analyze pipeline end to end") {
  // One-minute run at the calibrated rates; fast schedule so every error
  // block covers all eight setting triples.
  ExperimentConfig cfg = calibrated_config();
  cfg.duration_s = 60.0;
  cfg.schedule = SettingsSchedule::all_triples(0.25);
  cfg.seed = 1234;

  fs::path dir = fresh_dir("analyze");
  cmd_simulate(cfg, dir.string());
  AnalysisReport rep = cmd_analyze(dir.string());

  SECTION("sync recovers the clock geometry") {
    const double tick_s = cfg.net.detectors[0].tick_s;
    CHECK(std::abs(rep.sync_ab.drift_estimate -
                   cfg.net.clock_marconi.drift) < 1e-8);
    CHECK(std::abs(rep.sync_bc.drift_estimate - cfg.net.clock_fermi.drift) <
          1e-8);
    double expected_ab =
        (cfg.net.ch_to_ba.delay_s - cfg.net.ch_to_a.delay_s +
         cfg.net.clock_marconi.gps_phase_s -
         cfg.net.clock_fermi.gps_phase_s) / tick_s;
    CHECK(std::abs(static_cast<double>(rep.sync_ab.fine.offset_ticks) -
                   expected_ab) <= 2.0);
    CHECK_FALSE(rep.sync_ab.fine.low_confidence);
    CHECK_FALSE(rep.sync_bc.fine.low_confidence);
  }

  SECTION("estimates agree with the analytic prediction") {
    AnalyticReport truth = cmd_analytic(cfg);
    REQUIRE(rep.B_err > 0);
    CHECK(std::abs(rep.B - truth.peripheral.B) <= 4.0 * rep.B_err);
    CHECK(std::abs(rep.chsh_ab.value - truth.S_AB) <=
          4.0 * rep.chsh_ab.std_error);
    CHECK(std::abs(rep.chsh_bc.value - truth.S_BC) <=
          4.0 * rep.chsh_bc.std_error);
    CHECK(rep.optimal_window > 0);
    for (std::size_t i = 1; i < rep.sweep.size(); ++i)
      CHECK(rep.sweep[i].n_fourfolds >= rep.sweep[i - 1].n_fourfolds);
  }

  SECTION("summary and CSV artifacts are written") {
    REQUIRE(fs::exists(dir / "summary.json"));
    nlohmann::json summary;
    std::ifstream in(dir / "summary.json");
    in >> summary;
    CHECK(summary["B"].get<double>() == Catch::Approx(rep.B));
    CHECK(summary["sync"]["ab"]["confidence"] == "ok");
    CHECK(fs::exists(dir / "sweep.csv"));
    CHECK(fs::exists(dir / "chsh.csv"));

    cmd_report(dir.string(), 31);
    CHECK(fs::exists(dir / "report_b_vs_window.csv"));
    std::string region = slurp(dir / "report_region.csv");
    CHECK(std::count(region.begin(), region.end(), '\n') == 31 * 31 + 2);
  }
}

TEST_CASE("analyze aborts on designed failure paths") {
  // Dark counts only: no coincidence peak to lock onto.
  ExperimentConfig cfg = small_config();
  cfg.net.source1.pair_rate_hz = 1e-9;
  cfg.net.source2.pair_rate_hz = 1e-9;
  for (auto& d : cfg.net.detectors) d.dark_rate_hz = 500;
  cfg.duration_s = 10.0;

  fs::path dir = fresh_dir("darkonly");
  cmd_simulate(cfg, dir.string());
  CHECK_THROWS_AS(cmd_analyze(dir.string()), AnalysisError);

  AnalyzeOverrides force;
  force.force = true;
  CHECK_THROWS_AS(cmd_analyze(dir.string(), force), AnalysisError);

  SECTION("report refuses a directory without a summary") {
    fs::path empty = fresh_dir("nosummary");
    CHECK_THROWS_AS(cmd_report(empty.string()), AnalysisError);
  }
}

TEST_CASE("binary exit codes") {
  fs::path dir = fresh_dir("exitcodes");

  SECTION("success paths return 0") {
    CHECK(run_cli("oracle --card 2 --resolution 11") == 0);
    CHECK(run_cli("analytic") == 0);
  }

  SECTION("config errors return 2") {
    fs::path bad = dir / "bad.json";
    std::ofstream(bad) << "{\"sources\": {}}";
    CHECK(run_cli("analytic --config " + bad.string()) == 2);
    fs::path garbled = dir / "garbled.json";
    std::ofstream(garbled) << "not json";
    CHECK(run_cli("analytic --config " + garbled.string()) == 2);
  }

  SECTION("missing run config returns 2") {
    CHECK(run_cli("analyze --in " + (dir / "missing_run").string()) == 2);
  }

  SECTION("analysis failures return 3") {
    // run directory with a config but a stream file missing
    ExperimentConfig cfg = small_config();
    cfg.duration_s = 1.0;
    fs::path broken = fresh_dir("broken_run");
    cmd_simulate(cfg, broken.string());
    fs::remove(broken / "stream_C.csv");
    CHECK(run_cli("analyze --in " + broken.string()) == 3);
    CHECK(run_cli("report --in " + dir.string()) == 3);
  }
}
