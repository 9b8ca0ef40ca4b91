#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "biloc/classical.hpp"
#include "biloc/coincidence.hpp"
#include "biloc/config.hpp"
#include "biloc/event_sim.hpp"
#include "biloc/io.hpp"
#include "biloc/quantum.hpp"
#include "biloc/sync.hpp"

// Subcommand implementations shared by the CLI binary and the tests. Each
// command is a pure pipeline over files; exit codes are mapped by the
// binary (0 success, 2 config error, 3 analysis failure).
namespace biloc {

class AnalysisError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// analytic

struct AnalyticReport {
  FunctionalResult peripheral;
  FunctionalResult literal;
  double S_AB = 0;
  double S_BC = 0;
};

inline AnalyticReport cmd_analytic(const ExperimentConfig& cfg) {
  Behavior beh = born_behavior(cfg.net.source1.state, cfg.net.source2.state,
                               cfg.net.plan);
  AnalyticReport rep;
  rep.peripheral = biloc_functional(beh, Convention::peripheral_sum);
  rep.literal = biloc_functional(beh, Convention::literal);
  rep.S_AB = chsh(born_pair(cfg.net.source1.state, cfg.net.plan.a_settings,
                            cfg.net.plan.b_arm_a_settings));
  rep.S_BC = chsh(born_pair(cfg.net.source2.state,
                            cfg.net.plan.b_arm_c_settings,
                            cfg.net.plan.c_settings));
  return rep;
}

inline void print_analytic(const AnalyticReport& rep, std::ostream& os) {
  os << "peripheral-sum: I1=" << rep.peripheral.I1
     << " I2=" << rep.peripheral.I2 << " B=" << rep.peripheral.B << '\n'
     << "literal:        I1=" << rep.literal.I1 << " I2=" << rep.literal.I2
     << " B=" << rep.literal.B << '\n'
     << "S_AB=" << rep.S_AB << " S_BC=" << rep.S_BC << '\n';
}

// ---------------------------------------------------------------------------
// oracle

struct OracleReport {
  BoundSearchResult bilocal_bound;
  double local_bound = 0;
  int resolution = 0;
};

inline OracleReport cmd_oracle(int card, int resolution,
                               const std::optional<std::string>& out_dir) {
  OracleReport rep;
  rep.bilocal_bound = max_biloc_bilocal(card, card);
  rep.local_bound = max_I1_plus_I2_local(card);
  rep.resolution = resolution;
  if (out_dir) {
    std::filesystem::create_directories(*out_dir);
    std::ofstream out(std::filesystem::path(*out_dir) / "region.csv");
    out << "I1,I2,bilocal,local\n";
    for (const RegionPoint& p : region_scan(resolution))
      out << p.I1 << ',' << p.I2 << ',' << (p.bilocal ? 1 : 0) << ','
          << (p.local ? 1 : 0) << '\n';
  }
  return rep;
}

// ---------------------------------------------------------------------------
// simulate

inline RunManifest cmd_simulate(const ExperimentConfig& cfg,
                                const std::string& out_dir) {
  RunOutput run = simulate_run(cfg.net, cfg.schedule, cfg.duration_s,
                               cfg.seed);
  return write_run(out_dir, cfg, run);
}

// ---------------------------------------------------------------------------
// analyze

struct LinkSync {
  SyncSolution fine;
  double drift_estimate = 0;
};

struct AnalysisReport {
  std::vector<SweepPoint> sweep;
  EstimateWithError chsh_ab, chsh_bc;
  double B = 0, B_err = 0, I1 = 0, I2 = 0;
  std::int64_t optimal_window = 0;  // ticks
  bool spacelike = false;
  LinkSync sync_ab, sync_bc;
  std::size_t n_twofold_ab = 0, n_twofold_bc = 0;
};

struct AnalyzeOverrides {
  std::optional<std::vector<double>> windows_ns;
  std::optional<int> n_blocks;
  std::optional<Convention> convention;
  bool force = false;
};

inline AnalysisReport analyze_run(const RunData& run,
                                  const AnalyzeOverrides& ov = {}) {
  const ExperimentConfig& cfg = run.config;
  const double tick_s = cfg.net.detectors[0].tick_s;
  auto to_ticks = [tick_s](double seconds) {
    return static_cast<std::int64_t>(std::llround(seconds / tick_s));
  };

  // 1. Drift correction against each building's 10 kHz reference.
  DriftResult corr_a =
      drift_correct(run.streams[0], run.ref10k_marconi, tick_s);
  DriftResult corr_ba =
      drift_correct(run.streams[1], run.ref10k_fermi, tick_s);
  DriftResult corr_bc =
      drift_correct(run.streams[2], run.ref10k_fermi, tick_s);
  DriftResult corr_c = drift_correct(run.streams[3], run.ref10k_fermi, tick_s);
  auto pulses_m =
      drift_correct_edges(run.pulse1_marconi.edges, run.ref10k_marconi,
                          tick_s);
  auto pulses_f =
      drift_correct_edges(run.pulse1_fermi.edges, run.ref10k_fermi, tick_s);

  AnalysisReport rep;
  rep.sync_ab.drift_estimate = corr_a.drift_estimate;
  rep.sync_bc.drift_estimate = corr_bc.drift_estimate;

  // 2. Coarse offsets: GPS pulses plus the nominal propagation difference
  // from the config geometry.
  CoarseOffset coarse_ab = coarse_offset(
      pulses_m, pulses_f,
      cfg.net.clock_marconi.gps_coarse_sigma_s / tick_s);
  std::int64_t coarse_ab_total =
      static_cast<std::int64_t>(std::llround(coarse_ab.offset_ticks)) +
      to_ticks(cfg.net.ch_to_ba.delay_s - cfg.net.ch_to_a.delay_s);
  std::int64_t coarse_bc_total =
      to_ticks(cfg.net.ch_to_bc.delay_s - cfg.net.ch_to_c.delay_s);

  // 3. Fine offsets from the coincidence-difference histogram.
  const std::int64_t halfwidth = to_ticks(40e-9);
  rep.sync_ab.fine = fine_offset(corr_a.corrected, corr_ba.corrected,
                                 coarse_ab_total, halfwidth);
  rep.sync_bc.fine = fine_offset(corr_c.corrected, corr_bc.corrected,
                                 coarse_bc_total, halfwidth);
  if ((rep.sync_ab.fine.low_confidence || rep.sync_bc.fine.low_confidence) &&
      !ov.force)
    throw AnalysisError(
        "synchronization failed: no confident coincidence peak "
        "(rerun with --force to proceed anyway)");

  // 4. Shift the peripheral streams into the central (Fermi) time base.
  auto aligned_a = apply_offset(corr_a.corrected,
                                -rep.sync_ab.fine.offset_ticks);
  auto aligned_c = apply_offset(corr_c.corrected,
                                -rep.sync_bc.fine.offset_ticks);
  for (auto* s : {&aligned_a, &aligned_c})
    std::sort(s->begin(), s->end(),
              [](const DetectionRecord& x, const DetectionRecord& y) {
                return x.tick < y.tick;
              });

  // 5. Two-fold matching per source.
  const std::int64_t twofold_w = to_ticks(cfg.analysis.twofold_window_ns * 1e-9);
  auto ab = twofold_match(aligned_a, corr_ba.corrected,
                          TwoFoldEvent::Source::AB, twofold_w);
  auto bc = twofold_match(aligned_c, corr_bc.corrected,
                          TwoFoldEvent::Source::BC, twofold_w);
  rep.n_twofold_ab = ab.size();
  rep.n_twofold_bc = bc.size();

  // 6. Window sweep and summary at the sigma-distance-optimal window.
  std::vector<double> windows_ns =
      ov.windows_ns.value_or(cfg.analysis.fourfold_windows_ns);
  int n_blocks = ov.n_blocks.value_or(cfg.analysis.n_blocks);
  Convention conv = ov.convention.value_or(cfg.analysis.convention);
  std::vector<std::int64_t> windows;
  for (double w : windows_ns) windows.push_back(to_ticks(w * 1e-9));
  rep.sweep = window_sweep(ab, bc, windows, n_blocks, conv);

  const SweepPoint* best = nullptr;
  for (const SweepPoint& pt : rep.sweep)
    if (!best || pt.sigma_distance > best->sigma_distance) best = &pt;
  if (!best || best->n_fourfolds == 0)
    throw AnalysisError("no four-fold events at any window");
  rep.optimal_window = best->window;
  rep.B = best->estimate.value;
  rep.B_err = best->estimate.std_error;
  auto four = fourfold_filter(ab, bc, best->window);
  BehaviorEstimate est = estimate_behavior(four);
  if (est.complete) {
    FunctionalResult f = biloc_functional(est.behavior, conv);
    rep.I1 = f.I1;
    rep.I2 = f.I2;
  }
  rep.spacelike = spacelike_check(static_cast<double>(best->window) * tick_s,
                                  cfg.link_distance_m);

  // 7. CHSH per link from the two-folds.
  rep.chsh_ab = chsh_from_twofolds(ab, n_blocks);
  rep.chsh_bc = chsh_from_twofolds(bc, n_blocks);
  return rep;
}

inline void write_analysis(const std::filesystem::path& out_dir,
                           const AnalysisReport& rep, double tick_s) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  {
    std::ofstream out(out_dir / "sweep.csv");
    out << "window_ns,B,std_error,sigma_distance,n_fourfolds\n";
    for (const SweepPoint& pt : rep.sweep)
      out << static_cast<double>(pt.window) * tick_s * 1e9 << ','
          << pt.estimate.value << ',' << pt.estimate.std_error << ','
          << pt.sigma_distance << ',' << pt.n_fourfolds << '\n';
  }
  {
    std::ofstream out(out_dir / "chsh.csv");
    out << "link,S,std_error\n";
    out << "AB," << rep.chsh_ab.value << ',' << rep.chsh_ab.std_error << '\n';
    out << "BC," << rep.chsh_bc.value << ',' << rep.chsh_bc.std_error << '\n';
  }
  {
    nlohmann::json j;
    j["B"] = rep.B;
    j["B_std_error"] = rep.B_err;
    j["I1"] = rep.I1;
    j["I2"] = rep.I2;
    j["S_AB"] = rep.chsh_ab.value;
    j["S_BC"] = rep.chsh_bc.value;
    j["optimal_window_ns"] =
        static_cast<double>(rep.optimal_window) * tick_s * 1e9;
    j["spacelike"] = rep.spacelike;
    j["n_twofold_ab"] = rep.n_twofold_ab;
    j["n_twofold_bc"] = rep.n_twofold_bc;
    j["sync"] = {
        {"ab",
         {{"offset_ticks", rep.sync_ab.fine.offset_ticks},
          {"drift_correction", rep.sync_ab.drift_estimate},
          {"residual_ticks", rep.sync_ab.fine.residual_ticks},
          {"confidence", rep.sync_ab.fine.low_confidence ? "low" : "ok"}}},
        {"bc",
         {{"offset_ticks", rep.sync_bc.fine.offset_ticks},
          {"drift_correction", rep.sync_bc.drift_estimate},
          {"residual_ticks", rep.sync_bc.fine.residual_ticks},
          {"confidence", rep.sync_bc.fine.low_confidence ? "low" : "ok"}}}};
    std::ofstream out(out_dir / "summary.json");
    out << j.dump(2) << '\n';
  }
}

inline AnalysisReport cmd_analyze(const std::string& in_dir,
                                  const AnalyzeOverrides& ov = {}) {
  RunData run = read_run(in_dir);
  AnalysisReport rep = analyze_run(run, ov);
  write_analysis(in_dir, rep, run.config.net.detectors[0].tick_s);
  return rep;
}

// ---------------------------------------------------------------------------
// report: plot-ready CSVs from an analyzed run directory.

inline void cmd_report(const std::string& in_dir, int region_resolution = 101) {
  namespace fs = std::filesystem;
  fs::path dir(in_dir);
  if (!fs::exists(dir / "summary.json"))
    throw AnalysisError("no summary.json in " + in_dir +
                        "; run analyze first");
  nlohmann::json summary;
  {
    std::ifstream in(dir / "summary.json");
    in >> summary;
  }
  // B-vs-window curve with the classical and quantum bounds as columns.
  {
    std::ifstream in(dir / "sweep.csv");
    std::ofstream out(dir / "report_b_vs_window.csv");
    std::string line;
    std::getline(in, line);
    out << line << ",classical_bound,quantum_bound\n";
    while (std::getline(in, line))
      if (!line.empty()) out << line << ",1," << std::sqrt(2.0) << '\n';
  }
  // (I1, I2) region grid with the measured point appended.
  {
    std::ofstream out(dir / "report_region.csv");
    out << "I1,I2,bilocal,local,is_measured_point\n";
    for (const RegionPoint& p : region_scan(region_resolution))
      out << p.I1 << ',' << p.I2 << ',' << (p.bilocal ? 1 : 0) << ','
          << (p.local ? 1 : 0) << ",0\n";
    double i1 = summary["I1"].get<double>();
    double i2 = summary["I2"].get<double>();
    out << i1 << ',' << i2 << ',' << (bilocal_compatible(i1, i2) ? 1 : 0)
        << ',' << (local_compatible(i1, i2) ? 1 : 0) << ",1\n";
  }
}

}  // namespace biloc
