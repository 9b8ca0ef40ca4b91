// bilocnet: analytic predictions, classical bounds, network simulation and
// coincidence analysis for the three-node bilocal photonic network.

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "biloc/cli.hpp"

namespace {

constexpr int kExitConfigError = 2;
constexpr int kExitAnalysisError = 3;

biloc::ExperimentConfig load_or_default(const std::string& path) {
  if (path.empty()) return biloc::calibrated_config();
  return biloc::load_config(path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bilocal-network toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::string in_dir;

  auto* analytic = app.add_subcommand(
      "analytic", "Born-rule I1, I2, B and per-link CHSH for a config");
  analytic->add_option("--config", config_path, "experiment config JSON");

  int card = 4;
  int resolution = 101;
  std::optional<std::string> oracle_out;
  auto* oracle = app.add_subcommand(
      "oracle", "classical bounds by enumeration and the (I1,I2) region");
  oracle->add_option("--card", card, "hidden-variable cardinality (<= 4)");
  oracle->add_option("--resolution", resolution, "region grid resolution");
  std::string oracle_out_str;
  oracle->add_option("--out", oracle_out_str, "directory for region.csv");

  std::optional<std::uint64_t> seed_override;
  std::uint64_t seed_value = 0;
  auto* simulate =
      app.add_subcommand("simulate", "run the network simulation to files");
  simulate->add_option("--config", config_path, "experiment config JSON");
  simulate->add_option("--out", out_dir, "output directory")->required();
  auto* seed_opt = simulate->add_option("--seed", seed_value, "seed override");

  std::vector<double> windows_ns;
  int n_blocks = 0;
  std::string convention;
  bool force = false;
  auto* analyze =
      app.add_subcommand("analyze", "sync + coincidence pipeline on a run");
  analyze->add_option("--in", in_dir, "run directory")->required();
  analyze->add_option("--windows", windows_ns,
                      "four-fold windows in ns (overrides config)");
  analyze->add_option("--blocks", n_blocks, "number of error blocks");
  analyze->add_option("--convention", convention, "peripheral or literal");
  analyze->add_flag("--force", force, "proceed past low-confidence sync");

  auto* report =
      app.add_subcommand("report", "plot-ready CSVs from an analyzed run");
  report->add_option("--in", in_dir, "analyzed run directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (analytic->parsed()) {
      biloc::print_analytic(
          biloc::cmd_analytic(load_or_default(config_path)), std::cout);
    } else if (oracle->parsed()) {
      if (!oracle_out_str.empty()) oracle_out = oracle_out_str;
      biloc::OracleReport rep =
          biloc::cmd_oracle(card, resolution, oracle_out);
      std::cout << "max_biloc_bilocal(card=" << card
                << ") = " << rep.bilocal_bound.value
                << (rep.bilocal_bound.converged ? "" : " [budget exhausted]")
                << '\n'
                << "max_I1_plus_I2_local = " << rep.local_bound << '\n';
      if (!rep.bilocal_bound.converged) return kExitAnalysisError;
    } else if (simulate->parsed()) {
      biloc::ExperimentConfig cfg = load_or_default(config_path);
      if (seed_opt->count()) cfg.seed = seed_value;
      (void)seed_override;
      biloc::RunManifest m = biloc::cmd_simulate(cfg, out_dir);
      std::cout << "wrote run " << out_dir << " (config " << m.config_hash
                << ", seed " << m.seed << ")\n";
    } else if (analyze->parsed()) {
      biloc::AnalyzeOverrides ov;
      if (!windows_ns.empty()) ov.windows_ns = windows_ns;
      if (n_blocks > 0) ov.n_blocks = n_blocks;
      if (!convention.empty()) {
        if (convention == "peripheral")
          ov.convention = biloc::Convention::peripheral_sum;
        else if (convention == "literal")
          ov.convention = biloc::Convention::literal;
        else
          throw biloc::ConfigError("--convention must be peripheral|literal");
      }
      ov.force = force;
      biloc::AnalysisReport rep = biloc::cmd_analyze(in_dir, ov);
      std::cout << "B = " << rep.B << " +- " << rep.B_err
                << " (I1=" << rep.I1 << ", I2=" << rep.I2 << ")\n"
                << "S_AB = " << rep.chsh_ab.value << " +- "
                << rep.chsh_ab.std_error << ", S_BC = " << rep.chsh_bc.value
                << " +- " << rep.chsh_bc.std_error << '\n'
                << "optimal window = " << rep.optimal_window
                << " ticks, spacelike = " << (rep.spacelike ? "yes" : "no")
                << '\n';
    } else if (report->parsed()) {
      biloc::cmd_report(in_dir);
      std::cout << "wrote report CSVs in " << in_dir << '\n';
    }
  } catch (const biloc::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfigError;
  } catch (const biloc::AnalysisError& e) {
    std::cerr << "analysis error: " << e.what() << '\n';
    return kExitAnalysisError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitAnalysisError;
  }
  return 0;
}
