#pragma once

#include <array>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "biloc/coincidence.hpp"
#include "biloc/event_sim.hpp"
#include "biloc/quantum.hpp"

// Experiment configuration: a single JSON file with explicit units in key
// names (delay_ns, rate_hz, ...). No implicit unit inference.
namespace biloc {

struct AnalysisParams {
  double twofold_window_ns = 1.0;
  std::vector<double> fourfold_windows_ns;  // default: Fig.-style log sweep
  int n_blocks = 25;
  Convention convention = Convention::peripheral_sum;
};

struct ExperimentConfig {
  NetworkConfig net;
  SettingsSchedule schedule = SettingsSchedule::all_triples();
  double duration_s = 60.0;
  std::uint64_t seed = 1;
  AnalysisParams analysis;
  double link_distance_m = 270.0;  // for the space-like check
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace cfg_detail {

using nlohmann::json;

inline DichotomicObservable parse_observable(const json& j,
                                             const std::string& where) {
  if (j.is_string()) {
    std::string s = j.get<std::string>();
    if (s == "sigma_z") return sigma_z_obs();
    if (s == "sigma_x") return sigma_x_obs();
    if (s == "diag_plus") return diag_plus_obs();
    if (s == "diag_minus") return diag_minus_obs();
    throw ConfigError(where + ": unknown observable name '" + s + "'");
  }
  if (j.is_number()) return hwp_to_observable(j.get<double>());
  if (j.is_object() && j.contains("hwp_deg"))
    return hwp_to_observable(j.at("hwp_deg").get<double>());
  throw ConfigError(where + ": observable must be a name or HWP degrees");
}

inline json dump_observable(const DichotomicObservable& o) {
  for (const char* name :
       {"sigma_z", "sigma_x", "diag_plus", "diag_minus"}) {
    DichotomicObservable ref =
        std::string(name) == "sigma_z"     ? sigma_z_obs()
        : std::string(name) == "sigma_x"   ? sigma_x_obs()
        : std::string(name) == "diag_plus" ? diag_plus_obs()
                                           : diag_minus_obs();
    if ((o.bloch - ref.bloch).norm() < 1e-12) return json(name);
  }
  // Fall back to the HWP angle recovering this Bloch vector.
  double theta = std::atan2(o.bloch.x(), o.bloch.z()) * 180.0 / M_PI / 4.0;
  return json{{"hwp_deg", theta}};
}

inline SourceModel parse_source(const json& j, const std::string& where) {
  SourceModel s;
  std::string kind = j.at("kind").get<std::string>();
  if (kind == "pulsed")
    s.kind = SourceModel::Kind::pulsed;
  else if (kind == "cw")
    s.kind = SourceModel::Kind::cw;
  else
    throw ConfigError(where + ": kind must be 'pulsed' or 'cw'");
  if (s.kind == SourceModel::Kind::pulsed)
    s.rep_rate_hz = j.at("rep_rate_hz").get<double>();
  s.pair_rate_hz = j.at("pair_rate_hz").get<double>();
  const json& st = j.at("state");
  std::string type = st.at("type").get<std::string>();
  if (type == "singlet")
    s.state = singlet_state();
  else if (type == "werner")
    s.state = werner_state(st.at("visibility").get<double>());
  else if (type == "mixed")
    s.state = maximally_mixed();
  else
    throw ConfigError(where + ": state type must be singlet, werner or mixed");
  return s;
}

inline json dump_source(const SourceModel& s) {
  json st;
  // The Werner family has rho(1,2) = -v/2 exactly; the factor of two is a
  // power of two, so the visibility round-trips bit-exactly.
  double v = -2.0 * std::real(s.state.matrix(1, 2));
  if (v == 1.0) {
    st = {{"type", "singlet"}};
  } else if (v == 0.0) {
    st = {{"type", "mixed"}};
  } else {
    st = {{"type", "werner"}, {"visibility", v}};
  }
  json j{{"kind", s.kind == SourceModel::Kind::pulsed ? "pulsed" : "cw"},
         {"pair_rate_hz", s.pair_rate_hz},
         {"state", st}};
  if (s.kind == SourceModel::Kind::pulsed) j["rep_rate_hz"] = s.rep_rate_hz;
  return j;
}

inline ChannelModel parse_channel(const json& j) {
  ChannelModel c;
  c.transmission = j.at("transmission").get<double>();
  c.delay_s = j.at("delay_ns").get<double>() * 1e-9;
  c.label = j.value("label", "");
  return c;
}

// Serialization divides by the exact constants the parser multiplies with,
// so parse -> dump -> parse is the identity.
inline json dump_channel(const ChannelModel& c) {
  return json{{"transmission", c.transmission},
              {"delay_ns", c.delay_s / 1e-9},
              {"label", c.label}};
}

inline DetectorModel parse_detector(const json& j) {
  DetectorModel d;
  d.efficiency = j.at("efficiency").get<double>();
  d.dark_rate_hz = j.at("dark_rate_hz").get<double>();
  d.jitter_sigma_s = j.at("jitter_sigma_ps").get<double>() * 1e-12;
  d.tick_s = j.at("tick_ps").get<double>() * 1e-12;
  return d;
}

inline json dump_detector(const DetectorModel& d) {
  return json{{"efficiency", d.efficiency},
              {"dark_rate_hz", d.dark_rate_hz},
              {"jitter_sigma_ps", d.jitter_sigma_s / 1e-12},
              {"tick_ps", d.tick_s / 1e-12}};
}

inline ClockModel parse_clock(const json& j) {
  ClockModel c;
  c.offset_s = j.at("offset_ns").get<double>() * 1e-9;
  c.drift = j.at("drift_ppm").get<double>() * 1e-6;
  c.gps_phase_s = j.value("gps_phase_ns", 0.0) * 1e-9;
  c.gps_coarse_sigma_s = j.value("gps_coarse_sigma_ns", 1.0) * 1e-9;
  return c;
}

inline json dump_clock(const ClockModel& c) {
  return json{{"offset_ns", c.offset_s / 1e-9},
              {"drift_ppm", c.drift / 1e-6},
              {"gps_phase_ns", c.gps_phase_s / 1e-9},
              {"gps_coarse_sigma_ns", c.gps_coarse_sigma_s / 1e-9}};
}

}  // namespace cfg_detail

inline std::vector<double> default_window_sweep_ns() {
  // Log-spaced from 283.5 ns to 51.435 us.
  std::vector<double> w;
  double lo = 283.5, hi = 51435.0;
  int n = 13;
  for (int i = 0; i < n; ++i)
    w.push_back(lo * std::pow(hi / lo, static_cast<double>(i) / (n - 1)));
  return w;
}

inline ExperimentConfig parse_config(const nlohmann::json& j) {
  using cfg_detail::parse_channel;
  using cfg_detail::parse_clock;
  using cfg_detail::parse_detector;
  using cfg_detail::parse_observable;
  using cfg_detail::parse_source;
  try {
    ExperimentConfig c;
    const auto& src = j.at("sources");
    c.net.source1 = parse_source(src.at("source1"), "sources.source1");
    c.net.source2 = parse_source(src.at("source2"), "sources.source2");
    const auto& ch = j.at("channels");
    c.net.ch_to_a = parse_channel(ch.at("source1_to_a"));
    c.net.ch_to_ba = parse_channel(ch.at("source1_to_b_arm_a"));
    c.net.ch_to_bc = parse_channel(ch.at("source2_to_b_arm_c"));
    c.net.ch_to_c = parse_channel(ch.at("source2_to_c"));
    const auto& det = j.at("detectors");
    c.net.detectors[0] = parse_detector(det.at("a"));
    c.net.detectors[1] = parse_detector(det.at("b_arm_a"));
    c.net.detectors[2] = parse_detector(det.at("b_arm_c"));
    c.net.detectors[3] = parse_detector(det.at("c"));
    const auto& clk = j.at("clocks");
    c.net.clock_marconi = parse_clock(clk.at("marconi"));
    c.net.clock_fermi = parse_clock(clk.at("fermi"));
    const auto& plan = j.at("plan");
    for (int i = 0; i < 2; ++i) {
      c.net.plan.a_settings[i] =
          parse_observable(plan.at("a").at(i), "plan.a");
      c.net.plan.b_arm_a_settings[i] =
          parse_observable(plan.at("b_arm_a").at(i), "plan.b_arm_a");
      c.net.plan.b_arm_c_settings[i] =
          parse_observable(plan.at("b_arm_c").at(i), "plan.b_arm_c");
      c.net.plan.c_settings[i] =
          parse_observable(plan.at("c").at(i), "plan.c");
    }
    const auto& sched = j.at("schedule");
    c.schedule =
        SettingsSchedule::all_triples(sched.at("block_duration_s").get<double>());
    const auto& run = j.at("run");
    c.duration_s = run.at("duration_s").get<double>();
    c.seed = run.at("seed").get<std::uint64_t>();
    if (j.contains("analysis")) {
      const auto& an = j.at("analysis");
      c.analysis.twofold_window_ns = an.value("twofold_window_ns", 1.0);
      if (an.contains("fourfold_windows_ns"))
        c.analysis.fourfold_windows_ns =
            an.at("fourfold_windows_ns").get<std::vector<double>>();
      c.analysis.n_blocks = an.value("n_blocks", 25);
      std::string conv = an.value("convention", "peripheral");
      if (conv == "peripheral")
        c.analysis.convention = Convention::peripheral_sum;
      else if (conv == "literal")
        c.analysis.convention = Convention::literal;
      else
        throw ConfigError("analysis.convention must be peripheral or literal");
    }
    if (c.analysis.fourfold_windows_ns.empty())
      c.analysis.fourfold_windows_ns = default_window_sweep_ns();
    c.link_distance_m = j.value("link_distance_m", 270.0);
    c.net.validate();
    c.schedule.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config schema error: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config value error: ") + e.what());
  }
}

inline nlohmann::json dump_config(const ExperimentConfig& c) {
  using cfg_detail::dump_channel;
  using cfg_detail::dump_clock;
  using cfg_detail::dump_detector;
  using cfg_detail::dump_observable;
  using cfg_detail::dump_source;
  nlohmann::json j;
  j["sources"] = {{"source1", dump_source(c.net.source1)},
                  {"source2", dump_source(c.net.source2)}};
  j["channels"] = {{"source1_to_a", dump_channel(c.net.ch_to_a)},
                   {"source1_to_b_arm_a", dump_channel(c.net.ch_to_ba)},
                   {"source2_to_b_arm_c", dump_channel(c.net.ch_to_bc)},
                   {"source2_to_c", dump_channel(c.net.ch_to_c)}};
  j["detectors"] = {{"a", dump_detector(c.net.detectors[0])},
                    {"b_arm_a", dump_detector(c.net.detectors[1])},
                    {"b_arm_c", dump_detector(c.net.detectors[2])},
                    {"c", dump_detector(c.net.detectors[3])}};
  j["clocks"] = {{"marconi", dump_clock(c.net.clock_marconi)},
                 {"fermi", dump_clock(c.net.clock_fermi)}};
  nlohmann::json plan;
  for (const auto& [key, slot] :
       std::initializer_list<std::pair<const char*,
                                       const std::array<DichotomicObservable,
                                                        2>*>>{
           {"a", &c.net.plan.a_settings},
           {"b_arm_a", &c.net.plan.b_arm_a_settings},
           {"b_arm_c", &c.net.plan.b_arm_c_settings},
           {"c", &c.net.plan.c_settings}}) {
    plan[key] = nlohmann::json::array(
        {dump_observable((*slot)[0]), dump_observable((*slot)[1])});
  }
  j["plan"] = plan;
  j["schedule"] = {{"block_duration_s", c.schedule.block_duration_s}};
  j["run"] = {{"duration_s", c.duration_s}, {"seed", c.seed}};
  j["analysis"] = {
      {"twofold_window_ns", c.analysis.twofold_window_ns},
      {"fourfold_windows_ns", c.analysis.fourfold_windows_ns},
      {"n_blocks", c.analysis.n_blocks},
      {"convention", c.analysis.convention == Convention::peripheral_sum
                         ? "peripheral"
                         : "literal"}};
  j["link_distance_m"] = c.link_distance_m;
  return j;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config parse error in " + path + ": " + e.what());
  }
  return parse_config(j);
}

// FNV-1a over the canonical serialization; recorded in run manifests.
inline std::string config_hash(const ExperimentConfig& c) {
  std::string s = dump_config(c).dump();
  std::uint64_t h = 1469598103934665603ull;
  for (char ch : s) {
    h ^= static_cast<unsigned char>(ch);
    h *= 1099511628211ull;
  }
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

// Paper-calibrated default: QD at 13.7 kHz over the free-space link,
// SPDC at 3 kHz over the 25 m fiber, Werner visibilities backed out of the
// measured CHSH values.
inline ExperimentConfig calibrated_config() {
  ExperimentConfig c;
  c.net.source1 = {SourceModel::Kind::pulsed, 320e6, 13.7e3,
                   werner_state(2.484 / (2.0 * std::sqrt(2.0)))};
  c.net.source2 = {SourceModel::Kind::cw, 0, 3e3,
                   werner_state(2.699 / (2.0 * std::sqrt(2.0)))};
  c.net.ch_to_a = {0.98, 5e-9, "local path"};
  c.net.ch_to_ba = {0.85 * 0.85 * 0.80 * 0.50, 900.7e-9,
                    "270 m free-space"};
  c.net.ch_to_bc = {0.92, 122e-9, "25 m fiber"};
  c.net.ch_to_c = {0.98, 5e-9, "local path"};
  for (auto& d : c.net.detectors) d = DetectorModel{};
  c.net.clock_marconi = {3.2e-6, 2.0e-6, 13e-9, 1e-9};
  c.net.clock_fermi = {0.0, 0.5e-6, 0.0, 1e-9};
  c.net.plan = optimal_plan();
  c.schedule = SettingsSchedule::all_triples(1.0);
  c.duration_s = 1500.0;
  c.seed = 42;
  c.analysis.fourfold_windows_ns = default_window_sweep_ns();
  return c;
}

// Two ideal singlets with the optimal plan and no noise sources.
inline ExperimentConfig ideal_config() {
  ExperimentConfig c = calibrated_config();
  c.net.source1.state = singlet_state();
  c.net.source2.state = singlet_state();
  return c;
}

}  // namespace biloc
