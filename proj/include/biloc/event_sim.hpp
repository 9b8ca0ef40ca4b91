#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "biloc/quantum.hpp"
#include "biloc/rng.hpp"

// Discrete-event simulation of the three-node network: pair emission,
// lossy channels, jittered detection quantized to TDC ticks, dark counts
// and independent drifting clocks per building.
namespace biloc {

struct SourceModel {
  enum class Kind { pulsed, cw };
  Kind kind = Kind::cw;
  double rep_rate_hz = 0;    // pulsed only
  double pair_rate_hz = 0;   // emitted pair rate into the channels
  TwoQubitState state = singlet_state();

  void validate() const {
    if (pair_rate_hz <= 0)
      throw std::invalid_argument("SourceModel: pair_rate must be > 0");
    if (kind == Kind::pulsed) {
      if (rep_rate_hz <= 0)
        throw std::invalid_argument("SourceModel: pulsed needs rep_rate > 0");
      if (pair_rate_hz / rep_rate_hz > 1.0)
        throw std::invalid_argument(
            "SourceModel: pair-per-pulse probability > 1");
    }
  }
};

struct ChannelModel {
  double transmission = 1.0;
  double delay_s = 0.0;
  std::string label;

  void validate() const {
    if (transmission <= 0 || transmission > 1)
      throw std::invalid_argument("ChannelModel: transmission outside (0,1]");
    if (delay_s < 0)
      throw std::invalid_argument("ChannelModel: negative delay");
  }
};

struct DetectorModel {
  double efficiency = 0.6;
  double dark_rate_hz = 200.0;   // per output port
  double jitter_sigma_s = 100e-12;
  double tick_s = 81e-12;        // TDC resolution

  void validate() const {
    if (efficiency < 0 || efficiency > 1)
      throw std::invalid_argument("DetectorModel: efficiency outside [0,1]");
    if (dark_rate_hz < 0 || tick_s <= 0)
      throw std::invalid_argument("DetectorModel: bad dark rate or tick");
  }
};

// t_local = (1 + drift) * t_true + offset. gps_phase is the building's
// GPS-disciplined oscillator phase error against true GPS time (it shifts
// the reference edges, not the TDC); gps_coarse_sigma is the per-pulse
// timing noise of the 1 Hz pulse.
struct ClockModel {
  double offset_s = 0.0;
  double drift = 0.0;
  double gps_phase_s = 0.0;
  double gps_coarse_sigma_s = 1e-9;

  void validate() const {
    if (std::abs(drift) >= 1e-3)
      throw std::invalid_argument("ClockModel: |drift| must be < 1e-3");
  }

  double to_local(double t_true) const {
    return (1.0 + drift) * t_true + offset_s;
  }
  double to_true(double t_local) const {
    return (t_local - offset_s) / (1.0 + drift);
  }
};

enum class Node : std::uint8_t { A = 0, B_armA = 1, B_armC = 2, C = 3 };

struct DetectionRecord {
  Node node;
  std::uint8_t detector;  // 0 = plus port, 1 = minus port
  std::uint8_t setting;   // the node's local setting bit
  std::int64_t tick;      // local-clock TDC ticks
  std::uint32_t block;    // schedule block index
};

struct SettingsSchedule {
  double block_duration_s = 1.0;
  std::vector<std::array<std::uint8_t, 3>> order;  // (xA, xB, xC) triples

  static SettingsSchedule all_triples(double block_s = 1.0) {
    SettingsSchedule s;
    s.block_duration_s = block_s;
    for (int i = 0; i < 8; ++i)
      s.order.push_back({static_cast<std::uint8_t>((i >> 2) & 1),
                         static_cast<std::uint8_t>((i >> 1) & 1),
                         static_cast<std::uint8_t>(i & 1)});
    return s;
  }

  void validate() const {
    if (order.empty())
      throw std::invalid_argument("SettingsSchedule: empty order");
    if (block_duration_s <= 0)
      throw std::invalid_argument("SettingsSchedule: bad block duration");
    std::array<bool, 8> seen{};
    for (const auto& t : order) seen[t[0] * 4 + t[1] * 2 + t[2]] = true;
    if (!std::all_of(seen.begin(), seen.end(), [](bool b) { return b; }))
      throw std::invalid_argument(
          "SettingsSchedule: cycle must cover all 8 setting triples");
  }

  std::uint32_t block_of(double t_true) const {
    return static_cast<std::uint32_t>(t_true / block_duration_s);
  }
  const std::array<std::uint8_t, 3>& triple(std::uint32_t block) const {
    return order[block % order.size()];
  }
};

struct ReferenceSignal {
  enum class Kind { square_10kHz, pulse_1Hz };
  Kind kind = Kind::square_10kHz;
  std::vector<std::int64_t> edges;  // local-clock ticks, strictly increasing
};

struct NetworkConfig {
  SourceModel source1;  // feeds A and B_armA
  SourceModel source2;  // feeds B_armC and C
  ChannelModel ch_to_a, ch_to_ba, ch_to_bc, ch_to_c;
  std::array<DetectorModel, 4> detectors;  // indexed by Node
  ClockModel clock_marconi;  // node A's building
  ClockModel clock_fermi;    // nodes B and C
  MeasurementPlan plan = optimal_plan();

  const ClockModel& clock_of(Node n) const {
    return n == Node::A ? clock_marconi : clock_fermi;
  }
  const ChannelModel& channel_of(Node n) const {
    switch (n) {
      case Node::A: return ch_to_a;
      case Node::B_armA: return ch_to_ba;
      case Node::B_armC: return ch_to_bc;
      default: return ch_to_c;
    }
  }
  void validate() const {
    source1.validate();
    source2.validate();
    for (const auto* c : {&ch_to_a, &ch_to_ba, &ch_to_bc, &ch_to_c})
      c->validate();
    for (const auto& d : detectors) d.validate();
    clock_marconi.validate();
    clock_fermi.validate();
  }
};

struct RunOutput {
  std::array<std::vector<DetectionRecord>, 4> streams;  // indexed by Node
  ReferenceSignal ref10k_marconi, pulse1_marconi;
  ReferenceSignal ref10k_fermi, pulse1_fermi;
};

namespace detail {

inline std::int64_t quantize(double t_local, double tick_s) {
  return static_cast<std::int64_t>(std::llround(t_local / tick_s));
}

// One detected click, if the photon survives its channel and detector.
inline void maybe_click(std::vector<DetectionRecord>& stream, Node node,
                        const NetworkConfig& cfg, double t_emit,
                        std::uint8_t setting, std::uint8_t outcome,
                        std::uint32_t block, Rng& rng) {
  const ChannelModel& ch = cfg.channel_of(node);
  const DetectorModel& det = cfg.detectors[static_cast<int>(node)];
  if (!rng.bernoulli(ch.transmission * det.efficiency)) return;
  double t_arrive = t_emit + ch.delay_s + rng.normal(det.jitter_sigma_s);
  double t_local = cfg.clock_of(node).to_local(t_arrive);
  if (t_local < 0) return;
  stream.push_back({node, outcome, setting, quantize(t_local, det.tick_s),
                    block});
}

inline void emit_source(const SourceModel& src, Node peripheral, Node central,
                        bool peripheral_first, const NetworkConfig& cfg,
                        const SettingsSchedule& schedule, double duration_s,
                        std::uint64_t seed, const char* label,
                        std::array<std::vector<DetectionRecord>, 4>& streams) {
  Rng rng = Rng::substream(seed, label);
  // Joint outcome tables per (local setting, central setting), computed once.
  std::array<std::array<double, 4>, 4> probs;
  for (int xl = 0; xl < 2; ++xl)
    for (int xc = 0; xc < 2; ++xc) {
      const auto& obs_local = peripheral == Node::A
                                  ? cfg.plan.a_settings[xl]
                                  : cfg.plan.c_settings[xl];
      const auto& obs_central = central == Node::B_armA
                                    ? cfg.plan.b_arm_a_settings[xc]
                                    : cfg.plan.b_arm_c_settings[xc];
      // State qubit order is (peripheral, central) for source 1 and
      // (central, peripheral) for source 2.
      probs[xl * 2 + xc] =
          peripheral_first
              ? pair_probs(src.state, obs_local, obs_central)
              : pair_probs(src.state, obs_central, obs_local);
    }

  double t = 0;
  std::uint64_t pulse = 0;
  const double p_pulse = src.kind == SourceModel::Kind::pulsed
                             ? src.pair_rate_hz / src.rep_rate_hz
                             : 0;
  while (true) {
    if (src.kind == SourceModel::Kind::cw) {
      t += rng.exponential(src.pair_rate_hz);
    } else {
      pulse += rng.geometric_gap(p_pulse);
      t = static_cast<double>(pulse) / src.rep_rate_hz;
    }
    if (t >= duration_s) break;
    std::uint32_t block = schedule.block_of(t);
    const auto& triple = schedule.triple(block);
    std::uint8_t x_local = peripheral == Node::A ? triple[0] : triple[2];
    std::uint8_t x_central = triple[1];
    int joint = rng.pick(probs[x_local * 2 + x_central].data(), 4);
    std::uint8_t out_first = static_cast<std::uint8_t>(joint >> 1);
    std::uint8_t out_second = static_cast<std::uint8_t>(joint & 1);
    std::uint8_t out_local = peripheral_first ? out_first : out_second;
    std::uint8_t out_central = peripheral_first ? out_second : out_first;
    maybe_click(streams[static_cast<int>(peripheral)], peripheral, cfg, t,
                x_local, out_local, block, rng);
    maybe_click(streams[static_cast<int>(central)], central, cfg, t,
                x_central, out_central, block, rng);
  }
}

inline void emit_darks(std::vector<DetectionRecord>& stream, Node node,
                       const NetworkConfig& cfg,
                       const SettingsSchedule& schedule, double duration_s,
                       std::uint64_t seed, const std::string& label) {
  const DetectorModel& det = cfg.detectors[static_cast<int>(node)];
  if (det.dark_rate_hz <= 0) return;
  for (std::uint8_t port = 0; port < 2; ++port) {
    Rng rng = Rng::substream(seed, label + (port ? "/minus" : "/plus"));
    double t = 0;
    while (true) {
      t += rng.exponential(det.dark_rate_hz);
      if (t >= duration_s) break;
      std::uint32_t block = schedule.block_of(t);
      const auto& triple = schedule.triple(block);
      std::uint8_t setting = node == Node::A   ? triple[0]
                             : node == Node::C ? triple[2]
                                               : triple[1];
      double t_local = cfg.clock_of(node).to_local(t);
      if (t_local < 0) continue;
      stream.push_back({node, port, setting,
                        quantize(t_local, det.tick_s), block});
    }
  }
}

inline ReferenceSignal make_reference(ReferenceSignal::Kind kind,
                                      const ClockModel& clock,
                                      double duration_s, double tick_s,
                                      Rng& rng) {
  ReferenceSignal ref;
  ref.kind = kind;
  double period = kind == ReferenceSignal::Kind::square_10kHz ? 1e-4 : 1.0;
  std::int64_t n = static_cast<std::int64_t>(duration_s / period);
  ref.edges.reserve(n + 1);
  std::int64_t prev = std::numeric_limits<std::int64_t>::min();
  for (std::int64_t k = 0; k <= n; ++k) {
    double t_true = k * period + clock.gps_phase_s;
    if (kind == ReferenceSignal::Kind::pulse_1Hz)
      t_true += rng.normal(clock.gps_coarse_sigma_s);
    std::int64_t tk = quantize(clock.to_local(t_true), tick_s);
    if (tk > prev) {
      ref.edges.push_back(tk);
      prev = tk;
    }
  }
  return ref;
}

}  // namespace detail

// Full network run. Deterministic: identical (config, schedule, duration,
// seed) yields bit-identical output; each source and dark-count port draws
// from its own labeled substream.
inline RunOutput simulate_run(const NetworkConfig& cfg,
                              const SettingsSchedule& schedule,
                              double duration_s, std::uint64_t seed) {
  cfg.validate();
  schedule.validate();
  if (duration_s < 0)
    throw std::invalid_argument("simulate_run: negative duration");

  RunOutput out;
  if (duration_s > 0) {
    detail::emit_source(cfg.source1, Node::A, Node::B_armA, true, cfg,
                        schedule, duration_s, seed, "source1", out.streams);
    detail::emit_source(cfg.source2, Node::C, Node::B_armC, false, cfg,
                        schedule, duration_s, seed, "source2", out.streams);
    static const char* kNodeNames[] = {"A", "B_armA", "B_armC", "C"};
    for (int i = 0; i < 4; ++i)
      detail::emit_darks(out.streams[i], static_cast<Node>(i), cfg, schedule,
                         duration_s, seed,
                         std::string("dark/") + kNodeNames[i]);
    for (auto& s : out.streams)
      std::sort(s.begin(), s.end(),
                [](const DetectionRecord& a, const DetectionRecord& b) {
                  return a.tick < b.tick;
                });
  }

  double tick = cfg.detectors[0].tick_s;
  Rng ref_rng_m = Rng::substream(seed, "ref/marconi");
  Rng ref_rng_f = Rng::substream(seed, "ref/fermi");
  out.ref10k_marconi = detail::make_reference(
      ReferenceSignal::Kind::square_10kHz, cfg.clock_marconi, duration_s,
      tick, ref_rng_m);
  out.pulse1_marconi = detail::make_reference(
      ReferenceSignal::Kind::pulse_1Hz, cfg.clock_marconi, duration_s, tick,
      ref_rng_m);
  out.ref10k_fermi = detail::make_reference(
      ReferenceSignal::Kind::square_10kHz, cfg.clock_fermi, duration_s, tick,
      ref_rng_f);
  out.pulse1_fermi = detail::make_reference(
      ReferenceSignal::Kind::pulse_1Hz, cfg.clock_fermi, duration_s, tick,
      ref_rng_f);
  return out;
}

// Noise-free fixture: n four-fold events at regular 1 us spacing, no losses,
// darks, drift or jitter; outcomes i.i.d. from the given behavior. Each
// event is its own schedule block and the setting triples cycle through all
// eight combinations.
inline std::array<std::vector<DetectionRecord>, 4> ideal_streams(
    const Behavior& beh, long n_events, std::uint64_t seed) {
  if (n_events <= 0)
    throw std::invalid_argument("ideal_streams: n_events must be > 0");
  beh.validate();
  Rng rng = Rng::substream(seed, "ideal");
  std::array<std::vector<DetectionRecord>, 4> streams;
  for (auto& s : streams) s.reserve(n_events);
  const double tick_s = 81e-12;
  const std::int64_t spacing = static_cast<std::int64_t>(
      std::llround(1e-6 / tick_s));
  for (long i = 0; i < n_events; ++i) {
    int s = static_cast<int>(i % 8);
    int xA = (s >> 2) & 1, xB = (s >> 1) & 1, xC = s & 1;
    double w[8];
    for (int o = 0; o < 8; ++o)
      w[o] = beh.at(xA, xB, xC, (o >> 2) & 1, (o >> 1) & 1, o & 1);
    int o = rng.pick(w, 8);
    std::uint8_t a = (o >> 2) & 1, b = (o >> 1) & 1, c = o & 1;
    // The central parity bit is split over the two arms; the A arm carries
    // the parity and the C arm reads 0, so bA xor bC reproduces b.
    std::int64_t t = i * spacing;
    std::uint32_t block = static_cast<std::uint32_t>(i);
    streams[0].push_back({Node::A, a, static_cast<std::uint8_t>(xA), t,
                          block});
    streams[1].push_back({Node::B_armA, b, static_cast<std::uint8_t>(xB), t,
                          block});
    streams[2].push_back({Node::B_armC, 0, static_cast<std::uint8_t>(xB), t,
                          block});
    streams[3].push_back({Node::C, c, static_cast<std::uint8_t>(xC), t,
                          block});
  }
  return streams;
}

}  // namespace biloc
