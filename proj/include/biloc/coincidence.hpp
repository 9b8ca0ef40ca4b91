#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "biloc/event_sim.hpp"
#include "biloc/quantum.hpp"

// From synchronized detection streams to physics: two-fold matching per
// source, four-fold recovery by window filtering, behavior estimation with
// block errors, window sweeps and the space-like separation check.
namespace biloc {

struct TwoFoldEvent {
  enum class Source { AB, BC };
  Source source;
  std::int64_t t_mid = 0;           // common time base, ticks
  std::uint8_t x_peripheral = 0;    // xA for AB, xC for BC
  std::uint8_t x_central = 0;       // xB
  std::uint8_t out_peripheral = 0;
  std::uint8_t out_central = 0;
  std::uint32_t block = 0;
};

struct FourFoldEvent {
  TwoFoldEvent ab;
  TwoFoldEvent bc;
  std::int64_t dt = 0;  // |t_mid(ab) - t_mid(bc)|
};

// Sufficient statistic for behavior estimation, keeping the central node's
// two raw bits.
struct CountsTable {
  std::array<std::uint64_t, 128> n{};  // (xA,xB,xC,a,bA,bC,c)

  static int idx(int xA, int xB, int xC, int a, int bA, int bC, int c) {
    return ((((((xA << 1 | xB) << 1 | xC) << 1 | a) << 1 | bA) << 1 | bC)
            << 1) | c;
  }
  std::uint64_t& at(int xA, int xB, int xC, int a, int bA, int bC, int c) {
    return n[idx(xA, xB, xC, a, bA, bC, c)];
  }
};

struct EstimateWithError {
  double value = 0;
  double std_error = 0;
  int n_blocks = 0;
};

// Greedy nearest-neighbor pairing within +- window/2; each click used at
// most once, earliest-first. Events whose clicks sit in different schedule
// blocks are dropped.
inline std::vector<TwoFoldEvent> twofold_match(
    const std::vector<DetectionRecord>& peripheral,
    const std::vector<DetectionRecord>& central, TwoFoldEvent::Source source,
    std::int64_t window) {
  std::vector<TwoFoldEvent> events;
  const std::int64_t half = window / 2;
  std::size_t j_lo = 0;
  std::vector<bool> used(central.size(), false);
  for (const DetectionRecord& p : peripheral) {
    while (j_lo < central.size() && central[j_lo].tick < p.tick - half)
      ++j_lo;
    // nearest unused candidate inside the window
    std::size_t best = central.size();
    std::int64_t best_d = half + 1;
    for (std::size_t j = j_lo;
         j < central.size() && central[j].tick <= p.tick + half; ++j) {
      if (used[j]) continue;
      std::int64_t d = std::llabs(central[j].tick - p.tick);
      if (d < best_d) {
        best_d = d;
        best = j;
      }
    }
    if (best == central.size()) continue;
    used[best] = true;
    const DetectionRecord& q = central[best];
    if (p.block != q.block) continue;  // consumed but dropped
    TwoFoldEvent e;
    e.source = source;
    e.t_mid = (p.tick + q.tick) / 2;
    e.x_peripheral = p.setting;
    e.x_central = q.setting;
    e.out_peripheral = p.detector;
    e.out_central = q.detector;
    e.block = p.block;
    events.push_back(e);
  }
  std::sort(events.begin(), events.end(),
            [](const TwoFoldEvent& a, const TwoFoldEvent& b) {
              return a.t_mid < b.t_mid;
            });
  return events;
}

// Each AB event is matched to its nearest BC event with |dt| <= window and a
// consistent settings block; an AB event is consumed at most once while a BC
// event may anchor several AB events, which keeps the four-fold count
// monotone in the window size.
inline std::vector<FourFoldEvent> fourfold_filter(
    const std::vector<TwoFoldEvent>& ab_events,
    const std::vector<TwoFoldEvent>& bc_events, std::int64_t window) {
  std::vector<FourFoldEvent> out;
  if (bc_events.empty()) return out;
  for (const TwoFoldEvent& ab : ab_events) {
    // nearest in time among same-block candidates
    auto it = std::lower_bound(
        bc_events.begin(), bc_events.end(), ab.t_mid,
        [](const TwoFoldEvent& e, std::int64_t t) { return e.t_mid < t; });
    const TwoFoldEvent* best = nullptr;
    std::int64_t best_d = window + 1;
    auto consider = [&](const TwoFoldEvent& cand) {
      if (cand.block != ab.block) return;
      std::int64_t d = std::llabs(cand.t_mid - ab.t_mid);
      if (d <= window && d < best_d) {
        best_d = d;
        best = &cand;
      }
    };
    for (auto f = it; f != bc_events.end() && f->t_mid - ab.t_mid <= window;
         ++f)
      consider(*f);
    for (auto r = it; r != bc_events.begin();) {
      --r;
      if (ab.t_mid - r->t_mid > window) break;
      consider(*r);
    }
    if (best) out.push_back({ab, *best, best_d});
  }
  return out;
}

struct BehaviorEstimate {
  Behavior behavior;
  CountsTable counts;
  bool complete = false;
  std::vector<int> missing_settings;  // setting triples with no events
};

// Relative frequencies with the central parity bit b = bA xor bC. Raw two-bit
// counts are preserved; functional evaluation must refuse incomplete tables.
inline BehaviorEstimate estimate_behavior(
    const std::vector<FourFoldEvent>& events) {
  BehaviorEstimate est;
  for (const FourFoldEvent& e : events) {
    if (e.ab.x_central != e.bc.x_central)
      throw std::invalid_argument(
          "estimate_behavior: inconsistent central settings in one event");
    est.counts.at(e.ab.x_peripheral, e.ab.x_central, e.bc.x_peripheral,
                  e.ab.out_peripheral, e.ab.out_central, e.bc.out_central,
                  e.bc.out_peripheral)++;
  }
  est.complete = true;
  for (int x = 0; x < 8; ++x) {
    int xA = (x >> 2) & 1, xB = (x >> 1) & 1, xC = x & 1;
    std::uint64_t total = 0;
    for (int o = 0; o < 16; ++o)
      total += est.counts.at(xA, xB, xC, (o >> 3) & 1, (o >> 2) & 1,
                             (o >> 1) & 1, o & 1);
    if (total == 0) {
      est.complete = false;
      est.missing_settings.push_back(x);
      continue;
    }
    for (int a = 0; a < 2; ++a)
      for (int bA = 0; bA < 2; ++bA)
        for (int bC = 0; bC < 2; ++bC)
          for (int c = 0; c < 2; ++c)
            est.behavior.at(xA, xB, xC, a, bA ^ bC, c) +=
                static_cast<double>(est.counts.at(xA, xB, xC, a, bA, bC, c)) /
                static_cast<double>(total);
  }
  return est;
}

namespace detail {

template <typename Event>
std::vector<std::vector<Event>> split_blocks(const std::vector<Event>& events,
                                             int n_blocks,
                                             std::int64_t t_of(const Event&)) {
  std::vector<std::vector<Event>> blocks(n_blocks);
  if (events.empty()) return blocks;
  std::int64_t t0 = t_of(events.front());
  std::int64_t t1 = t_of(events.back());
  double span = static_cast<double>(t1 - t0) + 1.0;
  for (const Event& e : events) {
    int b = static_cast<int>(
        static_cast<double>(t_of(e) - t0) / span * n_blocks);
    blocks[std::min(b, n_blocks - 1)].push_back(e);
  }
  return blocks;
}

inline EstimateWithError summarize(const std::vector<double>& vals) {
  EstimateWithError est;
  est.n_blocks = static_cast<int>(vals.size());
  if (vals.empty()) return est;
  double mean = 0;
  for (double v : vals) mean += v;
  mean /= vals.size();
  double var = 0;
  for (double v : vals) var += (v - mean) * (v - mean);
  var = vals.size() > 1 ? var / (vals.size() - 1) : 0;
  est.value = mean;
  est.std_error = std::sqrt(var / vals.size());
  return est;
}

}  // namespace detail

// Bilocal functional with uncertainty from contiguous equal-duration blocks:
// the functional is evaluated per block, value = mean, error = sample
// std / sqrt(n). Blocks with incomplete settings coverage are dropped.
inline EstimateWithError block_biloc(
    const std::vector<FourFoldEvent>& events, int n_blocks,
    Convention conv = Convention::peripheral_sum) {
  if (n_blocks < 2)
    throw std::invalid_argument("block_biloc: need n_blocks >= 2");
  auto blocks = detail::split_blocks<FourFoldEvent>(
      events, n_blocks, [](const FourFoldEvent& e) { return e.ab.t_mid; });
  std::vector<double> vals;
  for (const auto& blk : blocks) {
    if (blk.empty()) continue;
    BehaviorEstimate est = estimate_behavior(blk);
    if (!est.complete) continue;
    vals.push_back(biloc_functional(est.behavior, conv).B);
  }
  return detail::summarize(vals);
}

// CHSH |S| from two-fold relative frequencies, with the same block scheme.
inline EstimateWithError chsh_from_twofolds(
    const std::vector<TwoFoldEvent>& events, int n_blocks = 25) {
  if (n_blocks < 2)
    throw std::invalid_argument("chsh_from_twofolds: need n_blocks >= 2");
  auto blocks = detail::split_blocks<TwoFoldEvent>(
      events, n_blocks, [](const TwoFoldEvent& e) { return e.t_mid; });
  std::vector<double> vals;
  for (const auto& blk : blocks) {
    std::array<std::array<std::uint64_t, 4>, 4> counts{};
    for (const TwoFoldEvent& e : blk)
      counts[e.x_peripheral * 2 + e.x_central]
            [e.out_peripheral * 2 + e.out_central]++;
    bool complete = true;
    BipartiteBehavior beh;
    for (int x = 0; x < 2; ++x)
      for (int y = 0; y < 2; ++y) {
        std::uint64_t total = 0;
        for (auto c : counts[x * 2 + y]) total += c;
        if (total == 0) {
          complete = false;
          break;
        }
        for (int a = 0; a < 2; ++a)
          for (int b = 0; b < 2; ++b)
            beh.at(x, y, a, b) =
                static_cast<double>(counts[x * 2 + y][a * 2 + b]) /
                static_cast<double>(total);
      }
    if (complete) vals.push_back(chsh(beh));
  }
  if (vals.empty())
    throw std::invalid_argument("chsh_from_twofolds: incomplete settings");
  return detail::summarize(vals);
}

struct SweepPoint {
  std::int64_t window;  // ticks
  EstimateWithError estimate;
  double sigma_distance = 0;  // (B - 1) / std_error
  std::size_t n_fourfolds = 0;
};

// Full pipeline per window; emits the B(w) curve with errors.
inline std::vector<SweepPoint> window_sweep(
    const std::vector<TwoFoldEvent>& ab_events,
    const std::vector<TwoFoldEvent>& bc_events,
    const std::vector<std::int64_t>& windows, int n_blocks = 25,
    Convention conv = Convention::peripheral_sum) {
  std::vector<SweepPoint> out;
  for (std::int64_t w : windows) {
    auto four = fourfold_filter(ab_events, bc_events, w);
    SweepPoint pt;
    pt.window = w;
    pt.n_fourfolds = four.size();
    if (!four.empty()) {
      pt.estimate = block_biloc(four, n_blocks, conv);
      if (pt.estimate.std_error > 0)
        pt.sigma_distance = (pt.estimate.value - 1.0) / pt.estimate.std_error;
    }
    out.push_back(pt);
  }
  return out;
}

// True iff the window duration is shorter than the light travel time over
// the given distance.
inline bool spacelike_check(double window_s, double distance_m) {
  if (distance_m <= 0)
    throw std::invalid_argument("spacelike_check: distance must be > 0");
  constexpr double kLightSpeed = 299792458.0;
  return window_s < distance_m / kLightSpeed;
}

}  // namespace biloc
