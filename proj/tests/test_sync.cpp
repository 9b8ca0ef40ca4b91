#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>
#include <vector>

#include "biloc/event_sim.hpp"
#include "biloc/rng.hpp"
#include "biloc/sync.hpp"

using namespace biloc;

namespace {

DetectionRecord rec(std::int64_t tick) {
  return DetectionRecord{Node::A, 0, 0, tick, 0};
}

// Local-clock 10 kHz reference for a given clock model.
ReferenceSignal ref_10k(const ClockModel& clk, double duration_s,
                        double tick_s) {
  ReferenceSignal ref;
  ref.kind = ReferenceSignal::Kind::square_10kHz;
  std::int64_t n = static_cast<std::int64_t>(duration_s / 1e-4);
  for (std::int64_t k = 0; k <= n; ++k)
    ref.edges.push_back(static_cast<std::int64_t>(
        std::llround(clk.to_local(k * 1e-4 + clk.gps_phase_s) / tick_s)));
  return ref;
}

}  // namespace

TEST_CASE("drift correction") {
  SECTION("zero drift is the identity") {
    // tick chosen so the nominal period is an integer number of ticks
    const double tick_s = 1e-10;
    ClockModel ideal;
    ReferenceSignal ref = ref_10k(ideal, 0.06, tick_s);
    std::vector<DetectionRecord> stream;
    Rng rng(1);
    for (int i = 0; i < 2000; ++i)
      stream.push_back(rec(static_cast<std::int64_t>(
          rng.uniform(0, 0.06) / tick_s)));
    std::sort(stream.begin(), stream.end(),
              [](auto& a, auto& b) { return a.tick < b.tick; });

    DriftResult r = drift_correct(stream, ref, tick_s);
    REQUIRE(r.corrected.size() == stream.size());
    CHECK(r.excluded == 0);
    CHECK_FALSE(r.warning);
    CHECK(r.drift_estimate == Catch::Approx(0.0).margin(1e-12));
    for (std::size_t k = 0; k < stream.size(); ++k)
      REQUIRE(r.corrected[k].tick == stream[k].tick);
  }

  SECTION("1 ppm over 25 minutes corrected to within one tick") {
    const double tick_s = 81e-12;
    const double duration = 25 * 60.0;
    ClockModel clk;
    clk.drift = 1e-6;
    clk.offset_s = 3.2e-6;
    ReferenceSignal ref = ref_10k(clk, duration, tick_s);

    Rng rng(2);
    std::vector<double> truth;
    std::vector<DetectionRecord> stream;
    for (int i = 0; i < 20000; ++i)
      truth.push_back(rng.uniform(0, duration));
    std::sort(truth.begin(), truth.end());
    for (double t : truth)
      stream.push_back(rec(static_cast<std::int64_t>(
          std::llround(clk.to_local(t) / tick_s))));

    DriftResult r = drift_correct(stream, ref, tick_s);
    REQUIRE(r.corrected.size() == truth.size());
    CHECK_FALSE(r.warning);
    CHECK(r.drift_estimate == Catch::Approx(1e-6).margin(1e-10));
    // against the ideal-clock TDC timestamp of the same event
    for (std::size_t k = 0; k < truth.size(); ++k)
      REQUIRE(std::llabs(r.corrected[k].tick -
                         std::llround(truth[k] / tick_s)) <= 1);
  }

  SECTION("pathological 5e-4 drift still corrected, with warning") {
    const double tick_s = 81e-12;
    ClockModel clk;
    clk.drift = 5e-4;
    ReferenceSignal ref = ref_10k(clk, 10.0, tick_s);
    Rng rng(3);
    std::vector<DetectionRecord> stream;
    std::vector<double> truth;
    for (int i = 0; i < 5000; ++i) truth.push_back(rng.uniform(0, 10.0));
    std::sort(truth.begin(), truth.end());
    for (double t : truth)
      stream.push_back(rec(static_cast<std::int64_t>(
          std::llround(clk.to_local(t) / tick_s))));

    DriftResult r = drift_correct(stream, ref, tick_s);
    CHECK(r.warning);
    CHECK(r.drift_estimate == Catch::Approx(5e-4).margin(1e-8));
    for (std::size_t k = 0; k < truth.size(); ++k)
      REQUIRE(std::abs(static_cast<double>(r.corrected[k].tick) -
                       truth[k] / tick_s) <= 2.0);
  }

  SECTION("records inside long reference gaps are excluded") {
    const double tick_s = 1e-10;
    ClockModel ideal;
    ReferenceSignal ref = ref_10k(ideal, 0.1, tick_s);
    // carve out a 20-period hole in the middle
    auto lo = ref.edges.begin() + 400, hi = ref.edges.begin() + 420;
    std::int64_t gap_lo = *(lo - 1), gap_hi = *hi;
    ref.edges.erase(lo, hi);

    std::vector<DetectionRecord> stream = {rec(gap_lo - 5000),
                                           rec((gap_lo + gap_hi) / 2),
                                           rec(gap_hi + 5000)};
    DriftResult r = drift_correct(stream, ref, tick_s);
    CHECK(r.excluded == 1);
    REQUIRE(r.corrected.size() == 2);
    CHECK(r.corrected[0].tick == gap_lo - 5000);
    CHECK(r.corrected[1].tick == gap_hi + 5000);
  }

  SECTION("input validation") {
    ReferenceSignal one;
    one.kind = ReferenceSignal::Kind::square_10kHz;
    one.edges = {0};
    CHECK_THROWS_AS(drift_correct({}, one), std::invalid_argument);
    ReferenceSignal pulse;
    pulse.kind = ReferenceSignal::Kind::pulse_1Hz;
    pulse.edges = {0, 100};
    CHECK_THROWS_AS(drift_correct({}, pulse), std::invalid_argument);
  }
}

TEST_CASE("coarse offset from 1 Hz pulses") {
  const double tick_s = 81e-12;
  auto per_s = [&](double s) {
    return static_cast<std::int64_t>(std::llround(s / tick_s));
  };

  SECTION("identical trains give zero") {
    std::vector<std::int64_t> p;
    for (int k = 0; k < 10; ++k) p.push_back(per_s(k * 1.0));
    CoarseOffset c = coarse_offset(p, p);
    CHECK(c.offset_ticks == 0.0);
  }

  SECTION("single pulse each gives the exact difference") {
    CoarseOffset c = coarse_offset({per_s(5.0)}, {per_s(5.0 + 1e-6)});
    CHECK(c.offset_ticks == Catch::Approx(1e-6 / tick_s).margin(1.0));
  }

  SECTION("13 ns offset under 5 ns gps noise, 25 pulses") {
    Rng rng(44);
    std::vector<std::int64_t> px, py;
    for (int k = 0; k < 25; ++k) {
      px.push_back(per_s(k * 1.0 + rng.normal(5e-9)));
      py.push_back(per_s(k * 1.0 + 13e-9 + rng.normal(5e-9)));
    }
    CoarseOffset c = coarse_offset(px, py, 5e-9 / tick_s);
    CHECK(std::abs(c.offset_ticks * tick_s - 13e-9) < 3e-9);
    CHECK(c.sigma_ticks == Catch::Approx(5e-9 / tick_s));
  }

  SECTION("empty train throws") {
    CHECK_THROWS_AS(coarse_offset({}, {0}), std::invalid_argument);
  }
}

TEST_CASE("fine offset from the pair-difference histogram") {
  SECTION("identical streams peak at zero") {
    std::vector<DetectionRecord> s;
    for (int i = 0; i < 100; ++i) s.push_back(rec(i * 12346));
    SyncSolution sol = fine_offset(s, s, 0);
    CHECK(sol.offset_ticks == 0);
    CHECK(sol.offset_refined == Catch::Approx(0.0).margin(1e-12));
    CHECK_FALSE(sol.low_confidence);
    CHECK(sol.hist_counts[static_cast<std::size_t>(-sol.hist_origin)] == 100);
  }

  SECTION("recovers a jittered integer offset") {
    Rng rng(5);
    const std::int64_t true_off = 160;
    std::vector<DetectionRecord> sx, sy;
    for (int i = 0; i < 20000; ++i) {
      std::int64_t t = i * 12346;
      sx.push_back(rec(t));
      sy.push_back(rec(t + true_off +
                       static_cast<std::int64_t>(
                           std::llround(rng.normal(1.3)))));
    }
    SyncSolution sol = fine_offset(sx, sy, 140);
    CHECK_FALSE(sol.low_confidence);
    CHECK(std::abs(sol.offset_refined - static_cast<double>(true_off)) <=
          1.0);
    CHECK(std::llabs(sol.offset_ticks - true_off) <= 1);
    CHECK(sol.residual_ticks >= 0.0);
  }

  SECTION("translation equivariance is exact") {
    Rng rng(6);
    std::vector<DetectionRecord> sx, sy;
    for (int i = 0; i < 3000; ++i) {
      std::int64_t t = i * 12346;
      sx.push_back(rec(t));
      sy.push_back(rec(t + 37 + static_cast<std::int64_t>(
                                    std::llround(rng.normal(1.0)))));
    }
    SyncSolution base = fine_offset(sx, sy, 40);
    for (std::int64_t delta : {-5000, 123, 7777}) {
      std::vector<DetectionRecord> shifted = apply_offset(sy, -delta);
      SyncSolution moved = fine_offset(sx, shifted, 40 + delta);
      CHECK(moved.offset_ticks == base.offset_ticks + delta);
      CHECK(moved.offset_refined ==
            Catch::Approx(base.offset_refined + delta).margin(1e-9));
    }
  }

  SECTION("uncorrelated streams raise the low-confidence flag") {
    Rng rng(7);
    std::vector<std::int64_t> tx, ty;
    for (int i = 0; i < 4000; ++i) {
      tx.push_back(static_cast<std::int64_t>(rng.uniform(0, 1e10)));
      ty.push_back(static_cast<std::int64_t>(rng.uniform(0, 1e10)));
    }
    std::sort(tx.begin(), tx.end());
    std::sort(ty.begin(), ty.end());
    std::vector<DetectionRecord> sx, sy;
    for (auto t : tx) sx.push_back(rec(t));
    for (auto t : ty) sy.push_back(rec(t));
    SyncSolution sol = fine_offset(sx, sy, 0);
    CHECK(sol.low_confidence);
  }

  SECTION("histogram equals the brute-force pair count") {
    std::vector<DetectionRecord> sx = {rec(0), rec(100), rec(250)};
    std::vector<DetectionRecord> sy = {rec(3), rec(98), rec(105), rec(900)};
    SyncSolution sol = fine_offset(sx, sy, 0, 10);
    for (std::int64_t d = -10; d <= 10; ++d) {
      std::uint64_t want = 0;
      for (const auto& x : sx)
        for (const auto& y : sy) want += (y.tick - x.tick == d);
      CHECK(sol.hist_counts[static_cast<std::size_t>(d + 10)] == want);
    }
  }

  SECTION("bin width must be positive") {
    CHECK_THROWS_AS(fine_offset({}, {}, 0, 494, 0), std::invalid_argument);
  }
}

TEST_CASE("drift + coarse + fine composition recovers the clock relation") {
  // Full pipeline on simulated runs: after drift correction each building's
  // streams sit on its GPS-disciplined time base, so the A vs B-arm offset
  // is (delay_ba - delay_a) + (gps_marconi - gps_fermi). The nominal delay
  // part is known; the gps part is what fine sync must find.
  const double tick_s = 81e-12;
  Rng meta(909);
  for (int trial = 0; trial < 8; ++trial) {
    NetworkConfig cfg;
    cfg.source1.kind = SourceModel::Kind::cw;
    cfg.source1.pair_rate_hz = 2000;
    cfg.source2.pair_rate_hz = 1e-9;  // quiet the BC side
    cfg.ch_to_a.transmission = 1.0;
    cfg.ch_to_a.delay_s = 900.7e-9;
    cfg.ch_to_ba.transmission = 1.0;
    for (auto& d : cfg.detectors) {
      d.efficiency = 1.0;
      d.dark_rate_hz = 100;
      d.jitter_sigma_s = 100e-12;
    }
    cfg.clock_marconi.offset_s = meta.uniform(-5e-6, 5e-6);
    cfg.clock_marconi.drift = meta.uniform(-1e-5, 1e-5);
    cfg.clock_marconi.gps_phase_s = meta.uniform(-10e-9, 10e-9);
    cfg.clock_fermi.offset_s = meta.uniform(-5e-6, 5e-6);
    cfg.clock_fermi.drift = meta.uniform(-1e-5, 1e-5);
    cfg.clock_fermi.gps_phase_s = meta.uniform(-20e-9, 20e-9);

    RunOutput out =
        simulate_run(cfg, SettingsSchedule::all_triples(), 60.0, 500 + trial);

    DriftResult da = drift_correct(out.streams[0], out.ref10k_marconi);
    DriftResult db = drift_correct(out.streams[1], out.ref10k_fermi);
    REQUIRE(std::abs(da.drift_estimate - cfg.clock_marconi.drift) < 1e-8);
    REQUIRE(std::abs(db.drift_estimate - cfg.clock_fermi.drift) < 1e-8);

    auto pa = drift_correct_edges(out.pulse1_marconi.edges,
                                  out.ref10k_marconi);
    auto pb = drift_correct_edges(out.pulse1_fermi.edges, out.ref10k_fermi);
    std::int64_t nominal = static_cast<std::int64_t>(
        std::llround((cfg.ch_to_ba.delay_s - cfg.ch_to_a.delay_s) / tick_s));
    std::int64_t coarse = static_cast<std::int64_t>(
        std::llround(coarse_offset(pa, pb).offset_ticks)) + nominal;

    SyncSolution sol = fine_offset(da.corrected, db.corrected, coarse);
    REQUIRE_FALSE(sol.low_confidence);
    double expected = (cfg.ch_to_ba.delay_s - cfg.ch_to_a.delay_s +
                       cfg.clock_marconi.gps_phase_s -
                       cfg.clock_fermi.gps_phase_s) / tick_s;
    REQUIRE(std::abs(sol.offset_refined - expected) <= 1.0);
  }
}
