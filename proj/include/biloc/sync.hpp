#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "biloc/event_sim.hpp"

// Common-time-base recovery: drift correction against the 10 kHz reference,
// coarse offset from the 1 Hz pulses, fine offset from the peak of the
// coincidence-difference histogram.
namespace biloc {

struct SyncSolution {
  std::int64_t offset_ticks = 0;
  double offset_refined = 0;  // sub-tick centroid estimate
  double drift_correction = 0;
  double residual_ticks = 0;  // histogram FWHM / 2
  bool low_confidence = false;
  std::int64_t hist_origin = 0;            // tick value of bin 0's center
  std::vector<std::uint64_t> hist_counts;  // one bin per `bin` ticks
};

struct DriftResult {
  std::vector<DetectionRecord> corrected;
  double drift_estimate = 0;       // fitted (local rate / nominal) - 1
  long excluded = 0;               // records in unrecoverable gap segments
  bool warning = false;            // pathological residual drift seen
};

struct CoarseOffset {
  double offset_ticks = 0;
  double sigma_ticks = 0;
};

namespace detail {

// Local-to-common-base mapping built from the 10 kHz edges. Edge i carries
// a period index (inferred across dropped-edge gaps from the tick spacing),
// and local ticks map through a least-squares line over a window of
// surrounding edges — averaging beats per-edge TDC quantization noise.
struct EdgeFit {
  const std::vector<std::int64_t>* edges;
  std::vector<std::int64_t> period;  // period index per edge
  double nominal_ticks;

  EdgeFit(const std::vector<std::int64_t>& e, double nominal)
      : edges(&e), nominal_ticks(nominal) {
    period.resize(e.size());
    period[0] = 0;
    for (std::size_t i = 1; i < e.size(); ++i) {
      double span = static_cast<double>(e[i] - e[i - 1]);
      std::int64_t skip =
          std::max<std::int64_t>(1, std::llround(span / nominal));
      period[i] = period[i - 1] + skip;
    }
  }

  // Fitted common-base ticks for local tick t.
  double map(std::int64_t t) const {
    const auto& e = *edges;
    std::size_t n = e.size();
    auto it = std::upper_bound(e.begin(), e.end(), t);
    std::size_t k = it == e.begin()
                        ? 0
                        : static_cast<std::size_t>(it - e.begin()) - 1;
    if (k >= n - 1) k = n - 2;
    constexpr std::size_t kWindow = 32;
    std::size_t lo = k >= kWindow ? k - kWindow : 0;
    std::size_t hi = std::min(n - 1, k + kWindow);

    // Centered least squares of period index against local tick. Centering
    // keeps the sums exactly representable; raw second moments would not be.
    double mx = 0, my = 0;
    for (std::size_t i = lo; i <= hi; ++i) {
      mx += static_cast<double>(e[i]);
      my += static_cast<double>(period[i]);
    }
    double cnt = static_cast<double>(hi - lo + 1);
    mx /= cnt;
    my /= cnt;
    double sxx = 0, sxy = 0;
    for (std::size_t i = lo; i <= hi; ++i) {
      double dx = static_cast<double>(e[i]) - mx;
      sxx += dx * dx;
      sxy += dx * (static_cast<double>(period[i]) - my);
    }
    double slope = sxy / sxx;
    return (my + slope * (static_cast<double>(t) - mx)) * nominal_ticks;
  }
};

}  // namespace detail

// Rescale timestamps by a piecewise-linear fit of the local 10 kHz edges to
// their nominal 100 us spacing. Records falling in a reference gap longer
// than 10 nominal periods are excluded rather than extrapolated across.
inline DriftResult drift_correct(const std::vector<DetectionRecord>& stream,
                                 const ReferenceSignal& ref,
                                 double tick_s = 81e-12) {
  if (ref.kind != ReferenceSignal::Kind::square_10kHz)
    throw std::invalid_argument("drift_correct: needs the 10 kHz reference");
  if (ref.edges.size() < 2)
    throw std::invalid_argument("drift_correct: too few reference edges");
  const double nominal_ticks = 1e-4 / tick_s;

  DriftResult out;
  out.corrected.reserve(stream.size());

  detail::EdgeFit fit(ref.edges, nominal_ticks);

  // Global slope estimate from the full span (period indexing spans gaps).
  double local_span =
      static_cast<double>(ref.edges.back() - ref.edges.front());
  double nominal_span = nominal_ticks * static_cast<double>(fit.period.back());
  out.drift_estimate = local_span / nominal_span - 1.0;

  // Mark gap intervals once.
  std::vector<std::pair<std::int64_t, std::int64_t>> gaps;
  for (std::size_t k = 0; k + 1 < ref.edges.size(); ++k)
    if (ref.edges[k + 1] - ref.edges[k] > 10 * nominal_ticks)
      gaps.emplace_back(ref.edges[k], ref.edges[k + 1]);

  for (const DetectionRecord& r : stream) {
    bool in_gap = false;
    for (const auto& g : gaps)
      if (r.tick > g.first && r.tick < g.second) {
        in_gap = true;
        break;
      }
    if (in_gap) {
      ++out.excluded;
      continue;
    }
    DetectionRecord c = r;
    c.tick = static_cast<std::int64_t>(std::llround(fit.map(r.tick)));
    out.corrected.push_back(c);
  }
  out.warning = std::abs(out.drift_estimate) > 1e-4;
  return out;
}

// Drift-map a reference pulse train through the same edge fit.
inline std::vector<std::int64_t> drift_correct_edges(
    const std::vector<std::int64_t>& pulses, const ReferenceSignal& ref,
    double tick_s = 81e-12) {
  detail::EdgeFit fit(ref.edges, 1e-4 / tick_s);
  std::vector<std::int64_t> out;
  out.reserve(pulses.size());
  for (std::int64_t p : pulses)
    out.push_back(static_cast<std::int64_t>(std::llround(fit.map(p))));
  return out;
}

// Median of nearest-pulse differences (Y - X) between the two 1 Hz trains.
inline CoarseOffset coarse_offset(const std::vector<std::int64_t>& pulsesX,
                                  const std::vector<std::int64_t>& pulsesY,
                                  double gps_sigma_ticks = 0) {
  if (pulsesX.empty() || pulsesY.empty())
    throw std::invalid_argument("coarse_offset: empty pulse train");
  std::vector<double> diffs;
  diffs.reserve(pulsesX.size());
  for (std::int64_t x : pulsesX) {
    auto it = std::lower_bound(pulsesY.begin(), pulsesY.end(), x);
    std::int64_t best = it != pulsesY.end() ? *it : pulsesY.back();
    if (it != pulsesY.begin() &&
        std::abs(*(it - 1) - x) < std::abs(best - x))
      best = *(it - 1);
    diffs.push_back(static_cast<double>(best - x));
  }
  std::nth_element(diffs.begin(), diffs.begin() + diffs.size() / 2,
                   diffs.end());
  double med = diffs[diffs.size() / 2];
  if (diffs.size() % 2 == 0) {
    auto lower = std::max_element(diffs.begin(),
                                  diffs.begin() + diffs.size() / 2);
    med = 0.5 * (med + *lower);
  }
  return CoarseOffset{med, gps_sigma_ticks};
}

// Histogram of pairwise differences (tY - tX) inside
// [coarse - halfwidth, coarse + halfwidth]; the offset is the argmax bin
// refined by a centroid over +-3 bins. Two-pointer sweep over the sorted
// streams, never the full cross product.
inline SyncSolution fine_offset(const std::vector<DetectionRecord>& streamX,
                                const std::vector<DetectionRecord>& streamY,
                                std::int64_t coarse,
                                std::int64_t search_halfwidth = 494,
                                std::int64_t bin = 1) {
  if (bin < 1) throw std::invalid_argument("fine_offset: bin must be >= 1");
  const std::int64_t lo = coarse - search_halfwidth;
  const std::int64_t hi = coarse + search_halfwidth;
  const std::size_t n_bins =
      static_cast<std::size_t>((hi - lo) / bin) + 1;

  SyncSolution sol;
  sol.hist_origin = lo;
  sol.hist_counts.assign(n_bins, 0);

  std::size_t j0 = 0;
  for (const DetectionRecord& x : streamX) {
    while (j0 < streamY.size() && streamY[j0].tick < x.tick + lo) ++j0;
    for (std::size_t j = j0;
         j < streamY.size() && streamY[j].tick <= x.tick + hi; ++j) {
      std::size_t b =
          static_cast<std::size_t>((streamY[j].tick - x.tick - lo) / bin);
      ++sol.hist_counts[b];
    }
  }

  // Peak search; ties broken toward the bin nearest the coarse estimate.
  std::size_t coarse_bin = static_cast<std::size_t>((coarse - lo) / bin);
  std::size_t peak = 0;
  std::uint64_t peak_count = 0;
  for (std::size_t b = 0; b < n_bins; ++b) {
    std::uint64_t c = sol.hist_counts[b];
    if (c > peak_count ||
        (c == peak_count && c > 0 &&
         std::llabs(static_cast<long long>(b) -
                    static_cast<long long>(coarse_bin)) <
             std::llabs(static_cast<long long>(peak) -
                        static_cast<long long>(coarse_bin)))) {
      peak_count = c;
      peak = b;
    }
  }

  // Centroid refinement over +-3 bins for sub-tick accuracy when the jitter
  // exceeds one tick.
  double num = 0, den = 0;
  for (std::size_t b = peak >= 3 ? peak - 3 : 0;
       b < n_bins && b <= peak + 3; ++b) {
    double center = static_cast<double>(lo) +
                    (static_cast<double>(b) + 0.5) * bin - 0.5;
    num += center * static_cast<double>(sol.hist_counts[b]);
    den += static_cast<double>(sol.hist_counts[b]);
  }
  sol.offset_refined = den > 0 ? num / den : static_cast<double>(coarse);
  sol.offset_ticks =
      static_cast<std::int64_t>(std::llround(sol.offset_refined));

  // Residual = FWHM / 2 around the peak.
  double half = static_cast<double>(peak_count) / 2.0;
  std::size_t left = peak, right = peak;
  while (left > 0 && sol.hist_counts[left] > half) --left;
  while (right + 1 < n_bins && sol.hist_counts[right] > half) ++right;
  sol.residual_ticks = 0.5 * static_cast<double>(right - left) * bin;

  // Peak-to-background confidence: compare against the mean count away from
  // the peak.
  double background = 0;
  std::size_t n_bg = 0;
  for (std::size_t b = 0; b < n_bins; ++b)
    if (b + 10 < peak || b > peak + 10) {
      background += static_cast<double>(sol.hist_counts[b]);
      ++n_bg;
    }
  background = n_bg ? background / n_bg : 0;
  sol.low_confidence =
      peak_count == 0 ||
      static_cast<double>(peak_count) < 3.0 * std::max(background, 1.0);
  return sol;
}

// Shift a synchronized stream by -offset ticks into the other stream's base.
inline std::vector<DetectionRecord> apply_offset(
    const std::vector<DetectionRecord>& stream, std::int64_t offset_ticks) {
  std::vector<DetectionRecord> out = stream;
  for (auto& r : out) r.tick -= offset_ticks;
  return out;
}

}  // namespace biloc
