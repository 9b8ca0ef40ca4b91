#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "biloc/quantum.hpp"

// Classical hidden-variable models of the bilocal network: deterministic
// response strategies over two independent sources, brute-force bound
// searches and the (I1, I2) region geometry.
namespace biloc {

// Response tables follow the causal graph: a depends on (xA, lambda1),
// b on (xB, lambda1, lambda2), c on (xC, lambda2).
struct DeterministicStrategy {
  int card1 = 1;
  int card2 = 1;
  std::vector<std::uint8_t> resp_a;  // [xA * card1 + l1]
  std::vector<std::uint8_t> resp_b;  // [(xB * card1 + l1) * card2 + l2]
  std::vector<std::uint8_t> resp_c;  // [xC * card2 + l2]

  std::uint8_t a(int xA, int l1) const { return resp_a[xA * card1 + l1]; }
  std::uint8_t b(int xB, int l1, int l2) const {
    return resp_b[(xB * card1 + l1) * card2 + l2];
  }
  std::uint8_t c(int xC, int l2) const { return resp_c[xC * card2 + l2]; }

  void validate() const {
    if (card1 < 1 || card2 < 1)
      throw std::invalid_argument("DeterministicStrategy: bad cardinality");
    if (resp_a.size() != static_cast<std::size_t>(2 * card1) ||
        resp_b.size() != static_cast<std::size_t>(2 * card1 * card2) ||
        resp_c.size() != static_cast<std::size_t>(2 * card2))
      throw std::invalid_argument(
          "DeterministicStrategy: response table size mismatch");
  }
};

struct HiddenVarDistribution {
  std::vector<double> p1;
  std::vector<double> p2;

  void validate() const {
    for (const auto* p : {&p1, &p2}) {
      double s = 0;
      for (double v : *p) {
        if (v < 0) throw std::invalid_argument("negative probability");
        s += v;
      }
      if (std::abs(s - 1.0) > 1e-12)
        throw std::invalid_argument("distribution not normalized");
    }
  }
};

inline HiddenVarDistribution uniform_dist(int card1, int card2) {
  return HiddenVarDistribution{
      std::vector<double>(card1, 1.0 / card1),
      std::vector<double>(card2, 1.0 / card2)};
}

// Markov decomposition over the product distribution p1(l1) p2(l2).
inline Behavior bilocal_behavior(const DeterministicStrategy& strat,
                                 const HiddenVarDistribution& dist) {
  strat.validate();
  dist.validate();
  if (dist.p1.size() != static_cast<std::size_t>(strat.card1) ||
      dist.p2.size() != static_cast<std::size_t>(strat.card2))
    throw std::invalid_argument("bilocal_behavior: cardinality mismatch");
  Behavior beh;
  for (int l1 = 0; l1 < strat.card1; ++l1)
    for (int l2 = 0; l2 < strat.card2; ++l2) {
      double w = dist.p1[l1] * dist.p2[l2];
      if (w == 0) continue;
      for (int xA = 0; xA < 2; ++xA)
        for (int xB = 0; xB < 2; ++xB)
          for (int xC = 0; xC < 2; ++xC)
            beh.at(xA, xB, xC, strat.a(xA, l1), strat.b(xB, l1, l2),
                   strat.c(xC, l2)) += w;
    }
  return beh;
}

struct BoundSearchResult {
  double value = 0;
  bool converged = false;
  long evaluations = 0;
  DeterministicStrategy witness;
  HiddenVarDistribution witness_dist;
};

namespace detail {

// For one peripheral party with sign responses s(x, l) the two reduced
// weights per lambda are |s(0,l)+s(1,l)|/2 and |s(0,l)-s(1,l)|/2; exactly
// one of them is 1. aligned[l] == true means the I1-type weight is 1.
inline std::vector<bool> aligned_pattern(const std::vector<std::uint8_t>& resp,
                                         int card) {
  std::vector<bool> aligned(card);
  for (int l = 0; l < card; ++l) aligned[l] = resp[l] == resp[card + l];
  return aligned;
}

// With the central responses chosen pointwise optimally (B^0 and B^1 are
// independent tables under the peripheral-sum convention), the functional
// reduces to sqrt(alpha*gamma) + sqrt((1-alpha)(1-gamma)) where alpha is the
// p1-mass on A's aligned lambdas and gamma the p2-mass on C's.
inline double reduced_value(double alpha, double gamma) {
  return std::sqrt(alpha * gamma) + std::sqrt((1 - alpha) * (1 - gamma));
}

}  // namespace detail

// Maximum of B over deterministic strategies at the given hidden-variable
// cardinalities and over product distributions, in the peripheral-sum
// convention. Peripheral response tables are enumerated exhaustively; for
// each, the central table is maximized exactly (pointwise sign choice) and
// the distributions by a seeded grid plus alternating coordinate ascent.
inline BoundSearchResult max_biloc_bilocal(int card1, int card2,
                                           long opt_budget = 200000000) {
  if (card1 < 1 || card1 > 4 || card2 < 1 || card2 > 4)
    throw std::invalid_argument(
        "max_biloc_bilocal: exhaustive mode needs 1 <= card <= 4");
  BoundSearchResult best;
  best.value = -1;

  const int na = 1 << (2 * card1);
  const int nc = 1 << (2 * card2);
  auto unpack = [](int bits, int card) {
    std::vector<std::uint8_t> t(2 * card);
    for (int i = 0; i < 2 * card; ++i) t[i] = (bits >> i) & 1;
    return t;
  };

  // Alternating 1D ascent on (alpha, gamma) over their feasible intervals.
  // alpha is reachable in [0,1] iff both aligned and anti-aligned lambdas
  // exist, otherwise it is pinned to 0 or 1.
  auto feasible = [](const std::vector<bool>& aligned) {
    bool any1 = false, any0 = false;
    for (bool b : aligned) (b ? any1 : any0) = true;
    double lo = any0 ? 0.0 : 1.0;
    double hi = any1 ? 1.0 : 0.0;
    return std::pair<double, double>(lo, hi);
  };
  auto ascend1d = [](double other, double lo, double hi) {
    // maximize sqrt(t*other) + sqrt((1-t)(1-other)) over t in [lo,hi];
    // unimodal with interior maximum at t = other.
    double t = std::clamp(other, lo, hi);
    return t;
  };

  long evals = 0;
  bool exhausted = false;
  for (int ia = 0; ia < na && !exhausted; ++ia) {
    auto ra = unpack(ia, card1);
    auto alignedA = detail::aligned_pattern(ra, card1);
    auto [aLo, aHi] = feasible(alignedA);
    for (int ic = 0; ic < nc; ++ic) {
      auto rc = unpack(ic, card2);
      auto alignedC = detail::aligned_pattern(rc, card2);
      auto [gLo, gHi] = feasible(alignedC);

      // Grid seeds at resolution 1/8, refined by alternating ascent.
      double localBest = -1, bestAlpha = 0, bestGamma = 0;
      for (int i = 0; i <= 8; ++i) {
        double alpha = std::clamp(i / 8.0, aLo, aHi);
        for (int j = 0; j <= 8; ++j) {
          double gamma = std::clamp(j / 8.0, gLo, gHi);
          for (int it = 0; it < 4; ++it) {
            alpha = ascend1d(gamma, aLo, aHi);
            gamma = ascend1d(alpha, gLo, gHi);
          }
          double v = detail::reduced_value(alpha, gamma);
          ++evals;
          if (v > localBest) {
            localBest = v;
            bestAlpha = alpha;
            bestGamma = gamma;
          }
        }
      }
      if (evals > opt_budget) {
        exhausted = true;
        break;
      }

      if (localBest > best.value + 1e-15) {
        best.value = localBest;
        // Materialize the witness: distributions splitting mass between one
        // aligned and one anti-aligned lambda, central table by pointwise
        // sign choice.
        DeterministicStrategy w;
        w.card1 = card1;
        w.card2 = card2;
        w.resp_a = ra;
        w.resp_c = rc;
        HiddenVarDistribution d;
        d.p1.assign(card1, 0.0);
        d.p2.assign(card2, 0.0);
        auto spread = [](std::vector<double>& p,
                         const std::vector<bool>& aligned, double mass1) {
          int i1 = -1, i0 = -1;
          for (int i = 0; i < static_cast<int>(aligned.size()); ++i)
            (aligned[i] ? i1 : i0) = i;
          if (i1 >= 0) p[i1] = mass1;
          if (i0 >= 0) p[i0] = 1.0 - mass1;
          if (i1 < 0) p[i0] = 1.0;
          if (i0 < 0) p[i1] = 1.0;
        };
        spread(d.p1, alignedA, bestAlpha);
        spread(d.p2, alignedC, bestGamma);
        // Central signs: b(0,...) tracks sign(Abar*Cbar), b(1,...) tracks
        // sign(Atilde*Ctilde).
        w.resp_b.assign(2 * card1 * card2, 0);
        for (int l1 = 0; l1 < card1; ++l1)
          for (int l2 = 0; l2 < card2; ++l2) {
            double sA0 = ra[l1] ? -1 : 1, sA1 = ra[card1 + l1] ? -1 : 1;
            double sC0 = rc[l2] ? -1 : 1, sC1 = rc[card2 + l2] ? -1 : 1;
            double abar = 0.5 * (sA0 + sA1), atil = 0.5 * (sA0 - sA1);
            double cbar = 0.5 * (sC0 + sC1), ctil = 0.5 * (sC0 - sC1);
            w.resp_b[(0 * card1 + l1) * card2 + l2] = (abar * cbar < 0);
            w.resp_b[(1 * card1 + l1) * card2 + l2] = (atil * ctil < 0);
          }
        best.witness = w;
        best.witness_dist = d;
      }
    }
  }
  best.evaluations = evals;
  best.converged = !exhausted;
  return best;
}

// Maximum of |I1| + |I2| over tripartite-local models (single shared lambda,
// no independence constraint). The objective is convex in the distribution,
// so the maximum sits on a deterministic vertex of the local polytope; the
// 64 sign strategies are enumerated directly. card only bounds the model
// class asked about; mixtures cannot beat the vertices.
inline double max_I1_plus_I2_local(int card) {
  if (card < 1 || card > 16)
    throw std::invalid_argument("max_I1_plus_I2_local: card outside [1,16]");
  double best = 0;
  for (int bits = 0; bits < 64; ++bits) {
    double sA[2], sB[2], sC[2];
    for (int x = 0; x < 2; ++x) {
      sA[x] = (bits >> x) & 1 ? -1 : 1;
      sB[x] = (bits >> (2 + x)) & 1 ? -1 : 1;
      sC[x] = (bits >> (4 + x)) & 1 ? -1 : 1;
    }
    double I1 = 0, I2 = 0;
    for (int xA = 0; xA < 2; ++xA)
      for (int xC = 0; xC < 2; ++xC) {
        I1 += 0.25 * sA[xA] * sB[0] * sC[xC];
        I2 += 0.25 * ((xA + xC) % 2 ? -1 : 1) * sA[xA] * sB[1] * sC[xC];
      }
    best = std::max(best, std::abs(I1) + std::abs(I2));
  }
  return best;
}

struct RegionPoint {
  double I1;
  double I2;
  bool bilocal;  // sqrt|I1| + sqrt|I2| <= 1
  bool local;    // |I1| + |I2| <= 1
};

inline bool bilocal_compatible(double I1, double I2) {
  return std::sqrt(std::abs(I1)) + std::sqrt(std::abs(I2)) <= 1.0 + 1e-12;
}

inline bool local_compatible(double I1, double I2) {
  return std::abs(I1) + std::abs(I2) <= 1.0 + 1e-12;
}

// Grid over [-1,1]^2 classified against both classical sets.
inline std::vector<RegionPoint> region_scan(int resolution) {
  if (resolution < 2)
    throw std::invalid_argument("region_scan: resolution must be >= 2");
  std::vector<RegionPoint> out;
  out.reserve(static_cast<std::size_t>(resolution) * resolution);
  for (int i = 0; i < resolution; ++i)
    for (int j = 0; j < resolution; ++j) {
      double I1 = -1.0 + 2.0 * i / (resolution - 1);
      double I2 = -1.0 + 2.0 * j / (resolution - 1);
      out.push_back({I1, I2, bilocal_compatible(I1, I2),
                     local_compatible(I1, I2)});
    }
  return out;
}

}  // namespace biloc
