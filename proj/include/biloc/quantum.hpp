#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>

#include <array>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>

// Exact quantum predictions for the bilocal three-node network: two-qubit
// states, dichotomic polarization observables, Born-rule behaviors and the
// Bell functionals evaluated on them. Everything here is a pure function of
// immutable values and safe to call concurrently.
namespace biloc {

using Complex = std::complex<double>;
using Mat2 = Eigen::Matrix2cd;
using Mat4 = Eigen::Matrix4cd;
using Vec3 = Eigen::Vector3d;
using Ket4 = Eigen::Vector4cd;

inline Mat2 pauli_x() {
  Mat2 m;
  m << 0, 1, 1, 0;
  return m;
}
inline Mat2 pauli_y() {
  Mat2 m;
  m << 0, Complex(0, -1), Complex(0, 1), 0;
  return m;
}
inline Mat2 pauli_z() {
  Mat2 m;
  m << 1, 0, 0, -1;
  return m;
}

// ---------------------------------------------------------------------------
// States

struct TwoQubitState {
  Mat4 matrix;

  // Hermitian within 1e-12, unit trace within 1e-12, eigenvalues >= -1e-10.
  void validate() const {
    if ((matrix - matrix.adjoint()).cwiseAbs().maxCoeff() > 1e-12)
      throw std::invalid_argument("TwoQubitState: not Hermitian");
    if (std::abs(matrix.trace() - Complex(1.0)) > 1e-12)
      throw std::invalid_argument("TwoQubitState: trace != 1");
    Eigen::SelfAdjointEigenSolver<Mat4> es(matrix, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -1e-10)
      throw std::invalid_argument("TwoQubitState: not positive semidefinite");
  }
};

inline Ket4 singlet_ket() {
  Ket4 k;
  k << 0, 1.0 / std::sqrt(2.0), -1.0 / std::sqrt(2.0), 0;
  return k;
}

inline TwoQubitState singlet_state() {
  // |Psi-><Psi-| written out so the entries are exactly +-1/2 (1/sqrt(2)
  // squared in floating point is not).
  Mat4 m = Mat4::Zero();
  m(1, 1) = 0.5;
  m(2, 2) = 0.5;
  m(1, 2) = -0.5;
  m(2, 1) = -0.5;
  return TwoQubitState{m};
}

inline TwoQubitState maximally_mixed() {
  return TwoQubitState{0.25 * Mat4::Identity()};
}

// v |Psi-><Psi-| + (1-v) I/4
inline TwoQubitState werner_state(double v) {
  if (v < 0.0 || v > 1.0)
    throw std::invalid_argument("werner_state: visibility outside [0,1]");
  return TwoQubitState{v * singlet_state().matrix +
                       (1.0 - v) * 0.25 * Mat4::Identity()};
}

inline double fidelity(const TwoQubitState& rho, const Ket4& psi) {
  return std::real((psi.adjoint() * rho.matrix * psi)(0, 0));
}

inline double purity(const TwoQubitState& rho) {
  return std::real((rho.matrix * rho.matrix).trace());
}

// ---------------------------------------------------------------------------
// Observables

struct DichotomicObservable {
  Vec3 bloch;
  std::string label;

  Mat2 op() const {
    return bloch.x() * pauli_x() + bloch.y() * pauli_y() +
           bloch.z() * pauli_z();
  }

  // Outcome bit 0 maps to eigenvalue +1, bit 1 to -1.
  Mat2 projector(int outcome) const {
    double n = bloch.norm();
    if (std::abs(n - 1.0) > 1e-12)
      throw std::invalid_argument("DichotomicObservable: |bloch| != 1");
    double s = (outcome == 0) ? 1.0 : -1.0;
    return 0.5 * (Mat2::Identity() + s * op());
  }
};

inline DichotomicObservable make_observable(const Vec3& bloch,
                                            std::string label) {
  double n = bloch.norm();
  if (n < 1e-12)
    throw std::invalid_argument("make_observable: zero Bloch vector");
  if (std::abs(n - 1.0) > 1e-12)
    throw std::invalid_argument("make_observable: Bloch vector not unit");
  return DichotomicObservable{bloch, std::move(label)};
}

inline DichotomicObservable sigma_z_obs() {
  return make_observable(Vec3(0, 0, 1), "sigma_z");
}
inline DichotomicObservable sigma_x_obs() {
  return make_observable(Vec3(1, 0, 0), "sigma_x");
}
inline DichotomicObservable diag_plus_obs() {
  double s = 1.0 / std::sqrt(2.0);
  return make_observable(Vec3(s, 0, s), "diag_plus");
}
inline DichotomicObservable diag_minus_obs() {
  double s = 1.0 / std::sqrt(2.0);
  return make_observable(Vec3(-s, 0, s), "diag_minus");
}

// HWP at theta before a polarizing splitter measures linear polarization at
// 2*theta: Bloch vector cos(4 theta) z + sin(4 theta) x.
inline DichotomicObservable hwp_to_observable(double theta_deg) {
  double a = 4.0 * theta_deg * M_PI / 180.0;
  Vec3 n(std::sin(a), 0, std::cos(a));
  n /= n.norm();
  return make_observable(n, "hwp_" + std::to_string(theta_deg));
}

// Two settings per slot; the central node has one arm per source.
struct MeasurementPlan {
  std::array<DichotomicObservable, 2> a_settings;
  std::array<DichotomicObservable, 2> b_arm_a_settings;
  std::array<DichotomicObservable, 2> b_arm_c_settings;
  std::array<DichotomicObservable, 2> c_settings;
};

// Peripheral nodes at {(z+x)/sqrt2, (z-x)/sqrt2}, central arms at {z, x}.
// The second peripheral setting is the outcome-relabeled 33.75 deg HWP
// setting; stored with the sign that attains +sqrt(2) directly.
inline MeasurementPlan optimal_plan() {
  return MeasurementPlan{{diag_plus_obs(), diag_minus_obs()},
                         {sigma_z_obs(), sigma_x_obs()},
                         {sigma_z_obs(), sigma_x_obs()},
                         {diag_plus_obs(), diag_minus_obs()}};
}

// ---------------------------------------------------------------------------
// Behaviors

// p(a,b,c | xA,xB,xC) over binary settings and outcomes; b is the central
// node's parity bit.
struct Behavior {
  std::array<double, 64> p{};

  static int idx(int xA, int xB, int xC, int a, int b, int c) {
    return (((((xA << 1) | xB) << 1 | xC) << 1 | a) << 1 | b) << 1 | c;
  }
  double& at(int xA, int xB, int xC, int a, int b, int c) {
    return p[idx(xA, xB, xC, a, b, c)];
  }
  double at(int xA, int xB, int xC, int a, int b, int c) const {
    return p[idx(xA, xB, xC, a, b, c)];
  }

  void validate() const {
    for (double v : p)
      if (v < -1e-12 || v > 1.0 + 1e-12)
        throw std::invalid_argument("Behavior: entry outside [0,1]");
    for (int x = 0; x < 8; ++x) {
      double s = 0;
      for (int o = 0; o < 8; ++o) s += p[x * 8 + o];
      if (std::abs(s - 1.0) > 1e-12)
        throw std::invalid_argument("Behavior: setting not normalized");
    }
  }
};

// p(a,b | x,y) for one link.
struct BipartiteBehavior {
  std::array<double, 16> p{};

  static int idx(int x, int y, int a, int b) {
    return ((((x << 1) | y) << 1 | a) << 1 | b);
  }
  double& at(int x, int y, int a, int b) { return p[idx(x, y, a, b)]; }
  double at(int x, int y, int a, int b) const { return p[idx(x, y, a, b)]; }
};

// Born rule on one source: p(ax, ay | x, y) = tr[(P_ax (x) P_ay) rho].
inline BipartiteBehavior born_pair(
    const TwoQubitState& rho, const std::array<DichotomicObservable, 2>& obsX,
    const std::array<DichotomicObservable, 2>& obsY) {
  BipartiteBehavior beh;
  for (int x = 0; x < 2; ++x)
    for (int y = 0; y < 2; ++y)
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) {
          Mat4 proj = Eigen::kroneckerProduct(obsX[x].projector(a),
                                              obsY[y].projector(b))
                          .eval();
          beh.at(x, y, a, b) = std::real((proj * rho.matrix).trace());
        }
  return beh;
}

// Joint outcome probabilities of one source under fixed observables,
// indexed [aX*2 + aY].
inline std::array<double, 4> pair_probs(const TwoQubitState& rho,
                                        const DichotomicObservable& oX,
                                        const DichotomicObservable& oY) {
  std::array<double, 4> out;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) {
      Mat4 proj =
          Eigen::kroneckerProduct(oX.projector(a), oY.projector(b)).eval();
      out[a * 2 + b] = std::real((proj * rho.matrix).trace());
    }
  return out;
}

// Full tripartite behavior of the network. The global state is rho1 (x) rho2
// with qubit order (A-side of rho1, B-side of rho1, B-side of rho2, C-side
// of rho2), so the trace factorizes across the two sources; the central
// node's bit is the parity of its two arm outcomes.
inline Behavior born_behavior(const TwoQubitState& rho1,
                              const TwoQubitState& rho2,
                              const MeasurementPlan& plan) {
  rho1.validate();
  rho2.validate();
  Behavior beh;
  for (int xA = 0; xA < 2; ++xA)
    for (int xB = 0; xB < 2; ++xB)
      for (int xC = 0; xC < 2; ++xC) {
        auto pab = pair_probs(rho1, plan.a_settings[xA],
                              plan.b_arm_a_settings[xB]);
        auto pbc = pair_probs(rho2, plan.b_arm_c_settings[xB],
                              plan.c_settings[xC]);
        for (int a = 0; a < 2; ++a)
          for (int bA = 0; bA < 2; ++bA)
            for (int bC = 0; bC < 2; ++bC)
              for (int c = 0; c < 2; ++c)
                beh.at(xA, xB, xC, a, bA ^ bC, c) +=
                    pab[a * 2 + bA] * pbc[bC * 2 + c];
      }
  return beh;
}

// ---------------------------------------------------------------------------
// Functionals

inline double correlator(const Behavior& beh, int xA, int xB, int xC) {
  double e = 0;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      for (int c = 0; c < 2; ++c)
        e += ((a + b + c) % 2 ? -1.0 : 1.0) * beh.at(xA, xB, xC, a, b, c);
  return e;
}

inline double pair_correlator(const BipartiteBehavior& beh, int x, int y) {
  double e = 0;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      e += ((a + b) % 2 ? -1.0 : 1.0) * beh.at(x, y, a, b);
  return e;
}

// peripheral_sum: I1, I2 sum over the peripheral inputs (xA, xC) with the
// central input fixed (the form standard in the bilocality literature; it
// attains sqrt(2) on two singlets). literal: summed over (xA, xB) with C's
// input fixed, exactly as the inequality is printed, which tops out at 1 on
// the same strategy.
enum class Convention { peripheral_sum, literal };

struct FunctionalResult {
  double I1;
  double I2;
  double B;
};

inline FunctionalResult biloc_functional(
    const Behavior& beh, Convention conv = Convention::peripheral_sum) {
  double I1 = 0, I2 = 0;
  if (conv == Convention::peripheral_sum) {
    for (int xA = 0; xA < 2; ++xA)
      for (int xC = 0; xC < 2; ++xC) {
        I1 += 0.25 * correlator(beh, xA, 0, xC);
        I2 += 0.25 * ((xA + xC) % 2 ? -1.0 : 1.0) * correlator(beh, xA, 1, xC);
      }
  } else {
    for (int xA = 0; xA < 2; ++xA)
      for (int xB = 0; xB < 2; ++xB) {
        I1 += 0.25 * correlator(beh, xA, xB, 0);
        I2 += 0.25 * ((xA + xB) % 2 ? -1.0 : 1.0) * correlator(beh, xA, xB, 1);
      }
  }
  return FunctionalResult{I1, I2,
                          std::sqrt(std::abs(I1)) + std::sqrt(std::abs(I2))};
}

// |S|; angle conventions flip the sign and the magnitudes are what get
// reported.
inline double chsh(const BipartiteBehavior& beh) {
  double s = 0;
  for (int x = 0; x < 2; ++x)
    for (int y = 0; y < 2; ++y)
      s += ((x * y) % 2 ? -1.0 : 1.0) * pair_correlator(beh, x, y);
  return std::abs(s);
}

// AB marginal of a tripartite behavior against the central parity bit,
// summing out c at fixed xC (no-signaling makes the choice immaterial for
// Born behaviors).
inline BipartiteBehavior ab_marginal(const Behavior& beh, int xC = 0) {
  BipartiteBehavior m;
  for (int xA = 0; xA < 2; ++xA)
    for (int xB = 0; xB < 2; ++xB)
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) {
          double s = 0;
          for (int c = 0; c < 2; ++c) s += beh.at(xA, xB, xC, a, b, c);
          m.at(xA, xB, a, b) = s;
        }
  return m;
}

}  // namespace biloc
