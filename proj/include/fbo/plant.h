#pragma once

/// @file
/// State-space plant descriptions.
///
///   x' = A x + B u + E w,   y = C x
///
/// with n states, m inputs, p outputs and q constant disturbances. The
/// two-timescale variant splits x into slow x1 and fast x2 with the fast
/// derivative scaled by epsilon.

#include <optional>
#include <string>

#include "fbo/config.h"
#include "fbo/densemat.h"

namespace fbo {

/// Steady-state maps y_bar = pi_u u + pi_w w.
struct DcGains {
  Matrix pi_u;
  Matrix pi_w;
};

class LtiPlant {
 public:
  /// Validates dimensions and that A is Hurwitz; keeps the Lyapunov
  /// certificate. Throws NotHurwitz otherwise.
  static LtiPlant require_stable(Matrix a, Matrix b, Matrix c, Matrix e);
  /// Dimension checks only. For deliberately unstable experiments.
  static LtiPlant unchecked(Matrix a, Matrix b, Matrix c, Matrix e);

  const Matrix& a() const { return a_; }
  const Matrix& b() const { return b_; }
  const Matrix& c() const { return c_; }
  const Matrix& e() const { return e_; }
  std::size_t n() const { return a_.rows(); }
  std::size_t m() const { return b_.cols(); }
  std::size_t p() const { return c_.rows(); }
  std::size_t q() const { return e_.cols(); }
  const std::optional<Matrix>& stability_certificate() const {
    return certificate_;
  }

 private:
  LtiPlant(Matrix a, Matrix b, Matrix c, Matrix e);

  Matrix a_, b_, c_, e_;
  std::optional<Matrix> certificate_;
};

class TwoTimescalePlant {
 public:
  struct Blocks {
    Matrix a11, a12, a21, a22;
    Matrix b1, b2;
    Matrix e1, e2;
    Matrix c1, c2;
  };

  /// Checks dimensions, that A22 is Hurwitz and that
  /// blkdiag(I, eps I)^{-1} A is Hurwitz.
  static TwoTimescalePlant make(Blocks blocks, double epsilon);
  static TwoTimescalePlant unchecked(Blocks blocks, double epsilon);

  const Blocks& blocks() const { return blocks_; }
  double epsilon() const { return epsilon_; }
  std::size_t n1() const { return blocks_.a11.rows(); }
  std::size_t n2() const { return blocks_.a22.rows(); }
  std::size_t m() const { return blocks_.b1.cols(); }
  std::size_t p() const { return blocks_.c1.rows(); }
  std::size_t q() const { return blocks_.e1.cols(); }

  /// Same blocks, different epsilon, validated again.
  TwoTimescalePlant with_epsilon(double epsilon) const;

 private:
  TwoTimescalePlant(Blocks blocks, double epsilon);

  Blocks blocks_;
  double epsilon_;
};

struct ReducedModel {
  Matrix a0, b0, c0, d0, e0, q0;

  std::size_t n1() const { return a0.rows(); }
  std::size_t m() const { return b0.cols(); }
  std::size_t p() const { return c0.rows(); }
  std::size_t q() const { return e0.cols(); }
};

/// Plant with the constant disturbance appended as extra integrator states:
///   [x; w]' = A_aug [x; w] + B_aug u,   y = C_aug [x; w] + D_aug u.
struct AugmentedModel {
  Matrix a_aug, b_aug, c_aug, d_aug;
  std::size_t n_state = 0;  // n (full) or n1 (reduced)
  std::size_t q = 0;
  /// rank [A E; C 0] == n_state + q, evaluated on assembly.
  bool nonresonant = false;
};

DcGains dc_gains(const LtiPlant& p);

/// rank [A E; C 0] == n + q.
bool check_nonresonance(const LtiPlant& p);

/// Quasi-steady reduction of the fast block. The input matrix keeps the
/// A12 A22^{-1} B2 correction so that the reduced DC gain matches the full
/// one.
ReducedModel reduce(const TwoTimescalePlant& tt);

DcGains reduced_dc_gains(const ReducedModel& r);

/// Standard-form plant with fast rows divided by epsilon.
LtiPlant assemble_full(const TwoTimescalePlant& tt);

/// x2_bar = -A22^{-1}(A21 x1 + B2 u + E2 w).
Vector quasi_steady_fast_state(const TwoTimescalePlant& tt, const Vector& x1,
                               const Vector& u, const Vector& w);

AugmentedModel augment(const LtiPlant& p);
AugmentedModel augment_reduced(const ReducedModel& r);

/// Reads keys A, B, C, E (matrix literals).
LtiPlant lti_plant_from_config(const KeyValueConfig& cfg, bool require_stable);
/// Reads keys A11 ... C2 and epsilon.
TwoTimescalePlant two_timescale_from_config(const KeyValueConfig& cfg);

std::string to_config_text(const LtiPlant& p);
std::string to_config_text(const TwoTimescalePlant& tt);

}  // namespace fbo
