#pragma once

/// @file
/// Steady-state optimization data: input cost f, output cost g, the box of
/// admissible inputs, and the gradient map phi(u, y) = grad f(u) +
/// Pi_u^T grad g(y) driving every controller.

#include <cstdint>
#include <functional>
#include <optional>

#include "fbo/densemat.h"

namespace fbo {

using GradientFn = std::function<Vector(const Vector&)>;
using ValueFn = std::function<double(const Vector&)>;

/// Gradients plus declared constants: grad f is mu_f strongly monotone and
/// ell_f Lipschitz, grad g is ell_g Lipschitz. Values are optional and only
/// needed for finite-difference validation.
struct CostModel {
  GradientFn grad_f;
  GradientFn grad_g;
  double mu_f = 1.0;
  double ell_f = 1.0;
  double ell_g = 0.0;
  ValueFn f;
  ValueFn g;
};

class BoxSet {
 public:
  /// Throws ParameterError unless lower <= upper componentwise.
  BoxSet(Vector lower, Vector upper);
  static BoxSet unbounded(std::size_t m);

  const Vector& lower() const { return lower_; }
  const Vector& upper() const { return upper_; }
  std::size_t dim() const { return lower_.size(); }
  bool contains(const Vector& u, double slack = 0.0) const;

 private:
  Vector lower_, upper_;
};

/// Quadratic penalty on leaving [y_low, y_high]:
///   g(y) = 0.5 * weight * S(y)^2, grad g(y) = weight * S(y),
/// applied per output channel.
struct SoftBandPenalty {
  double y_low = 0.0;
  double y_high = 0.0;
  double weight = 1.0;
};

Vector project_box(const BoxSet& s, const Vector& u);

/// y - y_low below the band, 0 inside, y - y_high above.
double soft_threshold(const SoftBandPenalty& p, double y);

Vector phi(const CostModel& c, const Matrix& pi_u, const Vector& u,
           const Vector& y_eff);

/// 2 mu_f / (ell_f + ell_g ||Pi_u||_2^2)^2.
double eta_max(const CostModel& c, const Matrix& pi_u);

/// f = 0.5 ||u||^2 with the soft band penalty on every output.
CostModel band_cost(const SoftBandPenalty& penalty);

/// f = 0.5 u^T H u + h^T u, g = 0.5 (y - r)^T G (y - r). H must be symmetric
/// positive definite and G symmetric positive semidefinite; the constants
/// are derived from their extreme eigenvalues.
CostModel quadratic_cost(const Matrix& h_f, const Vector& lin_f,
                         const Matrix& g_g, const Vector& y_ref);

/// Result of sampling the declared constants against random pairs.
struct CostSpotCheck {
  double worst_mu_ratio = 0.0;     // mu_f / empirical monotonicity
  double worst_ell_f_ratio = 0.0;  // empirical Lipschitz / ell_f
  double worst_ell_g_ratio = 0.0;  // empirical Lipschitz / ell_g
  bool ok = false;
};

/// Samples random pairs in [-scale, scale]^dim. A ratio above 1 + 1e-6
/// means the declared constant is contradicted by a sample.
CostSpotCheck spot_check(const CostModel& c, std::size_t m, std::size_t p,
                         int samples, std::uint64_t seed, double scale = 1.0);

}  // namespace fbo
