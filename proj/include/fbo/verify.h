#pragma once

/// @file
/// Independent checks: the offline optimum, KKT residuals, gradient
/// validation by finite differences, the controller ISS bound, the
/// estimation-error cascade and the small-gain Lyapunov blocks.

#include <cstdint>
#include <functional>
#include <optional>

#include "fbo/controller.h"
#include "fbo/estimator.h"
#include "fbo/objective.h"
#include "fbo/plant.h"

namespace fbo {

struct OracleOptions {
  /// Step of the projected iteration; 0 selects 1 / (ell_f + ell_g
  /// ||Pi_u||^2), which shares its fixed point with every smaller step.
  double eta = 0.0;
  double step_tol = 1e-12;
  long max_iter = 1'000'000;
  Vector start;  // empty means zero
};

/// Fixed point of u <- P_U(u - eta (grad f(u) + Pi_u^T grad g(Pi_u u +
/// Pi_w w))). Throws NoConvergence at the iteration cap.
Vector solve_offline_optimum(const CostModel& c, const BoxSet& s,
                             const DcGains& gains, const Vector& w,
                             const OracleOptions& opt = {});

/// ||P_U(u - eta F_w(u)) - u||_2 with eta = 0.5 eta_max.
double kkt_residual(const CostModel& c, const BoxSet& s, const DcGains& gains,
                    const Vector& w, const Vector& u);

struct FiniteDiffOptions {
  double step = 1e-6;
  int samples = 100;
  std::uint64_t seed = 1;
  double scale = 1.0;  // samples drawn uniformly from [-scale, scale]^dim
  /// Distance from a point to the nearest kink of the gradient; points
  /// closer than kink_margin are skipped. Unset means smooth everywhere.
  std::function<double(const Vector&)> kink_distance;
  double kink_margin = 1e-4;
};

struct FiniteDiffResult {
  double max_rel_error = 0.0;
  int evaluated = 0;
  int skipped = 0;
};

/// Central differences of `value` against `grad`. The error of a sample is
/// ||fd - grad||_inf / max(1, ||grad||_inf).
FiniteDiffResult finite_diff_check(const ValueFn& value, const GradientFn& grad,
                                   std::size_t dim,
                                   const FiniteDiffOptions& opt = {});

using Signal = std::function<Vector(double)>;

/// Controller-only run of tau u' = P_U(u - eta pi(u, v, e)) - u.
struct DrivenRun {
  std::vector<double> times;
  std::vector<Vector> u, v, e;
};

struct DrivenSetup {
  CostModel cost;
  BoxSet box;
  DcGains gains;
  double eta = 0.0;
  double tau = 1.0;
  Vector w;
  Matrix e_map;  // p x dim(e); may be empty with e unset
  Signal v;      // unset means zero
  Signal e;      // unset means zero
};

DrivenRun simulate_driven_controller(const DrivenSetup& setup, const Vector& u0,
                                     double t_end, double h);

struct IssAudit {
  bool pass = false;
  /// Smallest bound - ||u - u*|| over the samples; negative on failure.
  double worst_margin = 0.0;
  std::size_t samples = 0;
};

/// Checks at every sample
///   ||u(t) - u*|| <= exp(-(1 - rho) t / (2 tau)) ||u(0) - u*||
///                    + gamma_v sup_[0,t] ||v|| + gamma_e sup_[0,t] ||e||.
IssAudit iss_bound_audit(const ContractionAnalysis& a, double tau,
                         const DrivenRun& run, const Vector& u_star,
                         double slack = 1e-12);

/// Error coordinates zeta = [x - xhat; w - what] evolve as zeta' = a_err
/// zeta and perturb the controller through v = c_err zeta.
struct ErrorCascade {
  Matrix a_err;                // A_aug + L C_aug
  Matrix c_err;                // [C  -Pi_w] or [C0  Q0 - Pi_w]
  std::optional<Matrix> g_err;  // [A12 - L1 C2; -L2 C2], reduced only
  Matrix certificate;
};

/// Throws NotHurwitz when a_err cannot be certified.
ErrorCascade build_error_cascade(const AugmentedModel& m,
                                 const EstimatorGain& g, const DcGains& gains);
/// Reduced-model variant that also assembles the fast-state coupling.
ErrorCascade build_error_cascade(const TwoTimescalePlant& tt,
                                 const AugmentedModel& reduced_model,
                                 const EstimatorGain& g, const DcGains& gains);

struct SmallGainCertificate {
  Matrix p0;
  Matrix p22;
  double alpha0 = 0.0;
  double alpha22 = 0.0;
};

/// P0 and P22 solve the Lyapunov equations of A0 and A22 with Q = I, so
/// alpha0 = alpha22 = 1. The residuals are re-checked with a 1e-9 minor
/// test. Throws NotHurwitz.
SmallGainCertificate certify_small_gain_blocks(const TwoTimescalePlant& tt);

}  // namespace fbo
