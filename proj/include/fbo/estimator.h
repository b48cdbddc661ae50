#pragma once

/// @file
/// Observer for the disturbance-augmented model.
///
///   zhat' = A_aug zhat + B_aug u - L (y - yhat),  yhat = C_aug zhat + D_aug u
///
/// with zhat = [xhat; what]. Note the sign: the innovation enters with a
/// minus, so the estimation error evolves under A_aug + L C_aug and the
/// Kalman gain K = P C^T R^-1 maps to L = -K.

#include "fbo/densemat.h"
#include "fbo/plant.h"

namespace fbo {

struct LqeWeights {
  Matrix q;  // process weight, augmented-state sized, symmetric PSD
  Matrix r;  // measurement weight, symmetric PD
};

struct EstimatorGain {
  Matrix l;            // (n_est + q) x p
  Matrix riccati;      // stabilizing solution P
  Matrix certificate;  // Lyapunov PD matrix for A_aug + L C_aug
  double riccati_residual = 0.0;
  long riccati_steps = 0;
};

struct EstimatorState {
  Vector xhat;
  Vector what;
};

struct LqeOptions {
  double residual_tol = 1e-10;  // target on max |P'|
  /// Largest accepted max |P'|, relative to 1 + max |Q|.
  double accept_tol = 1e-8;
  long max_steps = 200'000;  // integration budget before the Newton phase
  int max_newton = 50;
};

/// Filter Riccati equation
///   P' = A P + P A^T - P C^T R^-1 C P + Q,  P(0) = Q,
/// integrated with RK4 until the iterate is stabilizing (or settles), then
/// refined by Newton-Kleinman steps (each a Lyapunov solve) until
/// max |P'| < residual_tol or the residual reaches its round-off floor. If
/// the integration budget runs out first, Newton starts from a low-gain
/// integral observer instead.
/// Throws NotDetectable when the model fails the non-resonance rank test or
/// A_aug + L C_aug cannot be certified Hurwitz, NoConvergence when the final
/// residual exceeds accept_tol * (1 + max |Q|).
EstimatorGain design_lqe(const AugmentedModel& m, const LqeWeights& w,
                         const LqeOptions& opt = {});

/// A P + P A^T - P C^T R^-1 C P + Q.
Matrix riccati_rhs(const Matrix& a, const Matrix& c, const Matrix& r_inv,
                   const Matrix& q, const Matrix& p);

struct EstimatorDerivative {
  Vector dxhat;
  Vector dwhat;
  Vector yhat;
};

EstimatorDerivative estimator_step_derivative(const AugmentedModel& m,
                                              const EstimatorGain& g,
                                              const EstimatorState& s,
                                              const Vector& u,
                                              const Vector& y);

/// ybar_hat = Pi_u u + Pi_w what.
Vector steady_output_prediction(const DcGains& gains, const Vector& u,
                                const Vector& what);

}  // namespace fbo
