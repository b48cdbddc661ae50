#pragma once

/// @file
/// Projected-gradient controllers
///
///   tau u' = P_U(u - eta * phi(u, y_eff)) - u
///
/// which differ only in the output signal y_eff they feed to phi:
///   - BaselineFbo: the measurement y.
///   - EeFboFull / EeFboReduced: y - (yhat - ybar_hat), the measurement
///     corrected by the observer's transient prediction.
///   - OfflineGradientFlow: the steady-state output Pi_u u + Pi_w w, which the
///     caller passes in place of y.

#include <optional>
#include <string_view>

#include "fbo/densemat.h"
#include "fbo/objective.h"
#include "fbo/plant.h"

namespace fbo {

enum class ControllerKind { BaselineFbo, EeFboFull, EeFboReduced, OfflineGradientFlow };

std::string_view to_string(ControllerKind kind);
ControllerKind parse_controller_kind(std::string_view text);
inline bool uses_estimator(ControllerKind k) {
  return k == ControllerKind::EeFboFull || k == ControllerKind::EeFboReduced;
}

struct ControllerConfig {
  double eta = 0.0;
  double tau = 1.0;
  ControllerKind kind = ControllerKind::BaselineFbo;
  /// Set when eta >= eta_max; the stability guarantees no longer apply.
  bool eta_warning = false;
};

/// Validates eta > 0, tau > 0 and sets the warning flag against eta_bound.
ControllerConfig make_controller_config(double eta, double tau,
                                        ControllerKind kind,
                                        double eta_bound);

Vector controller_derivative(const ControllerConfig& cfg, const CostModel& c,
                             const BoxSet& s, const DcGains& gains,
                             const Vector& u, const Vector& y,
                             const std::optional<Vector>& yhat = std::nullopt,
                             const std::optional<Vector>& ybar_hat =
                                 std::nullopt);

/// Constants of the perturbed projected map. mu and big_l bound the
/// monotonicity and Lipschitz constant of u -> phi; l_prime_v and l_prime_e
/// bound its sensitivity to the two perturbation channels.
struct ContractionAnalysis {
  double eta = 0.0;
  double mu = 0.0;
  double big_l = 0.0;
  double l_prime_v = 0.0;
  double l_prime_e = 0.0;
  double rho = 1.0;
  double gamma_v_to_u = 0.0;
  double gamma_e_to_u = 0.0;
};

/// mu = mu_f, L = ell_f + ell_g ||Pi_u||^2, L'_v = ell_g ||Pi_u||^2,
/// L'_e = ell_g ||Pi_u||^2 * e_map_norm,
/// rho = sqrt(1 - 2 eta mu + eta^2 L^2), gamma = eta L' / (1 - rho).
/// Throws InvalidStep unless 0 < rho < 1.
ContractionAnalysis contraction_analysis(const CostModel& c,
                                         const DcGains& gains, double eta,
                                         double e_map_norm = 0.0);

/// Perturbed steady-state gradient map
///   T(u) = P_U(u - eta * pi(u, v, e)),
///   pi(u, v, e) = grad f(u) + Pi_u^T grad g(Pi_u u + Pi_w w + v + e_map e).
/// e_map may be empty when e is empty.
Vector discrete_map(const CostModel& c, const BoxSet& s, const DcGains& gains,
                    double eta, const Vector& w, const Vector& u,
                    const Vector& v, const Vector& e,
                    const Matrix& e_map = {});

}  // namespace fbo
