#include "fbo/controller.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "fbo/errors.h"

namespace fbo {

std::string_view to_string(ControllerKind kind) {
  switch (kind) {
    case ControllerKind::BaselineFbo:
      return "baseline_fbo";
    case ControllerKind::EeFboFull:
      return "ee_fbo_full";
    case ControllerKind::EeFboReduced:
      return "ee_fbo_reduced";
    case ControllerKind::OfflineGradientFlow:
      return "offline_gradient_flow";
  }
  return "unknown";
}

ControllerKind parse_controller_kind(std::string_view text) {
  for (ControllerKind k :
       {ControllerKind::BaselineFbo, ControllerKind::EeFboFull,
        ControllerKind::EeFboReduced, ControllerKind::OfflineGradientFlow}) {
    if (text == to_string(k)) return k;
  }
  throw ParseError("unknown controller kind '" + std::string(text) + "'");
}

ControllerConfig make_controller_config(double eta, double tau,
                                        ControllerKind kind,
                                        double eta_bound) {
  if (!(eta > 0.0)) throw ParameterError("eta must be positive");
  if (!(tau > 0.0)) throw ParameterError("tau must be positive");
  return {eta, tau, kind, eta >= eta_bound};
}

Vector controller_derivative(const ControllerConfig& cfg, const CostModel& c,
                             const BoxSet& s, const DcGains& gains,
                             const Vector& u, const Vector& y,
                             const std::optional<Vector>& yhat,
                             const std::optional<Vector>& ybar_hat) {
  Vector y_eff = y;
  if (uses_estimator(cfg.kind)) {
    if (!yhat || !ybar_hat) {
      throw MissingEstimate(std::string(to_string(cfg.kind)) +
                            " needs yhat and ybar_hat");
    }
    y_eff = sub(y, sub(*yhat, *ybar_hat));
  }
  const Vector step = sub(u, scaled(cfg.eta, phi(c, gains.pi_u, u, y_eff)));
  return scaled(1.0 / cfg.tau, sub(project_box(s, step), u));
}

ContractionAnalysis contraction_analysis(const CostModel& c,
                                         const DcGains& gains, double eta,
                                         double e_map_norm) {
  const double nrm = spectral_norm(gains.pi_u);
  ContractionAnalysis a;
  a.eta = eta;
  a.mu = c.mu_f;
  a.big_l = c.ell_f + c.ell_g * nrm * nrm;
  a.l_prime_v = c.ell_g * nrm * nrm;
  a.l_prime_e = c.ell_g * nrm * nrm * e_map_norm;
  const double rho_sq = 1.0 - 2.0 * eta * a.mu + eta * eta * a.big_l * a.big_l;
  if (!(eta > 0.0) || !(rho_sq < 1.0)) {
    throw InvalidStep("eta = " + std::to_string(eta) +
                      " is outside (0, 2 mu / L^2)");
  }
  // rho_sq >= (1 - eta mu)^2 >= 0 whenever mu <= L.
  a.rho = std::sqrt(std::max(rho_sq, 0.0));
  a.gamma_v_to_u = eta * a.l_prime_v / (1.0 - a.rho);
  a.gamma_e_to_u = eta * a.l_prime_e / (1.0 - a.rho);
  return a;
}

Vector discrete_map(const CostModel& c, const BoxSet& s, const DcGains& gains,
                    double eta, const Vector& w, const Vector& u,
                    const Vector& v, const Vector& e, const Matrix& e_map) {
  Vector y = add(add(gains.pi_u * u, gains.pi_w * w), v);
  if (!e.empty()) y = add(y, e_map * e);
  const Vector step = sub(u, scaled(eta, phi(c, gains.pi_u, u, y)));
  return project_box(s, step);
}

}  // namespace fbo
