#pragma once

/// @file
/// Single-area frequency-control benchmark: a reheat-governed synchronous
/// machine with N inverter-based resources (IBRs) that act as the
/// controllable inputs.
///
///   2H w'   = -D w + Pm - Pu + sum_i Pibr_i
///   T_R Pm' = -Pm - (w + T_R F_H w') / R_g
///   tau_i Pibr_i' = -Pibr_i + u_i
///
/// The governor's w' is replaced by the swing equation before assembly so
/// the model is explicit. Slow states (w, Pm), fast states Pibr scaled by
/// epsilon = max tau_i, disturbance Pu, output w. Everything is per-unit on
/// (s_base, f_base).

#include <optional>
#include <string>
#include <vector>

#include "fbo/config.h"
#include "fbo/controller.h"
#include "fbo/estimator.h"
#include "fbo/objective.h"
#include "fbo/plant.h"
#include "fbo/sim.h"

namespace fbo {

struct PowerSystemParams {
  double two_h = 26.3083;  // s
  double d = 0.0;          // p.u.
  double t_r = 10.0;       // s
  double r_g = 0.05;       // p.u.
  double f_h = 0.64;
  Vector tau_ibr = {0.3, 0.3};  // s, one per IBR
  double s_base = 567.5;        // MW
  double f_base = 60.0;         // Hz

  std::size_t n_ibr() const { return tau_ibr.size(); }
};

/// Throws ParameterError unless every parameter is positive (d >= 0) and
/// there is at least one IBR.
void validate(const PowerSystemParams& p);

TwoTimescalePlant build_power_system(const PowerSystemParams& p);

/// Throws ParameterError unless s_base > 0.
double mw_to_pu(double mw, double s_base);

struct ScenarioConfig {
  PowerSystemParams params;
  double disturbance_mw = 40.0;
  double t_step = 5.0;
  double y_low = -0.01;  // p.u. frequency
  double y_high = 0.01;
  double box_mw_low = -20.0;  // per IBR
  double box_mw_high = 20.0;
  double penalty_weight = 1e5;
  Vector lqe_q_full = {1e-2, 1e-2, 1e2, 1e2, 1e6};
  Vector lqe_q_reduced = {1e-2, 1e-2, 1e6};
  double lqe_r = 1.0;
  std::optional<double> eta;  // unset: 0.5 eta_max
  double tau = 0.05;
  ControllerKind kind = ControllerKind::EeFboFull;
  double t_end = 300.0;
  double h = 1e-3;
  std::size_t record_stride = 10;
};

/// Reads a key/value scenario; every key is optional and defaults to the
/// value in ScenarioConfig. Unknown keys are rejected.
ScenarioConfig scenario_from_config(const KeyValueConfig& cfg);
std::string to_config_text(const ScenarioConfig& s);

/// Everything derived from a scenario before simulation.
struct BenchSetup {
  TwoTimescalePlant tt;
  LtiPlant plant;
  ReducedModel reduced;
  CostModel cost;
  BoxSet box;
  DcGains gains;
  double eta = 0.0;
  double eta_max = 0.0;
  Vector w;  // disturbance after the step, p.u.
  std::optional<EstimatorSetup> full_estimator;
  std::optional<EstimatorSetup> reduced_estimator;
  ClosedLoop loop;  // configured for the scenario's kind and tau
};

/// Builds the plant, costs and box, designs both estimators and assembles
/// the closed loop for cfg.kind.
BenchSetup build_setup(const ScenarioConfig& cfg);

/// Closed loop of `setup` switched to another controller kind.
ClosedLoop loop_for_kind(const BenchSetup& setup, ControllerKind kind,
                         double tau);

SimConfig sim_config(const ScenarioConfig& cfg);

struct AuditReport {
  bool pass = false;
  std::vector<std::string> lines;  // one "[PASS]"/"[FAIL]" line per check
};

struct CaseStudy {
  ScenarioConfig cfg;
  Trajectory trajectory;
  Metrics metrics;
  StabilityClass stability = StabilityClass::Diverged;
  Vector u_star;
  AuditReport audit;
};

/// Simulates the scenario and audits the end state: the run converged, u
/// stayed in the box, u_final matches the offline optimum within 1e-5 and,
/// for estimator kinds, what_final matches w within 1e-5.
CaseStudy run_case_study(const ScenarioConfig& cfg);

}  // namespace fbo
