#pragma once

/// @file
/// Closed-loop simulation of plant, optional observer and controller.
///
/// The integrated state is stacked as (x, xhat, what, u); the observer block
/// is present whenever an estimator is attached. Only the estimator-enhanced
/// kinds feed its correction to the controller; for the other kinds the
/// observer runs alongside without affecting the loop. Integration is
/// fixed-step classical RK4 and the correction is recomputed at every stage.

#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "fbo/controller.h"
#include "fbo/estimator.h"
#include "fbo/objective.h"
#include "fbo/plant.h"

namespace fbo {

/// w(t) = 0 before t_step and `magnitude` from t_step on.
struct StepDisturbance {
  double t_step = 0.0;
  Vector magnitude;

  Vector at(double t) const;
};

struct SimConfig {
  double t_end = 60.0;
  double h = 1e-3;
  StepDisturbance disturbance;
  std::size_t record_stride = 1;
};

struct EstimatorSetup {
  AugmentedModel model;
  EstimatorGain gain;
};

struct ClosedLoop {
  LtiPlant plant;  // the physical plant being simulated
  CostModel cost;
  BoxSet box;
  DcGains gains;  // model information available to the controller
  ControllerConfig controller;
  std::optional<EstimatorSetup> estimator;
};

/// Empty vectors mean zero.
struct InitialConditions {
  Vector x;
  Vector xhat;
  Vector what;
  Vector u;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<Vector> x, u, y;
  std::vector<Vector> xhat, what, yhat, ybar_hat;  // empty without observer
  double t_step = 0.0;
  double h_used = 0.0;
  bool diverged = false;
  std::string divergence_note;
  std::vector<std::string> warnings;

  std::size_t size() const { return times.size(); }
};

using Derivative = std::function<Vector(double, const Vector&)>;

/// One classical RK4 step. Throws NonFiniteState if the result is not
/// finite.
Vector rk4_step(const Derivative& f, double t, const Vector& state, double h);

/// Right-hand side of the stacked closed loop.
Derivative closed_loop_derivative(const ClosedLoop& loop,
                                  const StepDisturbance& disturbance);

/// Step size actually used: h, reduced to tau/20 when tau < 0.02.
double effective_step(const ClosedLoop& loop, double h);

/// Integrates the closed loop. Non-finite states end the run early and mark
/// the trajectory as diverged instead of throwing.
Trajectory simulate(const ClosedLoop& loop, const SimConfig& sim,
                    const InitialConditions& init = {});

struct Metrics {
  double nadir = 0.0;
  double settling_time = 0.0;
  double band_violation_integral = 0.0;
  Vector final_u;
  Vector final_y;
  Vector final_what;
};

/// Nadir is the smallest output sample over all channels; settling time is
/// the last sample instant at which some channel lies outside the band (0 if
/// never); the violation integral is the trapezoid rule over the summed
/// distance to the band.
Metrics metrics(const Trajectory& tr, double y_low, double y_high);

enum class StabilityClass { Converged, Oscillating, Diverged };
std::string_view to_string(StabilityClass c);

struct ClassifyOptions {
  double tail_fraction = 0.25;
  double y_peak_to_peak = 1e-6;
  double u_peak_to_peak = 1e-6;
  double growth_factor = 10.0;
  double growth_floor = 1e-6;
};

StabilityClass classify_stability(const Trajectory& tr,
                                  const ClassifyOptions& opt = {});

struct SweepEntry {
  double tau = 0.0;
  double epsilon = 0.0;
  StabilityClass stability = StabilityClass::Diverged;
  std::optional<Metrics> metrics;
  std::string error;  // non-empty when the run threw
};

struct TauSweep {
  ControllerKind kind = ControllerKind::BaselineFbo;
  std::vector<SweepEntry> entries;  // in input order
  /// Smallest tau such that it and every larger tau in the list converged.
  std::optional<double> tau_star;
};

/// Runs `base` once per tau with its controller switched to `kind`. Runs may
/// execute concurrently; failures are recorded per entry.
TauSweep tau_sweep(const ClosedLoop& base, ControllerKind kind,
                   const std::vector<double>& taus, const SimConfig& sim,
                   double y_low, double y_high,
                   const ClassifyOptions& classify = {});

struct EpsilonSweep {
  std::vector<SweepEntry> entries;  // epsilon-major, tau-minor
  /// Largest epsilon below which every grid point converged.
  std::optional<double> epsilon_frontier;
  /// Smallest epsilon with a non-converged grid point.
  std::optional<double> first_failure;
};

/// Rebuilds the physical plant from `tt` at every epsilon and keeps the rest
/// of `base` (in particular its reduced-model observer) fixed.
EpsilonSweep epsilon_sweep(const TwoTimescalePlant& tt, const ClosedLoop& base,
                           const std::vector<double>& epsilons,
                           const std::vector<double>& taus,
                           const SimConfig& sim, double y_low, double y_high,
                           const ClassifyOptions& classify = {});

/// CSV with a header row: time, then x*, u*, y* and the observer channels.
/// Numbers use 17 significant digits.
void write_csv(std::ostream& os, const Trajectory& tr);

}  // namespace fbo
