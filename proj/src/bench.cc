#include "fbo/bench.h"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "fbo/errors.h"
#include "fbo/verify.h"

namespace fbo {

void validate(const PowerSystemParams& p) {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw ParameterError(std::string(name) + " must be positive");
    }
  };
  positive(p.two_h, "2H");
  positive(p.t_r, "T_R");
  positive(p.r_g, "R_g");
  positive(p.s_base, "S_base");
  positive(p.f_base, "f_base");
  if (!(p.d >= 0.0)) throw ParameterError("D must be nonnegative");
  if (!(p.f_h >= 0.0)) throw ParameterError("F_H must be nonnegative");
  if (p.tau_ibr.empty()) throw ParameterError("at least one IBR is required");
  for (double t : p.tau_ibr) positive(t, "IBR time constant");
}

TwoTimescalePlant build_power_system(const PowerSystemParams& p) {
  validate(p);
  const std::size_t n = p.n_ibr();
  const double a = 1.0 / p.two_h;
  // Governor feedthrough of the frequency derivative after substituting the
  // swing equation.
  const double k = p.f_h * a / p.r_g;
  const double eps = *std::max_element(p.tau_ibr.begin(), p.tau_ibr.end());

  TwoTimescalePlant::Blocks b;
  b.a11 = Matrix({{0.0 - p.d * a, a},
                  {-1.0 / (p.r_g * p.t_r) + k * p.d, -1.0 / p.t_r - k}});
  b.a12 = Matrix::zeros(2, n);
  b.a21 = Matrix::zeros(n, 2);
  b.a22 = Matrix::zeros(n, n);
  b.b1 = Matrix::zeros(2, n);
  b.b2 = Matrix::zeros(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    b.a12(0, i) = a;
    b.a12(1, i) = -k;
    b.a22(i, i) = -eps / p.tau_ibr[i];
    b.b2(i, i) = eps / p.tau_ibr[i];
  }
  b.e1 = Matrix({{-a}, {k}});
  b.e2 = Matrix::zeros(n, 1);
  b.c1 = Matrix({{1.0, 0.0}});
  b.c2 = Matrix::zeros(1, n);
  return TwoTimescalePlant::make(std::move(b), eps);
}

double mw_to_pu(double mw, double s_base) {
  if (!(s_base > 0.0)) throw ParameterError("S_base must be positive");
  return mw / s_base;
}

namespace {

const std::set<std::string>& scenario_keys() {
  static const std::set<std::string> keys = {
      "two_h",       "d",          "t_r",           "r_g",
      "f_h",         "tau_ibr",    "s_base",        "f_base",
      "disturbance_mw", "t_step",  "y_low",         "y_high",
      "box_mw_low",  "box_mw_high", "penalty_weight", "lqe_q_full",
      "lqe_q_reduced", "lqe_r",    "eta",           "tau",
      "kind",        "t_end",      "h",             "record_stride"};
  return keys;
}

std::string vector_literal(const Vector& v) {
  return format_matrix_literal(Matrix::row(v));
}

}  // namespace

ScenarioConfig scenario_from_config(const KeyValueConfig& cfg) {
  for (const auto& [key, value] : cfg.raw()) {
    if (!scenario_keys().count(key)) {
      throw ParseError("unknown scenario key '" + key + "'");
    }
  }
  ScenarioConfig s;
  auto num = [&](const char* key, double& dst) {
    if (auto v = cfg.find_double(key)) dst = *v;
  };
  auto vec = [&](const char* key, Vector& dst) {
    if (auto v = cfg.find_vector(key)) dst = *v;
  };
  num("two_h", s.params.two_h);
  num("d", s.params.d);
  num("t_r", s.params.t_r);
  num("r_g", s.params.r_g);
  num("f_h", s.params.f_h);
  vec("tau_ibr", s.params.tau_ibr);
  num("s_base", s.params.s_base);
  num("f_base", s.params.f_base);
  num("disturbance_mw", s.disturbance_mw);
  num("t_step", s.t_step);
  num("y_low", s.y_low);
  num("y_high", s.y_high);
  num("box_mw_low", s.box_mw_low);
  num("box_mw_high", s.box_mw_high);
  num("penalty_weight", s.penalty_weight);
  vec("lqe_q_full", s.lqe_q_full);
  vec("lqe_q_reduced", s.lqe_q_reduced);
  num("lqe_r", s.lqe_r);
  if (auto v = cfg.find_double("eta")) s.eta = *v;
  num("tau", s.tau);
  if (auto v = cfg.find_string("kind")) s.kind = parse_controller_kind(*v);
  num("t_end", s.t_end);
  num("h", s.h);
  if (cfg.has("record_stride")) {
    const long stride = cfg.get_int("record_stride");
    if (stride < 1) throw ParseError("record_stride must be at least 1");
    s.record_stride = static_cast<std::size_t>(stride);
  }
  validate(s.params);
  return s;
}

std::string to_config_text(const ScenarioConfig& s) {
  std::ostringstream os;
  auto put = [&](const char* key, double v) {
    os << key << " = " << format_double(v) << '\n';
  };
  put("two_h", s.params.two_h);
  put("d", s.params.d);
  put("t_r", s.params.t_r);
  put("r_g", s.params.r_g);
  put("f_h", s.params.f_h);
  os << "tau_ibr = " << vector_literal(s.params.tau_ibr) << '\n';
  put("s_base", s.params.s_base);
  put("f_base", s.params.f_base);
  put("disturbance_mw", s.disturbance_mw);
  put("t_step", s.t_step);
  put("y_low", s.y_low);
  put("y_high", s.y_high);
  put("box_mw_low", s.box_mw_low);
  put("box_mw_high", s.box_mw_high);
  put("penalty_weight", s.penalty_weight);
  os << "lqe_q_full = " << vector_literal(s.lqe_q_full) << '\n';
  os << "lqe_q_reduced = " << vector_literal(s.lqe_q_reduced) << '\n';
  put("lqe_r", s.lqe_r);
  if (s.eta) put("eta", *s.eta);
  put("tau", s.tau);
  os << "kind = " << to_string(s.kind) << '\n';
  put("t_end", s.t_end);
  put("h", s.h);
  os << "record_stride = " << s.record_stride << '\n';
  return os.str();
}

ClosedLoop loop_for_kind(const BenchSetup& setup, ControllerKind kind,
                         double tau) {
  ClosedLoop loop = setup.loop;
  loop.controller = make_controller_config(setup.eta, tau, kind, setup.eta_max);
  loop.estimator.reset();
  if (kind == ControllerKind::EeFboFull) loop.estimator = setup.full_estimator;
  if (kind == ControllerKind::EeFboReduced) {
    loop.estimator = setup.reduced_estimator;
  }
  return loop;
}

BenchSetup build_setup(const ScenarioConfig& cfg) {
  TwoTimescalePlant tt = build_power_system(cfg.params);
  LtiPlant plant = assemble_full(tt);
  const std::size_t n_ibr = cfg.params.n_ibr();
  const double s_base = cfg.params.s_base;
  BoxSet box(Vector(n_ibr, mw_to_pu(cfg.box_mw_low, s_base)),
             Vector(n_ibr, mw_to_pu(cfg.box_mw_high, s_base)));
  CostModel cost =
      band_cost(SoftBandPenalty{cfg.y_low, cfg.y_high, cfg.penalty_weight});
  DcGains gains = dc_gains(plant);
  const double bound = eta_max(cost, gains.pi_u);
  const double eta = cfg.eta.value_or(0.5 * bound);

  ReducedModel reduced = reduce(tt);
  const Matrix r = Matrix::diagonal(Vector(plant.p(), cfg.lqe_r));
  EstimatorSetup full{augment(plant), {}};
  full.gain = design_lqe(full.model, {Matrix::diagonal(cfg.lqe_q_full), r});
  EstimatorSetup red{augment_reduced(reduced), {}};
  red.gain = design_lqe(red.model, {Matrix::diagonal(cfg.lqe_q_reduced), r});

  ClosedLoop loop{plant, cost, box, gains,
                  make_controller_config(eta, cfg.tau, cfg.kind, bound),
                  std::nullopt};
  BenchSetup s{std::move(tt),
               std::move(plant),
               std::move(reduced),
               std::move(cost),
               std::move(box),
               std::move(gains),
               eta,
               bound,
               {mw_to_pu(cfg.disturbance_mw, s_base)},
               std::move(full),
               std::move(red),
               std::move(loop)};
  s.loop = loop_for_kind(s, cfg.kind, cfg.tau);
  return s;
}

SimConfig sim_config(const ScenarioConfig& cfg) {
  SimConfig sim;
  sim.t_end = cfg.t_end;
  sim.h = cfg.h;
  sim.record_stride = cfg.record_stride;
  sim.disturbance = {cfg.t_step,
                     {mw_to_pu(cfg.disturbance_mw, cfg.params.s_base)}};
  return sim;
}

CaseStudy run_case_study(const ScenarioConfig& cfg) {
  const BenchSetup setup = build_setup(cfg);
  CaseStudy cs;
  cs.cfg = cfg;
  cs.trajectory = simulate(setup.loop, sim_config(cfg));
  cs.stability = classify_stability(cs.trajectory);
  cs.metrics = metrics(cs.trajectory, cfg.y_low, cfg.y_high);
  cs.u_star = solve_offline_optimum(setup.cost, setup.box, setup.gains, setup.w);

  auto& a = cs.audit;
  auto check = [&](bool ok, const std::string& what) {
    a.lines.push_back(std::string(ok ? "[PASS] " : "[FAIL] ") + what);
    return ok;
  };
  char buf[160];
  bool ok = check(cs.stability == StabilityClass::Converged,
                  "classification: " + std::string(to_string(cs.stability)));
  bool feasible = true;
  for (const Vector& u : cs.trajectory.u) feasible &= setup.box.contains(u, 1e-9);
  ok &= check(feasible, "input samples inside the box");
  const double du = norm2(sub(cs.metrics.final_u, cs.u_star));
  std::snprintf(buf, sizeof buf, "||u_final - u*|| = %.3e (<= 1e-5)", du);
  ok &= check(du <= 1e-5, buf);
  if (uses_estimator(cfg.kind)) {
    const double dw = norm2(sub(cs.metrics.final_what, setup.w));
    std::snprintf(buf, sizeof buf, "||what_final - w|| = %.3e (<= 1e-5)", dw);
    ok &= check(dw <= 1e-5, buf);
  }
  for (const auto& w : cs.trajectory.warnings) a.lines.push_back("[WARN] " + w);
  a.pass = ok;
  return cs;
}

}  // namespace fbo
