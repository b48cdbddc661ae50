// Command-line front end for the frequency-control benchmark.
//
//   fbo simulate         one scenario -> trajectory.csv, metrics, audit
//   fbo sweep-tau        classification per tau for one controller kind
//   fbo sweep-eps        epsilon x tau grid for the reduced-model design
//   fbo design-estimator gains, Riccati solutions and certificates
//   fbo verify           property audits on the assembled benchmark
//   fbo show-model       assembled matrices
//
// Every subcommand reads an optional --scenario file (key = value lines)
// and writes its files under --out.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fbo/bench.h"
#include "fbo/errors.h"
#include "fbo/verify.h"

namespace fs = std::filesystem;
using namespace fbo;

namespace {

struct Common {
  std::string scenario;
  std::string out = "fbo_out";
  std::string kind;
  double tau = 0.0;
  double t_end = 0.0;
};

ScenarioConfig load_scenario(const Common& c) {
  ScenarioConfig cfg;
  if (!c.scenario.empty()) {
    cfg = scenario_from_config(KeyValueConfig::load(c.scenario));
  }
  if (!c.kind.empty()) cfg.kind = parse_controller_kind(c.kind);
  if (c.tau > 0.0) cfg.tau = c.tau;
  if (c.t_end > 0.0) cfg.t_end = c.t_end;
  return cfg;
}

std::ofstream open_out(const Common& c, const std::string& name) {
  fs::create_directories(c.out);
  const fs::path path = fs::path(c.out) / name;
  std::ofstream os(path);
  if (!os) throw Error("cannot write " + path.string());
  return os;
}

std::string fmt(double v) { return format_double(v); }

void print_matrix(std::ostream& os, const std::string& name, const Matrix& m) {
  os << name << " (" << m.rows() << "x" << m.cols() << ")\n"
     << to_string(m) << "\n";
}

int cmd_simulate(const Common& c) {
  const ScenarioConfig cfg = load_scenario(c);
  const CaseStudy cs = run_case_study(cfg);
  {
    auto os = open_out(c, "trajectory.csv");
    write_csv(os, cs.trajectory);
  }
  std::ostringstream report;
  report << "kind            " << to_string(cfg.kind) << "\n"
         << "tau             " << fmt(cfg.tau) << "\n"
         << "stability       " << to_string(cs.stability) << "\n"
         << "nadir           " << fmt(cs.metrics.nadir) << "\n"
         << "settling_time   " << fmt(cs.metrics.settling_time) << "\n"
         << "band_violation  " << fmt(cs.metrics.band_violation_integral)
         << "\n";
  for (const auto& line : cs.audit.lines) report << line << "\n";
  std::cout << report.str();
  open_out(c, "audit.txt") << report.str();
  return cs.audit.pass ? 0 : 1;
}

void write_sweep(std::ostream& os, const std::vector<SweepEntry>& entries) {
  os << "epsilon,tau,stability,nadir,settling_time,band_violation,error\n";
  for (const auto& e : entries) {
    os << fmt(e.epsilon) << ',' << fmt(e.tau) << ',' << to_string(e.stability);
    if (e.metrics) {
      os << ',' << fmt(e.metrics->nadir) << ',' << fmt(e.metrics->settling_time)
         << ',' << fmt(e.metrics->band_violation_integral);
    } else {
      os << ",,,";
    }
    os << ',' << '"' << e.error << '"' << '\n';
  }
}

int cmd_sweep_tau(const Common& c, const std::vector<double>& taus) {
  const ScenarioConfig cfg = load_scenario(c);
  const BenchSetup setup = build_setup(cfg);
  const TauSweep sweep = tau_sweep(setup.loop, cfg.kind, taus, sim_config(cfg),
                                   cfg.y_low, cfg.y_high);
  auto os = open_out(c, "sweep_tau.csv");
  write_sweep(os, sweep.entries);
  write_sweep(std::cout, sweep.entries);
  std::cout << "tau_star " << (sweep.tau_star ? fmt(*sweep.tau_star) : "none")
            << "\n";
  for (const auto& e : sweep.entries) {
    if (!e.error.empty()) return 1;
  }
  return 0;
}

int cmd_sweep_eps(const Common& c, const std::vector<double>& eps,
                  const std::vector<double>& taus) {
  ScenarioConfig cfg = load_scenario(c);
  cfg.kind = ControllerKind::EeFboReduced;
  const BenchSetup setup = build_setup(cfg);
  const EpsilonSweep sweep =
      epsilon_sweep(setup.tt, setup.loop, eps, taus, sim_config(cfg),
                    cfg.y_low, cfg.y_high);
  auto os = open_out(c, "sweep_eps.csv");
  write_sweep(os, sweep.entries);
  write_sweep(std::cout, sweep.entries);
  std::cout << "epsilon_frontier "
            << (sweep.epsilon_frontier ? fmt(*sweep.epsilon_frontier) : "none")
            << "\nfirst_failure "
            << (sweep.first_failure ? fmt(*sweep.first_failure) : "none")
            << "\n";
  for (const auto& e : sweep.entries) {
    if (!e.error.empty()) return 1;
  }
  return 0;
}

int cmd_design_estimator(const Common& c) {
  const ScenarioConfig cfg = load_scenario(c);
  const BenchSetup setup = build_setup(cfg);
  std::ostringstream os;
  auto show = [&](const char* name, const EstimatorSetup& e) {
    os << "== " << name << " estimator\n";
    print_matrix(os, "L", e.gain.l);
    print_matrix(os, "P (Riccati)", e.gain.riccati);
    print_matrix(os, "certificate for A_aug + L C_aug", e.gain.certificate);
    os << "riccati residual " << fmt(e.gain.riccati_residual) << " after "
       << e.gain.riccati_steps << " integration steps\n\n";
  };
  show("full", *setup.full_estimator);
  show("reduced", *setup.reduced_estimator);
  std::cout << os.str();
  open_out(c, "estimator.txt") << os.str();
  return 0;
}

int cmd_show_model(const Common& c) {
  const ScenarioConfig cfg = load_scenario(c);
  const BenchSetup setup = build_setup(cfg);
  std::ostringstream os;
  os << "# scenario\n" << to_config_text(cfg) << "\n# two-timescale blocks\n"
     << to_config_text(setup.tt) << "\n# full plant\n"
     << to_config_text(setup.plant) << "\n";
  print_matrix(os, "Pi_u", setup.gains.pi_u);
  print_matrix(os, "Pi_w", setup.gains.pi_w);
  print_matrix(os, "A0", setup.reduced.a0);
  print_matrix(os, "B0", setup.reduced.b0);
  os << "eta_max " << fmt(setup.eta_max) << "\neta " << fmt(setup.eta) << "\n";
  std::cout << os.str();
  open_out(c, "model.txt") << os.str();
  return 0;
}

int cmd_verify(const Common& c) {
  const ScenarioConfig cfg = load_scenario(c);
  std::ostringstream os;
  bool all = true;
  auto check = [&](bool ok, const std::string& what) {
    os << (ok ? "[PASS] " : "[FAIL] ") << what << "\n";
    all &= ok;
  };
  auto guarded = [&](const std::string& what, auto&& fn) {
    try {
      fn();
    } catch (const std::exception& e) {
      check(false, what + ": " + e.what());
    }
  };

  std::optional<BenchSetup> setup;
  guarded("setup", [&] {
    setup = build_setup(cfg);
    check(true, "plant and fast block Hurwitz (certificates attached)");
  });
  if (!setup) {
    std::cout << os.str();
    open_out(c, "audit.txt") << os.str();
    return 1;
  }
  const BenchSetup& s = *setup;

  guarded("DC gains", [&] {
    const DcGains red = reduced_dc_gains(s.reduced);
    const double diff = std::max((red.pi_u - s.gains.pi_u).max_abs(),
                                 (red.pi_w - s.gains.pi_w).max_abs());
    check(diff <= 1e-10, "reduced and full DC gains agree (" + fmt(diff) + ")");
  });
  check(check_nonresonance(s.plant), "non-resonance of the full model");
  check(s.reduced_estimator->model.nonresonant,
        "non-resonance of the reduced model");
  guarded("small-gain blocks", [&] {
    certify_small_gain_blocks(s.tt);
    check(true, "A0 and A22 Lyapunov certificates");
  });
  guarded("full cascade", [&] {
    build_error_cascade(s.full_estimator->model, s.full_estimator->gain,
                        s.gains);
    check(true, "full estimator error matrix Hurwitz");
  });
  guarded("reduced cascade", [&] {
    build_error_cascade(s.tt, s.reduced_estimator->model,
                        s.reduced_estimator->gain, s.gains);
    check(true, "reduced estimator error matrix Hurwitz");
  });

  FiniteDiffOptions fd;
  fd.scale = 4.0 * std::max(std::abs(cfg.y_low), std::abs(cfg.y_high));
  fd.kink_distance = [&](const Vector& y) {
    double d = HUGE_VAL;
    for (double v : y) {
      d = std::min({d, std::abs(v - cfg.y_low), std::abs(v - cfg.y_high)});
    }
    return d;
  };
  const auto fd_g = finite_diff_check(s.cost.g, s.cost.grad_g, 1, fd);
  check(fd_g.max_rel_error <= 1e-6,
        "finite differences of g (" + fmt(fd_g.max_rel_error) + ")");

  guarded("oracle", [&] {
    const Vector u_star =
        solve_offline_optimum(s.cost, s.box, s.gains, s.w);
    const double r = kkt_residual(s.cost, s.box, s.gains, s.w, u_star);
    check(r <= 1e-10, "KKT residual at the offline optimum (" + fmt(r) + ")");
  });

  guarded("contraction", [&] {
    const ContractionAnalysis a = contraction_analysis(s.cost, s.gains, s.eta);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> d(-0.1, 0.1);
    double worst = -HUGE_VAL;
    const Vector zero(s.gains.pi_u.rows(), 0.0);
    for (int k = 0; k < 2000; ++k) {
      Vector u1(s.box.dim()), u2(s.box.dim());
      for (double& v : u1) v = d(rng);
      for (double& v : u2) v = d(rng);
      const Vector t1 = discrete_map(s.cost, s.box, s.gains, s.eta, s.w, u1,
                                     zero, {});
      const Vector t2 = discrete_map(s.cost, s.box, s.gains, s.eta, s.w, u2,
                                     zero, {});
      worst = std::max(worst,
                       norm2(sub(t1, t2)) - a.rho * norm2(sub(u1, u2)));
    }
    check(worst <= 1e-12, "contraction of the projected map (rho = " +
                              fmt(a.rho) + ")");
  });

  std::cout << os.str();
  open_out(c, "audit.txt") << os.str();
  return all ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Feedback-based optimization toolkit: frequency-control benchmark"};
  app.require_subcommand(1);
  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--scenario", common.scenario, "scenario file")
        ->check(CLI::ExistingFile);
    sub->add_option("--out", common.out, "output directory")
        ->capture_default_str();
    sub->add_option("--kind", common.kind,
                    "baseline_fbo | ee_fbo_full | ee_fbo_reduced | "
                    "offline_gradient_flow");
    sub->add_option("--tau", common.tau, "controller time constant [s]");
    sub->add_option("--t-end", common.t_end, "simulation horizon [s]");
  };
  std::vector<double> taus = {1e-3, 1e-2, 1e-1, 1.0, 10.0};
  std::vector<double> eps = {0.03, 0.3, 3.0, 30.0};

  auto* sim = app.add_subcommand("simulate", "run one scenario");
  auto* st = app.add_subcommand("sweep-tau", "classify a list of tau values");
  auto* se = app.add_subcommand("sweep-eps", "epsilon x tau grid");
  auto* de = app.add_subcommand("design-estimator", "print estimator gains");
  auto* ve = app.add_subcommand("verify", "run the property audits");
  auto* sm = app.add_subcommand("show-model", "print assembled matrices");
  for (auto* sub : {sim, st, se, de, ve, sm}) add_common(sub);
  st->add_option("--taus", taus, "tau values")->capture_default_str();
  se->add_option("--taus", taus, "tau values")->capture_default_str();
  se->add_option("--eps", eps, "epsilon values")->capture_default_str();

  CLI11_PARSE(app, argc, argv);
  try {
    if (*sim) return cmd_simulate(common);
    if (*st) return cmd_sweep_tau(common, taus);
    if (*se) return cmd_sweep_eps(common, eps, taus);
    if (*de) return cmd_design_estimator(common);
    if (*ve) return cmd_verify(common);
    if (*sm) return cmd_show_model(common);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
