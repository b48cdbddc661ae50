#include "fbo/verify.h"

#include <algorithm>
#include <cmath>
#include <random>

#include "fbo/errors.h"
#include "fbo/sim.h"

namespace fbo {
namespace {

Vector steady_gradient(const CostModel& c, const DcGains& gains,
                       const Vector& w, const Vector& u) {
  const Vector y = add(gains.pi_u * u, gains.pi_w * w);
  return phi(c, gains.pi_u, u, y);
}

void check_oracle_inputs(const BoxSet& s, const DcGains& gains,
                         const Vector& w) {
  if (gains.pi_u.cols() != s.dim()) {
    throw DimensionMismatch("oracle: Pi_u columns != box dimension");
  }
  if (gains.pi_w.cols() != w.size() || gains.pi_w.rows() != gains.pi_u.rows()) {
    throw DimensionMismatch("oracle: Pi_w does not match w or Pi_u");
  }
}

}  // namespace

Vector solve_offline_optimum(const CostModel& c, const BoxSet& s,
                             const DcGains& gains, const Vector& w,
                             const OracleOptions& opt) {
  check_oracle_inputs(s, gains, w);
  double eta = opt.eta;
  if (eta == 0.0) {
    const double nrm = spectral_norm(gains.pi_u);
    eta = 1.0 / (c.ell_f + c.ell_g * nrm * nrm);
  }
  if (!(eta > 0.0)) throw InvalidStep("oracle: eta must be positive");
  Vector u = opt.start.empty() ? Vector(s.dim(), 0.0) : opt.start;
  if (u.size() != s.dim()) {
    throw DimensionMismatch("oracle: start has the wrong size");
  }
  u = project_box(s, u);
  for (long it = 0; it < opt.max_iter; ++it) {
    Vector next =
        project_box(s, sub(u, scaled(eta, steady_gradient(c, gains, w, u))));
    const double step = norm2(sub(next, u));
    u = std::move(next);
    if (step < opt.step_tol) return u;
  }
  throw NoConvergence("oracle: no fixed point after " +
                      std::to_string(opt.max_iter) + " iterations");
}

double kkt_residual(const CostModel& c, const BoxSet& s, const DcGains& gains,
                    const Vector& w, const Vector& u) {
  check_oracle_inputs(s, gains, w);
  const double eta = 0.5 * eta_max(c, gains.pi_u);
  const Vector t =
      project_box(s, sub(u, scaled(eta, steady_gradient(c, gains, w, u))));
  return norm2(sub(t, u));
}

FiniteDiffResult finite_diff_check(const ValueFn& value, const GradientFn& grad,
                                   std::size_t dim,
                                   const FiniteDiffOptions& opt) {
  if (!value || !grad) {
    throw ParameterError("finite_diff_check: value and gradient required");
  }
  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> dist(-opt.scale, opt.scale);
  FiniteDiffResult r;
  const double h = opt.step;
  for (int k = 0; k < opt.samples; ++k) {
    Vector x(dim);
    for (double& xi : x) xi = dist(rng);
    // A central difference touches x +- h along each axis, so a kink within
    // the margin spoils it.
    if (opt.kink_distance && opt.kink_distance(x) < opt.kink_margin) {
      ++r.skipped;
      continue;
    }
    const Vector g = grad(x);
    if (g.size() != dim) {
      throw DimensionMismatch("finite_diff_check: gradient size != dim");
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
      Vector xp = x;
      Vector xm = x;
      xp[i] += h;
      xm[i] -= h;
      const double fd = (value(xp) - value(xm)) / (2.0 * h);
      worst = std::max(worst, std::abs(fd - g[i]));
    }
    r.max_rel_error =
        std::max(r.max_rel_error, worst / std::max(1.0, norm_inf(g)));
    ++r.evaluated;
  }
  return r;
}

DrivenRun simulate_driven_controller(const DrivenSetup& setup, const Vector& u0,
                                     double t_end, double h) {
  if (!(h > 0.0) || !(t_end > 0.0)) {
    throw ParameterError("driven controller: h and t_end must be positive");
  }
  if (!(setup.tau > 0.0)) throw ParameterError("driven controller: tau <= 0");
  const std::size_t p = setup.gains.pi_u.rows();
  auto v_at = [&](double t) {
    return setup.v ? setup.v(t) : Vector(p, 0.0);
  };
  auto e_at = [&](double t) {
    return setup.e ? setup.e(t) : Vector(setup.e_map.cols(), 0.0);
  };
  const Derivative f = [&](double t, const Vector& u) {
    const Vector t_map = discrete_map(setup.cost, setup.box, setup.gains,
                                      setup.eta, setup.w, u, v_at(t), e_at(t),
                                      setup.e_map);
    return scaled(1.0 / setup.tau, sub(t_map, u));
  };
  DrivenRun run;
  const auto steps = static_cast<std::size_t>(std::ceil(t_end / h - 1e-9));
  const double hs = t_end / static_cast<double>(steps);
  Vector u = u0;
  auto push = [&](double t) {
    run.times.push_back(t);
    run.u.push_back(u);
    run.v.push_back(v_at(t));
    run.e.push_back(e_at(t));
  };
  push(0.0);
  for (std::size_t k = 0; k < steps; ++k) {
    const double t = hs * static_cast<double>(k);
    u = rk4_step(f, t, u, hs);
    push(hs * static_cast<double>(k + 1));
  }
  return run;
}

IssAudit iss_bound_audit(const ContractionAnalysis& a, double tau,
                         const DrivenRun& run, const Vector& u_star,
                         double slack) {
  IssAudit out;
  out.samples = run.times.size();
  if (run.times.empty()) {
    out.pass = true;
    return out;
  }
  const double rate = 0.5 * (1.0 - a.rho) / tau;
  const double d0 = norm2(sub(run.u.front(), u_star));
  double sup_v = 0.0;
  double sup_e = 0.0;
  out.worst_margin = HUGE_VAL;
  for (std::size_t k = 0; k < run.times.size(); ++k) {
    sup_v = std::max(sup_v, norm2(run.v[k]));
    if (!run.e.empty() && !run.e[k].empty()) {
      sup_e = std::max(sup_e, norm2(run.e[k]));
    }
    const double bound = std::exp(-rate * run.times[k]) * d0 +
                         a.gamma_v_to_u * sup_v + a.gamma_e_to_u * sup_e;
    out.worst_margin =
        std::min(out.worst_margin, bound - norm2(sub(run.u[k], u_star)));
  }
  out.pass = out.worst_margin >= -slack;
  return out;
}

ErrorCascade build_error_cascade(const AugmentedModel& m,
                                 const EstimatorGain& g, const DcGains& gains) {
  const std::size_t p = m.c_aug.rows();
  if (g.l.rows() != m.a_aug.rows() || g.l.cols() != p) {
    throw DimensionMismatch("error cascade: gain shape does not match model");
  }
  if (gains.pi_w.rows() != p || gains.pi_w.cols() != m.q) {
    throw DimensionMismatch("error cascade: Pi_w shape does not match model");
  }
  ErrorCascade ec;
  ec.a_err = m.a_aug + g.l * m.c_aug;
  ec.c_err = m.c_aug;
  ec.c_err.set_block(0, m.n_state,
                     m.c_aug.block(0, m.n_state, p, m.q) - gains.pi_w);
  HurwitzResult h = hurwitz_check(ec.a_err);
  if (!h) throw NotHurwitz("error cascade: A_aug + L C_aug is not Hurwitz");
  ec.certificate = std::move(*h.certificate);
  return ec;
}

ErrorCascade build_error_cascade(const TwoTimescalePlant& tt,
                                 const AugmentedModel& reduced_model,
                                 const EstimatorGain& g, const DcGains& gains) {
  if (reduced_model.n_state != tt.n1()) {
    throw DimensionMismatch("error cascade: model is not the reduced one");
  }
  ErrorCascade ec = build_error_cascade(reduced_model, g, gains);
  const auto& b = tt.blocks();
  const std::size_t n1 = tt.n1();
  const Matrix l1 = g.l.block(0, 0, n1, g.l.cols());
  const Matrix l2 = g.l.block(n1, 0, reduced_model.q, g.l.cols());
  ec.g_err = Matrix::blocks({{b.a12 - l1 * b.c2}, {-(l2 * b.c2)}});
  return ec;
}

SmallGainCertificate certify_small_gain_blocks(const TwoTimescalePlant& tt) {
  auto certify = [](const Matrix& a, const char* name) {
    const Matrix id = Matrix::identity(a.rows());
    Matrix p;
    try {
      p = lyapunov_solve(a, id);
    } catch (const SingularMatrix&) {
      throw NotHurwitz(std::string(name) + " has a Lyapunov-singular spectrum");
    }
    if (!is_positive_definite(p)) {
      throw NotHurwitz(std::string(name) + " is not Hurwitz");
    }
    // P A + A^T P + alpha I must be negative semidefinite with alpha = 1.
    const Matrix residual = p * a + a.transpose() * p + id;
    if (!is_negative_semidefinite(residual, 1e-9)) {
      throw NotHurwitz(std::string(name) + " residual check failed");
    }
    return p;
  };
  SmallGainCertificate c;
  c.p0 = certify(reduce(tt).a0, "A0");
  c.p22 = certify(tt.blocks().a22, "A22");
  c.alpha0 = 1.0;
  c.alpha22 = 1.0;
  return c;
}

}  // namespace fbo
