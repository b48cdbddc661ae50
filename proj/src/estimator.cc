#include "fbo/estimator.h"

#include <algorithm>
#include <cmath>

#include "fbo/errors.h"

namespace fbo {
namespace {

// Rank of [A E; C 0] on the blocks of an augmented model.
bool augmented_rank_ok(const AugmentedModel& m) {
  const std::size_t n = m.n_state;
  const std::size_t q = m.q;
  const std::size_t p = m.c_aug.rows();
  const Matrix test = Matrix::blocks(
      {{m.a_aug.block(0, 0, n, n), m.a_aug.block(0, n, n, q)},
       {m.c_aug.block(0, 0, p, n), Matrix::zeros(p, q)}});
  return numeric_rank(test) == n + q;
}

Matrix symmetrized(const Matrix& m) {
  return 0.5 * (m + m.transpose());
}

// Low-gain integral observer L = [0; -kappa M^T], where M maps a constant
// disturbance error to the steady output error. For small kappa the error
// matrix is Hurwitz whenever the state block is Hurwitz and M has full
// column rank. Used only to start Newton when the ODE phase stalls.
std::optional<Matrix> low_gain_start(const AugmentedModel& m) {
  const std::size_t n = m.n_state;
  const std::size_t q = m.q;
  const std::size_t p = m.c_aug.rows();
  const Matrix ax = m.a_aug.block(0, 0, n, n);
  const Matrix ex = m.a_aug.block(0, n, n, q);
  const Matrix steady = m.c_aug.block(0, n, p, q) -
                        m.c_aug.block(0, 0, p, n) * lu_solve(ax, ex);
  Matrix l = Matrix::zeros(n + q, p);
  for (double kappa = 1.0; kappa > 1e-12; kappa *= 0.5) {
    l.set_block(n, 0, -kappa * steady.transpose());
    if (hurwitz_check(m.a_aug + l * m.c_aug)) return l;
  }
  return std::nullopt;
}

}  // namespace

Matrix riccati_rhs(const Matrix& a, const Matrix& c, const Matrix& r_inv,
                   const Matrix& q, const Matrix& p) {
  const Matrix pct = p * c.transpose();
  return a * p + p * a.transpose() - pct * r_inv * pct.transpose() + q;
}

EstimatorGain design_lqe(const AugmentedModel& m, const LqeWeights& w,
                         const LqeOptions& opt) {
  const Matrix& a = m.a_aug;
  const Matrix& c = m.c_aug;
  const std::size_t nz = a.rows();
  if (w.q.rows() != nz || w.q.cols() != nz) {
    throw DimensionMismatch("design_lqe: Q must be " + std::to_string(nz) +
                            "x" + std::to_string(nz));
  }
  if (w.r.rows() != c.rows() || w.r.cols() != c.rows()) {
    throw DimensionMismatch("design_lqe: R must match the output count");
  }
  if (!is_positive_definite(w.r)) {
    throw ParameterError("design_lqe: R not positive definite");
  }
  if (!hurwitz_check(a.block(0, 0, m.n_state, m.n_state))) {
    throw NotDetectable("design_lqe: state block of A_aug is not Hurwitz");
  }
  if (!augmented_rank_ok(m)) {
    throw NotDetectable("design_lqe: non-resonance rank condition fails");
  }

  const Matrix r_inv = lu_solve(w.r, Matrix::identity(w.r.rows()));
  const Matrix ct_rinv_c = c.transpose() * r_inv * c;
  const Matrix& q = w.q;
  const double scale = 1.0 + q.max_abs();

  auto rhs = [&](const Matrix& p) { return riccati_rhs(a, c, r_inv, q, p); };
  auto residual_of = [&](const Matrix& p) { return rhs(p).max_abs(); };
  auto gain_of = [&](const Matrix& p) {
    return -(p * c.transpose() * r_inv);
  };

  // Phase 1: forward integration of the Riccati ODE.
  Matrix p = q;
  double res = residual_of(p);
  double h_cap = HUGE_VAL;
  long steps = 0;
  int stalled = 0;
  int halvings = 0;
  double best = res;
  const double handoff = std::max(opt.residual_tol, 1e-6 * scale);
  bool stabilizing = false;
  while (res > handoff && steps < opt.max_steps) {
    const Matrix closed = a - p * ct_rinv_c;
    const double h = std::min(h_cap, 1.0 / (1e-12 + closed.norm_inf()));
    const Matrix k1 = rhs(p);
    const Matrix k2 = rhs(p + (0.5 * h) * k1);
    const Matrix k3 = rhs(p + (0.5 * h) * k2);
    const Matrix k4 = rhs(p + h * k3);
    Matrix next =
        symmetrized(p + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
    ++steps;
    // Newton-Kleinman converges from any stabilizing gain, so hand over as
    // soon as the integrated iterate is one.
    if (steps % 100 == 0 && hurwitz_check(closed)) {
      stabilizing = true;
      break;
    }
    const double next_res = next.all_finite() ? residual_of(next) : HUGE_VAL;
    if (!std::isfinite(next_res) || next_res > 10.0 * res) {
      h_cap = 0.5 * h;
      continue;
    }
    p = std::move(next);
    res = next_res;
    if (res < 0.999 * best) {
      best = res;
      stalled = 0;
      halvings = 0;
    } else if (++stalled > 1000) {
      // Residual stalled: halve the step, and after a few fruitless halvings
      // hand over to the Newton phase.
      if (++halvings > 3) break;
      h_cap = 0.5 * h;
      stalled = 0;
    }
  }

  // Phase 2: Newton-Kleinman. Each step solves
  //   (A + L C) P + P (A + L C)^T = -(Q + L R L^T).
  // The residual need not fall monotonically from a distant start, so the
  // iteration follows its own iterates and keeps the best one seen.
  Matrix best_p = p;
  double best_res = res;
  std::optional<Matrix> start;
  if (!stabilizing && !hurwitz_check(a - p * ct_rinv_c)) start = low_gain_start(m);
  Matrix cur = p;
  int no_gain = 0;
  for (int it = 0; it < opt.max_newton && best_res > opt.residual_tol; ++it) {
    Matrix l = gain_of(cur);
    if (start) {
      l = std::move(*start);
      start.reset();
    }
    const Matrix closed = a + l * c;
    if (!hurwitz_check(closed)) break;
    try {
      cur = symmetrized(
          lyapunov_solve(closed.transpose(), q + l * w.r * l.transpose()));
    } catch (const SingularMatrix&) {
      break;
    }
    const double cur_res = residual_of(cur);
    if (cur_res < best_res) {
      no_gain = cur_res < 0.5 * best_res ? 0 : no_gain + 1;
      best_p = cur;
      best_res = cur_res;
    } else {
      ++no_gain;
    }
    // From a stabilizing start P decreases monotonically, so only a stall
    // near the round-off floor ends the iteration early.
    if (no_gain >= 3 && best_res <= opt.accept_tol * scale) break;
  }

  if (!(best_res <= opt.accept_tol * scale)) {
    throw NoConvergence("design_lqe: Riccati residual " +
                        std::to_string(best_res) + " after " +
                        std::to_string(steps) + " integration steps");
  }

  EstimatorGain g;
  g.l = gain_of(best_p);
  g.riccati = best_p;
  g.riccati_residual = best_res;
  g.riccati_steps = steps;
  HurwitzResult cert = hurwitz_check(a + g.l * c);
  if (!cert) {
    throw NotDetectable(
        "design_lqe: A_aug + L C_aug could not be certified Hurwitz");
  }
  g.certificate = std::move(*cert.certificate);
  return g;
}

EstimatorDerivative estimator_step_derivative(const AugmentedModel& m,
                                              const EstimatorGain& g,
                                              const EstimatorState& s,
                                              const Vector& u,
                                              const Vector& y) {
  if (s.xhat.size() != m.n_state || s.what.size() != m.q) {
    throw DimensionMismatch("estimator state does not match the model");
  }
  if (u.size() != m.b_aug.cols() || y.size() != m.c_aug.rows()) {
    throw DimensionMismatch("estimator input/output size mismatch");
  }
  const Vector z = concat({s.xhat, s.what});
  EstimatorDerivative d;
  d.yhat = add(m.c_aug * z, m.d_aug * u);
  const Vector innovation = sub(y, d.yhat);
  const Vector dz = sub(add(m.a_aug * z, m.b_aug * u), g.l * innovation);
  d.dxhat.assign(dz.begin(), dz.begin() + m.n_state);
  d.dwhat.assign(dz.begin() + m.n_state, dz.end());
  return d;
}

Vector steady_output_prediction(const DcGains& gains, const Vector& u,
                                const Vector& what) {
  if (gains.pi_u.cols() != u.size() || gains.pi_w.cols() != what.size()) {
    throw DimensionMismatch("steady_output_prediction: size mismatch");
  }
  return add(gains.pi_u * u, gains.pi_w * what);
}

}  // namespace fbo
