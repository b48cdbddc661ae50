#include "fbo/sim.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <future>
#include <limits>

#include "fbo/errors.h"

namespace fbo {
namespace {

struct Layout {
  std::size_t n = 0;   // plant states
  std::size_t ne = 0;  // observer model states
  std::size_t q = 0;   // observer disturbance states
  std::size_t m = 0;   // inputs

  std::size_t xhat0() const { return n; }
  std::size_t what0() const { return n + ne; }
  std::size_t u0() const { return n + ne + q; }
  std::size_t total() const { return n + ne + q + m; }
};

Layout layout_of(const ClosedLoop& loop) {
  Layout l;
  l.n = loop.plant.n();
  l.m = loop.plant.m();
  if (loop.estimator) {
    l.ne = loop.estimator->model.n_state;
    l.q = loop.estimator->model.q;
  }
  return l;
}

Vector slice(const Vector& s, std::size_t from, std::size_t count) {
  return Vector(s.begin() + from, s.begin() + from + count);
}

void validate(const ClosedLoop& loop) {
  const auto& p = loop.plant;
  if (loop.box.dim() != p.m()) {
    throw DimensionMismatch("closed loop: box dimension != plant inputs");
  }
  if (loop.gains.pi_u.rows() != p.p() || loop.gains.pi_u.cols() != p.m()) {
    throw DimensionMismatch("closed loop: Pi_u shape does not match plant");
  }
  if (uses_estimator(loop.controller.kind) && !loop.estimator) {
    throw MissingEstimate(std::string(to_string(loop.controller.kind)) +
                          " requires an estimator");
  }
  if (loop.estimator) {
    const auto& m = loop.estimator->model;
    if (m.b_aug.cols() != p.m() || m.c_aug.rows() != p.p()) {
      throw DimensionMismatch("closed loop: observer model does not match plant");
    }
    if (loop.gains.pi_w.cols() != m.q) {
      throw DimensionMismatch("closed loop: Pi_w columns != observer q");
    }
  }
}

struct StageOutputs {
  Vector y;
  Vector yhat;
  Vector ybar_hat;
};

// Evaluates the stacked derivative for a fixed disturbance value. `out`
// optionally receives the output channels.
Vector stacked_derivative(const ClosedLoop& loop, const Layout& lay,
                          const Vector& w, const Vector& s,
                          StageOutputs* out = nullptr) {
  const Vector x = slice(s, 0, lay.n);
  const Vector u = slice(s, lay.u0(), lay.m);
  const auto& plant = loop.plant;
  Vector y = plant.c() * x;
  Vector dx = add(add(plant.a() * x, plant.b() * u), plant.e() * w);

  Vector ds(lay.total(), 0.0);
  std::copy(dx.begin(), dx.end(), ds.begin());

  // An attached observer always runs; only the EE kinds feed its
  // correction to the controller.
  std::optional<Vector> yhat;
  std::optional<Vector> ybar_hat;
  if (loop.estimator) {
    const EstimatorState est{slice(s, lay.xhat0(), lay.ne),
                             slice(s, lay.what0(), lay.q)};
    EstimatorDerivative d = estimator_step_derivative(
        loop.estimator->model, loop.estimator->gain, est, u, y);
    std::copy(d.dxhat.begin(), d.dxhat.end(), ds.begin() + lay.xhat0());
    std::copy(d.dwhat.begin(), d.dwhat.end(), ds.begin() + lay.what0());
    ybar_hat = steady_output_prediction(loop.gains, u, est.what);
    yhat = std::move(d.yhat);
    if (out) {
      out->yhat = *yhat;
      out->ybar_hat = *ybar_hat;
    }
  }
  const Vector y_in =
      loop.controller.kind == ControllerKind::OfflineGradientFlow
          ? add(loop.gains.pi_u * u, loop.gains.pi_w * w)
          : y;
  const Vector du = controller_derivative(loop.controller, loop.cost, loop.box,
                                          loop.gains, u, y_in, yhat, ybar_hat);
  std::copy(du.begin(), du.end(), ds.begin() + lay.u0());
  if (out) out->y = std::move(y);
  return ds;
}

void record(const ClosedLoop& loop, const Layout& lay, const Vector& w,
            double t, const Vector& s, Trajectory& tr) {
  StageOutputs o;
  stacked_derivative(loop, lay, w, s, &o);
  tr.times.push_back(t);
  tr.x.push_back(slice(s, 0, lay.n));
  tr.u.push_back(slice(s, lay.u0(), lay.m));
  tr.y.push_back(std::move(o.y));
  if (loop.estimator) {
    tr.xhat.push_back(slice(s, lay.xhat0(), lay.ne));
    tr.what.push_back(slice(s, lay.what0(), lay.q));
    tr.yhat.push_back(std::move(o.yhat));
    tr.ybar_hat.push_back(std::move(o.ybar_hat));
  }
}

// Same right-hand side as stacked_derivative with the affine part folded
// into two dense matrices and no per-call allocation for it:
//   d[x; z]/dt = lin * s + lin_w * w,   y_eff = ymap * s + ymap_w * w.
class FastSystem {
 public:
  FastSystem(const ClosedLoop& loop, const Layout& lay)
      : loop_(loop), lay_(lay) {
    const auto& p = loop.plant;
    const std::size_t nl = lay.u0();
    const std::size_t total = lay.total();
    lin_ = Matrix::zeros(nl, total);
    lin_w_ = Matrix::zeros(nl, p.q());
    ymap_ = Matrix::zeros(p.p(), total);
    ymap_w_ = Matrix::zeros(p.p(), p.q());
    lin_.set_block(0, 0, p.a());
    lin_.set_block(0, lay.u0(), p.b());
    lin_w_.set_block(0, 0, p.e());
    if (loop.estimator) {
      const auto& m = loop.estimator->model;
      const Matrix& l = loop.estimator->gain.l;
      // z' = A_aug z + B_aug u - L (C x - C_aug z - D_aug u)
      lin_.set_block(lay.xhat0(), 0, -(l * p.c()));
      lin_.set_block(lay.xhat0(), lay.xhat0(), m.a_aug + l * m.c_aug);
      lin_.set_block(lay.xhat0(), lay.u0(), m.b_aug + l * m.d_aug);
    }
    if (uses_estimator(loop.controller.kind)) {
      const auto& m = loop.estimator->model;
      // y - (C_aug z + D_aug u) + Pi_u u + Pi_w what
      ymap_.set_block(0, 0, p.c());
      Matrix cz = -m.c_aug;
      cz.set_block(0, lay.ne, cz.block(0, lay.ne, p.p(), lay.q) +
                                  loop.gains.pi_w);
      ymap_.set_block(0, lay.xhat0(), cz);
      ymap_.set_block(0, lay.u0(), loop.gains.pi_u - m.d_aug);
    } else if (loop.controller.kind == ControllerKind::OfflineGradientFlow) {
      ymap_.set_block(0, lay.u0(), loop.gains.pi_u);
      ymap_w_ = loop.gains.pi_w;
    } else {
      ymap_.set_block(0, 0, p.c());
    }
    plain_ = loop.controller;
    plain_.kind = ControllerKind::BaselineFbo;
    y_eff_.resize(p.p());
    u_.resize(lay.m);
  }

  void eval(const Vector& s, const Vector& w, Vector& ds) {
    affine(lin_, lin_w_, s, w, ds.data());
    affine(ymap_, ymap_w_, s, w, y_eff_.data());
    std::copy(s.begin() + lay_.u0(), s.end(), u_.begin());
    const Vector du = controller_derivative(plain_, loop_.cost, loop_.box,
                                            loop_.gains, u_, y_eff_);
    std::copy(du.begin(), du.end(), ds.begin() + lay_.u0());
  }

 private:
  static void affine(const Matrix& m, const Matrix& mw, const Vector& s,
                     const Vector& w, double* out) {
    for (std::size_t i = 0; i < m.rows(); ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < m.cols(); ++j) acc += m(i, j) * s[j];
      for (std::size_t j = 0; j < mw.cols(); ++j) acc += mw(i, j) * w[j];
      out[i] = acc;
    }
  }

  const ClosedLoop& loop_;
  Layout lay_;
  Matrix lin_, lin_w_, ymap_, ymap_w_;
  ControllerConfig plain_;
  Vector y_eff_, u_;
};

// Classical RK4 in place with caller-owned stage buffers.
struct Rk4Buffers {
  Vector k1, k2, k3, k4, tmp;
  explicit Rk4Buffers(std::size_t n) : k1(n), k2(n), k3(n), k4(n), tmp(n) {}
};

void rk4_in_place(FastSystem& f, const Vector& w, double h, Vector& s,
                  Rk4Buffers& b, double t) {
  const std::size_t n = s.size();
  f.eval(s, w, b.k1);
  for (std::size_t i = 0; i < n; ++i) b.tmp[i] = s[i] + 0.5 * h * b.k1[i];
  f.eval(b.tmp, w, b.k2);
  for (std::size_t i = 0; i < n; ++i) b.tmp[i] = s[i] + 0.5 * h * b.k2[i];
  f.eval(b.tmp, w, b.k3);
  for (std::size_t i = 0; i < n; ++i) b.tmp[i] = s[i] + h * b.k3[i];
  f.eval(b.tmp, w, b.k4);
  for (std::size_t i = 0; i < n; ++i) {
    s[i] += h / 6.0 * (b.k1[i] + 2.0 * b.k2[i] + 2.0 * b.k3[i] + b.k4[i]);
    if (!std::isfinite(s[i])) {
      throw NonFiniteState("rk4_step: component " + std::to_string(i) +
                           " became non-finite at t = " + std::to_string(t));
    }
  }
}

double peak_to_peak(const std::vector<Vector>& series, std::size_t from) {
  double worst = 0.0;
  if (from >= series.size()) return 0.0;
  for (std::size_t ch = 0; ch < series[from].size(); ++ch) {
    double lo = HUGE_VAL;
    double hi = -HUGE_VAL;
    for (std::size_t k = from; k < series.size(); ++k) {
      lo = std::min(lo, series[k][ch]);
      hi = std::max(hi, series[k][ch]);
    }
    worst = std::max(worst, hi - lo);
  }
  return worst;
}

}  // namespace

Vector StepDisturbance::at(double t) const {
  if (t >= t_step) return magnitude;
  return Vector(magnitude.size(), 0.0);
}

Vector rk4_step(const Derivative& f, double t, const Vector& state, double h) {
  if (!(h > 0.0)) throw ParameterError("rk4_step: h must be positive");
  const Vector k1 = f(t, state);
  const Vector k2 = f(t + 0.5 * h, add(state, scaled(0.5 * h, k1)));
  const Vector k3 = f(t + 0.5 * h, add(state, scaled(0.5 * h, k2)));
  const Vector k4 = f(t + h, add(state, scaled(h, k3)));
  Vector next(state.size());
  for (std::size_t i = 0; i < state.size(); ++i) {
    next[i] = state[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    if (!std::isfinite(next[i])) {
      throw NonFiniteState("rk4_step: component " + std::to_string(i) +
                           " became non-finite at t = " + std::to_string(t));
    }
  }
  return next;
}

Derivative closed_loop_derivative(const ClosedLoop& loop,
                                  const StepDisturbance& disturbance) {
  validate(loop);
  const Layout lay = layout_of(loop);
  return [loop, lay, disturbance](double t, const Vector& s) {
    return stacked_derivative(loop, lay, disturbance.at(t), s);
  };
}

double effective_step(const ClosedLoop& loop, double h) {
  if (loop.controller.tau < 0.02) return std::min(h, loop.controller.tau / 20.0);
  return h;
}

Trajectory simulate(const ClosedLoop& loop, const SimConfig& sim,
                    const InitialConditions& init) {
  validate(loop);
  if (!(sim.h > 0.0) || !(sim.t_end > 0.0)) {
    throw ParameterError("simulate: h and t_end must be positive");
  }
  if (sim.disturbance.t_step < 0.0) {
    throw ParameterError("simulate: t_step must be nonnegative");
  }
  if (sim.disturbance.magnitude.size() != loop.plant.q()) {
    throw DimensionMismatch("simulate: disturbance size != plant q");
  }
  const Layout lay = layout_of(loop);
  Vector s(lay.total(), 0.0);
  auto place = [&](const Vector& v, std::size_t at, std::size_t count,
                   const char* name) {
    if (v.empty()) return;
    if (v.size() != count) {
      throw DimensionMismatch(std::string("simulate: initial ") + name +
                              " has the wrong size");
    }
    std::copy(v.begin(), v.end(), s.begin() + at);
  };
  place(init.x, 0, lay.n, "x");
  place(init.xhat, lay.xhat0(), lay.ne, "xhat");
  place(init.what, lay.what0(), lay.q, "what");
  place(init.u, lay.u0(), lay.m, "u");

  const double h = effective_step(loop, sim.h);
  Trajectory tr;
  tr.t_step = sim.disturbance.t_step;
  tr.h_used = h;

  // Explicit integrator guard.
  double stiff = std::max(loop.plant.a().norm_inf(), 1.0 / loop.controller.tau);
  if (loop.estimator) {
    const auto& e = *loop.estimator;
    stiff = std::max(stiff, (e.model.a_aug + e.gain.l * e.model.c_aug).norm_inf());
  }
  if (h * stiff >= 2.0) {
    tr.warnings.push_back("step size " + std::to_string(h) +
                          " may be too large for the fastest closed-loop rate " +
                          std::to_string(stiff));
  }
  if (loop.controller.eta_warning) {
    tr.warnings.push_back("eta is at or above the step-size bound");
  }

  // Two segments split at the disturbance step so the step falls on the
  // grid; within a segment w is constant.
  std::vector<std::pair<double, double>> segments;
  const double t_step = sim.disturbance.t_step;
  if (t_step > 0.0 && t_step < sim.t_end) {
    segments = {{0.0, t_step}, {t_step, sim.t_end}};
  } else {
    segments = {{0.0, sim.t_end}};
  }
  const std::size_t stride = std::max<std::size_t>(sim.record_stride, 1);
  record(loop, lay, sim.disturbance.at(0.0), 0.0, s, tr);
  std::size_t global_step = 0;
  FastSystem fast(loop, lay);
  Rk4Buffers buffers(lay.total());
  try {
    for (std::size_t seg = 0; seg < segments.size(); ++seg) {
      const auto [t0, t1] = segments[seg];
      const bool final_segment = seg + 1 == segments.size();
      const Vector w = sim.disturbance.at(0.5 * (t0 + t1));
      const auto steps =
          static_cast<std::size_t>(std::ceil((t1 - t0) / h - 1e-9));
      const double hs = (t1 - t0) / static_cast<double>(steps);
      for (std::size_t k = 0; k < steps; ++k) {
        const double t = t0 + hs * static_cast<double>(k);
        rk4_in_place(fast, w, hs, s, buffers, t);
        ++global_step;
        const bool last = k + 1 == steps;
        if (global_step % stride == 0 || (last && final_segment)) {
          record(loop, lay, w, last ? t1 : t + hs, s, tr);
        }
      }
    }
  } catch (const NonFiniteState& e) {
    tr.diverged = true;
    tr.divergence_note = e.what();
  }
  return tr;
}

Metrics metrics(const Trajectory& tr, double y_low, double y_high) {
  Metrics m;
  if (tr.size() == 0) throw ParameterError("metrics: empty trajectory");
  m.nadir = HUGE_VAL;
  double prev_dist = 0.0;
  for (std::size_t k = 0; k < tr.size(); ++k) {
    double dist = 0.0;
    for (double y : tr.y[k]) {
      m.nadir = std::min(m.nadir, y);
      dist += std::max({0.0, y_low - y, y - y_high});
    }
    if (dist > 0.0) m.settling_time = tr.times[k];
    if (k > 0) {
      m.band_violation_integral +=
          0.5 * (dist + prev_dist) * (tr.times[k] - tr.times[k - 1]);
    }
    prev_dist = dist;
  }
  m.final_u = tr.u.back();
  m.final_y = tr.y.back();
  if (!tr.what.empty()) m.final_what = tr.what.back();
  return m;
}

std::string_view to_string(StabilityClass c) {
  switch (c) {
    case StabilityClass::Converged:
      return "converged";
    case StabilityClass::Oscillating:
      return "oscillating";
    case StabilityClass::Diverged:
      return "diverged";
  }
  return "unknown";
}

StabilityClass classify_stability(const Trajectory& tr,
                                  const ClassifyOptions& opt) {
  if (tr.diverged || tr.size() < 2) return StabilityClass::Diverged;
  const std::size_t n = tr.size();
  auto state_norm = [&](std::size_t k) {
    return std::sqrt(dot(tr.x[k], tr.x[k]) + dot(tr.u[k], tr.u[k]));
  };
  // Growth over the final half of the post-disturbance window.
  std::size_t post = 0;
  while (post < n && tr.times[post] < tr.t_step) ++post;
  if (post >= n) post = 0;
  const std::size_t mid = post + (n - post) / 2;
  const double final_norm = state_norm(n - 1);
  if (final_norm > opt.growth_floor &&
      final_norm > opt.growth_factor * state_norm(mid)) {
    return StabilityClass::Diverged;
  }
  const auto tail = static_cast<std::size_t>(
      std::floor(static_cast<double>(n) * (1.0 - opt.tail_fraction)));
  const std::size_t from = std::max(tail, post);
  if (peak_to_peak(tr.y, from) < opt.y_peak_to_peak &&
      peak_to_peak(tr.u, from) < opt.u_peak_to_peak) {
    return StabilityClass::Converged;
  }
  return StabilityClass::Oscillating;
}

namespace {

SweepEntry run_entry(const ClosedLoop& loop, const SimConfig& sim,
                     double y_low, double y_high,
                     const ClassifyOptions& classify) {
  SweepEntry e;
  e.tau = loop.controller.tau;
  try {
    const Trajectory tr = simulate(loop, sim);
    e.stability = classify_stability(tr, classify);
    e.metrics = metrics(tr, y_low, y_high);
  } catch (const std::exception& ex) {
    e.stability = StabilityClass::Diverged;
    e.error = ex.what();
  }
  return e;
}

}  // namespace

TauSweep tau_sweep(const ClosedLoop& base, ControllerKind kind,
                   const std::vector<double>& taus, const SimConfig& sim,
                   double y_low, double y_high,
                   const ClassifyOptions& classify) {
  TauSweep out;
  out.kind = kind;
  std::vector<std::future<SweepEntry>> jobs;
  for (double tau : taus) {
    if (!(tau > 0.0)) throw ParameterError("tau_sweep: tau must be positive");
    ClosedLoop loop = base;
    loop.controller.kind = kind;
    loop.controller.tau = tau;
    jobs.push_back(std::async(std::launch::async, [=] {
      return run_entry(loop, sim, y_low, y_high, classify);
    }));
  }
  for (auto& j : jobs) out.entries.push_back(j.get());

  std::vector<std::size_t> order(taus.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return taus[a] > taus[b]; });
  for (std::size_t i : order) {
    if (out.entries[i].stability != StabilityClass::Converged) break;
    out.tau_star = taus[i];
  }
  return out;
}

EpsilonSweep epsilon_sweep(const TwoTimescalePlant& tt, const ClosedLoop& base,
                           const std::vector<double>& epsilons,
                           const std::vector<double>& taus,
                           const SimConfig& sim, double y_low, double y_high,
                           const ClassifyOptions& classify) {
  EpsilonSweep out;
  std::vector<std::future<SweepEntry>> jobs;
  for (double eps : epsilons) {
    if (!(eps > 0.0)) throw ParameterError("epsilon_sweep: eps must be positive");
    std::optional<ClosedLoop> loop;
    std::string build_error;
    try {
      loop = base;
      loop->plant = assemble_full(tt.with_epsilon(eps));
    } catch (const std::exception& ex) {
      loop.reset();
      build_error = ex.what();
    }
    for (double tau : taus) {
      if (!loop) {
        std::promise<SweepEntry> p;
        SweepEntry e;
        e.tau = tau;
        e.epsilon = eps;
        e.error = build_error;
        p.set_value(e);
        jobs.push_back(p.get_future());
        continue;
      }
      ClosedLoop run = *loop;
      run.controller.tau = tau;
      jobs.push_back(std::async(std::launch::async, [=] {
        SweepEntry e = run_entry(run, sim, y_low, y_high, classify);
        e.epsilon = eps;
        return e;
      }));
    }
  }
  for (auto& j : jobs) out.entries.push_back(j.get());

  std::vector<double> sorted = epsilons;
  std::sort(sorted.begin(), sorted.end());
  for (double eps : sorted) {
    bool all_ok = true;
    for (const auto& e : out.entries) {
      if (e.epsilon == eps && e.stability != StabilityClass::Converged) {
        all_ok = false;
      }
    }
    if (!all_ok) {
      out.first_failure = eps;
      break;
    }
    out.epsilon_frontier = eps;
  }
  return out;
}

void write_csv(std::ostream& os, const Trajectory& tr) {
  auto header = [&](const char* name, const std::vector<Vector>& series) {
    if (series.empty()) return;
    for (std::size_t i = 0; i < series.front().size(); ++i) {
      os << ',' << name << i;
    }
  };
  os << "time";
  header("x", tr.x);
  header("u", tr.u);
  header("y", tr.y);
  header("xhat", tr.xhat);
  header("what", tr.what);
  header("yhat", tr.yhat);
  header("ybar_hat", tr.ybar_hat);
  os << '\n';
  char buf[40];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    os << buf;
  };
  for (std::size_t k = 0; k < tr.size(); ++k) {
    put(tr.times[k]);
    for (const auto* series : {&tr.x, &tr.u, &tr.y, &tr.xhat, &tr.what,
                               &tr.yhat, &tr.ybar_hat}) {
      if (series->empty()) continue;
      for (double v : (*series)[k]) {
        os << ',';
        put(v);
      }
    }
    os << '\n';
  }
}

}  // namespace fbo
