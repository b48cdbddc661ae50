#include "fbo/objective.h"

#include <algorithm>
#include <cmath>
#include <random>

#include "fbo/errors.h"

namespace fbo {

BoxSet::BoxSet(Vector lower, Vector upper)
    : lower_(std::move(lower)), upper_(std::move(upper)) {
  if (lower_.size() != upper_.size()) {
    throw DimensionMismatch("BoxSet: bound sizes differ");
  }
  for (std::size_t i = 0; i < lower_.size(); ++i) {
    if (!(lower_[i] <= upper_[i])) {
      throw ParameterError("BoxSet: lower > upper at index " +
                           std::to_string(i));
    }
  }
}

BoxSet BoxSet::unbounded(std::size_t m) {
  return BoxSet(Vector(m, -HUGE_VAL), Vector(m, HUGE_VAL));
}

bool BoxSet::contains(const Vector& u, double slack) const {
  if (u.size() != dim()) return false;
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (u[i] < lower_[i] - slack || u[i] > upper_[i] + slack) return false;
  }
  return true;
}

Vector project_box(const BoxSet& s, const Vector& u) {
  if (u.size() != s.dim()) {
    throw DimensionMismatch("project_box: got " + std::to_string(u.size()) +
                            " components for a box of dimension " +
                            std::to_string(s.dim()));
  }
  Vector out(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    out[i] = std::clamp(u[i], s.lower()[i], s.upper()[i]);
  }
  return out;
}

double soft_threshold(const SoftBandPenalty& p, double y) {
  if (y < p.y_low) return y - p.y_low;
  if (y > p.y_high) return y - p.y_high;
  return 0.0;
}

Vector phi(const CostModel& c, const Matrix& pi_u, const Vector& u,
           const Vector& y_eff) {
  if (pi_u.cols() != u.size() || pi_u.rows() != y_eff.size()) {
    throw DimensionMismatch("phi: Pi_u is " + std::to_string(pi_u.rows()) +
                            "x" + std::to_string(pi_u.cols()) + ", u has " +
                            std::to_string(u.size()) + ", y has " +
                            std::to_string(y_eff.size()));
  }
  const Vector gf = c.grad_f(u);
  const Vector gg = c.grad_g(y_eff);
  Vector out = gf;
  for (std::size_t j = 0; j < pi_u.cols(); ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < pi_u.rows(); ++i) s += pi_u(i, j) * gg[i];
    out[j] += s;
  }
  return out;
}

double eta_max(const CostModel& c, const Matrix& pi_u) {
  const double nrm = spectral_norm(pi_u);
  const double big_l = c.ell_f + c.ell_g * nrm * nrm;
  return 2.0 * c.mu_f / (big_l * big_l);
}

CostModel band_cost(const SoftBandPenalty& penalty) {
  if (!(penalty.y_low <= penalty.y_high)) {
    throw ParameterError("band: y_low > y_high");
  }
  if (!(penalty.weight > 0.0)) throw ParameterError("band: weight <= 0");
  CostModel c;
  c.grad_f = [](const Vector& u) { return u; };
  c.f = [](const Vector& u) { return 0.5 * dot(u, u); };
  c.grad_g = [penalty](const Vector& y) {
    Vector g(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
      g[i] = penalty.weight * soft_threshold(penalty, y[i]);
    }
    return g;
  };
  c.g = [penalty](const Vector& y) {
    double s = 0.0;
    for (double yi : y) {
      const double t = soft_threshold(penalty, yi);
      s += t * t;
    }
    return 0.5 * penalty.weight * s;
  };
  c.mu_f = 1.0;
  c.ell_f = 1.0;
  c.ell_g = penalty.weight;
  return c;
}

CostModel quadratic_cost(const Matrix& h_f, const Vector& lin_f,
                         const Matrix& g_g, const Vector& y_ref) {
  if (!h_f.is_square() || h_f.rows() != lin_f.size()) {
    throw DimensionMismatch("quadratic_cost: H and h disagree");
  }
  if (!g_g.is_square() || g_g.rows() != y_ref.size()) {
    throw DimensionMismatch("quadratic_cost: G and r disagree");
  }
  if (!is_positive_definite(h_f)) {
    throw ParameterError("quadratic_cost: H not positive definite");
  }
  CostModel c;
  c.grad_f = [h_f, lin_f](const Vector& u) { return add(h_f * u, lin_f); };
  c.f = [h_f, lin_f](const Vector& u) {
    return 0.5 * dot(u, h_f * u) + dot(lin_f, u);
  };
  c.grad_g = [g_g, y_ref](const Vector& y) { return g_g * sub(y, y_ref); };
  c.g = [g_g, y_ref](const Vector& y) {
    const Vector d = sub(y, y_ref);
    return 0.5 * dot(d, g_g * d);
  };
  // For symmetric PD H: lambda_max = ||H||_2, lambda_min = 1/||H^-1||_2.
  c.ell_f = spectral_norm(h_f);
  c.mu_f = 1.0 / spectral_norm(lu_solve(h_f, Matrix::identity(h_f.rows())));
  c.ell_g = g_g.max_abs() == 0.0 ? 0.0 : spectral_norm(g_g);
  return c;
}

CostSpotCheck spot_check(const CostModel& c, std::size_t m, std::size_t p,
                         int samples, std::uint64_t seed, double scale) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-scale, scale);
  auto draw = [&](std::size_t n) {
    Vector v(n);
    for (double& x : v) x = dist(rng);
    return v;
  };
  CostSpotCheck out;
  for (int k = 0; k < samples; ++k) {
    const Vector u1 = draw(m);
    const Vector u2 = draw(m);
    const Vector du = sub(u1, u2);
    const double du2 = dot(du, du);
    if (du2 > 0.0) {
      const Vector dg = sub(c.grad_f(u1), c.grad_f(u2));
      const double mono = dot(dg, du) / du2;
      out.worst_mu_ratio = std::max(
          out.worst_mu_ratio, mono > 0.0 ? c.mu_f / mono : HUGE_VAL);
      out.worst_ell_f_ratio =
          std::max(out.worst_ell_f_ratio, norm2(dg) / std::sqrt(du2) / c.ell_f);
    }
    const Vector y1 = draw(p);
    const Vector y2 = draw(p);
    const double dy = norm2(sub(y1, y2));
    if (dy > 0.0) {
      const double lip = norm2(sub(c.grad_g(y1), c.grad_g(y2))) / dy;
      const double ratio =
          c.ell_g > 0.0 ? lip / c.ell_g : (lip > 0.0 ? HUGE_VAL : 0.0);
      out.worst_ell_g_ratio = std::max(out.worst_ell_g_ratio, ratio);
    }
  }
  constexpr double kSlack = 1.0 + 1e-6;
  out.ok = out.worst_mu_ratio <= kSlack && out.worst_ell_f_ratio <= kSlack &&
           out.worst_ell_g_ratio <= kSlack;
  return out;
}

}  // namespace fbo
