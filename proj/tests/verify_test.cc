#include "fbo/verify.h"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "fbo/bench.h"
#include "fbo/errors.h"
#include "test_support.h"

namespace fbo {
namespace {

// f = 0.5 u^2, g = 0.5 (y - 1)^2, y = u.
CostModel scalar_cost() {
  return quadratic_cost(Matrix{{1}}, {0.0}, Matrix{{1}}, {1.0});
}
const DcGains kUnit{Matrix{{1}}, Matrix{{0}}};

TEST(OfflineOptimum, InputCostOnly) {
  const CostModel c = quadratic_cost(Matrix::identity(2), {0.0, 0.0},
                                     Matrix::zeros(1, 1), {0.0});
  const BoxSet box({0.5, -1.0}, {1.0, 1.0});
  const DcGains gains{Matrix{{1, 1}}, Matrix{{0}}};
  const Vector u = solve_offline_optimum(c, box, gains, {0.0});
  EXPECT_NEAR(u[0], 0.5, 1e-12);
  EXPECT_NEAR(u[1], 0.0, 1e-12);
}

TEST(OfflineOptimum, ScalarStationarity) {
  // u + (u - 1) = 0.
  const Vector u =
      solve_offline_optimum(scalar_cost(), BoxSet({-10.0}, {10.0}), kUnit, {0.0});
  EXPECT_NEAR(u[0], 0.5, 1e-10);
}

TEST(OfflineOptimum, ScalarActiveBound) {
  // The gradient 2u - 1 is still negative at the upper bound 0.2.
  const Vector u =
      solve_offline_optimum(scalar_cost(), BoxSet({0.0}, {0.2}), kUnit, {0.0});
  EXPECT_NEAR(u[0], 0.2, 1e-12);
}

TEST(OfflineOptimum, DisturbanceShiftsOptimum) {
  // y = u + w with w = 0.4: u + (u + 0.4 - 1) = 0 gives u = 0.3.
  const DcGains gains{Matrix{{1}}, Matrix{{1}}};
  const Vector u = solve_offline_optimum(scalar_cost(), BoxSet::unbounded(1),
                                         gains, {0.4});
  EXPECT_NEAR(u[0], 0.3, 1e-10);
}

TEST(OfflineOptimum, Errors) {
  OracleOptions opt;
  opt.max_iter = 1;
  EXPECT_THROW(solve_offline_optimum(scalar_cost(), BoxSet({-10.0}, {10.0}),
                                     kUnit, {0.0}, opt),
               NoConvergence);
  EXPECT_THROW(solve_offline_optimum(scalar_cost(), BoxSet::unbounded(2),
                                     kUnit, {0.0}),
               DimensionMismatch);
  EXPECT_THROW(solve_offline_optimum(scalar_cost(), BoxSet::unbounded(1),
                                     kUnit, {0.0, 0.0}),
               DimensionMismatch);
  opt = {};
  opt.eta = -1.0;
  EXPECT_THROW(solve_offline_optimum(scalar_cost(), BoxSet::unbounded(1),
                                     kUnit, {0.0}, opt),
               InvalidStep);
}

TEST(KktResidual, ScalarExamples) {
  const BoxSet box({-10.0}, {10.0});
  const Vector u_star = solve_offline_optimum(scalar_cost(), box, kUnit, {0.0});
  EXPECT_LE(kkt_residual(scalar_cost(), box, kUnit, {0.0}, u_star), 1e-10);
  // eta = 0.5 * 2 / (1 + 1)^2 = 0.25, and the residual at 0 is
  // |clamp(0 - 0.25 (0 + (0 - 1)))| = 0.25.
  EXPECT_NEAR(kkt_residual(scalar_cost(), box, kUnit, {0.0}, {0.0}), 0.25,
              1e-15);
}

TEST(KktResidual, BoundsDistanceToOptimum) {
  // For the contraction T, ||u - u*|| <= ||u - T u|| + rho ||u - u*||, so the
  // residual is at least (1 - rho) times the distance.
  testing::Rng rng(71);
  for (int k = 0; k < 10; ++k) {
    const std::size_t n = rng.integer(1, 4);
    const std::size_t m = rng.integer(1, 3);
    const LtiPlant plant = testing::random_plant(rng, n, m, 1, 1);
    const DcGains gains = dc_gains(plant);
    const auto prob = testing::random_problem(rng, gains);
    const Vector w = rng.vector(1);
    const Vector u_star = solve_offline_optimum(prob.cost, prob.box, gains, w);
    const double eta = 0.5 * eta_max(prob.cost, gains.pi_u);
    const double rho = contraction_analysis(prob.cost, gains, eta).rho;
    EXPECT_LE(kkt_residual(prob.cost, prob.box, gains, w, u_star), 1e-10);
    for (int s = 0; s < 50; ++s) {
      const Vector u = project_box(prob.box, rng.vector(m, 3.0));
      const double r = kkt_residual(prob.cost, prob.box, gains, w, u);
      EXPECT_GE(r + 1e-12, (1.0 - rho) * norm2(sub(u, u_star)));
    }
  }
}

TEST(FiniteDiff, SmoothQuadratic) {
  const CostModel c = quadratic_cost(Matrix::identity(3), Vector(3, 0.0),
                                     Matrix::zeros(1, 1), {0.0});
  const FiniteDiffResult r = finite_diff_check(c.f, c.grad_f, 3);
  EXPECT_EQ(r.evaluated, 100);
  EXPECT_LE(r.max_rel_error, 1e-8);
}

TEST(FiniteDiff, BenchmarkPenaltyAwayFromKinks) {
  const CostModel c = band_cost(SoftBandPenalty{-0.01, 0.01, 1e5});
  FiniteDiffOptions opt;
  opt.scale = 0.05;
  opt.step = 1e-7;
  opt.samples = 500;
  opt.kink_margin = 1e-6;
  opt.kink_distance = [](const Vector& y) {
    return std::min(std::abs(y[0] - 0.01), std::abs(y[0] + 0.01));
  };
  const FiniteDiffResult r = finite_diff_check(c.g, c.grad_g, 1, opt);
  EXPECT_GT(r.evaluated, 400);
  EXPECT_LE(r.max_rel_error, 1e-6);
}

TEST(FiniteDiff, CatchesWrongGradient) {
  const ValueFn f = [](const Vector& u) { return u[0] * u[0] * u[0]; };
  const GradientFn wrong = [](const Vector& u) {
    return Vector{2.0 * u[0] * u[0]};
  };
  EXPECT_GT(finite_diff_check(f, wrong, 1).max_rel_error, 1e-2);
  EXPECT_THROW(finite_diff_check(f, {}, 1), ParameterError);
}

struct DrivenCase {
  DrivenSetup setup;
  ContractionAnalysis analysis;
  Vector u_star;
};

DrivenCase driven_case(std::uint64_t seed) {
  testing::Rng rng(seed);
  const LtiPlant plant = testing::random_plant(rng, 3, 2, 1, 1);
  const DcGains gains = dc_gains(plant);
  const auto prob = testing::random_problem(rng, gains);
  const double eta = 0.5 * eta_max(prob.cost, gains.pi_u);
  DrivenCase c{{prob.cost, prob.box, gains, eta, 0.1, rng.vector(1), {}, {},
                {}},
               contraction_analysis(prob.cost, gains, eta),
               {}};
  c.u_star = solve_offline_optimum(prob.cost, prob.box, gains, c.setup.w);
  return c;
}

TEST(IssAudit, StartAtOptimum) {
  const DrivenCase c = driven_case(72);
  const DrivenRun run = simulate_driven_controller(c.setup, c.u_star, 2.0, 1e-3);
  const IssAudit a = iss_bound_audit(c.analysis, c.setup.tau, run, c.u_star);
  EXPECT_TRUE(a.pass);
  EXPECT_GE(a.worst_margin, -1e-12);
  EXPECT_EQ(a.samples, run.times.size());
}

TEST(IssAudit, ExponentialEnvelope) {
  const DrivenCase c = driven_case(73);
  const Vector u0 = project_box(c.setup.box, {3.0, -3.0});
  const DrivenRun run = simulate_driven_controller(c.setup, u0, 5.0, 1e-3);
  EXPECT_TRUE(iss_bound_audit(c.analysis, c.setup.tau, run, c.u_star).pass);
}

TEST(IssAudit, SinusoidalPerturbation) {
  DrivenCase c = driven_case(74);
  c.setup.v = [](double t) { return Vector{0.2 * std::sin(3.0 * t)}; };
  c.setup.e_map = Matrix{{1.0}};
  c.setup.e = [](double t) { return Vector{0.1 * std::cos(t)}; };
  const ContractionAnalysis a = contraction_analysis(
      c.setup.cost, c.setup.gains, c.setup.eta, 1.0);
  const Vector u0 = project_box(c.setup.box, {1.0, 1.0});
  const DrivenRun run = simulate_driven_controller(c.setup, u0, 5.0, 1e-3);
  const IssAudit audit = iss_bound_audit(a, c.setup.tau, run, c.u_star);
  EXPECT_TRUE(audit.pass);
  EXPECT_GT(audit.worst_margin, 0.0);
}

TEST(IssAudit, WrongEquilibriumFails) {
  const DrivenCase c = driven_case(75);
  const DrivenRun run = simulate_driven_controller(c.setup, c.u_star, 50.0, 1e-2);
  const Vector off = add(c.u_star, {0.5, 0.0});
  const IssAudit a = iss_bound_audit(c.analysis, c.setup.tau, run, off);
  EXPECT_FALSE(a.pass);
  EXPECT_LT(a.worst_margin, 0.0);
}

TEST(DrivenController, Validation) {
  const DrivenCase c = driven_case(76);
  EXPECT_THROW(simulate_driven_controller(c.setup, c.u_star, 1.0, 0.0),
               ParameterError);
  DrivenSetup bad = c.setup;
  bad.tau = 0.0;
  EXPECT_THROW(simulate_driven_controller(bad, c.u_star, 1.0, 1e-2),
               ParameterError);
}

TEST(ErrorCascade, ScalarPlant) {
  const auto plant = LtiPlant::require_stable(Matrix{{-1}}, Matrix{{1}},
                                              Matrix{{1}}, Matrix{{2}});
  const AugmentedModel m = augment(plant);
  const DcGains gains = dc_gains(plant);
  const EstimatorGain g =
      design_lqe(m, {Matrix::identity(2), Matrix{{1}}});
  const ErrorCascade ec = build_error_cascade(m, g, gains);
  EXPECT_EQ(ec.a_err, m.a_aug + g.l * m.c_aug);
  EXPECT_EQ(ec.c_err, (Matrix{{1, -2}}));
  EXPECT_FALSE(ec.g_err.has_value());
  EXPECT_TRUE(is_positive_definite(ec.certificate));
}

TEST(ErrorCascade, ZeroGainLeavesIntegrator) {
  const auto plant = LtiPlant::require_stable(Matrix{{-1}}, Matrix{{1}},
                                              Matrix{{1}}, Matrix{{2}});
  EstimatorGain g;
  g.l = Matrix::zeros(2, 1);
  EXPECT_THROW(build_error_cascade(augment(plant), g, dc_gains(plant)),
               NotHurwitz);
  g.l = Matrix::zeros(3, 1);
  EXPECT_THROW(build_error_cascade(augment(plant), g, dc_gains(plant)),
               DimensionMismatch);
}

TEST(ErrorCascade, OutputMapCancelsAtSteadyState) {
  // A constant estimation error [dx; dw] sitting at the steady state of the
  // error dynamics shifts y - yhat by C dx and ybar_hat by -Pi_w dw; on the
  // invariant subspace dx = -A^{-1} E dw these cancel, so c_err vanishes.
  testing::Rng rng(77);
  const LtiPlant plant = testing::random_plant(rng, 3, 1, 2, 2);
  const AugmentedModel m = augment(plant);
  const DcGains gains = dc_gains(plant);
  const EstimatorGain g =
      design_lqe(m, {Matrix::identity(5), Matrix::identity(2)});
  const ErrorCascade ec = build_error_cascade(m, g, gains);
  const Vector dw = rng.vector(2);
  const Vector dx = LuFactor(plant.a()).solve(scaled(-1.0, plant.e() * dw));
  EXPECT_LE(norm_inf(ec.c_err * concat({dx, dw})), 1e-12);
}

TEST(ErrorCascade, ReducedCoupling) {
  testing::Rng rng(78);
  const auto tt = testing::random_two_timescale(rng, 2, 2, 1, 2, 1);
  const ReducedModel red = reduce(tt);
  const AugmentedModel m = augment_reduced(red);
  const EstimatorGain g =
      design_lqe(m, {Matrix::identity(3), Matrix::identity(2)});
  const ErrorCascade ec =
      build_error_cascade(tt, m, g, reduced_dc_gains(red));
  ASSERT_TRUE(ec.g_err.has_value());
  EXPECT_EQ(ec.g_err->rows(), 3u);
  EXPECT_EQ(ec.g_err->cols(), 2u);
  const Matrix l1 = g.l.block(0, 0, 2, 2);
  EXPECT_EQ(ec.g_err->block(0, 0, 2, 2),
            tt.blocks().a12 - l1 * tt.blocks().c2);
  EXPECT_THROW(build_error_cascade(tt, augment(assemble_full(tt)), g,
                                   reduced_dc_gains(red)),
               DimensionMismatch);
}

TEST(SmallGain, ScalarBlocks) {
  TwoTimescalePlant::Blocks b;
  b.a11 = Matrix{{-1}};
  b.a12 = Matrix{{0}};
  b.a21 = Matrix{{0}};
  b.a22 = Matrix{{-2}};
  b.b1 = Matrix{{1}};
  b.b2 = Matrix{{0}};
  b.e1 = Matrix{{0}};
  b.e2 = Matrix{{0}};
  b.c1 = Matrix{{1}};
  b.c2 = Matrix{{0}};
  const SmallGainCertificate c =
      certify_small_gain_blocks(TwoTimescalePlant::make(b, 0.1));
  EXPECT_NEAR(c.p0(0, 0), 0.5, 1e-15);
  EXPECT_NEAR(c.p22(0, 0), 0.25, 1e-15);
  EXPECT_EQ(c.alpha0, 1.0);
  EXPECT_EQ(c.alpha22, 1.0);

  b.a22 = Matrix{{0.5}};
  EXPECT_THROW(certify_small_gain_blocks(TwoTimescalePlant::unchecked(b, 0.1)),
               NotHurwitz);
}

TEST(SmallGain, Benchmark) {
  const TwoTimescalePlant tt = build_power_system(PowerSystemParams{});
  const SmallGainCertificate c = certify_small_gain_blocks(tt);
  EXPECT_TRUE(is_positive_definite(c.p0));
  EXPECT_TRUE(is_positive_definite(c.p22));
  const Matrix a0 = reduce(tt).a0;
  EXPECT_LE((c.p0 * a0 + a0.transpose() * c.p0 + Matrix::identity(2)).max_abs(),
            1e-9);
}

}  // namespace
}  // namespace fbo
