#include "fbo/plant.h"

#include <utility>

#include "fbo/errors.h"

namespace fbo {
namespace {

std::string shape(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void expect_shape(const Matrix& m, std::size_t rows, std::size_t cols,
                  const char* name) {
  if (m.rows() != rows || m.cols() != cols) {
    throw DimensionMismatch(std::string(name) + " is " + shape(m) +
                            ", expected " + std::to_string(rows) + "x" +
                            std::to_string(cols));
  }
}

Matrix inv_diag_scale(const TwoTimescalePlant::Blocks& b, double epsilon) {
  const std::size_t n1 = b.a11.rows();
  const std::size_t n2 = b.a22.rows();
  Matrix a = Matrix::blocks({{b.a11, b.a12}, {b.a21, b.a22}});
  for (std::size_t i = n1; i < n1 + n2; ++i) {
    for (std::size_t j = 0; j < n1 + n2; ++j) a(i, j) /= epsilon;
  }
  return a;
}

void validate_blocks(const TwoTimescalePlant::Blocks& b, double epsilon) {
  if (!(epsilon > 0.0)) throw ParameterError("epsilon must be positive");
  const std::size_t n1 = b.a11.rows();
  const std::size_t n2 = b.a22.rows();
  const std::size_t m = b.b1.cols();
  const std::size_t q = b.e1.cols();
  const std::size_t p = b.c1.rows();
  expect_shape(b.a11, n1, n1, "A11");
  expect_shape(b.a12, n1, n2, "A12");
  expect_shape(b.a21, n2, n1, "A21");
  expect_shape(b.a22, n2, n2, "A22");
  expect_shape(b.b1, n1, m, "B1");
  expect_shape(b.b2, n2, m, "B2");
  expect_shape(b.e1, n1, q, "E1");
  expect_shape(b.e2, n2, q, "E2");
  expect_shape(b.c1, p, n1, "C1");
  expect_shape(b.c2, p, n2, "C2");
}

}  // namespace

LtiPlant::LtiPlant(Matrix a, Matrix b, Matrix c, Matrix e)
    : a_(std::move(a)), b_(std::move(b)), c_(std::move(c)), e_(std::move(e)) {
  const std::size_t n = a_.rows();
  expect_shape(a_, n, n, "A");
  expect_shape(b_, n, b_.cols(), "B");
  expect_shape(c_, c_.rows(), n, "C");
  expect_shape(e_, n, e_.cols(), "E");
}

LtiPlant LtiPlant::require_stable(Matrix a, Matrix b, Matrix c, Matrix e) {
  LtiPlant p(std::move(a), std::move(b), std::move(c), std::move(e));
  HurwitzResult h = hurwitz_check(p.a_);
  if (!h) throw NotHurwitz("plant A is not Hurwitz");
  p.certificate_ = std::move(h.certificate);
  return p;
}

LtiPlant LtiPlant::unchecked(Matrix a, Matrix b, Matrix c, Matrix e) {
  return LtiPlant(std::move(a), std::move(b), std::move(c), std::move(e));
}

TwoTimescalePlant::TwoTimescalePlant(Blocks blocks, double epsilon)
    : blocks_(std::move(blocks)), epsilon_(epsilon) {
  validate_blocks(blocks_, epsilon_);
}

TwoTimescalePlant TwoTimescalePlant::make(Blocks blocks, double epsilon) {
  TwoTimescalePlant tt(std::move(blocks), epsilon);
  if (!hurwitz_check(tt.blocks_.a22)) throw NotHurwitz("A22 is not Hurwitz");
  if (!hurwitz_check(inv_diag_scale(tt.blocks_, epsilon))) {
    throw NotHurwitz("blkdiag(I, eps I)^-1 A is not Hurwitz at eps = " +
                     std::to_string(epsilon));
  }
  return tt;
}

TwoTimescalePlant TwoTimescalePlant::unchecked(Blocks blocks, double epsilon) {
  return TwoTimescalePlant(std::move(blocks), epsilon);
}

TwoTimescalePlant TwoTimescalePlant::with_epsilon(double epsilon) const {
  return make(blocks_, epsilon);
}

DcGains dc_gains(const LtiPlant& p) {
  const LuFactor lu(p.a());
  return {-(p.c() * lu.solve(p.b())), -(p.c() * lu.solve(p.e()))};
}

bool check_nonresonance(const LtiPlant& p) {
  const Matrix m = Matrix::blocks(
      {{p.a(), p.e()}, {p.c(), Matrix::zeros(p.p(), p.q())}});
  return numeric_rank(m) == p.n() + p.q();
}

ReducedModel reduce(const TwoTimescalePlant& tt) {
  const auto& b = tt.blocks();
  const LuFactor a22(b.a22);
  const Matrix x_a21 = a22.solve(b.a21);
  const Matrix x_b2 = a22.solve(b.b2);
  const Matrix x_e2 = a22.solve(b.e2);
  ReducedModel r;
  r.a0 = b.a11 - b.a12 * x_a21;
  r.b0 = b.b1 - b.a12 * x_b2;
  r.c0 = b.c1 - b.c2 * x_a21;
  r.d0 = -(b.c2 * x_b2);
  r.e0 = b.e1 - b.a12 * x_e2;
  r.q0 = -(b.c2 * x_e2);
  return r;
}

DcGains reduced_dc_gains(const ReducedModel& r) {
  const LuFactor lu(r.a0);
  return {r.d0 - r.c0 * lu.solve(r.b0), r.q0 - r.c0 * lu.solve(r.e0)};
}

LtiPlant assemble_full(const TwoTimescalePlant& tt) {
  const auto& b = tt.blocks();
  const double eps = tt.epsilon();
  Matrix a = inv_diag_scale(b, eps);
  Matrix bb = Matrix::blocks({{b.b1}, {(1.0 / eps) * b.b2}});
  Matrix e = Matrix::blocks({{b.e1}, {(1.0 / eps) * b.e2}});
  Matrix c = Matrix::blocks({{b.c1, b.c2}});
  return LtiPlant::unchecked(std::move(a), std::move(bb), std::move(c),
                             std::move(e));
}

Vector quasi_steady_fast_state(const TwoTimescalePlant& tt, const Vector& x1,
                               const Vector& u, const Vector& w) {
  const auto& b = tt.blocks();
  const Vector rhs = add(add(b.a21 * x1, b.b2 * u), b.e2 * w);
  return scaled(-1.0, LuFactor(b.a22).solve(rhs));
}

AugmentedModel augment(const LtiPlant& p) {
  AugmentedModel m;
  m.n_state = p.n();
  m.q = p.q();
  m.a_aug = Matrix::blocks(
      {{p.a(), p.e()},
       {Matrix::zeros(p.q(), p.n()), Matrix::zeros(p.q(), p.q())}});
  m.b_aug = Matrix::blocks({{p.b()}, {Matrix::zeros(p.q(), p.m())}});
  m.c_aug = Matrix::blocks({{p.c(), Matrix::zeros(p.p(), p.q())}});
  m.d_aug = Matrix::zeros(p.p(), p.m());
  m.nonresonant = check_nonresonance(p);
  return m;
}

AugmentedModel augment_reduced(const ReducedModel& r) {
  AugmentedModel m;
  m.n_state = r.n1();
  m.q = r.q();
  m.a_aug = Matrix::blocks(
      {{r.a0, r.e0},
       {Matrix::zeros(r.q(), r.n1()), Matrix::zeros(r.q(), r.q())}});
  m.b_aug = Matrix::blocks({{r.b0}, {Matrix::zeros(r.q(), r.m())}});
  m.c_aug = Matrix::blocks({{r.c0, r.q0}});
  m.d_aug = r.d0;
  const Matrix rank_test = Matrix::blocks(
      {{r.a0, r.e0}, {r.c0, Matrix::zeros(r.p(), r.q())}});
  m.nonresonant = numeric_rank(rank_test) == r.n1() + r.q();
  return m;
}

LtiPlant lti_plant_from_config(const KeyValueConfig& cfg,
                               bool require_stable) {
  Matrix a = cfg.get_matrix("A");
  Matrix b = cfg.get_matrix("B");
  Matrix c = cfg.get_matrix("C");
  Matrix e = cfg.has("E") ? cfg.get_matrix("E") : Matrix::zeros(a.rows(), 0);
  return require_stable
             ? LtiPlant::require_stable(std::move(a), std::move(b),
                                        std::move(c), std::move(e))
             : LtiPlant::unchecked(std::move(a), std::move(b), std::move(c),
                                   std::move(e));
}

TwoTimescalePlant two_timescale_from_config(const KeyValueConfig& cfg) {
  TwoTimescalePlant::Blocks b{
      cfg.get_matrix("A11"), cfg.get_matrix("A12"), cfg.get_matrix("A21"),
      cfg.get_matrix("A22"), cfg.get_matrix("B1"),  cfg.get_matrix("B2"),
      cfg.get_matrix("E1"),  cfg.get_matrix("E2"),  cfg.get_matrix("C1"),
      cfg.get_matrix("C2")};
  return TwoTimescalePlant::make(std::move(b), cfg.get_double("epsilon"));
}

std::string to_config_text(const LtiPlant& p) {
  std::string out;
  out += "A = " + format_matrix_literal(p.a()) + "\n";
  out += "B = " + format_matrix_literal(p.b()) + "\n";
  out += "C = " + format_matrix_literal(p.c()) + "\n";
  out += "E = " + format_matrix_literal(p.e()) + "\n";
  return out;
}

std::string to_config_text(const TwoTimescalePlant& tt) {
  const auto& b = tt.blocks();
  std::string out;
  const std::pair<const char*, const Matrix*> entries[] = {
      {"A11", &b.a11}, {"A12", &b.a12}, {"A21", &b.a21}, {"A22", &b.a22},
      {"B1", &b.b1},   {"B2", &b.b2},   {"E1", &b.e1},   {"E2", &b.e2},
      {"C1", &b.c1},   {"C2", &b.c2}};
  for (const auto& [name, m] : entries) {
    out += std::string(name) + " = " + format_matrix_literal(*m) + "\n";
  }
  out += "epsilon = " + format_double(tt.epsilon()) + "\n";
  return out;
}

}  // namespace fbo
