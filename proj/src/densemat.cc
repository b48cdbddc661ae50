#include "fbo/densemat.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <utility>

#include "fbo/errors.h"

namespace fbo {
namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionMismatch(std::string(op) + ": " +
                            std::to_string(a.rows()) + "x" +
                            std::to_string(a.cols()) + " vs " +
                            std::to_string(b.rows()) + "x" +
                            std::to_string(b.cols()));
  }
}

void require_same_size(const Vector& a, const Vector& b, const char* op) {
  if (a.size() != b.size()) {
    throw DimensionMismatch(std::string(op) + ": vector sizes " +
                            std::to_string(a.size()) + " vs " +
                            std::to_string(b.size()));
  }
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> entries)
    : rows_(rows), cols_(cols), data_(std::move(entries)) {
  if (data_.size() != rows_ * cols_) {
    throw DimensionMismatch("Matrix: " + std::to_string(data_.size()) +
                            " entries for a " + std::to_string(rows_) + "x" +
                            std::to_string(cols_) + " matrix");
  }
  if (!all_finite()) throw ParameterError("Matrix: non-finite entry");
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw DimensionMismatch("Matrix: ragged rows");
    data_.insert(data_.end(), r.begin(), r.end());
  }
  if (!all_finite()) throw ParameterError("Matrix: non-finite entry");
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::diagonal(const Vector& d) {
  Matrix m(d.size(), d.size());
  for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
  return m;
}

Matrix Matrix::column(const Vector& v) { return Matrix(v.size(), 1, v); }

Matrix Matrix::row(const Vector& v) { return Matrix(1, v.size(), v); }

Matrix Matrix::blocks(
    std::initializer_list<std::initializer_list<Matrix>> grid) {
  std::vector<std::size_t> heights;
  std::vector<std::size_t> widths;
  for (const auto& brow : grid) {
    if (widths.empty()) {
      for (const auto& b : brow) widths.push_back(b.cols());
    } else if (brow.size() != widths.size()) {
      throw DimensionMismatch("blocks: ragged block grid");
    }
    heights.push_back(brow.size() ? brow.begin()->rows() : 0);
  }
  const std::size_t total_rows =
      std::accumulate(heights.begin(), heights.end(), std::size_t{0});
  const std::size_t total_cols =
      std::accumulate(widths.begin(), widths.end(), std::size_t{0});
  Matrix out(total_rows, total_cols);
  std::size_t r0 = 0;
  std::size_t bi = 0;
  for (const auto& brow : grid) {
    std::size_t c0 = 0;
    std::size_t bj = 0;
    for (const auto& b : brow) {
      if (b.rows() != heights[bi] || b.cols() != widths[bj]) {
        throw DimensionMismatch("blocks: block (" + std::to_string(bi) + "," +
                                std::to_string(bj) + ") has shape " +
                                std::to_string(b.rows()) + "x" +
                                std::to_string(b.cols()));
      }
      out.set_block(r0, c0, b);
      c0 += widths[bj++];
    }
    r0 += heights[bi++];
  }
  return out;
}

Matrix Matrix::block(std::size_t r0, std::size_t c0, std::size_t nr,
                     std::size_t nc) const {
  if (r0 + nr > rows_ || c0 + nc > cols_) {
    throw DimensionMismatch("block: out of range");
  }
  Matrix out(nr, nc);
  for (std::size_t i = 0; i < nr; ++i) {
    for (std::size_t j = 0; j < nc; ++j) out(i, j) = (*this)(r0 + i, c0 + j);
  }
  return out;
}

void Matrix::set_block(std::size_t r0, std::size_t c0, const Matrix& m) {
  if (r0 + m.rows() > rows_ || c0 + m.cols() > cols_) {
    throw DimensionMismatch("set_block: out of range");
  }
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) (*this)(r0 + i, c0 + j) = m(i, j);
  }
}

Vector Matrix::col_vector(std::size_t j) const {
  Vector v(rows_);
  for (std::size_t i = 0; i < rows_; ++i) v[i] = (*this)(i, j);
  return v;
}

Vector Matrix::to_vector() const {
  if (rows_ != 1 && cols_ != 1 && !empty()) {
    throw DimensionMismatch("to_vector: not a row or column");
  }
  return data_;
}

Matrix Matrix::transpose() const {
  Matrix t(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i) {
    for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  }
  return t;
}

double Matrix::norm_inf() const {
  double best = 0.0;
  for (std::size_t i = 0; i < rows_; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < cols_; ++j) s += std::abs((*this)(i, j));
    best = std::max(best, s);
  }
  return best;
}

double Matrix::max_abs() const {
  double best = 0.0;
  for (double v : data_) best = std::max(best, std::abs(v));
  return best;
}

bool Matrix::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

Matrix& Matrix::operator+=(const Matrix& o) {
  require_same_shape(*this, o, "operator+");
  for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += o.data_[k];
  return *this;
}

Matrix& Matrix::operator-=(const Matrix& o) {
  require_same_shape(*this, o, "operator-");
  for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= o.data_[k];
  return *this;
}

Matrix& Matrix::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
Matrix operator-(Matrix a) { return a *= -1.0; }
Matrix operator*(double s, Matrix a) { return a *= s; }

Matrix operator*(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw DimensionMismatch("operator*: " + std::to_string(a.rows()) + "x" +
                            std::to_string(a.cols()) + " times " +
                            std::to_string(b.rows()) + "x" +
                            std::to_string(b.cols()));
  }
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
    }
  }
  return c;
}

Vector operator*(const Matrix& a, const Vector& x) {
  if (a.cols() != x.size()) {
    throw DimensionMismatch("operator*: " + std::to_string(a.rows()) + "x" +
                            std::to_string(a.cols()) + " times vector of " +
                            std::to_string(x.size()));
  }
  Vector y(a.rows(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) s += a(i, j) * x[j];
    y[i] = s;
  }
  return y;
}

std::string to_string(const Matrix& m) {
  std::ostringstream os;
  os.precision(10);
  os << "[";
  for (std::size_t i = 0; i < m.rows(); ++i) {
    if (i) os << "; ";
    for (std::size_t j = 0; j < m.cols(); ++j) {
      if (j) os << ", ";
      os << m(i, j);
    }
  }
  os << "]";
  return os.str();
}

Vector add(const Vector& a, const Vector& b) {
  require_same_size(a, b, "add");
  Vector c(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) c[i] = a[i] + b[i];
  return c;
}

Vector sub(const Vector& a, const Vector& b) {
  require_same_size(a, b, "sub");
  Vector c(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) c[i] = a[i] - b[i];
  return c;
}

Vector scaled(double s, const Vector& a) {
  Vector c(a);
  for (double& v : c) v *= s;
  return c;
}

double dot(const Vector& a, const Vector& b) {
  require_same_size(a, b, "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(const Vector& a) { return std::sqrt(dot(a, a)); }

double norm_inf(const Vector& a) {
  double best = 0.0;
  for (double v : a) best = std::max(best, std::abs(v));
  return best;
}

Vector concat(std::initializer_list<std::span<const double>> parts) {
  Vector out;
  for (auto p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

LuFactor::LuFactor(const Matrix& a, const KernelTolerances& tol) : lu_(a) {
  if (!a.is_square()) throw DimensionMismatch("lu: matrix not square");
  const std::size_t n = a.rows();
  perm_.resize(n);
  std::iota(perm_.begin(), perm_.end(), std::size_t{0});
  const double threshold = tol.singular_pivot * a.norm_inf();
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t p = k;
    for (std::size_t i = k + 1; i < n; ++i) {
      if (std::abs(lu_(i, k)) > std::abs(lu_(p, k))) p = i;
    }
    const double pivot = lu_(p, k);
    if (std::abs(pivot) < threshold || pivot == 0.0) {
      throw SingularMatrix("lu: pivot " + std::to_string(pivot) +
                           " at column " + std::to_string(k));
    }
    if (p != k) {
      for (std::size_t j = 0; j < n; ++j) std::swap(lu_(p, j), lu_(k, j));
      std::swap(perm_[p], perm_[k]);
    }
    for (std::size_t i = k + 1; i < n; ++i) {
      const double f = lu_(i, k) / pivot;
      lu_(i, k) = f;
      if (f == 0.0) continue;
      for (std::size_t j = k + 1; j < n; ++j) lu_(i, j) -= f * lu_(k, j);
    }
  }
}

Vector LuFactor::solve(const Vector& b) const {
  const std::size_t n = lu_.rows();
  if (b.size() != n) throw DimensionMismatch("lu_solve: rhs size");
  Vector x(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = b[perm_[i]];
    for (std::size_t j = 0; j < i; ++j) s -= lu_(i, j) * x[j];
    x[i] = s;
  }
  for (std::size_t ii = n; ii-- > 0;) {
    double s = x[ii];
    for (std::size_t j = ii + 1; j < n; ++j) s -= lu_(ii, j) * x[j];
    x[ii] = s / lu_(ii, ii);
  }
  return x;
}

Matrix LuFactor::solve(const Matrix& b) const {
  if (b.rows() != lu_.rows()) throw DimensionMismatch("lu_solve: rhs rows");
  Matrix x(b.rows(), b.cols());
  for (std::size_t j = 0; j < b.cols(); ++j) {
    const Vector col = solve(b.col_vector(j));
    for (std::size_t i = 0; i < col.size(); ++i) x(i, j) = col[i];
  }
  return x;
}

Matrix lu_solve(const Matrix& a, const Matrix& b, const KernelTolerances& tol) {
  if (!a.is_square()) throw DimensionMismatch("lu_solve: matrix not square");
  if (b.rows() != a.rows()) throw DimensionMismatch("lu_solve: rhs rows");
  return LuFactor(a, tol).solve(b);
}

Matrix lyapunov_solve(const Matrix& a, const Matrix& q,
                      const KernelTolerances& tol) {
  if (!a.is_square()) throw DimensionMismatch("lyapunov: A not square");
  require_same_shape(a, q, "lyapunov");
  const std::size_t n = a.rows();
  const std::size_t nn = n * n;
  // Column-major vec: P(i,j) sits at j*n + i.
  Matrix kron(nn, nn);
  Vector rhs(nn);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t r = j * n + i;
      for (std::size_t k = 0; k < n; ++k) {
        kron(r, j * n + k) += a(k, i);  // (A^T P)(i,j)
        kron(r, k * n + i) += a(k, j);  // (P A)(i,j)
      }
      rhs[r] = -q(i, j);
    }
  }
  const Vector p = LuFactor(kron, tol).solve(rhs);
  Matrix out(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < n; ++i) out(i, j) = p[j * n + i];
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double avg = 0.5 * (out(i, j) + out(j, i));
      out(i, j) = avg;
      out(j, i) = avg;
    }
  }
  return out;
}

bool is_positive_definite(const Matrix& m, const KernelTolerances& tol) {
  if (!m.is_square() || m.empty()) return false;
  const std::size_t n = m.rows();
  Matrix w(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) w(i, j) = 0.5 * (m(i, j) + m(j, i));
  }
  const double threshold = tol.pd_pivot * w.max_abs();
  // pivot_k = minor_k / minor_{k-1}
  for (std::size_t k = 0; k < n; ++k) {
    const double pivot = w(k, k);
    if (!(pivot > threshold)) return false;
    for (std::size_t i = k + 1; i < n; ++i) {
      const double f = w(i, k) / pivot;
      for (std::size_t j = k + 1; j < n; ++j) w(i, j) -= f * w(k, j);
    }
  }
  return true;
}

bool is_negative_semidefinite(const Matrix& m, double slack) {
  if (!m.is_square()) return false;
  const Matrix shifted = -m + slack * Matrix::identity(m.rows());
  return is_positive_definite(shifted, KernelTolerances{.pd_pivot = 0.0});
}

HurwitzResult hurwitz_check(const Matrix& a, const KernelTolerances& tol) {
  HurwitzResult result;
  if (!a.is_square() || a.empty()) return result;
  try {
    Matrix p = lyapunov_solve(a, Matrix::identity(a.rows()), tol);
    if (!p.all_finite() || !is_positive_definite(p, tol)) return result;
    result.hurwitz = true;
    result.certificate = std::move(p);
  } catch (const SingularMatrix&) {
  }
  return result;
}

double spectral_norm(const Matrix& a, const KernelTolerances& tol) {
  if (a.empty()) throw DimensionMismatch("spectral_norm: empty matrix");
  if (a.max_abs() == 0.0) return 0.0;
  const Matrix ata = a.transpose() * a;
  const std::size_t n = ata.rows();
  Vector v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = 1.0 + 1.0 / std::sqrt(i + 2.0);
  v = scaled(1.0 / norm2(v), v);
  double lambda = dot(v, ata * v);
  for (int it = 0; it < tol.norm_max_iter; ++it) {
    Vector w = ata * v;
    const double len = norm2(w);
    if (len == 0.0) {
      // Start vector landed in the null space of a^T a; rotate it.
      for (std::size_t i = 0; i < n; ++i) v[i] = std::cos(1.0 + i);
      v = scaled(1.0 / norm2(v), v);
      continue;
    }
    v = scaled(1.0 / len, w);
    const double next = dot(v, ata * v);
    if (std::abs(next - lambda) <= tol.norm_rel * std::abs(next)) {
      return std::sqrt(next);
    }
    lambda = next;
  }
  throw NoConvergence("spectral_norm: iteration cap reached");
}

std::size_t numeric_rank(const Matrix& a, const KernelTolerances& tol) {
  if (a.empty()) return 0;
  Matrix w = a;
  const double threshold = tol.rank_pivot * a.norm_inf();
  std::size_t rank = 0;
  for (std::size_t c = 0; c < w.cols() && rank < w.rows(); ++c) {
    std::size_t p = rank;
    for (std::size_t i = rank + 1; i < w.rows(); ++i) {
      if (std::abs(w(i, c)) > std::abs(w(p, c))) p = i;
    }
    if (std::abs(w(p, c)) <= threshold) continue;
    for (std::size_t j = 0; j < w.cols(); ++j) std::swap(w(p, j), w(rank, j));
    for (std::size_t i = rank + 1; i < w.rows(); ++i) {
      const double f = w(i, c) / w(rank, c);
      for (std::size_t j = c; j < w.cols(); ++j) w(i, j) -= f * w(rank, j);
    }
    ++rank;
  }
  return rank;
}

}  // namespace fbo
