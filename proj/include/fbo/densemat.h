#pragma once

/// @file
/// Small dense linear algebra kernel. Everything here targets systems of
/// dimension up to about 20: LU solves, Lyapunov equations through the
/// Kronecker linearization, Hurwitz certification and a few norms.

#include <cstddef>
#include <initializer_list>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace fbo {

using Vector = std::vector<double>;

/// Row-major dense real matrix. Entries are finite on construction.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> entries);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix zeros(std::size_t rows, std::size_t cols) {
    return Matrix(rows, cols);
  }
  static Matrix identity(std::size_t n);
  static Matrix diagonal(const Vector& d);
  static Matrix column(const Vector& v);
  static Matrix row(const Vector& v);

  /// Assembles a block matrix. Every block row must share a row count and
  /// every block column a column count.
  static Matrix blocks(
      std::initializer_list<std::initializer_list<Matrix>> grid);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return rows_ == 0 || cols_ == 0; }
  bool is_square() const { return rows_ == cols_; }

  double operator()(std::size_t i, std::size_t j) const {
    return data_[i * cols_ + j];
  }
  double& operator()(std::size_t i, std::size_t j) {
    return data_[i * cols_ + j];
  }

  std::span<const double> entries() const { return data_; }

  Matrix block(std::size_t r0, std::size_t c0, std::size_t nr,
               std::size_t nc) const;
  void set_block(std::size_t r0, std::size_t c0, const Matrix& m);

  Vector col_vector(std::size_t j) const;
  Vector to_vector() const;  // requires a single column or row

  Matrix transpose() const;

  /// Max absolute row sum.
  double norm_inf() const;
  double max_abs() const;
  bool all_finite() const;

  Matrix& operator+=(const Matrix& o);
  Matrix& operator-=(const Matrix& o);
  Matrix& operator*=(double s);

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator-(Matrix a);
Matrix operator*(const Matrix& a, const Matrix& b);
Matrix operator*(double s, Matrix a);
Vector operator*(const Matrix& a, const Vector& x);

std::string to_string(const Matrix& m);

// Vector helpers. Named rather than overloaded on std::vector.
Vector add(const Vector& a, const Vector& b);
Vector sub(const Vector& a, const Vector& b);
Vector scaled(double s, const Vector& a);
double dot(const Vector& a, const Vector& b);
double norm2(const Vector& a);
double norm_inf(const Vector& a);
Vector concat(std::initializer_list<std::span<const double>> parts);

/// Tolerances used by the kernel, kept together so callers can override.
struct KernelTolerances {
  double singular_pivot = 1e-12;  // relative to ||a||_inf
  double rank_pivot = 1e-10;      // relative to ||a||_inf
  double norm_rel = 1e-10;
  int norm_max_iter = 10000;
  double pd_pivot = 1e-14;  // relative to max |entry|
};

/// LU factorization with partial pivoting, reusable across right-hand sides.
class LuFactor {
 public:
  explicit LuFactor(const Matrix& a, const KernelTolerances& tol = {});
  Matrix solve(const Matrix& b) const;
  Vector solve(const Vector& b) const;
  std::size_t size() const { return lu_.rows(); }

 private:
  Matrix lu_;
  std::vector<std::size_t> perm_;
};

/// Solves a x = b. Throws SingularMatrix on a vanishing pivot.
Matrix lu_solve(const Matrix& a, const Matrix& b,
                const KernelTolerances& tol = {});

/// Solves A^T P + P A = -Q for symmetric P.
Matrix lyapunov_solve(const Matrix& a, const Matrix& q,
                      const KernelTolerances& tol = {});

/// True iff every leading principal minor of the symmetric part of m is
/// positive. Minors are tracked as ratios through Gaussian elimination
/// without pivoting; pivots below pd_pivot * max|m| count as non-positive.
bool is_positive_definite(const Matrix& m, const KernelTolerances& tol = {});

/// m is negative semidefinite up to `slack`: -m + slack*I passes the minor
/// test.
bool is_negative_semidefinite(const Matrix& m, double slack);

struct HurwitzResult {
  bool hurwitz = false;
  std::optional<Matrix> certificate;  // P with A^T P + P A = -I
  explicit operator bool() const { return hurwitz; }
};

HurwitzResult hurwitz_check(const Matrix& a, const KernelTolerances& tol = {});

/// Largest singular value by power iteration on a^T a.
double spectral_norm(const Matrix& a, const KernelTolerances& tol = {});

std::size_t numeric_rank(const Matrix& a, const KernelTolerances& tol = {});

}  // namespace fbo
