#pragma once

/// @file
/// Plain-text key/value configuration.
///
///     # comment
///     two_h    = 26.3083
///     kind     = ee_fbo_full
///     A        = [-1, 0; 0, -2]      # rows separated by ';'
///     lqe_q    = [1e-2, 1e-2, 1e6]   # a single row doubles as a vector
///
/// Keys are case-sensitive, one per line, later duplicates are rejected.

#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "fbo/densemat.h"

namespace fbo {

class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::string_view text);
  static KeyValueConfig load(const std::string& path);

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  const std::map<std::string, std::string>& raw() const { return values_; }

  std::string get_string(const std::string& key) const;
  double get_double(const std::string& key) const;
  long get_int(const std::string& key) const;
  Matrix get_matrix(const std::string& key) const;
  Vector get_vector(const std::string& key) const;

  std::optional<double> find_double(const std::string& key) const;
  std::optional<std::string> find_string(const std::string& key) const;
  std::optional<Vector> find_vector(const std::string& key) const;

  void set(const std::string& key, std::string value);

 private:
  const std::string& require(const std::string& key) const;

  std::map<std::string, std::string> values_;
};

/// Parses "[a, b; c, d]". An empty literal "[]" yields a 0x0 matrix; use
/// the "zeros(r, c)" form for empty blocks with a shape.
Matrix parse_matrix_literal(std::string_view text);
std::string format_matrix_literal(const Matrix& m);
std::string format_double(double v);

}  // namespace fbo
