#include "fbo/config.h"

#include <gtest/gtest.h>

#include <cstdio>
#include <fstream>

#include "fbo/errors.h"

namespace fbo {
namespace {

TEST(KeyValueConfig, ParsesCommentsAndTypes) {
  const auto cfg = KeyValueConfig::parse(
      "# header\n"
      "\n"
      "two_h = 26.3083   # seconds\n"
      "kind=ee_fbo_full\n"
      "  A = [-1, 0; 0, -2]\n"
      "stride = 10\n");
  EXPECT_DOUBLE_EQ(cfg.get_double("two_h"), 26.3083);
  EXPECT_EQ(cfg.get_string("kind"), "ee_fbo_full");
  EXPECT_EQ(cfg.get_matrix("A"), (Matrix{{-1, 0}, {0, -2}}));
  EXPECT_EQ(cfg.get_int("stride"), 10);
  EXPECT_FALSE(cfg.has("missing"));
  EXPECT_FALSE(cfg.find_double("missing").has_value());
}

TEST(KeyValueConfig, VectorsFromRowOrScalar) {
  const auto cfg = KeyValueConfig::parse("a = [1, 2, 3]\nb = [4; 5]\nc = 7\n");
  EXPECT_EQ(cfg.get_vector("a"), (Vector{1, 2, 3}));
  EXPECT_EQ(cfg.get_vector("b"), (Vector{4, 5}));
  EXPECT_EQ(cfg.get_vector("c"), (Vector{7}));
}

TEST(KeyValueConfig, Errors) {
  EXPECT_THROW(KeyValueConfig::parse("no equals sign"), ParseError);
  EXPECT_THROW(KeyValueConfig::parse(" = 3"), ParseError);
  EXPECT_THROW(KeyValueConfig::parse("a = 1\na = 2"), ParseError);
  const auto cfg = KeyValueConfig::parse("x = abc\ny = 1.5\nm = [1, 2; 3]");
  EXPECT_THROW(cfg.get_double("x"), ParseError);
  EXPECT_THROW(cfg.get_int("y"), ParseError);
  EXPECT_THROW(cfg.get_matrix("m"), ParseError);
  EXPECT_THROW(cfg.get_double("absent"), ParseError);
  EXPECT_THROW(KeyValueConfig::load("/nonexistent/scenario.cfg"), ParseError);
}

TEST(KeyValueConfig, LoadFromFile) {
  const std::string path = ::testing::TempDir() + "kv_config_test.cfg";
  {
    std::ofstream out(path);
    out << "eta = 1e-6\n";
  }
  EXPECT_DOUBLE_EQ(KeyValueConfig::load(path).get_double("eta"), 1e-6);
  std::remove(path.c_str());
}

TEST(MatrixLiteral, Forms) {
  EXPECT_EQ(parse_matrix_literal("[1.5]"), Matrix{{1.5}});
  EXPECT_EQ(parse_matrix_literal("2"), Matrix{{2}});
  EXPECT_EQ(parse_matrix_literal("[]"), Matrix());
  const Matrix z = parse_matrix_literal("zeros(2, 0)");
  EXPECT_EQ(z.rows(), 2u);
  EXPECT_EQ(z.cols(), 0u);
  EXPECT_THROW(parse_matrix_literal("zeros(2)"), ParseError);
  EXPECT_THROW(parse_matrix_literal("[1, x]"), ParseError);
}

TEST(MatrixLiteral, RoundTripIsExact) {
  const Matrix m{{0.1, -2.0 / 3.0}, {1e-300, 6.02214076e23}};
  EXPECT_EQ(parse_matrix_literal(format_matrix_literal(m)), m);
  const Matrix empty = Matrix::zeros(0, 3);
  const Matrix back = parse_matrix_literal(format_matrix_literal(empty));
  EXPECT_EQ(back.rows(), 0u);
  EXPECT_EQ(back.cols(), 3u);
  const double v = 0.1 + 0.2;
  EXPECT_EQ(std::stod(format_double(v)), v);
}

}  // namespace
}  // namespace fbo
