#include <doctest.h>

#include <cmath>
#include <random>

#include "alprobe/error.hpp"
#include "alprobe/rng.hpp"
#include "alprobe/tensor.hpp"
#include "oracles.hpp"

using namespace alprobe;

namespace {

Matrix random_matrix(Rng& rng, std::size_t r, std::size_t c, double scale = 1.0) {
  Matrix m(r, c);
  for (float& v : m.data) v = static_cast<float>(scale * (2.0 * rng.uniform() - 1.0));
  return m;
}

std::vector<std::vector<double>> to_double(const Matrix& m) {
  std::vector<std::vector<double>> out(m.rows, std::vector<double>(m.cols));
  for (std::size_t i = 0; i < m.rows; ++i)
    for (std::size_t j = 0; j < m.cols; ++j) out[i][j] = m(i, j);
  return out;
}

}  // namespace

TEST_CASE("matmul identity and permutation") {
  Rng rng(3);
  const Matrix b = random_matrix(rng, 3, 3);
  CHECK(matmul(Matrix::identity(3), b) == b);

  const Matrix p = matmul(Matrix::from_rows({{1, 2}, {3, 4}}), Matrix::from_rows({{0, 1}, {1, 0}}));
  CHECK(p == Matrix::from_rows({{2, 1}, {4, 3}}));
}

TEST_CASE("matmul matches triple-loop oracle") {
  Rng rng(11);
  const Matrix a = random_matrix(rng, 7, 5);
  const Matrix b = random_matrix(rng, 5, 3);
  const auto expected = testing::naive_matmul(to_double(a), to_double(b));
  const Matrix c = matmul(a, b);
  for (std::size_t i = 0; i < 7; ++i)
    for (std::size_t j = 0; j < 3; ++j) CHECK(std::abs(c(i, j) - expected[i][j]) < 1e-6);
}

TEST_CASE("matmul shape error names both shapes") {
  try {
    matmul(Matrix(2, 3), Matrix(2, 3));
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2x3]") != std::string::npos);
  }
}

TEST_CASE("matmul_transposed agrees with matmul of transpose") {
  Rng rng(5);
  const Matrix a = random_matrix(rng, 4, 6);
  const Matrix b = random_matrix(rng, 5, 6);
  Matrix bt(6, 5);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 6; ++j) bt(j, i) = b(i, j);
  CHECK(matmul_transposed(a, b) == matmul(a, bt));
}

TEST_CASE("matmul is associative within tolerance") {
  Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix a = random_matrix(rng, 8, 8), b = random_matrix(rng, 8, 8),
                 c = random_matrix(rng, 8, 8);
    const Matrix left = matmul(matmul(a, b), c);
    const Matrix right = matmul(a, matmul(b, c));
    for (std::size_t i = 0; i < left.data.size(); ++i) {
      CHECK(std::abs(left.data[i] - right.data[i]) < 1e-4);
    }
  }
}

TEST_CASE("softmax rows") {
  SUBCASE("equal values give uniform rows") {
    for (std::size_t T : {1u, 2u, 7u, 33u}) {
      const Matrix s = softmax_rows(Matrix(2, T, 0.37f), 1.0f);
      for (float v : s.data) CHECK(v == doctest::Approx(1.0 / T).epsilon(1e-6));
    }
  }
  SUBCASE("analytic two-element row") {
    const Matrix s = softmax_rows(Matrix::from_rows({{0.0f, std::log(3.0f)}}), 1.0f);
    CHECK(s(0, 0) == doctest::Approx(0.25).epsilon(1e-6));
    CHECK(s(0, 1) == doctest::Approx(0.75).epsilon(1e-6));
  }
  SUBCASE("matches 64-bit oracle") {
    Rng rng(23);
    const Matrix a = random_matrix(rng, 4, 6, 3.0);
    const float scale = 0.7f;
    const Matrix s = softmax_rows(a, scale);
    for (std::size_t i = 0; i < 4; ++i) {
      double z = 0;
      for (std::size_t j = 0; j < 6; ++j) z += std::exp(static_cast<double>(scale) * a(i, j));
      for (std::size_t j = 0; j < 6; ++j) {
        CHECK(std::abs(s(i, j) - std::exp(static_cast<double>(scale) * a(i, j)) / z) < 1e-6);
      }
    }
  }
  SUBCASE("rows sum to one at extreme magnitudes") {
    Rng rng(29);
    const Matrix a = random_matrix(rng, 16, 12, 1e4);
    const Matrix s = softmax_rows(a, 1.0f);
    for (std::size_t i = 0; i < s.rows; ++i) {
      double sum = 0;
      for (float v : s.row(i)) {
        CHECK(v >= 0.0f);
        CHECK(v <= 1.0f);
        sum += v;
      }
      CHECK(std::abs(sum - 1.0) < 1e-5);
    }
  }
  CHECK_THROWS_AS(softmax_rows(Matrix(1, 2), 0.0f), ConfigError);
}

TEST_CASE("layernorm") {
  const std::vector<float> ones(4, 1.0f), zeros(4, 0.0f);
  const auto flat = layernorm(std::vector<float>(4, 2.5f), ones, zeros);
  for (float v : flat) CHECK(v == 0.0f);

  const std::vector<float> g{1, 1}, b{0, 0};
  const auto unit = layernorm(std::vector<float>{1, -1}, g, b, 1e-30f);
  CHECK(unit[0] == doctest::Approx(1.0));
  CHECK(unit[1] == doctest::Approx(-1.0));

  Rng rng(31);
  std::vector<float> x(16), gamma(16), beta(16);
  for (std::size_t i = 0; i < 16; ++i) {
    x[i] = static_cast<float>(rng.normal());
    gamma[i] = static_cast<float>(1.0 + 0.1 * rng.normal());
    beta[i] = static_cast<float>(0.1 * rng.normal());
  }
  double mean = 0, var = 0;
  for (float v : x) mean += v;
  mean /= 16;
  for (float v : x) var += (v - mean) * (v - mean);
  var /= 16;
  const auto y = layernorm(x, gamma, beta, 1e-12f);
  for (std::size_t i = 0; i < 16; ++i) {
    const double expected = (x[i] - mean) / std::sqrt(var + 1e-12) * gamma[i] + beta[i];
    CHECK(std::abs(y[i] - expected) < 1e-6);
  }

  CHECK_THROWS_AS(layernorm(std::vector<float>(3), g, b), ShapeError);
}

TEST_CASE("gelu") {
  CHECK(gelu(0.0f) == 0.0f);
  CHECK(std::abs(gelu(10.0f) - 10.0f) < 1e-6);
  const long double oracle = 0.5L * (1.0L + testing::erf_series(1.0L / std::sqrt(2.0L)));
  CHECK(std::abs(gelu(1.0f) - static_cast<double>(oracle)) < 1e-6);
  CHECK(static_cast<double>(oracle) == doctest::Approx(0.841345).epsilon(1e-6));
  const auto v = gelu(std::vector<float>{-1.0f, 0.0f, 1.0f});
  CHECK(v[0] == doctest::Approx(-(1.0 - 0.841345)).epsilon(1e-5));
}

TEST_CASE("kernels are bitwise deterministic") {
  Rng rng(41);
  const Matrix a = random_matrix(rng, 9, 9), b = random_matrix(rng, 9, 9);
  CHECK(matmul(a, b) == matmul(a, b));
  CHECK(softmax_rows(a, 0.3f) == softmax_rows(a, 0.3f));
}
