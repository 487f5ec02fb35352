#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace alprobe {

// Dense row-major float32 matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, float fill = 0.0f)
      : rows(r), cols(c), data(r * c, fill) {}

  static Matrix from_rows(std::initializer_list<std::initializer_list<float>> rows);
  static Matrix identity(std::size_t n);

  float& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  float operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  std::span<float> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const float> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

  std::string shape_string() const;
  bool operator==(const Matrix&) const = default;
};

// result[i][j] = sum_k a[i][k] * b[k][j], k ascending.
Matrix matmul(const Matrix& a, const Matrix& b);

// result[i][j] = sum_k a[i][k] * b[j][k], k ascending.
Matrix matmul_transposed(const Matrix& a, const Matrix& b);

// Row-wise softmax of scale * a with max subtraction.
Matrix softmax_rows(const Matrix& a, float scale);

std::vector<float> layernorm(std::span<const float> x, std::span<const float> gamma,
                             std::span<const float> beta, float eps = 1e-12f);

float gelu(float x);
std::vector<float> gelu(std::span<const float> x);

// In-place helpers used by the encoder.
void add_row_bias(Matrix& m, std::span<const float> bias);
void add_inplace(Matrix& m, const Matrix& other);
void layernorm_rows(Matrix& m, std::span<const float> gamma, std::span<const float> beta,
                    float eps);
void gelu_inplace(Matrix& m);

// Linear layer on row vectors: x * w + b, w stored [in, out].
Matrix linear(const Matrix& x, const Matrix& w, std::span<const float> b);

}  // namespace alprobe
