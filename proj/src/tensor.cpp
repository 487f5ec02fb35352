#include "alprobe/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "alprobe/error.hpp"

namespace alprobe {

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<float>> rows) {
  Matrix m;
  m.rows = rows.size();
  m.cols = rows.size() ? rows.begin()->size() : 0;
  m.data.reserve(m.rows * m.cols);
  for (const auto& r : rows) {
    if (r.size() != m.cols) throw ShapeError("ragged rows in matrix literal");
    m.data.insert(m.data.end(), r.begin(), r.end());
  }
  return m;
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0f;
  return m;
}

std::string Matrix::shape_string() const {
  return "[" + std::to_string(rows) + "x" + std::to_string(cols) + "]";
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows) {
    throw ShapeError("matmul shape mismatch: " + a.shape_string() + " x " + b.shape_string());
  }
  Matrix c(a.rows, b.cols);
  // i-k-j order: every c[i][j] still accumulates over k ascending.
  for (std::size_t i = 0; i < a.rows; ++i) {
    float* crow = c.data.data() + i * c.cols;
    for (std::size_t k = 0; k < a.cols; ++k) {
      const float aik = a(i, k);
      const float* brow = b.data.data() + k * b.cols;
      for (std::size_t j = 0; j < b.cols; ++j) crow[j] += aik * brow[j];
    }
  }
  return c;
}

Matrix matmul_transposed(const Matrix& a, const Matrix& b) {
  if (a.cols != b.cols) {
    throw ShapeError("matmul_transposed shape mismatch: " + a.shape_string() + " x " +
                     b.shape_string() + "^T");
  }
  Matrix c(a.rows, b.rows);
  for (std::size_t i = 0; i < a.rows; ++i) {
    const float* arow = a.data.data() + i * a.cols;
    for (std::size_t j = 0; j < b.rows; ++j) {
      const float* brow = b.data.data() + j * b.cols;
      float acc = 0.0f;
      for (std::size_t k = 0; k < a.cols; ++k) acc += arow[k] * brow[k];
      c(i, j) = acc;
    }
  }
  return c;
}

Matrix softmax_rows(const Matrix& a, float scale) {
  if (!(scale > 0.0f)) throw ConfigError("softmax scale must be positive");
  Matrix out(a.rows, a.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    auto in = a.row(i);
    auto dst = out.row(i);
    if (in.empty()) continue;
    const float mx = *std::max_element(in.begin(), in.end()) * scale;
    float sum = 0.0f;
    for (std::size_t j = 0; j < in.size(); ++j) {
      dst[j] = std::exp(scale * in[j] - mx);
      sum += dst[j];
    }
    for (float& v : dst) v /= sum;
  }
  return out;
}

std::vector<float> layernorm(std::span<const float> x, std::span<const float> gamma,
                             std::span<const float> beta, float eps) {
  if (x.size() != gamma.size() || x.size() != beta.size()) {
    throw ShapeError("layernorm length mismatch: x=" + std::to_string(x.size()) +
                     " gamma=" + std::to_string(gamma.size()) +
                     " beta=" + std::to_string(beta.size()));
  }
  const auto n = static_cast<float>(x.size());
  float mean = 0.0f;
  for (float v : x) mean += v;
  mean /= n;
  float var = 0.0f;
  for (float v : x) var += (v - mean) * (v - mean);
  var /= n;
  const float inv = 1.0f / std::sqrt(var + eps);
  std::vector<float> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - mean) * inv * gamma[i] + beta[i];
  return out;
}

float gelu(float x) {
  return 0.5f * x * (1.0f + std::erf(x / std::sqrt(2.0f)));
}

std::vector<float> gelu(std::span<const float> x) {
  std::vector<float> out(x.size());
  std::transform(x.begin(), x.end(), out.begin(), [](float v) { return gelu(v); });
  return out;
}

void add_row_bias(Matrix& m, std::span<const float> bias) {
  if (bias.size() != m.cols) {
    throw ShapeError("bias length " + std::to_string(bias.size()) + " vs matrix " +
                     m.shape_string());
  }
  for (std::size_t i = 0; i < m.rows; ++i) {
    auto r = m.row(i);
    for (std::size_t j = 0; j < m.cols; ++j) r[j] += bias[j];
  }
}

void add_inplace(Matrix& m, const Matrix& other) {
  if (m.rows != other.rows || m.cols != other.cols) {
    throw ShapeError("add shape mismatch: " + m.shape_string() + " + " + other.shape_string());
  }
  for (std::size_t i = 0; i < m.data.size(); ++i) m.data[i] += other.data[i];
}

void layernorm_rows(Matrix& m, std::span<const float> gamma, std::span<const float> beta,
                    float eps) {
  for (std::size_t i = 0; i < m.rows; ++i) {
    auto r = m.row(i);
    auto normed = layernorm(r, gamma, beta, eps);
    std::copy(normed.begin(), normed.end(), r.begin());
  }
}

void gelu_inplace(Matrix& m) {
  for (float& v : m.data) v = gelu(v);
}

Matrix linear(const Matrix& x, const Matrix& w, std::span<const float> b) {
  Matrix y = matmul(x, w);
  add_row_bias(y, b);
  return y;
}

}  // namespace alprobe
