#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "alprobe/tensor.hpp"
#include "alprobe/tokenizer.hpp"

namespace alprobe {

struct EncoderConfig {
  std::size_t layers = 1;
  std::size_t heads = 1;
  std::size_t hidden = 8;
  std::size_t ffn = 32;
  std::size_t vocab = 16;
  std::size_t max_pos = 128;
  float eps = 1e-12f;
  bool tied_decoder = true;
  bool has_token_type = true;

  std::size_t head_dim() const { return hidden / heads; }
  void validate() const;
  bool operator==(const EncoderConfig&) const = default;
};

struct TensorSpec {
  std::string name;
  std::vector<std::size_t> shape;
};

// Tensors the config requires, in canonical order.
std::vector<TensorSpec> required_tensors(const EncoderConfig& config);

// Named parameter store. 1-D tensors are kept as single-row matrices.
class WeightStore {
 public:
  void insert(std::string name, std::vector<std::size_t> shape, std::vector<float> values);
  bool contains(const std::string& name) const { return tensors_.count(name) != 0; }
  const Matrix& matrix(const std::string& name) const;
  std::span<const float> vector(const std::string& name) const;
  const std::vector<std::size_t>& shape(const std::string& name) const;
  Matrix& mutable_matrix(const std::string& name);
  std::vector<std::string> names() const;
  std::size_t size() const { return tensors_.size(); }

 private:
  struct Entry {
    std::vector<std::size_t> shape;
    Matrix values;
  };
  const Entry& entry(const std::string& name) const;
  std::map<std::string, Entry> tensors_;
};

// Throws ConfigError/ShapeError when the store does not satisfy the config.
void validate_weights(const EncoderConfig& config, const WeightStore& weights);

struct EncoderModel {
  EncoderConfig config;
  WeightStore weights;
  Vocab vocab;

  void validate() const;
};

// Model directory: config.json, weights.alp, vocab.txt.
EncoderModel load_model(const std::filesystem::path& dir);
void save_model(const EncoderModel& model, const std::filesystem::path& dir);

// weights.alp container.
inline constexpr char kWeightsMagic[8] = {'A', 'L', 'P', 'R', 'O', 'B', 'E', '1'};
void write_weights(const std::filesystem::path& path, const EncoderConfig& config,
                   const WeightStore& weights);
WeightStore read_weights(const std::filesystem::path& path);

struct ForwardOptions {
  bool compute_logits = true;
  // Rows of the logit matrix to compute; empty means every position.
  std::vector<std::size_t> logit_rows;
};

struct ForwardOutput {
  // One row per entry of logit_rows (or per position when all were requested).
  Matrix logits;
  std::vector<std::size_t> logit_rows;
  // attentions[layer][head] is T x T, captured after softmax.
  std::vector<std::vector<Matrix>> attentions;
  // Head mean per layer.
  std::vector<Matrix> pooled;
};

ForwardOutput forward(const EncoderModel& model, std::span<const TokenId> ids,
                      const ForwardOptions& options = {});

struct TinyModelSpec {
  EncoderConfig config;
  // Every tensor is N(0, stddev^2); layernorm gains are 1 + N(0, stddev^2).
  float stddev = 0.02f;
  // Zero query/key weights and biases, giving uniform attention.
  bool zero_qk = false;
};

EncoderModel gen_tiny_model(std::uint64_t seed, const TinyModelSpec& spec);

// Vocab of the five specials followed by tok0, tok1, ...
Vocab synthetic_vocab(std::size_t size);

}  // namespace alprobe
