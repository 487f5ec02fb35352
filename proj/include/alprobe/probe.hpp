#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "alprobe/encoder.hpp"
#include "alprobe/tokenizer.hpp"

namespace alprobe {

struct PerturbationStrategy {
  enum class Kind { kArgmin, kBottomK };
  Kind kind = Kind::kArgmin;
  std::size_t k = 1;
  std::uint64_t seed = 0;

  static PerturbationStrategy argmin() { return {}; }
  static PerturbationStrategy bottom_k(std::size_t k, std::uint64_t seed) {
    return {Kind::kBottomK, k, seed};
  }
  // "argmin" or "bottomk:K".
  static PerturbationStrategy parse(const std::string& text, std::uint64_t seed = 0);
  std::string to_string() const;
};

// How a multi-piece span is reduced to one token-attention value.
enum class TokenAttentionMode {
  kBlockMean,   // mean over the span x span block
  kRowMass,     // mean over span rows of the mass on span columns
  kFirstPiece,  // diagonal entry of the first piece
};

struct SummaryOptions {
  bool exclude_specials = false;
  TokenAttentionMode mode = TokenAttentionMode::kBlockMean;
};

struct MaskedLikelihood {
  double likelihood = 0.0;
  std::vector<double> position_probs;
  // One V-length logit vector per span position, from the masked pass.
  std::vector<std::vector<float>> logits;
};

struct PerturbationChoice {
  std::vector<TokenId> replacement_ids;
  std::vector<double> position_probs;
  double likelihood = 0.0;
};

struct PerturbationRecord {
  std::string sentence_id;
  Span span;
  std::vector<TokenId> original_ids;
  std::vector<TokenId> replacement_ids;
  double l_orig = 0.0;
  double l_pert = 0.0;
  PerturbationStrategy strategy;
  // Set when the replacement is no less likely than the original.
  bool degenerate = false;
};

struct LayerSummary {
  std::size_t layer = 0;
  double token_attention = 0.0;
  std::vector<double> sentence_attention;
  double matrix_mean = 0.0;
};

enum class Variant { kOriginal, kPerturbed };
std::string to_string(Variant v);
Variant parse_variant(const std::string& s);

struct ProbedSentence {
  std::string id;
  Variant variant = Variant::kOriginal;
  double likelihood = 0.0;
  std::vector<LayerSummary> layers;
};

struct ProbeResult {
  ProbedSentence original;
  ProbedSentence perturbed;
  PerturbationRecord perturbation;
};

// Softmax probability of `id` under `logits`, computed in double.
double softmax_probability(std::span<const float> logits, TokenId id);

MaskedLikelihood masked_likelihood(const EncoderModel& model, const TokenizedSentence& tokens);

// Ids allowed as a replacement at a span position.
bool is_allowed_replacement(const Vocab& vocab, TokenId id, bool first_position);

PerturbationChoice select_perturbation(const std::vector<std::vector<float>>& masked_logits,
                                       const Vocab& vocab, const PerturbationStrategy& strategy,
                                       const std::string& sentence_id = {});

std::vector<LayerSummary> attention_summaries(const ForwardOutput& out, Span span,
                                              const SummaryOptions& options = {});

ProbeResult probe_sentence(const EncoderModel& model, const TokenizedSentence& tokens,
                           const PerturbationStrategy& strategy,
                           const SummaryOptions& options = {});

}  // namespace alprobe
