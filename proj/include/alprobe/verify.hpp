#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "alprobe/encoder.hpp"

namespace alprobe {

// Reference outputs for one sentence. `logits` are taken at `masked_pos`
// with that position replaced by [MASK]; `pooled_attn` ([layer][T][T]) comes
// from the unmasked sequence.
struct GoldenCase {
  std::string text;
  std::vector<TokenId> piece_ids;
  std::size_t masked_pos = 0;
  std::vector<double> logits;
  std::vector<std::vector<std::vector<double>>> pooled_attn;
};

struct GoldenFile {
  std::string model;
  std::vector<GoldenCase> cases;
};

GoldenFile read_golden(const std::filesystem::path& path);
void write_golden(const std::filesystem::path& path, const GoldenFile& golden);

struct CaseParity {
  std::string text;
  bool ids_match = false;
  double max_logit_diff = 0.0;
  double max_attn_diff = 0.0;
};

struct ParityReport {
  std::vector<CaseParity> cases;
  double max_logit_diff = 0.0;
  double max_attn_diff = 0.0;
  bool passed = false;
};

// Re-tokenizes each case, runs the engine on the golden piece ids and
// compares logits and pooled attention against `tol`.
ParityReport verify_golden(const EncoderModel& model, const GoldenFile& golden, double tol,
                           std::size_t max_len = 128);

}  // namespace alprobe
