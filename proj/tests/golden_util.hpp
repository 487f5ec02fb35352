#pragma once

#include <string>
#include <vector>

#include "alprobe/verify.hpp"
#include "reference_encoder.hpp"

namespace alprobe::testing {

// Golden data computed by the double-precision reference encoder.
inline GoldenFile reference_golden(const EncoderModel& model, const std::vector<std::string>& texts,
                                   std::size_t max_len = 128) {
  GoldenFile g;
  g.model = "reference";
  for (const auto& text : texts) {
    GoldenCase c;
    c.text = text;
    c.piece_ids = tokenize(text, model.vocab, max_len).ids;
    c.masked_pos = c.piece_ids.size() / 2;
    auto masked = c.piece_ids;
    masked[c.masked_pos] = model.vocab.mask();
    c.logits = reference_forward(model, masked).logits[c.masked_pos];
    c.pooled_attn = reference_forward(model, c.piece_ids).pooled;
    g.cases.push_back(std::move(c));
  }
  return g;
}

}  // namespace alprobe::testing
