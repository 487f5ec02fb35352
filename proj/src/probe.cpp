#include "alprobe/probe.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>

#include "alprobe/error.hpp"
#include "alprobe/rng.hpp"

namespace alprobe {

PerturbationStrategy PerturbationStrategy::parse(const std::string& text, std::uint64_t seed) {
  if (text == "argmin") return argmin();
  const std::string prefix = "bottomk:";
  if (text.starts_with(prefix)) {
    const std::string digits = text.substr(prefix.size());
    if (!digits.empty() && std::all_of(digits.begin(), digits.end(),
                                           [](unsigned char ch) { return std::isdigit(ch) != 0; })) {
      const auto k = std::stoull(digits);
      if (k >= 1) return bottom_k(k, seed);
    }
  }
  throw ConfigError("invalid strategy '" + text + "', expected argmin or bottomk:K");
}

std::string PerturbationStrategy::to_string() const {
  return kind == Kind::kArgmin ? "argmin" : "bottomk:" + std::to_string(k);
}

std::string to_string(Variant v) { return v == Variant::kOriginal ? "original" : "perturbed"; }

Variant parse_variant(const std::string& s) {
  if (s == "original") return Variant::kOriginal;
  if (s == "perturbed") return Variant::kPerturbed;
  throw FormatError("unknown variant '" + s + "'");
}

double softmax_probability(std::span<const float> logits, TokenId id) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (float v : logits) sum += std::exp(static_cast<double>(v) - mx);
  return std::exp(static_cast<double>(logits[static_cast<std::size_t>(id)]) - mx) / sum;
}

namespace {

double geometric_mean(const std::vector<double>& probs) {
  double log_sum = 0.0;
  for (double p : probs) log_sum += std::log(p);
  return std::exp(log_sum / static_cast<double>(probs.size()));
}

void check_span(const TokenizedSentence& tokens) {
  const auto T = tokens.ids.size();
  if (tokens.span.size() == 0 || tokens.span.begin < 1 || T < 3 || tokens.span.end > T - 1) {
    throw ConfigError("sentence " + tokens.id + ": target span outside (CLS, SEP)");
  }
}

}  // namespace

MaskedLikelihood masked_likelihood(const EncoderModel& model, const TokenizedSentence& tokens) {
  check_span(tokens);
  std::vector<TokenId> masked = tokens.ids;
  ForwardOptions options;
  for (std::size_t p = tokens.span.begin; p < tokens.span.end; ++p) {
    masked[p] = model.vocab.mask();
    options.logit_rows.push_back(p);
  }
  const ForwardOutput out = forward(model, masked, options);

  MaskedLikelihood result;
  for (std::size_t r = 0; r < out.logit_rows.size(); ++r) {
    auto row = out.logits.row(r);
    const TokenId original = tokens.ids[out.logit_rows[r]];
    result.position_probs.push_back(softmax_probability(row, original));
    result.logits.emplace_back(row.begin(), row.end());
  }
  result.likelihood = geometric_mean(result.position_probs);
  return result;
}

bool is_allowed_replacement(const Vocab& vocab, TokenId id, bool first_position) {
  if (vocab.is_special(id)) return false;
  if (first_position && vocab.is_continuation(id)) return false;
  return true;
}

PerturbationChoice select_perturbation(const std::vector<std::vector<float>>& masked_logits,
                                       const Vocab& vocab, const PerturbationStrategy& strategy,
                                       const std::string& sentence_id) {
  if (strategy.kind == PerturbationStrategy::Kind::kBottomK && strategy.k < 1) {
    throw ConfigError("bottom-k strategy needs k >= 1");
  }
  Rng rng(derive_seed(strategy.seed, sentence_id));
  PerturbationChoice choice;
  for (std::size_t pos = 0; pos < masked_logits.size(); ++pos) {
    const auto& logits = masked_logits[pos];
    if (logits.size() != vocab.size()) {
      throw ShapeError("logit vector of length " + std::to_string(logits.size()) +
                       " for vocab of " + std::to_string(vocab.size()));
    }
    std::vector<TokenId> allowed;
    for (std::size_t i = 0; i < logits.size(); ++i) {
      const auto id = static_cast<TokenId>(i);
      if (is_allowed_replacement(vocab, id, pos == 0)) allowed.push_back(id);
    }
    if (allowed.empty()) throw ConfigError("no allowed replacement token in vocabulary");

    // Softmax is monotone, so ranking logits ranks probabilities.
    TokenId picked;
    if (strategy.kind == PerturbationStrategy::Kind::kArgmin) {
      picked = allowed.front();
      for (TokenId id : allowed) {
        if (logits[static_cast<std::size_t>(id)] < logits[static_cast<std::size_t>(picked)]) {
          picked = id;
        }
      }
    } else {
      const std::size_t k = std::min(strategy.k, allowed.size());
      std::partial_sort(allowed.begin(), allowed.begin() + static_cast<std::ptrdiff_t>(k),
                        allowed.end(), [&](TokenId a, TokenId b) {
                          const float la = logits[static_cast<std::size_t>(a)];
                          const float lb = logits[static_cast<std::size_t>(b)];
                          return la < lb || (la == lb && a < b);
                        });
      picked = allowed[rng.uniform_index(k)];
    }
    choice.replacement_ids.push_back(picked);
    choice.position_probs.push_back(softmax_probability(logits, picked));
  }
  choice.likelihood = geometric_mean(choice.position_probs);
  return choice;
}

std::vector<LayerSummary> attention_summaries(const ForwardOutput& out, Span span,
                                              const SummaryOptions& options) {
  std::vector<LayerSummary> summaries;
  summaries.reserve(out.pooled.size());
  for (std::size_t l = 0; l < out.pooled.size(); ++l) {
    const Matrix& a = out.pooled[l];
    const std::size_t T = a.rows;
    if (a.cols != T || T < 3 || span.size() == 0 || span.begin < 1 || span.end > T - 1) {
      throw ShapeError("span [" + std::to_string(span.begin) + "," + std::to_string(span.end) +
                       ") invalid for attention " + a.shape_string());
    }
    LayerSummary s;
    s.layer = l;
    const auto n = static_cast<double>(span.size());
    switch (options.mode) {
      case TokenAttentionMode::kBlockMean: {
        double block = 0.0;
        for (std::size_t p = span.begin; p < span.end; ++p)
          for (std::size_t q = span.begin; q < span.end; ++q) block += a(p, q);
        s.token_attention = block / (n * n);
        break;
      }
      case TokenAttentionMode::kRowMass: {
        double block = 0.0;
        for (std::size_t p = span.begin; p < span.end; ++p)
          for (std::size_t q = span.begin; q < span.end; ++q) block += a(p, q);
        s.token_attention = block / n;
        break;
      }
      case TokenAttentionMode::kFirstPiece:
        s.token_attention = a(span.begin, span.begin);
        break;
    }
    for (std::size_t p = span.begin; p < span.end; ++p) {
      for (std::size_t j = 0; j < T; ++j) {
        if (span.contains(j)) continue;
        if (options.exclude_specials && (j == 0 || j == T - 1)) continue;
        s.sentence_attention.push_back(a(p, j));
      }
    }
    double total = 0.0;
    for (float v : a.data) total += v;
    s.matrix_mean = total / static_cast<double>(T * T);
    summaries.push_back(std::move(s));
  }
  return summaries;
}

ProbeResult probe_sentence(const EncoderModel& model, const TokenizedSentence& tokens,
                           const PerturbationStrategy& strategy, const SummaryOptions& options) {
  const MaskedLikelihood masked = masked_likelihood(model, tokens);
  const PerturbationChoice choice =
      select_perturbation(masked.logits, model.vocab, strategy, tokens.id);

  ProbeResult result;
  auto& rec = result.perturbation;
  rec.sentence_id = tokens.id;
  rec.span = tokens.span;
  rec.original_ids.assign(tokens.ids.begin() + static_cast<std::ptrdiff_t>(tokens.span.begin),
                          tokens.ids.begin() + static_cast<std::ptrdiff_t>(tokens.span.end));
  rec.replacement_ids = choice.replacement_ids;
  rec.l_orig = masked.likelihood;
  rec.l_pert = choice.likelihood;
  rec.strategy = strategy;
  rec.degenerate = rec.l_pert >= rec.l_orig;

  std::vector<TokenId> perturbed = tokens.ids;
  std::copy(choice.replacement_ids.begin(), choice.replacement_ids.end(),
            perturbed.begin() + static_cast<std::ptrdiff_t>(tokens.span.begin));

  const TokenId mask = model.vocab.mask();
  for (const auto& seq : {std::span<const TokenId>(tokens.ids), std::span<const TokenId>(perturbed)}) {
    if (std::find(seq.begin(), seq.end(), mask) != seq.end()) {
      throw ValidationError("sentence " + tokens.id + ": [MASK] present in an unmasked pass");
    }
  }

  ForwardOptions no_logits;
  no_logits.compute_logits = false;
  const ForwardOutput orig_out = forward(model, tokens.ids, no_logits);
  const ForwardOutput pert_out = forward(model, perturbed, no_logits);

  result.original = {tokens.id, Variant::kOriginal, rec.l_orig,
                     attention_summaries(orig_out, tokens.span, options)};
  result.perturbed = {tokens.id, Variant::kPerturbed, rec.l_pert,
                      attention_summaries(pert_out, tokens.span, options)};
  return result;
}

}  // namespace alprobe
