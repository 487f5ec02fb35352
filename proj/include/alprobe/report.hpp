#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "alprobe/probe.hpp"
#include "alprobe/stats.hpp"

namespace alprobe {

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

// Sample (n - 1) statistics. Needs at least one value; std is 0 for one.
MeanStd mean_std(const std::vector<double>& values);

struct CorpusStats {
  std::string model;
  Variant variant = Variant::kOriginal;
  std::size_t layer = 0;
  std::size_t sentences = 0;
  MeanStd attn;
  MeanStd tok_attn;
  MeanStd sent_attn;
  MeanStd likelihood;
  // Spearman(likelihood, token attention) across sentences; empty when
  // undefined, with the reason in rho_note.
  std::optional<double> rho;
  std::string rho_note;
};

struct SummarySide {
  double tok_attn_mean = 0.0;
  double lik_mean = 0.0;
  std::optional<double> rho;
};

struct SummaryRow {
  std::string model;
  std::size_t layer = 0;
  SummarySide original;
  SummarySide perturbed;
  MwuResult mwu;
};

// One row per (variant, layer), sorted by (model, variant, layer).
// Throws InsufficientDataError when a variant has fewer than two sentences.
std::vector<CorpusStats> aggregate(const std::vector<ProbedSentence>& records,
                                   std::size_t layers, const std::string& model);

// Picks the layer with the largest perturbed rho (ties go to the deeper
// layer) and tests pooled sentence attention there, original vs perturbed.
SummaryRow summarize(const std::vector<CorpusStats>& rows,
                     const std::vector<ProbedSentence>& records);

struct SentenceMwu {
  std::string id;
  std::optional<MwuResult> result;
  std::string note;
};

// Per-sentence diagnostic test at one layer.
std::vector<SentenceMwu> per_sentence_mwu(const std::vector<ProbedSentence>& records,
                                          std::size_t layer);

enum class EmitFormat { kCsv, kJson };

std::string format_float(double v);
std::string stats_csv(const std::vector<CorpusStats>& rows);
std::string plot_json(const std::vector<CorpusStats>& rows);
std::string summary_csv(const std::vector<SummaryRow>& rows);
std::string per_sentence_mwu_csv(const std::vector<SentenceMwu>& rows);

// CSV writes the per-layer table; JSON writes (model, layer, variant, rho).
void emit(const std::vector<CorpusStats>& rows, EmitFormat format,
          const std::filesystem::path& out);
void emit_summary(const std::vector<SummaryRow>& rows, const std::filesystem::path& out);

}  // namespace alprobe
