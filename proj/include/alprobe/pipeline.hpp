#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "alprobe/corpus.hpp"
#include "alprobe/encoder.hpp"
#include "alprobe/probe.hpp"
#include "alprobe/report.hpp"

namespace alprobe {

// Probes every sentence, spreading work over `threads` workers. Results keep
// the input order.
std::vector<ProbeResult> probe_corpus(const EncoderModel& model,
                                      const std::vector<TokenizedSentence>& sentences,
                                      const PerturbationStrategy& strategy,
                                      const SummaryOptions& options, std::size_t threads = 1);

struct Analysis {
  std::vector<CorpusStats> stats;
  std::optional<SummaryRow> summary;
  // Why the summary could not be produced, when it is empty.
  std::string summary_error;
  std::vector<SentenceMwu> sentence_mwu;
};

Analysis analyze(const std::vector<ProbedSentence>& records, std::size_t layers,
                 const std::string& model, bool per_sentence = false);

// Writes stats.csv, plot.json and, when available, summary.csv and
// mwu_per_sentence.csv into `dir`.
void write_analysis(const Analysis& analysis, const std::filesystem::path& dir);

std::vector<ProbedSentence> flatten(const std::vector<ProbeResult>& results);

// Layer count of a record stream; all records must agree.
std::size_t infer_layers(const std::vector<ProbedSentence>& records);

}  // namespace alprobe
