#include "alprobe/pipeline.hpp"

#include <atomic>
#include <exception>
#include <fstream>
#include <mutex>
#include <thread>

#include "alprobe/error.hpp"

namespace alprobe {

std::vector<ProbeResult> probe_corpus(const EncoderModel& model,
                                      const std::vector<TokenizedSentence>& sentences,
                                      const PerturbationStrategy& strategy,
                                      const SummaryOptions& options, std::size_t threads) {
  std::vector<ProbeResult> results(sentences.size());
  const std::size_t workers = std::max<std::size_t>(1, std::min(threads, sentences.size()));
  if (workers == 1) {
    for (std::size_t i = 0; i < sentences.size(); ++i) {
      results[i] = probe_sentence(model, sentences[i], strategy, options);
    }
    return results;
  }

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    for (std::size_t i = next++; i < sentences.size(); i = next++) {
      try {
        results[i] = probe_sentence(model, sentences[i], strategy, options);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = sentences.size();
      }
    }
  };
  std::vector<std::jthread> pool;
  for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(work);
  pool.clear();
  if (failure) std::rethrow_exception(failure);
  return results;
}

std::vector<ProbedSentence> flatten(const std::vector<ProbeResult>& results) {
  std::vector<ProbedSentence> out;
  out.reserve(results.size() * 2);
  for (const auto& r : results) {
    out.push_back(r.original);
    out.push_back(r.perturbed);
  }
  return out;
}

std::size_t infer_layers(const std::vector<ProbedSentence>& records) {
  if (records.empty()) throw InsufficientDataError("record stream is empty");
  const std::size_t layers = records.front().layers.size();
  for (const auto& r : records) {
    if (r.layers.size() != layers) {
      throw FormatError("sentence " + r.id + " has " + std::to_string(r.layers.size()) +
                        " layers, expected " + std::to_string(layers));
    }
    for (std::size_t l = 0; l < layers; ++l) {
      if (r.layers[l].layer != l) throw FormatError("sentence " + r.id + " layers out of order");
    }
  }
  return layers;
}

Analysis analyze(const std::vector<ProbedSentence>& records, std::size_t layers,
                 const std::string& model, bool per_sentence) {
  Analysis a;
  a.stats = aggregate(records, layers, model);
  try {
    a.summary = summarize(a.stats, records);
  } catch (const NumericError& e) {
    a.summary_error = e.what();
  }
  if (per_sentence && a.summary) a.sentence_mwu = per_sentence_mwu(records, a.summary->layer);
  return a;
}

void write_analysis(const Analysis& analysis, const std::filesystem::path& dir) {
  emit(analysis.stats, EmitFormat::kCsv, dir / "stats.csv");
  emit(analysis.stats, EmitFormat::kJson, dir / "plot.json");
  if (analysis.summary) emit_summary({*analysis.summary}, dir / "summary.csv");
  if (!analysis.sentence_mwu.empty()) {
    std::ofstream out(dir / "mwu_per_sentence.csv", std::ios::binary);
    if (!out) throw IoError("cannot write " + (dir / "mwu_per_sentence.csv").string());
    out << per_sentence_mwu_csv(analysis.sentence_mwu);
  }
}

}  // namespace alprobe
