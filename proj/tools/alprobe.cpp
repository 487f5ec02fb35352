// alprobe command-line front end.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "alprobe/corpus.hpp"
#include "alprobe/encoder.hpp"
#include "alprobe/error.hpp"
#include "alprobe/pipeline.hpp"
#include "alprobe/records.hpp"
#include "alprobe/verify.hpp"

namespace fs = std::filesystem;
using namespace alprobe;

namespace {

struct RunArgs {
  std::string model_dir, corpus, out, strategy = "argmin", model_name, token_attention = "block-mean";
  std::uint64_t seed = 0;
  std::size_t max_len = 128, threads = 1;
  bool exclude_specials = false, per_sentence_mwu = false, strict = false;
};

struct TinyArgs {
  std::uint64_t seed = 0;
  std::size_t layers = 2, heads = 2, hidden = 8, vocab = 50, ffn = 0, max_pos = 128;
  float stddev = 0.02f;
  bool zero_qk = false, untied = false, no_token_type = false;
  std::string out;
};

struct CorpusArgs {
  std::uint64_t seed = 0;
  std::size_t n = 100, min_words = 5, max_words = 12;
  std::string model_dir, out;
};

struct StatsArgs {
  std::string records, out, model_name = "model";
  bool per_sentence_mwu = false;
};

struct VerifyArgs {
  std::string model_dir, golden;
  double tol = 1e-3;
  std::size_t max_len = 128;
};

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

TokenAttentionMode parse_mode(const std::string& s) {
  if (s == "block-mean") return TokenAttentionMode::kBlockMean;
  if (s == "row-mass") return TokenAttentionMode::kRowMass;
  if (s == "first-piece") return TokenAttentionMode::kFirstPiece;
  throw ConfigError("unknown token attention mode '" + s + "'");
}

int finish_analysis(const Analysis& analysis, const fs::path& out) {
  write_analysis(analysis, out);
  for (const auto& row : analysis.stats) {
    if (!row.rho) {
      std::cerr << "warning: rho undefined for " << to_string(row.variant) << " layer "
                << row.layer << ": " << row.rho_note << "\n";
    }
  }
  if (!analysis.summary) {
    std::cerr << "error: no summary: " << analysis.summary_error << "\n";
    return 2;
  }
  const auto& s = *analysis.summary;
  std::cout << "layer " << s.layer << "  tok_attn " << format_float(s.original.tok_attn_mean)
            << " -> " << format_float(s.perturbed.tok_attn_mean) << "  likelihood "
            << format_float(s.original.lik_mean) << " -> " << format_float(s.perturbed.lik_mean)
            << "  mwu p " << format_float(s.mwu.p) << "\n";
  return 0;
}

int cmd_run(const RunArgs& a) {
  const EncoderModel model = load_model(a.model_dir);
  const auto corpus = load_corpus(a.corpus, a.strict);
  for (const auto& issue : corpus.issues) {
    std::cerr << "warning: " << a.corpus;
    if (issue.line) std::cerr << ":" << issue.line;
    std::cerr << ": " << issue.message << "\n";
  }
  const fs::path out(a.out);
  make_dir(out);

  const auto filtered = filter_corpus(corpus.records, model.vocab, a.max_len);
  write_drop_log(out / "drops.jsonl", filtered.drops);
  std::cerr << "kept " << filtered.kept.size() << " of " << corpus.records.size()
            << " sentences\n";

  SummaryOptions summary;
  summary.exclude_specials = a.exclude_specials;
  summary.mode = parse_mode(a.token_attention);
  const auto strategy = PerturbationStrategy::parse(a.strategy, a.seed);
  const auto results = probe_corpus(model, filtered.kept, strategy, summary, a.threads);
  write_probe_records(out / "records.jsonl", results);

  const std::string name =
      a.model_name.empty() ? fs::path(a.model_dir).lexically_normal().filename().string()
                           : a.model_name;
  const auto records = flatten(results);
  return finish_analysis(analyze(records, model.config.layers, name.empty() ? "model" : name,
                                 a.per_sentence_mwu),
                         out);
}

int cmd_gen_tiny(const TinyArgs& a) {
  TinyModelSpec spec;
  spec.config.layers = a.layers;
  spec.config.heads = a.heads;
  spec.config.hidden = a.hidden;
  spec.config.vocab = a.vocab;
  spec.config.ffn = a.ffn ? a.ffn : 4 * a.hidden;
  spec.config.max_pos = a.max_pos;
  spec.config.tied_decoder = !a.untied;
  spec.config.has_token_type = !a.no_token_type;
  spec.stddev = a.stddev;
  spec.zero_qk = a.zero_qk;
  save_model(gen_tiny_model(a.seed, spec), a.out);
  return 0;
}

int cmd_gen_corpus(const CorpusArgs& a) {
  const Vocab vocab = Vocab::load(fs::path(a.model_dir) / "vocab.txt");
  SyntheticCorpusSpec spec{a.n, a.min_words, a.max_words};
  write_corpus(a.out, gen_synthetic_corpus(a.seed, vocab, spec));
  return 0;
}

int cmd_stats(const StatsArgs& a) {
  const auto stream = read_probe_records(fs::path(a.records));
  const fs::path out(a.out);
  make_dir(out);
  return finish_analysis(
      analyze(stream.sentences, infer_layers(stream.sentences), a.model_name, a.per_sentence_mwu),
      out);
}

int cmd_verify(const VerifyArgs& a) {
  const EncoderModel model = load_model(a.model_dir);
  const auto report = verify_golden(model, read_golden(a.golden), a.tol, a.max_len);
  for (const auto& c : report.cases) {
    std::cout << (c.ids_match && c.max_logit_diff < a.tol && c.max_attn_diff < a.tol ? "ok  "
                                                                                       : "FAIL")
              << "  ids " << (c.ids_match ? "match" : "differ") << "  logits "
              << format_float(c.max_logit_diff) << "  attn " << format_float(c.max_attn_diff)
              << "  " << c.text << "\n";
  }
  std::cout << "max logit diff " << format_float(report.max_logit_diff) << ", max attention diff "
            << format_float(report.max_attn_diff) << ", tol " << format_float(a.tol) << "\n";
  return report.passed ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Likelihood-guided attention probing for encoder masked language models"};
  app.require_subcommand(1);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Probe a corpus and write records and tables");
  run_cmd->add_option("--model-dir", run.model_dir, "Model directory")->required();
  run_cmd->add_option("--corpus", run.corpus, "Corpus JSONL")->required();
  run_cmd->add_option("--out", run.out, "Output directory")->required();
  run_cmd->add_option("--strategy", run.strategy, "argmin or bottomk:K");
  run_cmd->add_option("--seed", run.seed, "Seed for bottom-k draws");
  run_cmd->add_option("--max-len", run.max_len, "Maximum pieces including specials")
      ->check(CLI::Range(std::size_t{3}, std::size_t{1} << 20));
  run_cmd->add_flag("--exclude-specials", run.exclude_specials,
                    "Drop [CLS]/[SEP] columns from sentence attention");
  run_cmd->add_option("--threads", run.threads, "Worker threads")->check(CLI::PositiveNumber);
  run_cmd->add_option("--token-attention", run.token_attention,
                      "block-mean, row-mass or first-piece");
  run_cmd->add_option("--model-name", run.model_name, "Name used in tables");
  run_cmd->add_flag("--per-sentence-mwu", run.per_sentence_mwu, "Also test each sentence");
  run_cmd->add_flag("--strict", run.strict, "Abort on malformed corpus lines");

  TinyArgs tiny;
  auto* tiny_cmd = app.add_subcommand("gen-tiny", "Generate a random tiny model");
  tiny_cmd->add_option("--seed", tiny.seed)->required();
  tiny_cmd->add_option("--layers", tiny.layers)->required();
  tiny_cmd->add_option("--heads", tiny.heads)->required();
  tiny_cmd->add_option("--hidden", tiny.hidden)->required();
  tiny_cmd->add_option("--vocab", tiny.vocab)->required();
  tiny_cmd->add_option("--out", tiny.out)->required();
  tiny_cmd->add_option("--ffn", tiny.ffn, "FFN width (default 4 x hidden)");
  tiny_cmd->add_option("--max-pos", tiny.max_pos);
  tiny_cmd->add_option("--std", tiny.stddev, "Weight standard deviation");
  tiny_cmd->add_flag("--zero-qk", tiny.zero_qk, "Zero query/key projections");
  tiny_cmd->add_flag("--untied", tiny.untied, "Separate MLM decoder matrix");
  tiny_cmd->add_flag("--no-token-type", tiny.no_token_type, "Omit token-type embeddings");

  CorpusArgs corpus;
  auto* corpus_cmd = app.add_subcommand("gen-corpus", "Generate a synthetic corpus");
  corpus_cmd->add_option("--seed", corpus.seed)->required();
  corpus_cmd->add_option("--n", corpus.n)->required()->check(CLI::PositiveNumber);
  corpus_cmd->add_option("--model-dir", corpus.model_dir)->required();
  corpus_cmd->add_option("--out", corpus.out)->required();
  corpus_cmd->add_option("--min-words", corpus.min_words);
  corpus_cmd->add_option("--max-words", corpus.max_words);

  StatsArgs stats;
  auto* stats_cmd = app.add_subcommand("stats", "Re-analyse a persisted record stream");
  stats_cmd->add_option("--records", stats.records)->required();
  stats_cmd->add_option("--out", stats.out)->required();
  stats_cmd->add_option("--model-name", stats.model_name);
  stats_cmd->add_flag("--per-sentence-mwu", stats.per_sentence_mwu);

  VerifyArgs verify;
  auto* verify_cmd = app.add_subcommand("verify", "Compare engine outputs with golden data");
  verify_cmd->add_option("--model-dir", verify.model_dir)->required();
  verify_cmd->add_option("--golden", verify.golden)->required();
  verify_cmd->add_option("--tol", verify.tol, "Absolute tolerance on logits and attention");
  verify_cmd->add_option("--max-len", verify.max_len, "Maximum pieces including specials");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*run_cmd) return cmd_run(run);
    if (*tiny_cmd) return cmd_gen_tiny(tiny);
    if (*corpus_cmd) return cmd_gen_corpus(corpus);
    if (*stats_cmd) return cmd_stats(stats);
    if (*verify_cmd) return cmd_verify(verify);
  } catch (const alprobe::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
