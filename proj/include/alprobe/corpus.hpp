#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "alprobe/tokenizer.hpp"

namespace alprobe {

struct SentenceRecord {
  std::string id;
  std::string sentence;
  std::string target;
  bool operator==(const SentenceRecord&) const = default;
};

struct CorpusIssue {
  std::size_t line = 0;  // 0 for file-level warnings
  std::string message;
};

struct CorpusLoad {
  std::vector<SentenceRecord> records;
  std::vector<CorpusIssue> issues;
};

// JSONL, one {id, sentence, target} object per line. Malformed lines are
// reported and skipped, or abort with FormatError when strict.
CorpusLoad load_corpus(const std::filesystem::path& path, bool strict = false);
CorpusLoad parse_corpus(std::istream& in, bool strict = false);

void write_corpus(const std::filesystem::path& path, const std::vector<SentenceRecord>& records);

enum class DropReason {
  kEmptySentence,
  kNoExactMatch,
  kTooShort,
  kTargetTruncated,
  kTargetUnknown,
};

std::string to_string(DropReason reason);

struct Drop {
  std::string id;
  DropReason reason;
};

struct FilterResult {
  std::vector<TokenizedSentence> kept;
  std::vector<Drop> drops;
};

inline constexpr std::size_t kMinWords = 5;

FilterResult filter_corpus(const std::vector<SentenceRecord>& records, const Vocab& vocab,
                           std::size_t max_len = 128);

void write_drop_log(const std::filesystem::path& path, const std::vector<Drop>& drops);

struct SyntheticCorpusSpec {
  std::size_t n = 100;
  std::size_t min_words = 5;
  std::size_t max_words = 12;
};

// Sentences of whole-word vocab entries drawn uniformly; the target is one of
// the sentence's words chosen uniformly.
std::vector<SentenceRecord> gen_synthetic_corpus(std::uint64_t seed, const Vocab& vocab,
                                                 const SyntheticCorpusSpec& spec = {});

}  // namespace alprobe
