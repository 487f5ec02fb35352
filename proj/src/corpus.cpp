#include "alprobe/corpus.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "alprobe/error.hpp"
#include "alprobe/rng.hpp"

namespace alprobe {

using json = nlohmann::json;

CorpusLoad parse_corpus(std::istream& in, bool strict) {
  CorpusLoad load;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  auto report = [&](std::string message) {
    if (strict) throw FormatError("line " + std::to_string(lineno) + ": " + message);
    load.issues.push_back({lineno, std::move(message)});
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    SentenceRecord rec;
    try {
      const json j = json::parse(line);
      rec.id = j.at("id").get<std::string>();
      rec.sentence = j.at("sentence").get<std::string>();
      rec.target = j.at("target").get<std::string>();
    } catch (const json::exception& e) {
      report(std::string("malformed record: ") + e.what());
      continue;
    }
    if (rec.id.empty() || rec.sentence.empty() || rec.target.empty()) {
      report("empty id, sentence or target");
      continue;
    }
    if (!seen.insert(rec.id).second) {
      report("duplicate id '" + rec.id + "'");
      continue;
    }
    load.records.push_back(std::move(rec));
  }
  if (load.records.empty() && load.issues.empty()) load.issues.push_back({0, "corpus is empty"});
  return load;
}

CorpusLoad load_corpus(const std::filesystem::path& path, bool strict) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open corpus " + path.string());
  return parse_corpus(in, strict);
}

void write_corpus(const std::filesystem::path& path, const std::vector<SentenceRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& r : records) {
    out << json{{"id", r.id}, {"sentence", r.sentence}, {"target", r.target}}.dump() << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

std::string to_string(DropReason reason) {
  switch (reason) {
    case DropReason::kEmptySentence: return "empty-sentence";
    case DropReason::kNoExactMatch: return "no-exact-match";
    case DropReason::kTooShort: return "too-short";
    case DropReason::kTargetTruncated: return "target-truncated";
    case DropReason::kTargetUnknown: return "target-unk";
  }
  return "unknown";
}

FilterResult filter_corpus(const std::vector<SentenceRecord>& records, const Vocab& vocab,
                           std::size_t max_len) {
  FilterResult result;
  for (const auto& rec : records) {
    auto drop = [&](DropReason r) { result.drops.push_back({rec.id, r}); };
    Encoding enc;
    try {
      enc = tokenize(rec.sentence, vocab, max_len);
    } catch (const EmptySentenceError&) {
      drop(DropReason::kEmptySentence);
      continue;
    }
    Span span;
    try {
      span = locate_target(enc, rec.target);
    } catch (const TargetNotFoundError&) {
      drop(DropReason::kNoExactMatch);
      continue;
    } catch (const TargetTruncatedError&) {
      if (enc.words.size() < kMinWords) {
        drop(DropReason::kTooShort);
      } else {
        drop(DropReason::kTargetTruncated);
      }
      continue;
    }
    if (enc.words.size() < kMinWords) {
      drop(DropReason::kTooShort);
      continue;
    }
    bool has_unk = false;
    for (std::size_t p = span.begin; p < span.end; ++p) has_unk |= enc.ids[p] == vocab.unk();
    if (has_unk) {
      drop(DropReason::kTargetUnknown);
      continue;
    }
    result.kept.push_back({rec.id, std::move(enc.ids), std::move(enc.pieces), span,
                           enc.words.size()});
  }
  return result;
}

void write_drop_log(const std::filesystem::path& path, const std::vector<Drop>& drops) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& d : drops) out << json{{"id", d.id}, {"reason", to_string(d.reason)}}.dump() << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

std::vector<SentenceRecord> gen_synthetic_corpus(std::uint64_t seed, const Vocab& vocab,
                                                 const SyntheticCorpusSpec& spec) {
  if (spec.n < 1) throw ConfigError("synthetic corpus size must be >= 1");
  if (spec.min_words < kMinWords || spec.max_words < spec.min_words) {
    throw ConfigError("synthetic sentence length range invalid");
  }
  std::vector<std::string> words;
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    const auto id = static_cast<TokenId>(i);
    if (vocab.is_special(id) || vocab.is_continuation(id)) continue;
    // Only entries that survive normalization and basic splitting unchanged.
    const auto& tok = vocab.token(id);
    const auto split = basic_split(normalize_text(tok));
    if (split.size() == 1 && split[0] == tok) words.push_back(tok);
  }
  if (words.empty()) throw ConfigError("vocab has no whole-word tokens for a synthetic corpus");

  Rng rng(seed);
  std::vector<SentenceRecord> out;
  out.reserve(spec.n);
  const std::size_t span = spec.max_words - spec.min_words + 1;
  for (std::size_t i = 0; i < spec.n; ++i) {
    const std::size_t len = spec.min_words + rng.uniform_index(span);
    std::vector<std::string> sentence;
    for (std::size_t w = 0; w < len; ++w) sentence.push_back(words[rng.uniform_index(words.size())]);
    const std::string target = sentence[rng.uniform_index(len)];
    std::string text;
    for (const auto& w : sentence) {
      if (!text.empty()) text += ' ';
      text += w;
    }
    char id[32];
    std::snprintf(id, sizeof(id), "syn-%06zu", i);
    out.push_back({id, std::move(text), target});
  }
  return out;
}

}  // namespace alprobe
