#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace alprobe {

using TokenId = std::int32_t;

// WordPiece vocabulary; ids follow line order.
class Vocab {
 public:
  static constexpr std::string_view kCls = "[CLS]";
  static constexpr std::string_view kSep = "[SEP]";
  static constexpr std::string_view kMask = "[MASK]";
  static constexpr std::string_view kPad = "[PAD]";
  static constexpr std::string_view kUnk = "[UNK]";

  static Vocab load(const std::filesystem::path& path);
  static Vocab from_tokens(std::vector<std::string> tokens);

  std::size_t size() const { return tokens_.size(); }
  std::optional<TokenId> find(std::string_view token) const;
  const std::string& token(TokenId id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  TokenId cls() const { return cls_; }
  TokenId sep() const { return sep_; }
  TokenId mask() const { return mask_; }
  TokenId pad() const { return pad_; }
  TokenId unk() const { return unk_; }

  bool is_special(TokenId id) const {
    return id == cls_ || id == sep_ || id == mask_ || id == pad_ || id == unk_;
  }
  bool is_continuation(TokenId id) const { return token(id).starts_with("##"); }

  void save(const std::filesystem::path& path) const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
  TokenId cls_ = -1, sep_ = -1, mask_ = -1, pad_ = -1, unk_ = -1;
};

// Half-open piece-index interval.
struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - begin; }
  bool contains(std::size_t i) const { return i >= begin && i < end; }
  bool operator==(const Span&) const = default;
};

// Output of tokenize(). Piece positions include the leading [CLS].
struct Encoding {
  std::vector<TokenId> ids;
  std::vector<std::string> pieces;
  // Normalized basic tokens of the whole text, before truncation.
  std::vector<std::string> words;
  // Piece span each word would occupy without truncation.
  std::vector<Span> word_spans;
  bool truncated = false;
};

// A framed sentence with a located target span.
struct TokenizedSentence {
  std::string id;
  std::vector<TokenId> ids;
  std::vector<std::string> pieces;
  Span span;
  std::size_t word_count = 0;
};

// Lowercase, strip accents, drop control characters, map whitespace to ' '.
std::string normalize_text(std::string_view text);

// Whitespace split plus one token per punctuation character, on normalized text.
std::vector<std::string> basic_split(std::string_view normalized);

// Greedy longest-match decomposition of one basic token. Returns {"[UNK]"}
// when the word cannot be fully covered.
std::vector<std::string> wordpiece(std::string_view word, const Vocab& vocab,
                                   std::size_t max_chars_per_word = 100);

Encoding tokenize(std::string_view text, const Vocab& vocab, std::size_t max_len = 128);

// Span of the first basic token equal to the normalized target.
Span locate_target(const Encoding& enc, std::string_view target);

}  // namespace alprobe
