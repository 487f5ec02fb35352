#include "alprobe/tokenizer.hpp"

#include <fstream>

#include "alprobe/error.hpp"

namespace alprobe {
namespace {

constexpr char32_t kReplacement = 0xFFFD;

std::u32string decode_utf8(std::string_view s) {
  std::u32string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    const auto b0 = static_cast<unsigned char>(s[i]);
    std::size_t len = 0;
    char32_t cp = 0;
    if (b0 < 0x80) {
      len = 1;
      cp = b0;
    } else if ((b0 & 0xE0) == 0xC0) {
      len = 2;
      cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
      len = 3;
      cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
      len = 4;
      cp = b0 & 0x07;
    } else {
      out.push_back(kReplacement);
      ++i;
      continue;
    }
    if (i + len > s.size()) {
      out.push_back(kReplacement);
      break;
    }
    bool ok = true;
    for (std::size_t k = 1; k < len; ++k) {
      const auto b = static_cast<unsigned char>(s[i + k]);
      if ((b & 0xC0) != 0x80) {
        ok = false;
        break;
      }
      cp = (cp << 6) | (b & 0x3F);
    }
    if (!ok) {
      out.push_back(kReplacement);
      ++i;
      continue;
    }
    out.push_back(cp);
    i += len;
  }
  return out;
}

void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

bool is_whitespace(char32_t c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == 0x00A0 ||
         (c >= 0x2000 && c <= 0x200A) || c == 0x202F || c == 0x205F || c == 0x3000;
}

bool is_control(char32_t c) {
  return c < 0x20 || (c >= 0x7F && c <= 0x9F) || c == 0x200B || c == 0xFEFF;
}

bool is_combining_mark(char32_t c) {
  return (c >= 0x0300 && c <= 0x036F) || (c >= 0x1AB0 && c <= 0x1AFF) ||
         (c >= 0x1DC0 && c <= 0x1DFF) || (c >= 0x20D0 && c <= 0x20FF) ||
         (c >= 0xFE20 && c <= 0xFE2F);
}

bool is_punctuation(char32_t c) {
  if ((c >= 33 && c <= 47) || (c >= 58 && c <= 64) || (c >= 91 && c <= 96) ||
      (c >= 123 && c <= 126)) {
    return true;
  }
  switch (c) {
    case 0x00A1: case 0x00A7: case 0x00AB: case 0x00B6: case 0x00B7:
    case 0x00BB: case 0x00BF: case 0x037E: case 0x0387:
      return true;
    default:
      break;
  }
  return (c >= 0x2010 && c <= 0x2027) || (c >= 0x2030 && c <= 0x205E) ||
         (c >= 0x3001 && c <= 0x3003) || (c >= 0x3008 && c <= 0x3011) ||
         (c >= 0x3014 && c <= 0x301F) || (c >= 0xFF01 && c <= 0xFF0F);
}

char32_t to_lower(char32_t c) {
  if (c >= 'A' && c <= 'Z') return c + 32;
  if (c < 0x80) return c;
  if (c >= 0x00C0 && c <= 0x00DE && c != 0x00D7) return c + 32;
  if (c >= 0x0100 && c <= 0x017F) {
    if (c == 0x0130) return 'i';
    if (c == 0x0178) return 0x00FF;
    const bool upper_even = (c <= 0x0137) || (c >= 0x014A && c <= 0x0177);
    const bool upper_odd = (c >= 0x0139 && c <= 0x0148) || (c >= 0x0179 && c <= 0x017E);
    if (upper_even && c % 2 == 0) return c + 1;
    if (upper_odd && c % 2 == 1) return c + 1;
    return c;
  }
  if (c >= 0x0391 && c <= 0x03A9 && c != 0x03A2) return c + 32;
  if (c >= 0x0410 && c <= 0x042F) return c + 32;
  if (c >= 0x0400 && c <= 0x040F) return c + 80;
  return c;
}

// Base letter for lowercase precomposed Latin letters; '.' keeps the character.
constexpr std::string_view kLatin1Base = "aaaaaa.ceeeeiiii.nooooo.ouuuuy.y";  // U+00E0..U+00FF
constexpr std::string_view kLatinExtABase =                                  // U+0100..U+017F
    "aaaaaaccccccccdd"
    "..eeeeeeeeeegggg"
    "gggghh..iiiiiiii"
    "i...jjkk.llllll."
    "...nnnnnn...oooo"
    "oo..rrrrrrssssss"
    "sstttt..uuuuuuuu"
    "uuuuwwyyyzzzzzz.";

char32_t strip_accent(char32_t c) {
  if (c >= 0x00E0 && c <= 0x00FF) {
    const char b = kLatin1Base[c - 0x00E0];
    return b == '.' ? c : static_cast<char32_t>(b);
  }
  if (c >= 0x0100 && c <= 0x017F) {
    const char b = kLatinExtABase[c - 0x0100];
    return b == '.' ? c : static_cast<char32_t>(b);
  }
  return c;
}

}  // namespace

Vocab Vocab::from_tokens(std::vector<std::string> tokens) {
  Vocab v;
  v.tokens_ = std::move(tokens);
  for (std::size_t i = 0; i < v.tokens_.size(); ++i) {
    auto [it, inserted] = v.index_.emplace(v.tokens_[i], static_cast<TokenId>(i));
    if (!inserted) {
      throw ConfigError("duplicate vocab entry '" + v.tokens_[i] + "' at line " +
                        std::to_string(i + 1));
    }
  }
  auto special = [&](std::string_view name) {
    auto id = v.find(name);
    if (!id) throw ConfigError("special token " + std::string(name) + " absent");
    return *id;
  };
  v.cls_ = special(kCls);
  v.sep_ = special(kSep);
  v.mask_ = special(kMask);
  v.pad_ = special(kPad);
  v.unk_ = special(kUnk);
  return v;
}

Vocab Vocab::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open vocab file " + path.string());
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(line);
  }
  return from_tokens(std::move(tokens));
}

void Vocab::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write vocab file " + path.string());
  for (const auto& t : tokens_) out << t << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

std::optional<TokenId> Vocab::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::string normalize_text(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char32_t c : decode_utf8(text)) {
    if (c == 0 || c == kReplacement) continue;
    if (is_whitespace(c)) {
      out.push_back(' ');
      continue;
    }
    if (is_control(c) || is_combining_mark(c)) continue;
    append_utf8(out, strip_accent(to_lower(c)));
  }
  return out;
}

std::vector<std::string> basic_split(std::string_view normalized) {
  std::vector<std::string> words;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) words.push_back(std::move(current));
    current.clear();
  };
  for (char32_t c : decode_utf8(normalized)) {
    if (is_whitespace(c)) {
      flush();
    } else if (is_punctuation(c)) {
      flush();
      std::string p;
      append_utf8(p, c);
      words.push_back(std::move(p));
    } else {
      append_utf8(current, c);
    }
  }
  flush();
  return words;
}

std::vector<std::string> wordpiece(std::string_view word, const Vocab& vocab,
                                   std::size_t max_chars_per_word) {
  const std::u32string chars = decode_utf8(word);
  const std::vector<std::string> unk{std::string(Vocab::kUnk)};
  if (chars.size() > max_chars_per_word) return unk;

  // Byte offset of each code point boundary.
  std::vector<std::size_t> offsets;
  offsets.reserve(chars.size() + 1);
  std::size_t pos = 0;
  for (char32_t c : chars) {
    offsets.push_back(pos);
    std::string tmp;
    append_utf8(tmp, c);
    pos += tmp.size();
  }
  offsets.push_back(pos);

  std::vector<std::string> pieces;
  std::size_t start = 0;
  while (start < chars.size()) {
    std::size_t end = chars.size();
    std::string match;
    while (end > start) {
      std::string candidate(word.substr(offsets[start], offsets[end] - offsets[start]));
      if (start > 0) candidate.insert(0, "##");
      if (vocab.find(candidate)) {
        match = std::move(candidate);
        break;
      }
      --end;
    }
    if (match.empty()) return unk;
    pieces.push_back(std::move(match));
    start = end;
  }
  return pieces;
}

Encoding tokenize(std::string_view text, const Vocab& vocab, std::size_t max_len) {
  if (max_len < 3) throw ConfigError("max_len must be at least 3");
  Encoding enc;
  enc.words = basic_split(normalize_text(text));
  if (enc.words.empty()) throw EmptySentenceError("sentence is empty after normalization");

  std::vector<std::string> all_pieces;
  for (const auto& w : enc.words) {
    const std::size_t begin = all_pieces.size() + 1;
    for (auto& p : wordpiece(w, vocab)) all_pieces.push_back(std::move(p));
    enc.word_spans.push_back({begin, all_pieces.size() + 1});
  }

  const std::size_t budget = max_len - 2;
  enc.truncated = all_pieces.size() > budget;
  if (enc.truncated) all_pieces.resize(budget);

  enc.pieces.reserve(all_pieces.size() + 2);
  enc.pieces.emplace_back(Vocab::kCls);
  for (auto& p : all_pieces) enc.pieces.push_back(std::move(p));
  enc.pieces.emplace_back(Vocab::kSep);

  enc.ids.reserve(enc.pieces.size());
  for (const auto& p : enc.pieces) enc.ids.push_back(vocab.find(p).value_or(vocab.unk()));
  return enc;
}

Span locate_target(const Encoding& enc, std::string_view target) {
  const std::string needle = normalize_text(target);
  if (needle.empty()) throw TargetNotFoundError("empty target word");
  for (std::size_t w = 0; w < enc.words.size(); ++w) {
    if (enc.words[w] != needle) continue;
    const Span span = enc.word_spans[w];
    // Last real piece sits at ids.size() - 2.
    if (span.end > enc.ids.size() - 1) {
      throw TargetTruncatedError("target '" + std::string(target) + "' lies beyond truncation");
    }
    return span;
  }
  throw TargetNotFoundError("target '" + std::string(target) + "' not found");
}

}  // namespace alprobe
