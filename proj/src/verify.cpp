#include "alprobe/verify.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "alprobe/error.hpp"

namespace alprobe {

using json = nlohmann::json;

GoldenFile read_golden(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open golden file " + path.string());
  GoldenFile g;
  try {
    const json j = json::parse(in);
    g.model = j.value("model", std::string{});
    for (const auto& c : j.at("cases")) {
      GoldenCase gc;
      gc.text = c.at("text").get<std::string>();
      gc.piece_ids = c.at("piece_ids").get<std::vector<TokenId>>();
      gc.masked_pos = c.at("masked_pos").get<std::size_t>();
      gc.logits = c.at("logits").get<std::vector<double>>();
      gc.pooled_attn = c.at("pooled_attn").get<std::vector<std::vector<std::vector<double>>>>();
      g.cases.push_back(std::move(gc));
    }
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return g;
}

void write_golden(const std::filesystem::path& path, const GoldenFile& golden) {
  json cases = json::array();
  for (const auto& c : golden.cases) {
    cases.push_back({{"text", c.text},
                     {"piece_ids", c.piece_ids},
                     {"masked_pos", c.masked_pos},
                     {"logits", c.logits},
                     {"pooled_attn", c.pooled_attn}});
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << json{{"model", golden.model}, {"cases", std::move(cases)}}.dump() << '\n';
}

ParityReport verify_golden(const EncoderModel& model, const GoldenFile& golden, double tol,
                           std::size_t max_len) {
  if (golden.cases.empty()) throw FormatError("golden file has no cases");
  ParityReport report;
  report.passed = true;
  for (const auto& gc : golden.cases) {
    CaseParity cp;
    cp.text = gc.text;
    cp.ids_match = tokenize(gc.text, model.vocab, max_len).ids == gc.piece_ids;

    const std::size_t T = gc.piece_ids.size();
    if (gc.masked_pos >= T) throw FormatError("golden masked_pos outside sequence");
    if (gc.logits.size() != model.config.vocab) {
      throw FormatError("golden logits length " + std::to_string(gc.logits.size()) +
                        " != vocab " + std::to_string(model.config.vocab));
    }
    if (gc.pooled_attn.size() != model.config.layers) {
      throw FormatError("golden attention has " + std::to_string(gc.pooled_attn.size()) +
                        " layers, model has " + std::to_string(model.config.layers));
    }

    std::vector<TokenId> masked = gc.piece_ids;
    masked[gc.masked_pos] = model.vocab.mask();
    ForwardOptions opts;
    opts.logit_rows = {gc.masked_pos};
    const ForwardOutput masked_out = forward(model, masked, opts);
    for (std::size_t v = 0; v < gc.logits.size(); ++v) {
      cp.max_logit_diff =
          std::max(cp.max_logit_diff, std::abs(masked_out.logits(0, v) - gc.logits[v]));
    }

    ForwardOptions no_logits;
    no_logits.compute_logits = false;
    const ForwardOutput plain = forward(model, gc.piece_ids, no_logits);
    for (std::size_t l = 0; l < plain.pooled.size(); ++l) {
      const auto& ref = gc.pooled_attn[l];
      if (ref.size() != T) throw FormatError("golden attention rows != sequence length");
      for (std::size_t i = 0; i < T; ++i) {
        if (ref[i].size() != T) throw FormatError("golden attention cols != sequence length");
        for (std::size_t j = 0; j < T; ++j) {
          cp.max_attn_diff = std::max(cp.max_attn_diff, std::abs(plain.pooled[l](i, j) - ref[i][j]));
        }
      }
    }
    report.max_logit_diff = std::max(report.max_logit_diff, cp.max_logit_diff);
    report.max_attn_diff = std::max(report.max_attn_diff, cp.max_attn_diff);
    if (!cp.ids_match || cp.max_logit_diff >= tol || cp.max_attn_diff >= tol) report.passed = false;
    report.cases.push_back(std::move(cp));
  }
  return report;
}

}  // namespace alprobe
