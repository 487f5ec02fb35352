#include "alprobe/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <tuple>

#include <nlohmann/json.hpp>

#include "alprobe/error.hpp"

namespace alprobe {

MeanStd mean_std(const std::vector<double>& values) {
  if (values.empty()) throw InsufficientDataError("mean of empty sample");
  // Shifted by the first value so a constant sample is exact.
  const double n = static_cast<double>(values.size());
  const double shift = values.front();
  double sum = 0.0;
  for (double v : values) sum += v - shift;
  const double mean_dev = sum / n;
  if (values.size() < 2) return {shift + mean_dev, 0.0};
  double ss = 0.0;
  for (double v : values) ss += (v - shift - mean_dev) * (v - shift - mean_dev);
  return {shift + mean_dev, std::sqrt(ss / (n - 1.0))};
}

namespace {

// Records of one variant ordered by sentence id.
std::vector<const ProbedSentence*> by_variant(const std::vector<ProbedSentence>& records,
                                              Variant variant) {
  std::vector<const ProbedSentence*> out;
  for (const auto& r : records)
    if (r.variant == variant) out.push_back(&r);
  std::stable_sort(out.begin(), out.end(),
                   [](const ProbedSentence* a, const ProbedSentence* b) { return a->id < b->id; });
  for (std::size_t i = 1; i < out.size(); ++i) {
    if (out[i]->id == out[i - 1]->id) {
      throw FormatError("duplicate " + to_string(variant) + " record for sentence " + out[i]->id);
    }
  }
  return out;
}

const LayerSummary& layer_of(const ProbedSentence& s, std::size_t layer) {
  if (layer >= s.layers.size() || s.layers[layer].layer != layer) {
    throw FormatError("sentence " + s.id + " lacks layer " + std::to_string(layer));
  }
  return s.layers[layer];
}

}  // namespace

std::vector<CorpusStats> aggregate(const std::vector<ProbedSentence>& records,
                                   std::size_t layers, const std::string& model) {
  if (layers < 1) throw ConfigError("layer count must be >= 1");
  std::vector<CorpusStats> rows;
  for (Variant variant : {Variant::kOriginal, Variant::kPerturbed}) {
    const auto sentences = by_variant(records, variant);
    if (sentences.size() < 2) {
      throw InsufficientDataError("need at least 2 " + to_string(variant) +
                                  " sentences to aggregate, got " +
                                  std::to_string(sentences.size()));
    }
    for (const auto* s : sentences) {
      if (s->layers.size() != layers) {
        throw FormatError("sentence " + s->id + " has " + std::to_string(s->layers.size()) +
                          " layers, expected " + std::to_string(layers));
      }
    }
    std::vector<double> lik;
    for (const auto* s : sentences) lik.push_back(s->likelihood);
    const MeanStd lik_stats = mean_std(lik);

    for (std::size_t l = 0; l < layers; ++l) {
      std::vector<double> attn, tok, sent;
      for (const auto* s : sentences) {
        const auto& ls = layer_of(*s, l);
        attn.push_back(ls.matrix_mean);
        tok.push_back(ls.token_attention);
        const auto& sa = ls.sentence_attention;
        sent.push_back(sa.empty() ? 0.0
                                  : std::accumulate(sa.begin(), sa.end(), 0.0) /
                                        static_cast<double>(sa.size()));
      }
      CorpusStats row;
      row.model = model;
      row.variant = variant;
      row.layer = l;
      row.sentences = sentences.size();
      row.attn = mean_std(attn);
      row.tok_attn = mean_std(tok);
      row.sent_attn = mean_std(sent);
      row.likelihood = lik_stats;
      try {
        row.rho = spearman(lik, tok).rho;
      } catch (const UndefinedCorrelationError& e) {
        row.rho_note = e.what();
      }
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

SummaryRow summarize(const std::vector<CorpusStats>& rows,
                     const std::vector<ProbedSentence>& records) {
  if (rows.empty()) throw InsufficientDataError("no aggregated rows to summarize");
  std::map<std::size_t, const CorpusStats*> orig, pert;
  for (const auto& r : rows) (r.variant == Variant::kOriginal ? orig : pert)[r.layer] = &r;
  if (orig.size() != pert.size()) throw FormatError("variants cover different layers");

  std::optional<std::size_t> chosen;
  for (const auto& [layer, row] : pert) {
    if (!row->rho) continue;
    if (!chosen || *row->rho >= *pert.at(*chosen)->rho) chosen = layer;
  }
  if (!chosen) {
    throw UndefinedCorrelationError("perturbed rho undefined at every layer; no layer to report");
  }
  if (!orig.count(*chosen)) throw FormatError("original stats missing layer " + std::to_string(*chosen));

  const auto o = by_variant(records, Variant::kOriginal);
  const auto p = by_variant(records, Variant::kPerturbed);
  if (o.size() != p.size()) throw FormatError("original and perturbed sentence counts differ");
  std::vector<double> pool_o, pool_p;
  for (std::size_t i = 0; i < o.size(); ++i) {
    if (o[i]->id != p[i]->id) throw FormatError("variants cover different sentence ids");
    const auto& so = layer_of(*o[i], *chosen).sentence_attention;
    const auto& sp = layer_of(*p[i], *chosen).sentence_attention;
    pool_o.insert(pool_o.end(), so.begin(), so.end());
    pool_p.insert(pool_p.end(), sp.begin(), sp.end());
  }

  SummaryRow s;
  s.model = orig.at(*chosen)->model;
  s.layer = *chosen;
  const auto side = [](const CorpusStats& r) {
    return SummarySide{r.tok_attn.mean, r.likelihood.mean, r.rho};
  };
  s.original = side(*orig.at(*chosen));
  s.perturbed = side(*pert.at(*chosen));
  s.mwu = mann_whitney_u(pool_o, pool_p);
  return s;
}

std::vector<SentenceMwu> per_sentence_mwu(const std::vector<ProbedSentence>& records,
                                          std::size_t layer) {
  const auto o = by_variant(records, Variant::kOriginal);
  const auto p = by_variant(records, Variant::kPerturbed);
  if (o.size() != p.size()) throw FormatError("original and perturbed sentence counts differ");
  std::vector<SentenceMwu> out;
  for (std::size_t i = 0; i < o.size(); ++i) {
    if (o[i]->id != p[i]->id) throw FormatError("variants cover different sentence ids");
    SentenceMwu row{o[i]->id, std::nullopt, {}};
    try {
      row.result = mann_whitney_u(layer_of(*o[i], layer).sentence_attention,
                                  layer_of(*p[i], layer).sentence_attention);
    } catch (const NumericError& e) {
      row.note = e.what();
    }
    out.push_back(std::move(row));
  }
  return out;
}

std::string format_float(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

namespace {

std::string rho_cell(const std::optional<double>& rho) {
  return rho ? format_float(*rho) : "undefined";
}

std::vector<CorpusStats> sorted_rows(std::vector<CorpusStats> rows) {
  std::stable_sort(rows.begin(), rows.end(), [](const CorpusStats& a, const CorpusStats& b) {
    const auto va = to_string(a.variant), vb = to_string(b.variant);
    return std::tie(a.model, va, a.layer) < std::tie(b.model, vb, b.layer);
  });
  return rows;
}

void write_text(const std::filesystem::path& out, const std::string& text) {
  std::ofstream f(out, std::ios::binary);
  if (!f) throw IoError("cannot write " + out.string());
  f << text;
  if (!f) throw IoError("failed writing " + out.string());
}

}  // namespace

std::string stats_csv(const std::vector<CorpusStats>& rows) {
  std::string out =
      "model,variant,layer,attn_mean,attn_std,tok_attn_mean,tok_attn_std,sent_attn_mean,"
      "sent_attn_std,lik_mean,lik_std,rho\n";
  for (const auto& r : sorted_rows(rows)) {
    out += r.model + "," + to_string(r.variant) + "," + std::to_string(r.layer);
    for (double v : {r.attn.mean, r.attn.std, r.tok_attn.mean, r.tok_attn.std, r.sent_attn.mean,
                     r.sent_attn.std, r.likelihood.mean, r.likelihood.std}) {
      out += "," + format_float(v);
    }
    out += "," + rho_cell(r.rho) + "\n";
  }
  return out;
}

std::string plot_json(const std::vector<CorpusStats>& rows) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : sorted_rows(rows)) {
    nlohmann::json item = {{"model", r.model}, {"layer", r.layer}, {"variant", to_string(r.variant)}};
    item["rho"] = r.rho ? nlohmann::json(*r.rho) : nlohmann::json(nullptr);
    j.push_back(std::move(item));
  }
  return j.dump(2) + "\n";
}

std::string summary_csv(const std::vector<SummaryRow>& rows) {
  std::string out =
      "model,layer,orig_tok_attn_mean,orig_lik_mean,orig_rho,pert_tok_attn_mean,pert_lik_mean,"
      "pert_rho,mwu_p\n";
  for (const auto& r : rows) {
    out += r.model + "," + std::to_string(r.layer) + "," + format_float(r.original.tok_attn_mean) +
           "," + format_float(r.original.lik_mean) + "," + rho_cell(r.original.rho) + "," +
           format_float(r.perturbed.tok_attn_mean) + "," + format_float(r.perturbed.lik_mean) +
           "," + rho_cell(r.perturbed.rho) + "," + format_float(r.mwu.p) + "\n";
  }
  return out;
}

std::string per_sentence_mwu_csv(const std::vector<SentenceMwu>& rows) {
  std::string out = "id,u,p,note\n";
  for (const auto& r : rows) {
    out += r.id + ",";
    out += r.result ? format_float(r.result->u) + "," + format_float(r.result->p) : std::string(",");
    out += "," + r.note + "\n";
  }
  return out;
}

void emit(const std::vector<CorpusStats>& rows, EmitFormat format,
          const std::filesystem::path& out) {
  if (rows.empty()) throw InsufficientDataError("no rows to emit");
  write_text(out, format == EmitFormat::kCsv ? stats_csv(rows) : plot_json(rows));
}

void emit_summary(const std::vector<SummaryRow>& rows, const std::filesystem::path& out) {
  if (rows.empty()) throw InsufficientDataError("no summary rows to emit");
  write_text(out, summary_csv(rows));
}

}  // namespace alprobe
