#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "alprobe/error.hpp"
#include "alprobe/report.hpp"
#include "alprobe/rng.hpp"
#include "oracles.hpp"

using namespace alprobe;
namespace fs = std::filesystem;

namespace {

// Random records: L layers, sentence attention of length `width`.
std::vector<ProbedSentence> random_records(std::uint64_t seed, std::size_t n, std::size_t layers,
                                           std::size_t width = 6) {
  Rng rng(seed);
  std::vector<ProbedSentence> out;
  for (std::size_t i = 0; i < n; ++i) {
    for (Variant v : {Variant::kOriginal, Variant::kPerturbed}) {
      ProbedSentence s;
      s.id = "s" + std::to_string(1000 + i);
      s.variant = v;
      s.likelihood = rng.uniform();
      for (std::size_t l = 0; l < layers; ++l) {
        LayerSummary ls;
        ls.layer = l;
        ls.token_attention = 0.05 + 0.1 * rng.uniform();
        for (std::size_t j = 0; j < width; ++j) ls.sentence_attention.push_back(0.1 * rng.uniform());
        ls.matrix_mean = 0.1 + 0.01 * rng.uniform();
        s.layers.push_back(std::move(ls));
      }
      out.push_back(std::move(s));
    }
  }
  return out;
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(std::move(cells));
  }
  return rows;
}

}  // namespace

TEST_CASE("aggregate computes per-layer means, sample stds and rho") {
  const auto records = random_records(1, 30, 3);
  const auto rows = aggregate(records, 3, "tiny");
  REQUIRE(rows.size() == 6);

  std::vector<double> lik, tok, sent;
  for (const auto& r : records) {
    if (r.variant != Variant::kPerturbed) continue;
    lik.push_back(r.likelihood);
    tok.push_back(r.layers[2].token_attention);
    double s = 0;
    for (double x : r.layers[2].sentence_attention) s += x;
    sent.push_back(s / 6);
  }
  const auto& row = rows[5];
  CHECK(row.variant == Variant::kPerturbed);
  CHECK(row.layer == 2);
  CHECK(row.sentences == 30);
  double m = 0;
  for (double x : tok) m += x;
  m /= 30;
  double ss = 0;
  for (double x : tok) ss += (x - m) * (x - m);
  CHECK(row.tok_attn.mean == doctest::Approx(m).epsilon(1e-12));
  CHECK(row.tok_attn.std == doctest::Approx(std::sqrt(ss / 29)).epsilon(1e-12));
  REQUIRE(row.rho.has_value());
  CHECK(std::abs(*row.rho - testing::spearman_oracle(lik, tok)) < 1e-12);
  CHECK(row.sent_attn.mean == doctest::Approx(mean_std(sent).mean).epsilon(1e-12));
}

TEST_CASE("duplicated sentence gives zero spread and undefined rho") {
  auto one = random_records(2, 1, 2);
  std::vector<ProbedSentence> records;
  for (int i = 0; i < 10; ++i) {
    for (auto s : one) {
      s.id = "dup" + std::to_string(i);
      records.push_back(s);
    }
  }
  const auto rows = aggregate(records, 2, "m");
  for (const auto& r : rows) {
    CHECK(r.tok_attn.std == 0.0);
    CHECK(r.likelihood.std == 0.0);
    CHECK(r.attn.std == 0.0);
    CHECK_FALSE(r.rho.has_value());
    CHECK(r.rho_note.find("zero rank variance") != std::string::npos);
  }
  CHECK(stats_csv(rows).find(",undefined\n") != std::string::npos);
  CHECK_THROWS_AS(summarize(rows, records), UndefinedCorrelationError);
}

TEST_CASE("aggregate input errors") {
  CHECK_THROWS_AS(aggregate(random_records(3, 1, 2), 2, "m"), InsufficientDataError);
  CHECK_THROWS_AS(aggregate(random_records(3, 5, 2), 3, "m"), FormatError);
}

TEST_CASE("aggregation ignores record order") {
  auto records = random_records(4, 25, 4);
  const std::string base = stats_csv(aggregate(records, 4, "m"));
  Rng rng(9);
  for (int t = 0; t < 5; ++t) {
    for (std::size_t i = records.size() - 1; i > 0; --i) std::swap(records[i], records[rng.uniform_index(i + 1)]);
    CHECK(stats_csv(aggregate(records, 4, "m")) == base);
  }
}

TEST_CASE("summary layer choice") {
  auto records = random_records(5, 40, 6);
  const auto rows = aggregate(records, 6, "m");
  const auto s = summarize(rows, records);
  double best = -2;
  std::size_t best_layer = 0;
  for (const auto& r : rows) {
    if (r.variant == Variant::kPerturbed && *r.rho >= best) best = *r.rho, best_layer = r.layer;
  }
  CHECK(s.layer == best_layer);
  CHECK(s.perturbed.rho == best);
  CHECK(s.mwu.n1 == 40 * 6);
  CHECK(s.mwu.n2 == 40 * 6);

  // A strictly monotone map of the likelihoods keeps every rho and the choice.
  for (auto& r : records) r.likelihood = std::exp(3 * r.likelihood) - 7;
  const auto rows2 = aggregate(records, 6, "m");
  for (std::size_t i = 0; i < rows.size(); ++i) CHECK(rows2[i].rho == rows[i].rho);
  CHECK(summarize(rows2, records).layer == s.layer);
}

TEST_CASE("summary ties go to the deeper layer") {
  auto records = random_records(6, 10, 3);
  // Make every perturbed layer identical so all rhos tie.
  for (auto& r : records)
    if (r.variant == Variant::kPerturbed)
      for (auto& l : r.layers) l.token_attention = r.likelihood * 0.1;
  const auto rows = aggregate(records, 3, "m");
  CHECK(summarize(rows, records).layer == 2);
}

TEST_CASE("identical variants give a null MWU shift") {
  auto records = random_records(7, 12, 2);
  for (std::size_t i = 0; i + 1 < records.size(); i += 2) {
    records[i + 1].layers = records[i].layers;
  }
  const auto s = summarize(aggregate(records, 2, "m"), records);
  const double n = 12.0 * 6;
  CHECK(s.mwu.u == n * n / 2);
  CHECK(s.mwu.p == doctest::Approx(1.0));

  const auto diag = per_sentence_mwu(records, s.layer);
  REQUIRE(diag.size() == 12);
  CHECK(diag[0].result->u == 18.0);
}

TEST_CASE("emit CSV and plot JSON") {
  const auto records = random_records(8, 10, 6);
  const auto rows = aggregate(records, 6, "tiny");
  const auto dir = fs::temp_directory_path() / "alprobe_emit";
  fs::remove_all(dir);
  fs::create_directories(dir);

  emit(rows, EmitFormat::kCsv, dir / "stats.csv");
  std::ifstream in(dir / "stats.csv");
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto csv = parse_csv(text);
  REQUIRE(csv.size() == 13);
  CHECK(text.starts_with(
      "model,variant,layer,attn_mean,attn_std,tok_attn_mean,tok_attn_std,sent_attn_mean,"
      "sent_attn_std,lik_mean,lik_std,rho\n"));
  CHECK(csv[1][1] == "original");
  CHECK(csv[1][2] == "0");
  CHECK(csv[7][1] == "perturbed");
  CHECK(csv[12][2] == "5");
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& cells = csv[i + 1];
    REQUIRE(cells.size() == 12);
    CHECK(std::stod(cells[5]) == doctest::Approx(rows[i].tok_attn.mean).epsilon(1e-5));
    CHECK(std::stod(cells[11]) == doctest::Approx(*rows[i].rho).epsilon(1e-5));
  }

  emit(rows, EmitFormat::kJson, dir / "plot.json");
  std::ifstream jin(dir / "plot.json");
  const auto plot = nlohmann::json::parse(jin);
  REQUIRE(plot.size() == 12);
  CHECK(plot[0]["model"] == "tiny");
  CHECK(plot[0]["variant"] == "original");
  CHECK(plot[0]["rho"].get<double>() == doctest::Approx(*rows[0].rho));

  const auto s = summarize(rows, records);
  emit_summary({s}, dir / "summary.csv");
  std::ifstream sin(dir / "summary.csv");
  std::string header;
  std::getline(sin, header);
  CHECK(header.ends_with(",mwu_p"));

  CHECK_THROWS_AS(emit({}, EmitFormat::kCsv, dir / "none.csv"), InsufficientDataError);
  CHECK_FALSE(fs::exists(dir / "none.csv"));
  CHECK_THROWS_AS(emit(rows, EmitFormat::kCsv, "/nonexistent/dir/stats.csv"), IoError);
}

TEST_CASE("six significant digits") {
  CHECK(format_float(0.0654321987) == "0.0654322");
  CHECK(format_float(1234567.0) == "1.23457e+06");
  CHECK(format_float(-0.5) == "-0.5");
}
