#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>

#include "alprobe/encoder.hpp"
#include "alprobe/error.hpp"
#include "alprobe/rng.hpp"
#include "reference_encoder.hpp"

using namespace alprobe;
namespace fs = std::filesystem;

namespace {

EncoderConfig tiny_config() {
  EncoderConfig c;
  c.layers = 2;
  c.heads = 2;
  c.hidden = 8;
  c.ffn = 16;
  c.vocab = 50;
  c.max_pos = 32;
  return c;
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("alprobe_encoder_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<TokenId> random_ids(Rng& rng, std::size_t T, std::size_t vocab) {
  std::vector<TokenId> ids;
  for (std::size_t t = 0; t < T; ++t) ids.push_back(static_cast<TokenId>(rng.uniform_index(vocab)));
  return ids;
}

}  // namespace

TEST_CASE("tiny model round-trips through the directory format") {
  const EncoderModel model = gen_tiny_model(7, {tiny_config()});
  const auto dir = scratch("roundtrip");
  save_model(model, dir);
  const EncoderModel loaded = load_model(dir);
  CHECK(loaded.config == model.config);
  CHECK(loaded.config.layers == 2);
  CHECK(loaded.vocab.tokens() == model.vocab.tokens());
  for (const auto& name : model.weights.names()) {
    const auto a = model.weights.vector(name);
    const auto b = loaded.weights.vector(name);
    CHECK(std::equal(a.begin(), a.end(), b.begin(), b.end()));
  }
}

TEST_CASE("gen_tiny_model is deterministic per seed") {
  const auto d1 = scratch("seed1a"), d2 = scratch("seed1b"), d3 = scratch("seed2");
  save_model(gen_tiny_model(1, {tiny_config()}), d1);
  save_model(gen_tiny_model(1, {tiny_config()}), d2);
  save_model(gen_tiny_model(2, {tiny_config()}), d3);
  CHECK(slurp(d1 / "weights.alp") == slurp(d2 / "weights.alp"));
  CHECK(slurp(d1 / "config.json") == slurp(d2 / "config.json"));
  CHECK(slurp(d1 / "weights.alp") != slurp(d3 / "weights.alp"));
}

TEST_CASE("weights file errors") {
  const auto dir = scratch("errors");
  save_model(gen_tiny_model(3, {tiny_config()}), dir);
  const std::string bytes = slurp(dir / "weights.alp");

  SUBCASE("truncated payload") {
    std::ofstream(dir / "weights.alp", std::ios::binary) << bytes.substr(0, bytes.size() - 40);
    CHECK_THROWS_AS(load_model(dir), FormatError);
  }
  SUBCASE("bad magic") {
    std::string bad = bytes;
    bad[7] = '2';
    std::ofstream(dir / "weights.alp", std::ios::binary) << bad;
    CHECK_THROWS_AS(load_model(dir), FormatError);
  }
  SUBCASE("missing tensor is named") {
    EncoderConfig c = tiny_config();
    WeightStore w = gen_tiny_model(3, {c}).weights;
    WeightStore partial;
    for (const auto& n : w.names()) {
      if (n == "l1.ffn.out.b") continue;
      partial.insert(n, w.shape(n), std::vector<float>(w.vector(n).begin(), w.vector(n).end()));
    }
    try {
      validate_weights(c, partial);
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()) == "missing tensor l1.ffn.out.b");
    }
  }
  SUBCASE("shape mismatch reports both shapes") {
    EncoderConfig c = tiny_config();
    EncoderModel m = gen_tiny_model(3, {c});
    m.weights.insert("emb.ln.g", {7}, std::vector<float>(7, 1.0f));
    try {
      validate_weights(c, m.weights);
      FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("[8]") != std::string::npos);
      CHECK(msg.find("[7]") != std::string::npos);
    }
  }
  SUBCASE("vocab size mismatch") {
    std::ofstream(dir / "vocab.txt", std::ios::app) << "extra\n";
    CHECK_THROWS_AS(load_model(dir), ConfigError);
  }
}

TEST_CASE("config validation") {
  EncoderConfig c = tiny_config();
  c.heads = 3;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = tiny_config();
  c.eps = 0.0f;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("attention rows are stochastic and pooled is the head mean") {
  TinyModelSpec spec{tiny_config()};
  spec.stddev = 0.5f;
  const EncoderModel model = gen_tiny_model(9, spec);
  Rng rng(1);
  const auto ids = random_ids(rng, 11, model.config.vocab);
  const ForwardOutput out = forward(model, ids);
  REQUIRE(out.attentions.size() == 2);
  for (std::size_t l = 0; l < 2; ++l) {
    for (const Matrix& head : out.attentions[l]) {
      for (std::size_t i = 0; i < head.rows; ++i) {
        double sum = 0;
        for (float v : head.row(i)) sum += v;
        CHECK(std::abs(sum - 1.0) < 1e-5);
      }
    }
    for (std::size_t i = 0; i < 11; ++i) {
      double sum = 0;
      for (std::size_t j = 0; j < 11; ++j) {
        sum += out.pooled[l](i, j);
        const double mean = (out.attentions[l][0](i, j) + out.attentions[l][1](i, j)) / 2.0;
        CHECK(std::abs(out.pooled[l](i, j) - mean) < 1e-7);
      }
      CHECK(std::abs(sum - 1.0) < 1e-5);
    }
  }
  CHECK(out.logits.rows == 11);
  CHECK(out.logits.cols == 50);
}

TEST_CASE("zero query/key weights give uniform attention") {
  TinyModelSpec spec{tiny_config()};
  spec.zero_qk = true;
  spec.stddev = 0.3f;
  const EncoderModel model = gen_tiny_model(4, spec);
  for (std::size_t T : {1u, 5u, 9u}) {
    Rng rng(T);
    const ForwardOutput out = forward(model, random_ids(rng, T, 50));
    for (const auto& layer : out.attentions)
      for (const auto& head : layer)
        for (float v : head.data) CHECK(v == doctest::Approx(1.0 / T).epsilon(1e-7));
  }
}

TEST_CASE("forward matches the double-precision reference") {
  Rng cfg_rng(99);
  for (int trial = 0; trial < 6; ++trial) {
    EncoderConfig c = tiny_config();
    c.tied_decoder = trial % 2 == 0;
    c.has_token_type = trial % 3 != 0;
    TinyModelSpec spec{c};
    spec.stddev = 0.3f;
    const EncoderModel model = gen_tiny_model(100 + trial, spec);
    const auto ids = random_ids(cfg_rng, 5, c.vocab);
    const ForwardOutput got = forward(model, ids);
    const auto ref = testing::reference_forward(model, ids);
    for (std::size_t t = 0; t < 5; ++t)
      for (std::size_t v = 0; v < c.vocab; ++v) CHECK(std::abs(got.logits(t, v) - ref.logits[t][v]) < 1e-5);
    for (std::size_t l = 0; l < c.layers; ++l)
      for (std::size_t h = 0; h < c.heads; ++h)
        for (std::size_t i = 0; i < 5; ++i)
          for (std::size_t j = 0; j < 5; ++j)
            CHECK(std::abs(got.attentions[l][h](i, j) - ref.attentions[l][h][i][j]) < 1e-5);
  }
}

TEST_CASE("selected logit rows equal the full computation") {
  TinyModelSpec spec{tiny_config()};
  spec.stddev = 0.3f;
  const EncoderModel model = gen_tiny_model(5, spec);
  Rng rng(5);
  const auto ids = random_ids(rng, 7, 50);
  const ForwardOutput full = forward(model, ids);
  ForwardOptions opts;
  opts.logit_rows = {4, 2};
  const ForwardOutput part = forward(model, ids, opts);
  REQUIRE(part.logits.rows == 2);
  for (std::size_t v = 0; v < 50; ++v) {
    CHECK(part.logits(0, v) == full.logits(4, v));
    CHECK(part.logits(1, v) == full.logits(2, v));
  }
  ForwardOptions none;
  none.compute_logits = false;
  CHECK(forward(model, ids, none).logits.data.empty());
}

TEST_CASE("without position embeddings, permuting tokens permutes logits") {
  EncoderConfig c = tiny_config();
  c.has_token_type = false;
  TinyModelSpec spec{c};
  spec.stddev = 0.3f;
  EncoderModel model = gen_tiny_model(12, spec);
  auto& pos = model.weights.mutable_matrix("emb.pos");
  std::fill(pos.data.begin(), pos.data.end(), 0.0f);

  const std::vector<TokenId> ids = {7, 19, 3, 44, 28, 11};
  const std::vector<std::size_t> perm = {3, 0, 5, 1, 4, 2};
  std::vector<TokenId> permuted;
  for (auto p : perm) permuted.push_back(ids[p]);
  const ForwardOutput a = forward(model, ids);
  const ForwardOutput b = forward(model, permuted);
  for (std::size_t r = 0; r < perm.size(); ++r)
    for (std::size_t v = 0; v < c.vocab; ++v) CHECK(std::abs(b.logits(r, v) - a.logits(perm[r], v)) < 1e-5);
}

TEST_CASE("sequence length limits") {
  const EncoderModel model = gen_tiny_model(1, {tiny_config()});
  CHECK_THROWS_AS(forward(model, std::vector<TokenId>(33, 5)), LengthError);
  CHECK_THROWS_AS(forward(model, std::vector<TokenId>{}), LengthError);
  CHECK_NOTHROW(forward(model, std::vector<TokenId>(32, 5)));
}
