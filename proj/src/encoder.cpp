#include "alprobe/encoder.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "alprobe/error.hpp"
#include "alprobe/rng.hpp"

namespace alprobe {
namespace {

using json = nlohmann::json;

std::string shape_str(const std::vector<std::size_t>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

std::size_t numel(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::uint32_t to_le(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::little) return v;
  return ((v & 0xFF) << 24) | ((v & 0xFF00) << 8) | ((v >> 8) & 0xFF00) | (v >> 24);
}

std::uint64_t to_le64(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::little) return v;
  std::uint64_t r = 0;
  for (int i = 0; i < 8; ++i) r |= ((v >> (8 * i)) & 0xFF) << (8 * (7 - i));
  return r;
}

json config_to_json(const EncoderConfig& c) {
  return json{{"layers", c.layers},   {"heads", c.heads},
              {"hidden", c.hidden},   {"ffn", c.ffn},
              {"vocab", c.vocab},     {"max_pos", c.max_pos},
              {"eps", c.eps},         {"tied_decoder", c.tied_decoder},
              {"has_token_type", c.has_token_type}};
}

EncoderConfig config_from_json(const json& j) {
  EncoderConfig c;
  try {
    c.layers = j.at("layers").get<std::size_t>();
    c.heads = j.at("heads").get<std::size_t>();
    c.hidden = j.at("hidden").get<std::size_t>();
    c.ffn = j.at("ffn").get<std::size_t>();
    c.vocab = j.at("vocab").get<std::size_t>();
    c.max_pos = j.at("max_pos").get<std::size_t>();
    c.eps = j.at("eps").get<float>();
    c.tied_decoder = j.at("tied_decoder").get<bool>();
    c.has_token_type = j.at("has_token_type").get<bool>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad config.json: ") + e.what());
  }
  c.validate();
  return c;
}

std::string layer_name(std::size_t i, const char* suffix) {
  return "l" + std::to_string(i) + "." + suffix;
}

}  // namespace

void EncoderConfig::validate() const {
  if (layers < 1 || heads < 1 || hidden < 1 || ffn < 1 || vocab < 1 || max_pos < 1) {
    throw ConfigError("encoder config counts must all be >= 1");
  }
  if (hidden % heads != 0) {
    throw ConfigError("hidden " + std::to_string(hidden) + " not divisible by heads " +
                      std::to_string(heads));
  }
  if (!(eps > 0.0f)) throw ConfigError("layernorm eps must be positive");
}

std::vector<TensorSpec> required_tensors(const EncoderConfig& c) {
  const std::size_t d = c.hidden;
  std::vector<TensorSpec> specs = {
      {"emb.word", {c.vocab, d}},
      {"emb.pos", {c.max_pos, d}},
  };
  if (c.has_token_type) specs.push_back({"emb.type", {2, d}});
  specs.push_back({"emb.ln.g", {d}});
  specs.push_back({"emb.ln.b", {d}});
  for (std::size_t i = 0; i < c.layers; ++i) {
    for (const char* p : {"q", "k", "v", "o"}) {
      specs.push_back({layer_name(i, (std::string("att.") + p + ".w").c_str()), {d, d}});
      specs.push_back({layer_name(i, (std::string("att.") + p + ".b").c_str()), {d}});
    }
    specs.push_back({layer_name(i, "att.ln.g"), {d}});
    specs.push_back({layer_name(i, "att.ln.b"), {d}});
    specs.push_back({layer_name(i, "ffn.in.w"), {d, c.ffn}});
    specs.push_back({layer_name(i, "ffn.in.b"), {c.ffn}});
    specs.push_back({layer_name(i, "ffn.out.w"), {c.ffn, d}});
    specs.push_back({layer_name(i, "ffn.out.b"), {d}});
    specs.push_back({layer_name(i, "ffn.ln.g"), {d}});
    specs.push_back({layer_name(i, "ffn.ln.b"), {d}});
  }
  specs.push_back({"mlm.dense.w", {d, d}});
  specs.push_back({"mlm.dense.b", {d}});
  specs.push_back({"mlm.ln.g", {d}});
  specs.push_back({"mlm.ln.b", {d}});
  if (!c.tied_decoder) specs.push_back({"mlm.decoder.w", {d, c.vocab}});
  specs.push_back({"mlm.decoder.b", {c.vocab}});
  return specs;
}

void WeightStore::insert(std::string name, std::vector<std::size_t> shape,
                         std::vector<float> values) {
  if (shape.empty() || shape.size() > 2) {
    throw ShapeError("tensor " + name + " has unsupported rank " + std::to_string(shape.size()));
  }
  if (numel(shape) != values.size()) {
    throw ShapeError("tensor " + name + " shape " + shape_str(shape) + " but " +
                     std::to_string(values.size()) + " values");
  }
  Matrix m;
  m.rows = shape.size() == 2 ? shape[0] : 1;
  m.cols = shape.back();
  m.data = std::move(values);
  tensors_[std::move(name)] = Entry{std::move(shape), std::move(m)};
}

const WeightStore::Entry& WeightStore::entry(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw ConfigError("missing tensor " + name);
  return it->second;
}

const Matrix& WeightStore::matrix(const std::string& name) const { return entry(name).values; }

std::span<const float> WeightStore::vector(const std::string& name) const {
  return entry(name).values.data;
}

const std::vector<std::size_t>& WeightStore::shape(const std::string& name) const {
  return entry(name).shape;
}

Matrix& WeightStore::mutable_matrix(const std::string& name) {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw ConfigError("missing tensor " + name);
  return it->second.values;
}

std::vector<std::string> WeightStore::names() const {
  std::vector<std::string> out;
  out.reserve(tensors_.size());
  for (const auto& [name, _] : tensors_) out.push_back(name);
  return out;
}

void validate_weights(const EncoderConfig& config, const WeightStore& weights) {
  config.validate();
  for (const auto& spec : required_tensors(config)) {
    if (!weights.contains(spec.name)) throw ConfigError("missing tensor " + spec.name);
    const auto& found = weights.shape(spec.name);
    if (found != spec.shape) {
      throw ShapeError("tensor " + spec.name + " expected shape " + shape_str(spec.shape) +
                       " found " + shape_str(found));
    }
  }
}

void EncoderModel::validate() const {
  validate_weights(config, weights);
  if (vocab.size() != config.vocab) {
    throw ConfigError("vocab file has " + std::to_string(vocab.size()) +
                      " entries, config declares " + std::to_string(config.vocab));
  }
}

void write_weights(const std::filesystem::path& path, const EncoderConfig& config,
                   const WeightStore& weights) {
  validate_weights(config, weights);
  json manifest = json::array();
  std::size_t offset = 0;
  std::vector<std::string> names;
  for (const auto& spec : required_tensors(config)) {
    manifest.push_back({{"name", spec.name}, {"shape", spec.shape}, {"offset", offset}});
    offset += numel(spec.shape);
    names.push_back(spec.name);
  }
  const std::string manifest_text = manifest.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(kWeightsMagic, sizeof(kWeightsMagic));
  const std::uint64_t len = to_le64(manifest_text.size());
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(manifest_text.data(), static_cast<std::streamsize>(manifest_text.size()));
  for (const auto& name : names) {
    for (float v : weights.vector(name)) {
      const std::uint32_t bits = to_le(std::bit_cast<std::uint32_t>(v));
      out.write(reinterpret_cast<const char*>(&bits), sizeof(bits));
    }
  }
  if (!out) throw IoError("failed writing " + path.string());
}

WeightStore read_weights(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  if (bytes.size() < 16 || std::memcmp(bytes.data(), kWeightsMagic, 8) != 0) {
    throw FormatError(path.string() + ": bad magic, expected ALPROBE1");
  }
  std::uint64_t len = 0;
  std::memcpy(&len, bytes.data() + 8, sizeof(len));
  len = to_le64(len);
  if (len > bytes.size() - 16) throw FormatError(path.string() + ": manifest length exceeds file");

  json manifest;
  try {
    manifest = json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(len));
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": bad manifest: " + e.what());
  }
  if (!manifest.is_array()) throw FormatError(path.string() + ": manifest is not an array");

  const std::size_t payload_start = 16 + len;
  const std::size_t payload_bytes = bytes.size() - payload_start;
  if (payload_bytes % 4 != 0) throw FormatError(path.string() + ": payload not float-aligned");
  const std::size_t payload_floats = payload_bytes / 4;

  WeightStore store;
  for (const auto& item : manifest) {
    std::string name;
    std::vector<std::size_t> shape;
    std::size_t offset = 0;
    try {
      name = item.at("name").get<std::string>();
      shape = item.at("shape").get<std::vector<std::size_t>>();
      offset = item.at("offset").get<std::size_t>();
    } catch (const json::exception& e) {
      throw FormatError(path.string() + ": bad manifest entry: " + e.what());
    }
    const std::size_t n = numel(shape);
    if (offset > payload_floats || n > payload_floats - offset) {
      throw FormatError(path.string() + ": tensor " + name + " exceeds payload (truncated file?)");
    }
    std::vector<float> values(n);
    const char* src = bytes.data() + payload_start + offset * 4;
    for (std::size_t i = 0; i < n; ++i) {
      std::uint32_t bits;
      std::memcpy(&bits, src + i * 4, 4);
      values[i] = std::bit_cast<float>(to_le(bits));
    }
    store.insert(std::move(name), std::move(shape), std::move(values));
  }
  return store;
}

EncoderModel load_model(const std::filesystem::path& dir) {
  const auto config_path = dir / "config.json";
  std::ifstream cin(config_path);
  if (!cin) throw IoError("cannot open " + config_path.string());
  json cj;
  try {
    cj = json::parse(cin);
  } catch (const json::exception& e) {
    throw FormatError(config_path.string() + ": " + e.what());
  }
  EncoderModel model;
  model.config = config_from_json(cj);
  model.weights = read_weights(dir / "weights.alp");
  model.vocab = Vocab::load(dir / "vocab.txt");
  model.validate();
  return model;
}

void save_model(const EncoderModel& model, const std::filesystem::path& dir) {
  model.validate();
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  {
    std::ofstream out(dir / "config.json");
    if (!out) throw IoError("cannot write " + (dir / "config.json").string());
    out << config_to_json(model.config).dump(2) << '\n';
  }
  write_weights(dir / "weights.alp", model.config, model.weights);
  model.vocab.save(dir / "vocab.txt");
}

ForwardOutput forward(const EncoderModel& model, std::span<const TokenId> ids,
                      const ForwardOptions& options) {
  const auto& c = model.config;
  const auto& w = model.weights;
  const std::size_t T = ids.size();
  const std::size_t d = c.hidden;
  const std::size_t dh = c.head_dim();
  if (T < 1 || T > c.max_pos) {
    throw LengthError("sequence length " + std::to_string(T) + " outside [1, " +
                      std::to_string(c.max_pos) + "]");
  }

  const Matrix& word = w.matrix("emb.word");
  const Matrix& pos = w.matrix("emb.pos");
  Matrix x(T, d);
  for (std::size_t t = 0; t < T; ++t) {
    const TokenId id = ids[t];
    if (id < 0 || static_cast<std::size_t>(id) >= c.vocab) {
      throw ConfigError("token id " + std::to_string(id) + " outside vocab");
    }
    auto dst = x.row(t);
    auto wr = word.row(static_cast<std::size_t>(id));
    auto pr = pos.row(t);
    for (std::size_t j = 0; j < d; ++j) dst[j] = wr[j] + pr[j];
    if (c.has_token_type) {
      auto tr = w.matrix("emb.type").row(0);
      for (std::size_t j = 0; j < d; ++j) dst[j] += tr[j];
    }
  }
  layernorm_rows(x, w.vector("emb.ln.g"), w.vector("emb.ln.b"), c.eps);

  ForwardOutput out;
  out.attentions.resize(c.layers);
  out.pooled.resize(c.layers);
  const float scale = 1.0f / std::sqrt(static_cast<float>(dh));

  for (std::size_t l = 0; l < c.layers; ++l) {
    auto name = [l](const char* s) { return layer_name(l, s); };
    const Matrix q = linear(x, w.matrix(name("att.q.w")), w.vector(name("att.q.b")));
    const Matrix k = linear(x, w.matrix(name("att.k.w")), w.vector(name("att.k.b")));
    const Matrix v = linear(x, w.matrix(name("att.v.w")), w.vector(name("att.v.b")));

    Matrix context(T, d);
    Matrix pooled(T, T);
    auto& heads = out.attentions[l];
    heads.reserve(c.heads);
    for (std::size_t h = 0; h < c.heads; ++h) {
      Matrix qh(T, dh), kh(T, dh), vh(T, dh);
      for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t j = 0; j < dh; ++j) {
          qh(t, j) = q(t, h * dh + j);
          kh(t, j) = k(t, h * dh + j);
          vh(t, j) = v(t, h * dh + j);
        }
      }
      Matrix attn = softmax_rows(matmul_transposed(qh, kh), scale);
      const Matrix ctx = matmul(attn, vh);
      for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t j = 0; j < dh; ++j) context(t, h * dh + j) = ctx(t, j);
      }
      add_inplace(pooled, attn);
      heads.push_back(std::move(attn));
    }
    const float inv_heads = 1.0f / static_cast<float>(c.heads);
    for (float& p : pooled.data) p *= inv_heads;
    out.pooled[l] = std::move(pooled);

    Matrix attn_out = linear(context, w.matrix(name("att.o.w")), w.vector(name("att.o.b")));
    add_inplace(attn_out, x);
    layernorm_rows(attn_out, w.vector(name("att.ln.g")), w.vector(name("att.ln.b")), c.eps);

    Matrix hidden = linear(attn_out, w.matrix(name("ffn.in.w")), w.vector(name("ffn.in.b")));
    gelu_inplace(hidden);
    Matrix ffn_out = linear(hidden, w.matrix(name("ffn.out.w")), w.vector(name("ffn.out.b")));
    add_inplace(ffn_out, attn_out);
    layernorm_rows(ffn_out, w.vector(name("ffn.ln.g")), w.vector(name("ffn.ln.b")), c.eps);
    x = std::move(ffn_out);
  }

  if (!options.compute_logits) return out;

  if (options.logit_rows.empty()) {
    out.logit_rows.resize(T);
    for (std::size_t t = 0; t < T; ++t) out.logit_rows[t] = t;
  } else {
    out.logit_rows = options.logit_rows;
  }
  Matrix selected(out.logit_rows.size(), d);
  for (std::size_t r = 0; r < out.logit_rows.size(); ++r) {
    const std::size_t t = out.logit_rows[r];
    if (t >= T) throw LengthError("logit row " + std::to_string(t) + " outside sequence");
    auto src = x.row(t);
    std::copy(src.begin(), src.end(), selected.row(r).begin());
  }
  Matrix head = linear(selected, w.matrix("mlm.dense.w"), w.vector("mlm.dense.b"));
  gelu_inplace(head);
  layernorm_rows(head, w.vector("mlm.ln.g"), w.vector("mlm.ln.b"), c.eps);
  out.logits = c.tied_decoder ? matmul_transposed(head, word) : matmul(head, w.matrix("mlm.decoder.w"));
  add_row_bias(out.logits, w.vector("mlm.decoder.b"));
  return out;
}

Vocab synthetic_vocab(std::size_t size) {
  if (size < 6) throw ConfigError("synthetic vocab needs at least 6 entries");
  std::vector<std::string> tokens = {std::string(Vocab::kPad), std::string(Vocab::kUnk),
                                     std::string(Vocab::kCls), std::string(Vocab::kSep),
                                     std::string(Vocab::kMask)};
  for (std::size_t i = 0; tokens.size() < size; ++i) tokens.push_back("tok" + std::to_string(i));
  return Vocab::from_tokens(std::move(tokens));
}

EncoderModel gen_tiny_model(std::uint64_t seed, const TinyModelSpec& spec) {
  spec.config.validate();
  EncoderModel model;
  model.config = spec.config;
  model.vocab = synthetic_vocab(spec.config.vocab);

  Rng rng(seed);
  for (const auto& t : required_tensors(spec.config)) {
    const bool gain = t.name.ends_with(".ln.g");
    std::vector<float> values(numel(t.shape));
    for (float& v : values) {
      v = static_cast<float>(spec.stddev * rng.normal());
      if (gain) v += 1.0f;
    }
    model.weights.insert(t.name, t.shape, std::move(values));
  }
  if (spec.zero_qk) {
    for (std::size_t l = 0; l < spec.config.layers; ++l) {
      for (const char* s : {"att.q.w", "att.q.b", "att.k.w", "att.k.b"}) {
        auto& m = model.weights.mutable_matrix(layer_name(l, s));
        std::fill(m.data.begin(), m.data.end(), 0.0f);
      }
    }
  }
  return model;
}

}  // namespace alprobe
