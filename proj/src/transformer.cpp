#include "distag/transformer.hpp"

#include <algorithm>
#include <random>

#include "distag/errors.hpp"
#include "distag/ops.hpp"

namespace distag {

void EncoderConfig::validate() const {
  if (hidden == 0 || intermediate == 0 || heads == 0 || vocab == 0 || max_positions == 0 ||
      type_vocab == 0) {
    throw InvalidArgument("encoder config sizes must be positive");
  }
  if (!(initializer_range > 0.0)) throw InvalidArgument("initializer_range must be positive");
  if (hidden % heads != 0) {
    throw InvalidArgument("hidden size " + std::to_string(hidden) +
                          " is not divisible by head count " + std::to_string(heads));
  }
}

EncoderConfig EncoderConfig::bert_base(std::size_t vocab) {
  return {12, 768, 3072, 12, vocab, 512, 1};
}

EncoderConfig EncoderConfig::minibert(std::size_t vocab) {
  return {3, 256, 1024, 4, vocab, 512, 1};
}

nlohmann::json EncoderConfig::to_json() const {
  return {{"layers", layers},         {"hidden", hidden}, {"intermediate", intermediate},
          {"heads", heads},           {"vocab", vocab},   {"max_positions", max_positions},
          {"type_vocab", type_vocab}, {"initializer_range", initializer_range}};
}

EncoderConfig EncoderConfig::from_json(const nlohmann::json& j) {
  EncoderConfig c;
  c.layers = j.at("layers").get<std::size_t>();
  c.hidden = j.at("hidden").get<std::size_t>();
  c.intermediate = j.at("intermediate").get<std::size_t>();
  c.heads = j.at("heads").get<std::size_t>();
  c.vocab = j.at("vocab").get<std::size_t>();
  c.max_positions = j.at("max_positions").get<std::size_t>();
  c.type_vocab = j.value("type_vocab", std::size_t{1});
  c.initializer_range = j.value("initializer_range", 0.02);
  c.validate();
  return c;
}

ParameterBreakdown count_parameters(const EncoderConfig& c) {
  const std::size_t h = c.hidden, i = c.intermediate;
  ParameterBreakdown out;
  out.embedding = c.vocab * h + c.max_positions * h + c.type_vocab * h + 2 * h;
  const std::size_t attention = 4 * h * h + 4 * h;
  const std::size_t ffn = 2 * h * i + i + h;
  const std::size_t norms = 4 * h;
  out.hidden = c.layers * (attention + ffn + norms);
  return out;
}

FlopBreakdown count_flops(const EncoderConfig& c, std::size_t n) {
  if (n == 0) throw InvalidArgument("count_flops: sequence length must be >= 1");
  const double L = static_cast<double>(c.layers), H = static_cast<double>(c.hidden),
               I = static_cast<double>(c.intermediate), N = static_cast<double>(n);
  FlopBreakdown f;
  f.attention_quadratic = L * 4.0 * N * N * H;
  f.projections = L * 8.0 * N * H * H;
  f.ffn = L * 4.0 * N * H * I;
  return f;
}

PieceBatch make_batch(std::span<const Encoding> encodings, int pad_id, bool trim) {
  if (encodings.empty()) throw InvalidArgument("make_batch: no encodings");
  PieceBatch batch;
  for (const auto& e : encodings) {
    batch.lengths.push_back(e.length);
    batch.seq_len = std::max(batch.seq_len, trim ? e.length : e.piece_ids.size());
  }
  batch.ids.assign(encodings.size() * batch.seq_len, pad_id);
  for (std::size_t b = 0; b < encodings.size(); ++b) {
    const auto& ids = encodings[b].piece_ids;
    const std::size_t n = std::min(ids.size(), batch.seq_len);
    std::copy_n(ids.begin(), n, batch.ids.begin() + static_cast<std::ptrdiff_t>(b * batch.seq_len));
  }
  return batch;
}

namespace {

Tensor normal_init(Shape shape, std::mt19937_64& rng, double stddev) {
  std::normal_distribution<double> dist(0.0, stddev);
  Tensor t(std::move(shape));
  for (auto& v : t.values()) v = dist(rng);
  return t;
}

}  // namespace

TransformerModel::TransformerModel(const EncoderConfig& config, std::uint64_t seed)
    : config_(config) {
  config_.validate();
  std::mt19937_64 rng(seed);
  const std::size_t h = config_.hidden, inter = config_.intermediate;
  const double r = config_.initializer_range;
  params_.add("embeddings.word", normal_init({config_.vocab, h}, rng, r));
  params_.add("embeddings.position", normal_init({config_.max_positions, h}, rng, r));
  params_.add("embeddings.token_type", normal_init({config_.type_vocab, h}, rng, r));
  params_.add("embeddings.norm.gain", Tensor({h}, 1.0));
  params_.add("embeddings.norm.bias", Tensor({h}, 0.0));
  for (std::size_t l = 0; l < config_.layers; ++l) {
    const std::string p = "layer." + std::to_string(l) + ".";
    for (const char* proj : {"query", "key", "value", "output"}) {
      params_.add(p + "attention." + proj + ".weight", normal_init({h, h}, rng, r));
      params_.add(p + "attention." + proj + ".bias", Tensor({h}, 0.0));
    }
    params_.add(p + "attention.norm.gain", Tensor({h}, 1.0));
    params_.add(p + "attention.norm.bias", Tensor({h}, 0.0));
    params_.add(p + "ffn.in.weight", normal_init({h, inter}, rng, r));
    params_.add(p + "ffn.in.bias", Tensor({inter}, 0.0));
    params_.add(p + "ffn.out.weight", normal_init({inter, h}, rng, r));
    params_.add(p + "ffn.out.bias", Tensor({h}, 0.0));
    params_.add(p + "ffn.norm.gain", Tensor({h}, 1.0));
    params_.add(p + "ffn.norm.bias", Tensor({h}, 0.0));
  }
}

Var TransformerModel::forward(Tape& tape, const PieceBatch& batch) {
  const std::size_t n = batch.seq_len;
  if (n == 0 || batch.ids.size() != batch.batch() * n) {
    throw InvalidArgument("forward: malformed piece batch");
  }
  if (n > config_.max_positions) {
    throw InvalidArgument("forward: sequence length " + std::to_string(n) +
                          " exceeds max_positions " + std::to_string(config_.max_positions));
  }
  for (int id : batch.ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= config_.vocab) {
      throw InvalidArgument("forward: piece id " + std::to_string(id) + " outside vocab of " +
                            std::to_string(config_.vocab));
    }
  }
  auto P = [&](const std::string& name) { return tape.parameter(params_.at(name)); };

  std::vector<int> positions(batch.ids.size()), types(batch.ids.size(), 0);
  for (std::size_t r = 0; r < positions.size(); ++r) positions[r] = static_cast<int>(r % n);
  Var x = add(embedding(P("embeddings.word"), batch.ids),
              embedding(P("embeddings.position"), positions));
  x = add(x, embedding(P("embeddings.token_type"), types));
  x = layer_norm(x, P("embeddings.norm.gain"), P("embeddings.norm.bias"));

  auto dense = [&](const Var& in, const std::string& name) {
    return add(matmul(in, P(name + ".weight")), P(name + ".bias"));
  };
  for (std::size_t l = 0; l < config_.layers; ++l) {
    const std::string p = "layer." + std::to_string(l) + ".";
    Var q = dense(x, p + "attention.query");
    Var k = dense(x, p + "attention.key");
    Var v = dense(x, p + "attention.value");
    Var ctx = multi_head_attention(q, k, v, config_.heads, n, batch.lengths);
    Var attn = dense(ctx, p + "attention.output");
    x = layer_norm(add(x, attn), P(p + "attention.norm.gain"), P(p + "attention.norm.bias"));
    Var ff = dense(gelu(dense(x, p + "ffn.in")), p + "ffn.out");
    x = layer_norm(add(x, ff), P(p + "ffn.norm.gain"), P(p + "ffn.norm.bias"));
  }
  return x;
}

}  // namespace distag
