#include "distag/metalstm.hpp"

#include <cmath>
#include <set>

#include "distag/errors.hpp"
#include "distag/ops.hpp"
#include "distag/text.hpp"

namespace distag {

void MetaLstmConfig::validate() const {
  if (char_emb_dim == 0 || char_hidden == 0 || word_emb_dim == 0 || word_hidden == 0 ||
      joint_hidden == 0) {
    throw InvalidArgument("Meta-LSTM config sizes must be positive");
  }
}

nlohmann::json MetaLstmConfig::to_json() const {
  return {{"char_emb_dim", char_emb_dim},
          {"char_hidden", char_hidden},
          {"word_emb_dim", word_emb_dim},
          {"word_hidden", word_hidden},
          {"joint_hidden", joint_hidden}};
}

MetaLstmConfig MetaLstmConfig::from_json(const nlohmann::json& j) {
  MetaLstmConfig c;
  c.char_emb_dim = j.at("char_emb_dim").get<std::size_t>();
  c.char_hidden = j.at("char_hidden").get<std::size_t>();
  c.word_emb_dim = j.at("word_emb_dim").get<std::size_t>();
  c.word_hidden = j.at("word_hidden").get<std::size_t>();
  c.joint_hidden = j.at("joint_hidden").get<std::size_t>();
  c.validate();
  return c;
}

Lstm::Lstm(ParameterSet& params, std::string prefix, std::size_t input_dim, std::size_t hidden,
           std::mt19937_64& rng)
    : prefix_(std::move(prefix)), input_dim_(input_dim), hidden_(hidden) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  std::uniform_real_distribution<double> dist(-bound, bound);
  auto init = [&](Shape shape) {
    Tensor t(std::move(shape));
    for (auto& v : t.values()) v = dist(rng);
    return t;
  };
  params.add(prefix_ + ".input_weight", init({input_dim, 4 * hidden}));
  params.add(prefix_ + ".recurrent_weight", init({hidden, 4 * hidden}));
  Tensor bias({4 * hidden}, 0.0);
  for (std::size_t i = hidden; i < 2 * hidden; ++i) bias[i] = 1.0;  // forget gate
  params.add(prefix_ + ".bias", std::move(bias));
}

Var Lstm::run(Tape& tape, ParameterSet& params, const Var& inputs, bool reverse) const {
  const Tensor& in = inputs.value();
  if (in.cols() != input_dim_) {
    throw InvalidArgument(prefix_ + ": expected inputs of width " + std::to_string(input_dim_) +
                          ", got " + std::to_string(in.cols()));
  }
  const std::size_t steps = in.rows();
  const std::size_t h = hidden_;
  Var recurrent = tape.parameter(params.at(prefix_ + ".recurrent_weight"));
  Var projected = add(matmul(inputs, tape.parameter(params.at(prefix_ + ".input_weight"))),
                      tape.parameter(params.at(prefix_ + ".bias")));
  Var state = tape.constant(Tensor({1, h}, 0.0));
  Var cell = tape.constant(Tensor({1, h}, 0.0));
  std::vector<Var> outputs(steps);
  for (std::size_t i = 0; i < steps; ++i) {
    const std::size_t t = reverse ? steps - 1 - i : i;
    Var gates = add(slice_rows(projected, t, t + 1), matmul(state, recurrent));
    Var input_gate = sigmoid(slice_cols(gates, 0, h));
    Var forget_gate = sigmoid(slice_cols(gates, h, 2 * h));
    Var candidate = tanh(slice_cols(gates, 2 * h, 3 * h));
    Var output_gate = sigmoid(slice_cols(gates, 3 * h, 4 * h));
    cell = add(mul(forget_gate, cell), mul(input_gate, candidate));
    state = mul(output_gate, tanh(cell));
    outputs[t] = state;
  }
  return concat_rows(outputs);
}

BiLstm::BiLstm(ParameterSet& params, const std::string& prefix, std::size_t input_dim,
               std::size_t hidden, std::mt19937_64& rng)
    : fwd_(params, prefix + ".fwd", input_dim, hidden, rng),
      bwd_(params, prefix + ".bwd", input_dim, hidden, rng) {}

Var BiLstm::encode(Tape& tape, ParameterSet& params, const Var& inputs) const {
  return concat({fwd_.run(tape, params, inputs, false), bwd_.run(tape, params, inputs, true)});
}

Var BiLstm::final_states(Tape& tape, ParameterSet& params, const Var& inputs) const {
  const std::size_t steps = inputs.value().rows();
  Var f = fwd_.run(tape, params, inputs, false);
  Var b = bwd_.run(tape, params, inputs, true);
  return concat({slice_rows(f, steps - 1, steps), slice_rows(b, 0, 1)});
}

std::vector<std::string> MetaLstmModel::collect_chars(std::span<const Sentence> sentences) {
  std::set<std::string> chars;
  for (const auto& s : sentences) {
    for (const auto& t : s.tokens) {
      for (auto c : utf8_chars(t.form)) chars.emplace(c);
    }
  }
  return {chars.begin(), chars.end()};
}

MetaLstmModel::MetaLstmModel(const MetaLstmConfig& config, std::vector<std::string> chars,
                             const EmbeddingTable& embeddings, std::uint64_t seed)
    : config_(config) {
  config_.word_emb_dim = embeddings.dim();
  config_.validate();
  chars_.push_back("<unk>");
  chars_.insert(chars_.end(), chars.begin(), chars.end());
  words_ = embeddings.words();
  words_.push_back(std::string(EmbeddingTable::kUnkWord));

  Tensor table({words_.size(), config_.word_emb_dim});
  for (std::size_t w = 0; w + 1 < words_.size(); ++w) {
    auto v = embeddings.lookup(words_[w]);
    std::copy(v.begin(), v.end(), table.row(w).begin());
  }
  auto unk = embeddings.unk();
  std::copy(unk.begin(), unk.end(), table.row(words_.size() - 1).begin());
  params_.add("word.embeddings", std::move(table)).frozen = true;
  build(seed);
}

void MetaLstmModel::build(std::uint64_t seed) {
  char_index_.clear();
  for (std::size_t i = 0; i < chars_.size(); ++i) char_index_.emplace(chars_[i], static_cast<int>(i));
  word_index_.clear();
  for (std::size_t i = 0; i + 1 < words_.size(); ++i) word_index_.emplace(words_[i], static_cast<int>(i));

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 0.1);
  Tensor char_table({chars_.size(), config_.char_emb_dim});
  for (auto& v : char_table.values()) v = dist(rng);
  params_.add("char.embeddings", std::move(char_table));
  char_lstm_ = BiLstm(params_, "char.lstm", config_.char_emb_dim, config_.char_hidden, rng);
  word_lstm_ = BiLstm(params_, "word.lstm", config_.word_emb_dim, config_.word_hidden, rng);
  joint_lstm_ = BiLstm(params_, "joint.lstm", 2 * config_.char_hidden + 2 * config_.word_hidden,
                       config_.joint_hidden, rng);
}

int MetaLstmModel::char_id(std::string_view ch) const {
  auto it = char_index_.find(std::string(ch));
  return it == char_index_.end() ? 0 : it->second;
}

int MetaLstmModel::word_id(const std::string& word) const {
  auto it = word_index_.find(word);
  return it == word_index_.end() ? static_cast<int>(words_.size() - 1) : it->second;
}

Var MetaLstmModel::char_encode(Tape& tape, const Sentence& sentence) {
  if (sentence.tokens.empty()) throw InvalidArgument("char_encode: empty sentence");
  Var table = tape.parameter(params_.at("char.embeddings"));
  std::vector<Var> per_token;
  per_token.reserve(sentence.tokens.size());
  for (const auto& t : sentence.tokens) {
    std::vector<int> ids;
    for (auto c : utf8_chars(t.form)) ids.push_back(char_id(c));
    per_token.push_back(char_lstm_.final_states(tape, params_, embedding(table, ids)));
  }
  return concat_rows(per_token);
}

Var MetaLstmModel::word_encode(Tape& tape, const Sentence& sentence) {
  if (sentence.tokens.empty()) throw InvalidArgument("word_encode: empty sentence");
  std::vector<int> ids;
  for (const auto& t : sentence.tokens) ids.push_back(word_id(t.form));
  Var vectors = embedding(tape.parameter(params_.at("word.embeddings")), ids);
  return word_lstm_.encode(tape, params_, vectors);
}

Var MetaLstmModel::joint_encode(Tape& tape, const Var& char_out, const Var& word_out) {
  if (char_out.value().rows() != word_out.value().rows()) {
    throw InvalidArgument("joint_encode: char and word outputs cover " +
                          std::to_string(char_out.value().rows()) + " vs " +
                          std::to_string(word_out.value().rows()) + " tokens");
  }
  return joint_lstm_.encode(tape, params_, concat({char_out, word_out}));
}

nlohmann::json MetaLstmModel::meta() const {
  return {{"config", config_.to_json()}, {"chars", chars_}, {"words", words_}};
}

MetaLstmModel MetaLstmModel::from_meta(const nlohmann::json& meta) {
  MetaLstmModel m;
  m.config_ = MetaLstmConfig::from_json(meta.at("config"));
  m.chars_ = meta.at("chars").get<std::vector<std::string>>();
  m.words_ = meta.at("words").get<std::vector<std::string>>();
  if (m.chars_.empty() || m.words_.empty()) throw DataError("Meta-LSTM meta lacks vocabularies");
  m.params_.add("word.embeddings", Tensor({m.words_.size(), m.config_.word_emb_dim}, 0.0)).frozen =
      true;
  m.build(0);
  return m;
}

std::string_view stage_name(MetaLstmTagger::Stage stage) {
  switch (stage) {
    case MetaLstmTagger::Stage::char_only: return "char";
    case MetaLstmTagger::Stage::word_only: return "word";
    case MetaLstmTagger::Stage::joint: return "joint";
  }
  return "?";
}

MetaLstmTagger::MetaLstmTagger(MetaLstmModel model, LabelInventory inventory, std::uint64_t seed)
    : model_(std::move(model)),
      char_head_(inventory, 2 * model_.config().char_hidden, seed + 1, "head.char"),
      word_head_(inventory, 2 * model_.config().word_hidden, seed + 2, "head.word"),
      joint_head_(inventory, 2 * model_.config().joint_hidden, seed + 3, "head.joint") {}

Var MetaLstmTagger::token_logits(Tape& tape, std::span<const Sentence> batch) {
  if (stage_ != Stage::joint && !stage_heads_) {
    throw InvalidArgument("stage heads were discarded; only the joint stage can run");
  }
  std::vector<Var> per_sentence;
  for (const auto& s : batch) {
    switch (stage_) {
      case Stage::char_only:
        per_sentence.push_back(char_head_.logits(tape, model_.char_encode(tape, s)));
        break;
      case Stage::word_only:
        per_sentence.push_back(word_head_.logits(tape, model_.word_encode(tape, s)));
        break;
      case Stage::joint: {
        Var joint = model_.joint_encode(tape, model_.char_encode(tape, s), model_.word_encode(tape, s));
        per_sentence.push_back(joint_head_.logits(tape, joint));
        break;
      }
    }
  }
  return concat_rows(per_sentence);
}

std::vector<Parameter*> MetaLstmTagger::parameters() {
  std::vector<Parameter*> out;
  for (auto& p : model_.parameters()) out.push_back(&p);
  if (stage_heads_) {
    for (auto& p : char_head_.parameters()) out.push_back(&p);
    for (auto& p : word_head_.parameters()) out.push_back(&p);
  }
  for (auto& p : joint_head_.parameters()) out.push_back(&p);
  return out;
}

std::vector<Parameter*> MetaLstmTagger::trainable() {
  std::vector<Parameter*> out;
  auto take = [&](ParameterSet& set, std::string_view prefix) {
    for (auto& p : set) {
      if (!p.frozen && p.name.starts_with(prefix)) out.push_back(&p);
    }
  };
  switch (stage_) {
    case Stage::char_only:
      take(model_.parameters(), "char.");
      take(char_head_.parameters(), "");
      break;
    case Stage::word_only:
      take(model_.parameters(), "word.");
      take(word_head_.parameters(), "");
      break;
    case Stage::joint:
      take(model_.parameters(), "");
      take(joint_head_.parameters(), "");
      break;
  }
  return out;
}

nlohmann::json MetaLstmTagger::meta() const {
  return {{"model", model_.meta()},
          {"inventory", inventory_to_json(joint_head_.inventory())},
          {"stage_heads", stage_heads_}};
}

std::unique_ptr<MetaLstmTagger> MetaLstmTagger::from_archive(const Archive& archive) {
  try {
    auto tagger = std::make_unique<MetaLstmTagger>(MetaLstmModel::from_meta(archive.meta.at("model")),
                                                   inventory_from_json(archive.meta.at("inventory")), 0);
    tagger->stage_heads_ = archive.meta.value("stage_heads", false);
    restore_parameters(*tagger, archive);
    return tagger;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad Meta-LSTM checkpoint meta: ") + e.what());
  }
}

}  // namespace distag
