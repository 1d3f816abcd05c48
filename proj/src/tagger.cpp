#include "distag/tagger.hpp"

#include <algorithm>

#include "distag/errors.hpp"
#include "distag/metalstm.hpp"
#include "distag/ops.hpp"

namespace distag {

std::vector<const Parameter*> Tagger::all_parameters() const {
  auto params = const_cast<Tagger*>(this)->parameters();
  return {params.begin(), params.end()};
}

std::vector<TokenPrediction> Tagger::predict(const Sentence& sentence) {
  if (sentence.tokens.empty()) return {};
  Tape tape;
  const Tensor& logits = token_logits(tape, std::span<const Sentence>(&sentence, 1)).value();
  std::vector<TokenPrediction> out;
  out.reserve(logits.rows());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    out.push_back(make_prediction(logits.row(r), inventory()));
  }
  return out;
}

std::vector<std::vector<TokenPrediction>> Tagger::predict(std::span<const Sentence> sentences,
                                                           std::size_t chunk) {
  std::vector<std::vector<TokenPrediction>> out;
  out.reserve(sentences.size());
  std::size_t begin = 0;
  while (begin < sentences.size()) {
    // empty sentences contribute no rows; skip them without breaking a chunk
    std::vector<Sentence> group;
    std::vector<std::size_t> sizes;
    for (; begin < sentences.size() && group.size() < std::max<std::size_t>(chunk, 1); ++begin) {
      sizes.push_back(sentences[begin].tokens.size());
      if (!sentences[begin].tokens.empty()) group.push_back(sentences[begin]);
    }
    Tape tape;
    Tensor logits;
    if (!group.empty()) logits = token_logits(tape, group).value();
    std::size_t row = 0;
    for (std::size_t n : sizes) {
      std::vector<TokenPrediction> preds;
      preds.reserve(n);
      for (std::size_t i = 0; i < n; ++i, ++row) {
        preds.push_back(make_prediction(logits.row(row), inventory()));
      }
      out.push_back(std::move(preds));
    }
  }
  return out;
}

Var Tagger::loss(Tape& tape, std::span<const Sentence> batch) {
  auto gold = gold_labels(batch, inventory().task());
  return supervised_loss(token_logits(tape, batch), gold, inventory());
}

void Tagger::save(const std::filesystem::path& dir, const nlohmann::json& extra_meta,
                  std::span<const NamedTensor> extra) const {
  std::vector<NamedTensor> tensors;
  for (const auto* p : all_parameters()) tensors.push_back({p->name, p->value, DType::f64});
  tensors.insert(tensors.end(), extra.begin(), extra.end());
  nlohmann::json m = meta();
  m["kind"] = kind();
  if (!extra_meta.is_null()) m["extra"] = extra_meta;
  write_archive(dir, m, tensors);
}

std::vector<std::string> gold_labels(std::span<const Sentence> batch, Task task) {
  std::vector<std::string> out;
  for (const auto& s : batch) {
    for (const auto& t : s.tokens) out.push_back(gold_label(t, task));
  }
  return out;
}

nlohmann::json inventory_to_json(const LabelInventory& inventory) {
  return {{"task", task_name(inventory.task())}, {"labels", inventory.labels()}};
}

LabelInventory inventory_from_json(const nlohmann::json& j) {
  return LabelInventory(parse_task(j.at("task").get<std::string>()),
                        j.at("labels").get<std::vector<std::string>>());
}

TransformerTagger::TransformerTagger(const EncoderConfig& config, WordpieceVocab vocab,
                                     LabelInventory inventory, std::uint64_t seed,
                                     std::size_t max_len)
    : encoder_(config, seed),
      head_(std::move(inventory), config.hidden, seed ^ 0x9e3779b97f4a7c15ULL),
      vocab_(std::move(vocab)),
      max_len_(max_len) {
  if (vocab_.size() != config.vocab) {
    throw InvalidArgument("wordpiece vocab has " + std::to_string(vocab_.size()) +
                          " pieces but the encoder expects " + std::to_string(config.vocab));
  }
  if (max_len_ > config.max_positions) {
    throw InvalidArgument("max_len exceeds the encoder's max_positions");
  }
}

std::vector<Encoding> TransformerTagger::encode_words(std::span<const std::string> words) const {
  return encode_sentence(words, vocab_, max_len_);
}

std::vector<Encoding> TransformerTagger::encode(const Sentence& sentence) const {
  std::vector<std::string> forms;
  forms.reserve(sentence.tokens.size());
  for (const auto& t : sentence.tokens) forms.push_back(t.form);
  return encode_words(forms);
}

Var TransformerTagger::token_logits(Tape& tape, std::span<const Sentence> batch) {
  std::vector<Encoding> encodings;
  for (const auto& s : batch) {
    auto e = encode(s);
    encodings.insert(encodings.end(), std::make_move_iterator(e.begin()),
                     std::make_move_iterator(e.end()));
  }
  const auto pieces = make_batch(encodings, vocab_.pad_id());
  std::vector<std::size_t> rows;
  for (std::size_t b = 0; b < encodings.size(); ++b) {
    for (auto pos : encodings[b].first_subword_index) rows.push_back(b * pieces.seq_len + pos);
  }
  Var hidden = encoder_.forward(tape, pieces);
  return head_.logits(tape, gather_rows(hidden, rows));
}

Var TransformerTagger::content_logits(Tape& tape, std::span<const Encoding> encodings) {
  const auto pieces = make_batch(encodings, vocab_.pad_id());
  std::vector<std::size_t> rows;
  for (std::size_t b = 0; b < encodings.size(); ++b) {
    for (std::size_t p = 1; p + 1 < encodings[b].length; ++p) rows.push_back(b * pieces.seq_len + p);
  }
  if (rows.empty()) throw InvalidArgument("content_logits: encodings have no content pieces");
  Var hidden = encoder_.forward(tape, pieces);
  return head_.logits(tape, gather_rows(hidden, rows));
}

std::vector<Parameter*> TransformerTagger::parameters() {
  std::vector<Parameter*> out;
  for (auto& p : encoder_.parameters()) out.push_back(&p);
  for (auto& p : head_.parameters()) out.push_back(&p);
  return out;
}

std::vector<Parameter*> TransformerTagger::trainable() {
  auto all = parameters();
  std::erase_if(all, [](const Parameter* p) { return p->frozen; });
  return all;
}

nlohmann::json TransformerTagger::meta() const {
  return {{"encoder", encoder_.config().to_json()},
          {"inventory", inventory_to_json(head_.inventory())},
          {"max_len", max_len_},
          {"vocab", vocab_.pieces()}};
}

void restore_parameters(Tagger& tagger, const Archive& archive) {
  for (auto* p : tagger.parameters()) {
    const Tensor& t = archive.get(p->name);
    if (t.shape() != p->value.shape()) {
      throw DataError("checkpoint tensor '" + p->name + "' has shape " + shape_string(t.shape()) +
                      ", model expects " + shape_string(p->value.shape()));
    }
    p->value = t;
  }
}

std::unique_ptr<TransformerTagger> load_transformer_tagger(const std::filesystem::path& dir,
                                                           Archive* archive_out) {
  Archive archive = read_archive(dir);
  const auto& m = archive.meta;
  if (m.value("kind", "") != TransformerTagger::kKind) {
    throw DataError(dir.string() + " is not a transformer checkpoint");
  }
  try {
    auto tagger = std::make_unique<TransformerTagger>(
        EncoderConfig::from_json(m.at("encoder")),
        WordpieceVocab(m.at("vocab").get<std::vector<std::string>>()),
        inventory_from_json(m.at("inventory")), 0, m.at("max_len").get<std::size_t>());
    restore_parameters(*tagger, archive);
    if (archive_out) *archive_out = std::move(archive);
    return tagger;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(dir.string() + ": bad checkpoint meta: " + e.what());
  }
}

std::unique_ptr<Tagger> load_tagger(const std::filesystem::path& dir, Archive* archive_out) {
  Archive archive = read_archive(dir);
  const std::string kind = archive.meta.value("kind", "");
  if (kind == TransformerTagger::kKind) return load_transformer_tagger(dir, archive_out);
  if (kind == MetaLstmTagger::kKind) {
    auto tagger = MetaLstmTagger::from_archive(archive);
    if (archive_out) *archive_out = std::move(archive);
    return tagger;
  }
  throw DataError(dir.string() + ": unknown checkpoint kind '" + kind + "'");
}

}  // namespace distag
