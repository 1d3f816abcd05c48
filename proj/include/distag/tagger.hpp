#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "distag/archive.hpp"
#include "distag/conllu.hpp"
#include "distag/tagging_head.hpp"
#include "distag/transformer.hpp"
#include "distag/wordpiece.hpp"

namespace distag {

// A sequence labeler: encoder plus tagging head over one label inventory.
class Tagger {
 public:
  virtual ~Tagger() = default;

  virtual std::string_view kind() const = 0;
  virtual const LabelInventory& inventory() const = 0;
  // One logit row per token, sentences concatenated in order.
  virtual Var token_logits(Tape& tape, std::span<const Sentence> batch) = 0;
  // Parameters updated by training.
  virtual std::vector<Parameter*> trainable() = 0;
  // Every parameter, frozen ones included.
  virtual std::vector<Parameter*> parameters() = 0;
  std::vector<const Parameter*> all_parameters() const;
  virtual nlohmann::json meta() const = 0;

  std::vector<TokenPrediction> predict(const Sentence& sentence);
  // Predictions for many sentences, run through the model in chunks.
  std::vector<std::vector<TokenPrediction>> predict(std::span<const Sentence> sentences,
                                                    std::size_t chunk = 32);
  Var loss(Tape& tape, std::span<const Sentence> batch);

  // Writes a checkpoint directory; extra tensors/meta ride along (optimizer
  // state, training progress).
  void save(const std::filesystem::path& dir, const nlohmann::json& extra_meta = {},
            std::span<const NamedTensor> extra = {}) const;
};

// Gold labels of a batch in token order.
std::vector<std::string> gold_labels(std::span<const Sentence> batch, Task task);

nlohmann::json inventory_to_json(const LabelInventory& inventory);
LabelInventory inventory_from_json(const nlohmann::json& j);

// Transformer encoder with a softmax head on the first wordpiece of each
// token.
class TransformerTagger : public Tagger {
 public:
  static constexpr std::string_view kKind = "transformer";

  TransformerTagger(const EncoderConfig& config, WordpieceVocab vocab, LabelInventory inventory,
                    std::uint64_t seed, std::size_t max_len = 128);

  std::string_view kind() const override { return kKind; }
  const LabelInventory& inventory() const override { return head_.inventory(); }
  Var token_logits(Tape& tape, std::span<const Sentence> batch) override;
  std::vector<Parameter*> trainable() override;
  std::vector<Parameter*> parameters() override;
  nlohmann::json meta() const override;

  // Logits at every non-special position ([CLS], [SEP], pads excluded),
  // encodings concatenated in order.
  Var content_logits(Tape& tape, std::span<const Encoding> encodings);
  std::vector<Encoding> encode(const Sentence& sentence) const;
  std::vector<Encoding> encode_words(std::span<const std::string> words) const;

  TransformerModel& encoder() { return encoder_; }
  const TransformerModel& encoder() const { return encoder_; }
  TaggingHead& head() { return head_; }
  const WordpieceVocab& vocab() const { return vocab_; }
  std::size_t max_len() const { return max_len_; }

 private:
  TransformerModel encoder_;
  TaggingHead head_;
  WordpieceVocab vocab_;
  std::size_t max_len_;
};

// Loads either tagger kind from a checkpoint directory. The archive is
// returned through `archive` when non-null so callers can read extras.
std::unique_ptr<Tagger> load_tagger(const std::filesystem::path& dir, Archive* archive = nullptr);
std::unique_ptr<TransformerTagger> load_transformer_tagger(const std::filesystem::path& dir,
                                                           Archive* archive = nullptr);

// Copies parameter values from an archive into a tagger (names must match).
void restore_parameters(Tagger& tagger, const Archive& archive);

}  // namespace distag
