#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "distag/embeddings.hpp"
#include "distag/tagger.hpp"

namespace distag {

struct MetaLstmConfig {
  std::size_t char_emb_dim = 16;
  std::size_t char_hidden = 32;
  std::size_t word_emb_dim = 300;  // overwritten by the embedding table's dim
  std::size_t word_hidden = 64;
  std::size_t joint_hidden = 64;

  void validate() const;
  nlohmann::json to_json() const;
  static MetaLstmConfig from_json(const nlohmann::json& j);
};

// Unidirectional LSTM layer with input/forget/output gates and a tanh
// candidate; gate columns are ordered [input, forget, candidate, output].
class Lstm {
 public:
  Lstm() = default;
  Lstm(ParameterSet& params, std::string prefix, std::size_t input_dim, std::size_t hidden,
       std::mt19937_64& rng);

  std::size_t hidden() const { return hidden_; }
  const std::string& prefix() const { return prefix_; }

  // Runs over the rows of inputs ([T, input_dim]) in order, or in reverse
  // when reverse is set. Returns [T, hidden]; row t is the state after
  // consuming input t (so with reverse, row 0 is the final state).
  Var run(Tape& tape, ParameterSet& params, const Var& inputs, bool reverse = false) const;

 private:
  std::string prefix_;
  std::size_t input_dim_ = 0;
  std::size_t hidden_ = 0;
};

class BiLstm {
 public:
  BiLstm() = default;
  BiLstm(ParameterSet& params, const std::string& prefix, std::size_t input_dim,
         std::size_t hidden, std::mt19937_64& rng);

  // [T, 2*hidden]: forward state ++ backward state at each position.
  Var encode(Tape& tape, ParameterSet& params, const Var& inputs) const;
  // [1, 2*hidden]: final forward state ++ final backward state.
  Var final_states(Tape& tape, ParameterSet& params, const Var& inputs) const;

  const Lstm& forward_lstm() const { return fwd_; }
  const Lstm& backward_lstm() const { return bwd_; }
  std::size_t output_dim() const { return 2 * fwd_.hidden(); }

 private:
  Lstm fwd_, bwd_;
};

// Character BiLSTM, word BiLSTM and a joint BiLSTM over their concatenated
// outputs. Parameter names are prefixed "char.", "word." and "joint." so
// each sub-network can be trained or frozen on its own. Word vectors are
// a frozen table; unknown words share the unk row.
class MetaLstmModel {
 public:
  MetaLstmModel() = default;
  MetaLstmModel(const MetaLstmConfig& config, std::vector<std::string> chars,
                const EmbeddingTable& embeddings, std::uint64_t seed);

  // Character inventory from training forms (UTF-8 code points), sorted.
  static std::vector<std::string> collect_chars(std::span<const Sentence> sentences);

  const MetaLstmConfig& config() const { return config_; }
  ParameterSet& parameters() { return params_; }
  const ParameterSet& parameters() const { return params_; }
  const std::vector<std::string>& chars() const { return chars_; }
  const std::vector<std::string>& words() const { return words_; }

  Var char_encode(Tape& tape, const Sentence& sentence);
  Var word_encode(Tape& tape, const Sentence& sentence);
  Var joint_encode(Tape& tape, const Var& char_out, const Var& word_out);

  int char_id(std::string_view ch) const;  // 0 for unknown
  int word_id(const std::string& word) const;  // unk row for OOV

  BiLstm& char_lstm() { return char_lstm_; }
  BiLstm& word_lstm() { return word_lstm_; }
  BiLstm& joint_lstm() { return joint_lstm_; }

  nlohmann::json meta() const;
  // Rebuilds the structure from checkpoint meta; values come from the archive.
  static MetaLstmModel from_meta(const nlohmann::json& meta);

 private:
  void build(std::uint64_t seed);

  MetaLstmConfig config_;
  std::vector<std::string> chars_;  // id 0 is reserved for unknown
  std::unordered_map<std::string, int> char_index_;
  std::vector<std::string> words_;  // row i of word.embeddings; last row is unk
  std::unordered_map<std::string, int> word_index_;
  ParameterSet params_;
  BiLstm char_lstm_, word_lstm_, joint_lstm_;
};

// Meta-LSTM tagger with one head per training stage. Stage char and word
// train their sub-network through a temporary head; stage joint trains the
// whole model through the final head.
class MetaLstmTagger : public Tagger {
 public:
  static constexpr std::string_view kKind = "metalstm";
  enum class Stage { char_only, word_only, joint };

  MetaLstmTagger(MetaLstmModel model, LabelInventory inventory, std::uint64_t seed);

  std::string_view kind() const override { return kKind; }
  const LabelInventory& inventory() const override { return joint_head_.inventory(); }
  Var token_logits(Tape& tape, std::span<const Sentence> batch) override;
  std::vector<Parameter*> trainable() override;
  std::vector<Parameter*> parameters() override;
  nlohmann::json meta() const override;

  void set_stage(Stage stage) { stage_ = stage; }
  Stage stage() const { return stage_; }
  // Drops the stage heads once staged training is done.
  void discard_stage_heads() { stage_heads_ = false; }
  bool has_stage_heads() const { return stage_heads_; }

  MetaLstmModel& model() { return model_; }

  static std::unique_ptr<MetaLstmTagger> from_archive(const Archive& archive);

 private:
  MetaLstmModel model_;
  TaggingHead char_head_, word_head_, joint_head_;
  Stage stage_ = Stage::joint;
  bool stage_heads_ = true;
};

std::string_view stage_name(MetaLstmTagger::Stage stage);

}  // namespace distag
