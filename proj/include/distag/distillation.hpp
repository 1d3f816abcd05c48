#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <memory>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "distag/autodiff.hpp"
#include "distag/conllu.hpp"
#include "distag/tagger.hpp"
#include "distag/training.hpp"

namespace distag {

struct DistillConfig {
  double temperature = 3.0;
  double learning_rate = 1e-4;
  std::size_t batch_size = 256;
  std::size_t epochs = 24;
  std::size_t min_sentence_chars = 10;
  std::size_t shard_size = 1000;  // segments per shard
  std::uint64_t seed = 0;
  double clip_norm = 1.0;

  void validate() const;
  nlohmann::json to_json() const;
  static DistillConfig from_json(const nlohmann::json& j);
};

// Non-empty lines with at least min_chars code points (surrounding
// whitespace ignored), in input order.
std::vector<std::string> prepare_unlabeled(std::istream& in, std::size_t min_chars);
std::vector<std::string> prepare_unlabeled(const std::filesystem::path& path, std::size_t min_chars);

// Teacher logits for a block of encoded segments. Each segment keeps its
// content piece ids ([CLS]/[SEP] dropped) and one logit row per piece.
struct LogitShard {
  std::vector<std::vector<int>> piece_ids;
  std::vector<Tensor> logits;  // [pieces x labels] per segment
  std::string checksum;

  std::size_t segments() const { return piece_ids.size(); }
  std::size_t rows() const;
};

struct ShardEntry {
  std::string path;  // relative to the shard directory
  std::string checksum;
  std::size_t segments = 0;
};

// shards.json in the shard directory: label inventory, teacher vocabulary
// fingerprint and the shard list.
struct ShardManifest {
  LabelInventory inventory;
  std::string vocab_sha256;
  std::size_t vocab_size = 0;
  std::vector<ShardEntry> shards;

  nlohmann::json to_json() const;
  static ShardManifest from_json(const nlohmann::json& j);
};

inline constexpr std::string_view kShardManifest = "shards.json";

std::string vocab_fingerprint(const WordpieceVocab& vocab);

// Runs the teacher over every sentence (whitespace tokenized) and writes
// logit shards for all content wordpieces. When tokenizer is given it must
// match the teacher's vocabulary.
ShardManifest generate_teacher_logits(TransformerTagger& teacher, std::span<const std::string> sentences,
                                      const std::filesystem::path& dir, std::size_t shard_size,
                                      const WordpieceVocab* tokenizer = nullptr,
                                      std::size_t batch = 32);

ShardManifest read_shard_manifest(const std::filesystem::path& dir);
LogitShard read_shard(const std::filesystem::path& path, const std::string& expected_checksum = {});
// All shards listed in the manifest, concatenated, checksums verified.
LogitShard load_shards(const std::filesystem::path& dir, ShardManifest* manifest = nullptr);

// Mean over rows of H(softmax(t/T), softmax(s/T)); t is treated as a
// constant.
Var distill_loss(const Tensor& teacher_logits, const Var& student_logits, double temperature);
// Same, detaching a taped teacher output: no gradient reaches it.
Var distill_loss(const Var& teacher_logits, const Var& student_logits, double temperature);

struct DistillLog {
  double initial_loss = 0.0;  // loss of the first batch before any update
  std::vector<LossPoint> steps;
  std::vector<double> epoch_loss;
  TrainLog finetune;
};

struct DistillOptions {
  std::span<const Treebank> dev;
  std::filesystem::path checkpoint_dir;  // phase-2 checkpoints
  std::ostream* log = nullptr;
};

// Phase 1: fits the student to the teacher's softened distribution over
// the shards. Phase 2: supervised finetuning on labeled sentences (skipped
// when labeled is empty).
DistillLog distill(TransformerTagger& student, const ShardManifest& manifest, const LogitShard& shards,
                   const DistillConfig& config, std::span<const Sentence> labeled,
                   const TrainConfig& finetune_config, const DistillOptions& options = {});

// Fraction of tokens where both taggers choose the same label.
double agreement(Tagger& a, Tagger& b, std::span<const Sentence> sentences);

struct TemperatureRun {
  double temperature = 0.0;
  double agreement = 0.0;
  double final_loss = 0.0;
};

// One distillation per temperature from the same student initialization;
// agreement is measured against the teacher on eval sentences.
std::vector<TemperatureRun> temperature_sweep(TransformerTagger& teacher, const EncoderConfig& student_config,
                                              std::uint64_t student_seed, const ShardManifest& manifest,
                                              const LogitShard& shards, const DistillConfig& config,
                                              std::span<const Sentence> labeled,
                                              const TrainConfig& finetune_config,
                                              std::span<const Sentence> eval,
                                              std::span<const double> temperatures);

}  // namespace distag
