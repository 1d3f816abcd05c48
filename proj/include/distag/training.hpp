#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "distag/archive.hpp"
#include "distag/conllu.hpp"
#include "distag/metalstm.hpp"
#include "distag/tagger.hpp"

namespace distag {

struct TrainConfig {
  double learning_rate = 3e-5;
  std::size_t batch_size = 16;
  std::size_t epochs = 10;
  std::uint64_t seed = 0;
  Task task = Task::pos;
  double clip_norm = 1.0;
  double weight_decay = 0.0;

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

// Adam with bias correction and optional decoupled weight decay.
class Adam {
 public:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEpsilon = 1e-8;

  Adam(std::vector<Parameter*> params, double learning_rate, double weight_decay = 0.0);

  void step();
  std::size_t steps() const { return steps_; }
  const std::vector<Parameter*>& parameters() const { return params_; }

  // Moments as named tensors ("optimizer.m.<name>", "optimizer.v.<name>").
  std::vector<NamedTensor> state() const;
  void load_state(const Archive& archive, std::size_t steps);

 private:
  std::vector<Parameter*> params_;
  std::vector<Tensor> m_, v_;
  double lr_;
  double weight_decay_;
  std::size_t steps_ = 0;
};

// Rescales gradients so their global L2 norm is at most max_norm; returns
// the norm before clipping.
double clip_grad_norm(std::span<Parameter* const> params, double max_norm);

// Sentence order for one epoch, reseeded from (seed, epoch).
std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::size_t epoch);
std::mt19937_64 derived_rng(std::uint64_t seed, std::uint64_t stream);

struct LossPoint {
  std::size_t epoch = 0;
  std::size_t step = 0;
  double loss = 0.0;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  std::optional<double> dev_macro_f1;
};

struct TrainLog {
  std::vector<LossPoint> steps;
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;  // 0 when no dev set was given
  double best_dev_f1 = -1.0;

  void write_csv(std::ostream& out) const;  // epoch,step,loss
  nlohmann::json to_json() const;
  static TrainLog from_json(const nlohmann::json& j);
};

struct FinetuneOptions {
  std::span<const Treebank> dev;          // empty: keep the last epoch
  std::filesystem::path checkpoint_dir;  // empty: no checkpoints
  std::ostream* log = nullptr;
  std::string label;                     // prefix for log lines
};

// Supervised training with Adam over shuffled mini-batches. Each epoch is
// checkpointed (with optimizer state) when checkpoint_dir is set, as
// checkpoint_dir/epoch-<k>; the best dev model also goes to
// checkpoint_dir/best and is restored into the tagger at the end.
TrainLog finetune(Tagger& tagger, std::span<const Sentence> train, const TrainConfig& config,
                  const FinetuneOptions& options = {});

struct Resumed {
  std::unique_ptr<Tagger> tagger;
  TrainLog log;
};

// Continues a finetune run from an epoch checkpoint written by finetune.
Resumed resume_finetune(const std::filesystem::path& epoch_checkpoint,
                        std::span<const Sentence> train, const FinetuneOptions& options = {});

struct StagedOptions {
  bool skip_pretraining = false;  // joint stage only
  std::size_t stage_epochs = 0;   // epochs for the char and word stages; 0 uses config.epochs
  FinetuneOptions finetune;
};

struct StagedLog {
  std::vector<std::string> stages;
  std::vector<TrainLog> logs;
};

// Trains the char and word sub-networks through their own heads, then the
// whole model; the stage heads are dropped afterwards.
StagedLog train_metalstm_staged(MetaLstmTagger& tagger, std::span<const Sentence> train,
                                const TrainConfig& config, const StagedOptions& options = {});

}  // namespace distag
