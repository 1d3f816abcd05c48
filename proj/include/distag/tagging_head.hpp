#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "distag/autodiff.hpp"
#include "distag/conllu.hpp"
#include "distag/parameter.hpp"

namespace distag {

struct TokenPrediction {
  std::string label;
  std::string second_label;  // empty when the inventory has a single label
  Tensor logits;
};

// Argmax with ties going to the lowest inventory index.
TokenPrediction make_prediction(std::span<const double> logits, const LabelInventory& inventory);

// Softmax classifier over encoder features: logits = features · W + b.
class TaggingHead {
 public:
  TaggingHead() = default;
  TaggingHead(LabelInventory inventory, std::size_t input_dim, std::uint64_t seed,
              std::string prefix = "head");

  const LabelInventory& inventory() const { return inventory_; }
  std::size_t input_dim() const { return input_dim_; }
  const std::string& prefix() const { return prefix_; }
  ParameterSet& parameters() { return params_; }
  const ParameterSet& parameters() const { return params_; }

  // [n, input_dim] -> [n, |labels|]
  Var logits(Tape& tape, const Var& features);

 private:
  LabelInventory inventory_;
  std::size_t input_dim_ = 0;
  std::string prefix_;
  ParameterSet params_;
};

// One prediction per entry of positions, read from those rows of the
// encoder output.
std::vector<TokenPrediction> predict(const Tensor& encoder_output,
                                     std::span<const std::size_t> positions, TaggingHead& head);

// Replaces every 1-best "X" by the second-best label. Only defined for pos.
std::vector<std::string> resolve_codemixed(std::span<const TokenPrediction> predictions,
                                           Task task);

// Mean over rows of cross_entropy(onehot(gold), softmax(logits)).
Var supervised_loss(const Var& logits, std::span<const std::string> gold,
                    const LabelInventory& inventory);

}  // namespace distag
