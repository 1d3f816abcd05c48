#include "distag/tagging_head.hpp"

#include <random>

#include "distag/errors.hpp"
#include "distag/ops.hpp"

namespace distag {

TokenPrediction make_prediction(std::span<const double> logits, const LabelInventory& inventory) {
  if (logits.size() != inventory.size() || logits.empty()) {
    throw InvalidArgument("prediction logits do not match inventory size");
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < logits.size(); ++i) {
    if (logits[i] > logits[best]) best = i;
  }
  std::size_t second = logits.size();
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (i == best) continue;
    if (second == logits.size() || logits[i] > logits[second]) second = i;
  }
  TokenPrediction p;
  p.label = inventory.label(best);
  if (second < logits.size()) p.second_label = inventory.label(second);
  p.logits = Tensor::vector({logits.begin(), logits.end()});
  return p;
}

TaggingHead::TaggingHead(LabelInventory inventory, std::size_t input_dim, std::uint64_t seed,
                         std::string prefix)
    : inventory_(std::move(inventory)), input_dim_(input_dim), prefix_(std::move(prefix)) {
  if (input_dim_ == 0 || inventory_.size() == 0) {
    throw InvalidArgument("tagging head needs a positive input dim and a non-empty inventory");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 0.02);
  Tensor w({input_dim_, inventory_.size()});
  for (auto& v : w.values()) v = dist(rng);
  params_.add(prefix_ + ".weight", std::move(w));
  params_.add(prefix_ + ".bias", Tensor({inventory_.size()}, 0.0));
}

Var TaggingHead::logits(Tape& tape, const Var& features) {
  if (features.value().cols() != input_dim_) {
    throw InvalidArgument("tagging head expects features of width " + std::to_string(input_dim_) +
                          ", got " + std::to_string(features.value().cols()));
  }
  return add(matmul(features, tape.parameter(params_.at(prefix_ + ".weight"))),
             tape.parameter(params_.at(prefix_ + ".bias")));
}

std::vector<TokenPrediction> predict(const Tensor& encoder_output,
                                     std::span<const std::size_t> positions, TaggingHead& head) {
  if (positions.empty()) return {};
  Tape tape;
  auto rows = gather_rows(tape.constant(encoder_output), positions);
  const Tensor& logits = head.logits(tape, rows).value();
  std::vector<TokenPrediction> out;
  out.reserve(positions.size());
  for (std::size_t r = 0; r < positions.size(); ++r) {
    out.push_back(make_prediction(logits.row(r), head.inventory()));
  }
  return out;
}

std::vector<std::string> resolve_codemixed(std::span<const TokenPrediction> predictions,
                                           Task task) {
  if (task != Task::pos) throw InvalidArgument("codemixed resolution is only defined for pos");
  std::vector<std::string> out;
  out.reserve(predictions.size());
  for (const auto& p : predictions) out.push_back(p.label == "X" ? p.second_label : p.label);
  return out;
}

Var supervised_loss(const Var& logits, std::span<const std::string> gold,
                    const LabelInventory& inventory) {
  const Tensor& lv = logits.value();
  if (lv.rows() != gold.size() || lv.cols() != inventory.size()) {
    throw InvalidArgument("supervised_loss: logits " + shape_string(lv.shape()) + " vs " +
                          std::to_string(gold.size()) + " gold labels over " +
                          std::to_string(inventory.size()) + " classes");
  }
  Tensor onehot({gold.size(), inventory.size()}, 0.0);
  for (std::size_t r = 0; r < gold.size(); ++r) onehot.at(r, inventory.index(gold[r])) = 1.0;
  return cross_entropy(logits.tape().constant(std::move(onehot)), softmax(logits, 1.0));
}

}  // namespace distag
