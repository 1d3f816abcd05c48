#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "distag/autodiff.hpp"
#include "distag/parameter.hpp"
#include "distag/wordpiece.hpp"

namespace distag {

struct EncoderConfig {
  std::size_t layers = 3;
  std::size_t hidden = 256;
  std::size_t intermediate = 1024;
  std::size_t heads = 4;
  std::size_t vocab = 119547;
  std::size_t max_positions = 128;
  std::size_t type_vocab = 1;
  double initializer_range = 0.02;  // stddev of the normal weight init

  // Throws InvalidArgument unless all sizes are positive (layers may be 0)
  // and hidden is divisible by heads.
  void validate() const;

  // Cased multilingual BERT-base and the 3-layer/256-wide student.
  static EncoderConfig bert_base(std::size_t vocab = 119547);
  static EncoderConfig minibert(std::size_t vocab = 119547);

  nlohmann::json to_json() const;
  static EncoderConfig from_json(const nlohmann::json& j);
  bool operator==(const EncoderConfig&) const = default;
};

// Scalar counts by category. The tagging head and pooler are not part of
// the encoder and are excluded.
struct ParameterBreakdown {
  std::size_t embedding = 0;  // token + position + type tables, embedding layer norm
  std::size_t hidden = 0;     // everything inside the transformer layers
  std::size_t total() const { return embedding + hidden; }
};
ParameterBreakdown count_parameters(const EncoderConfig& config);

// Forward-pass FLOPs (multiply and add counted separately) for one sequence
// of n positions. attention_quadratic is L*4*n^2*H: QK^T scores plus the
// probability-weighted sum of values.
struct FlopBreakdown {
  double attention_quadratic = 0;
  double projections = 0;  // Q, K, V, O: L*8*n*H^2
  double ffn = 0;          // two dense layers: L*4*n*H*I
  double total() const { return attention_quadratic + projections + ffn; }
};
FlopBreakdown count_flops(const EncoderConfig& config, std::size_t seq_len);

// Padded batch of piece ids; row b*seq_len + i holds position i of sequence
// b. lengths[b] counts unpadded positions.
struct PieceBatch {
  std::vector<int> ids;
  std::vector<std::size_t> lengths;
  std::size_t seq_len = 0;

  std::size_t batch() const { return lengths.size(); }
};

// Pads to the longest unpadded length in the batch (or keeps the encodings'
// full padded width when trim is false).
PieceBatch make_batch(std::span<const Encoding> encodings, int pad_id, bool trim = true);

// Post-norm BERT encoder: token + learned position + type embeddings, layer
// norm, then per layer self-attention and a GELU feed-forward block, each
// wrapped in a residual connection and layer norm.
class TransformerModel {
 public:
  TransformerModel() = default;
  TransformerModel(const EncoderConfig& config, std::uint64_t seed);

  const EncoderConfig& config() const { return config_; }
  ParameterSet& parameters() { return params_; }
  const ParameterSet& parameters() const { return params_; }

  // [batch * seq_len, hidden]
  Var forward(Tape& tape, const PieceBatch& batch);

 private:
  EncoderConfig config_;
  ParameterSet params_;
};

}  // namespace distag
