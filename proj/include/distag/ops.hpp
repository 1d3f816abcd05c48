#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "distag/autodiff.hpp"

namespace distag {

// Floor applied to probabilities inside the log of cross_entropy.
inline constexpr double kLogClamp = 1e-12;

// x[..., k] · w[k, n] -> [..., n]
Var matmul(const Var& x, const Var& w);
// Elementwise sum. b may also be a rank-1 bias whose length equals a.cols().
Var add(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double factor);

Var tanh(const Var& x);
Var sigmoid(const Var& x);
Var gelu(const Var& x);  // exact erf form
Var relu(const Var& x);

// Normalizes over the last axis, then applies gain and bias.
Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps = 1e-12);

// Softmax over the last axis of logits / temperature.
Var softmax(const Var& logits, double temperature = 1.0);

// H(p, q) = -sum_i p_i ln max(q_i, kLogClamp). Rank-2 inputs give the mean
// over rows. Returns a one-element tensor.
Var cross_entropy(const Var& target, const Var& predicted);

Var sum(const Var& x);
Var mean(const Var& x);

// Rows of table selected by ids -> [ids.size(), table.cols()].
Var embedding(const Var& table, std::span<const int> ids);

// Concatenation along the last axis; all inputs must have equal row counts.
Var concat(std::span<const Var> parts);
Var concat(std::initializer_list<Var> parts);
// Stacks the rows of each input into one [sum rows, cols] matrix.
Var concat_rows(std::span<const Var> parts);

// Columns [begin, end) of the last axis.
Var slice_cols(const Var& x, std::size_t begin, std::size_t end);
// Selected rows of x viewed as [rows, cols].
Var gather_rows(const Var& x, std::span<const std::size_t> rows);
Var slice_rows(const Var& x, std::size_t begin, std::size_t end);

// Multi-head scaled dot-product attention over a padded batch. q, k, v are
// [batch * seq_len, hidden]; lengths[b] is the number of unpadded positions
// of sequence b. Keys at padded positions receive zero attention.
Var multi_head_attention(const Var& q, const Var& k, const Var& v,
                         std::size_t heads, std::size_t seq_len,
                         std::span<const std::size_t> lengths);

// Tape-free versions of the same math, for evaluation and tests.
Tensor softmax_with_temperature(const Tensor& logits, double temperature);
double cross_entropy(const Tensor& target, const Tensor& predicted);
// Mean over rows of the Shannon entropy (natural log) of each row.
double entropy(const Tensor& probs);

}  // namespace distag
