#pragma once

#include <cstddef>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "distag/transformer.hpp"

namespace distag {

struct BenchTarget {
  std::string id;
  TransformerModel* model = nullptr;
};

struct BenchOptions {
  std::vector<std::size_t> seq_lens = {32, 128};
  std::size_t warmup = 5;
  std::size_t runs = 30;
  void validate() const;
};

// One model at one sequence length, batch size 1. Speedups are relative to
// the reference model at the same length.
struct BenchReport {
  std::string model;
  std::size_t seq_len = 0;
  std::size_t runs = 0;
  double median_seconds = 0.0;
  double flops = 0.0;
  double speedup = 0.0;       // reference_time / model_time
  double flop_speedup = 0.0;  // reference_flops / model_flops
};

// Times the encoder forward pass. The reference is benched too and reported
// first, so its rows read speedup ~1.
std::vector<BenchReport> bench(std::span<const BenchTarget> models, const BenchTarget& reference,
                               const BenchOptions& options = {});

// One row per model, one column pair per sequence length.
void write_bench_table(std::ostream& out, std::span<const BenchReport> reports);
void write_bench_csv(std::ostream& out, std::span<const BenchReport> reports);

double median(std::vector<double> values);

}  // namespace distag
