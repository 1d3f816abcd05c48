#include <algorithm>
#include <filesystem>
#include <sstream>

#include <gtest/gtest.h>

#include "distag/bench.hpp"
#include "distag/errors.hpp"
#include "distag/experiments.hpp"

using namespace distag;

namespace {

EncoderConfig tiny(std::size_t layers, std::size_t hidden) {
  EncoderConfig c;
  c.layers = layers;
  c.hidden = hidden;
  c.intermediate = 4 * hidden;
  c.heads = 2;
  c.vocab = 50;
  c.max_positions = 64;
  return c;
}

// Per layer: 4 projections of n*H*H multiply-adds, two FFN matmuls of
// n*H*I, and 2*n*n*H for scores plus weighted values; x2 for mul and add.
double hand_flops(const EncoderConfig& c, double n) {
  const double h = c.hidden, i = c.intermediate;
  return c.layers * 2.0 * (4 * n * h * h + 2 * n * h * i + 2 * n * n * h);
}

}  // namespace

TEST(Bench, MedianOddAndEven) {
  EXPECT_EQ(median({3.0, 1.0, 2.0}), 2.0);
  EXPECT_EQ(median({4.0, 1.0, 3.0, 2.0}), 2.5);
  EXPECT_THROW(median({}), InvalidArgument);
}

TEST(Bench, FlopsMatchHandCount) {
  for (auto n : {1u, 32u, 128u}) {
    EXPECT_DOUBLE_EQ(count_flops(EncoderConfig::minibert(), n).total(), hand_flops(EncoderConfig::minibert(), n));
    EXPECT_DOUBLE_EQ(count_flops(EncoderConfig::bert_base(), n).total(), hand_flops(EncoderConfig::bert_base(), n));
  }
  // MiniBERT vs teacher at 32 words: well over 4x fewer FLOPs
  const double ratio = hand_flops(EncoderConfig::bert_base(), 32) / hand_flops(EncoderConfig::minibert(), 32);
  EXPECT_GT(ratio, 4.0);
  EXPECT_DOUBLE_EQ(count_flops(EncoderConfig::bert_base(), 32).total() /
                       count_flops(EncoderConfig::minibert(), 32).total(),
                   ratio);
}

TEST(Bench, ModelAgainstItself) {
  TransformerModel m(tiny(1, 16), 1);
  BenchOptions options;
  options.seq_lens = {8, 16};
  options.warmup = 1;
  options.runs = 5;
  BenchTarget self{"self", &m};
  auto reports = bench(std::span<const BenchTarget>(&self, 1), BenchTarget{"ref", &m}, options);
  ASSERT_EQ(reports.size(), 4u);
  for (const auto& r : reports) {
    EXPECT_EQ(r.flop_speedup, 1.0);
    EXPECT_GT(r.median_seconds, 0.0);
    EXPECT_EQ(r.runs, 5u);
  }
  EXPECT_EQ(reports[0].speedup, 1.0);
  EXPECT_EQ(reports[0].model, "ref");
  EXPECT_EQ(reports[1].model, "self");
  EXPECT_GT(reports[1].speedup, 0.2);
  EXPECT_LT(reports[1].speedup, 5.0);
}

TEST(Bench, SmallerModelIsFasterAndTablesRender) {
  TransformerModel big(tiny(4, 64), 1), small(tiny(1, 8), 1);
  BenchOptions options;
  options.seq_lens = {32};
  options.warmup = 2;
  options.runs = 9;
  BenchTarget s{"small", &small};
  auto reports = bench(std::span<const BenchTarget>(&s, 1), BenchTarget{"big", &big}, options);
  ASSERT_EQ(reports.size(), 2u);
  EXPECT_GT(reports[1].speedup, 2.0);
  EXPECT_DOUBLE_EQ(reports[1].flop_speedup, hand_flops(tiny(4, 64), 32) / hand_flops(tiny(1, 8), 32));
  EXPECT_DOUBLE_EQ(reports[1].speedup, reports[0].median_seconds / reports[1].median_seconds);

  std::ostringstream table, csv;
  write_bench_table(table, reports);
  write_bench_csv(csv, reports);
  EXPECT_NE(table.str().find("32 words"), std::string::npos);
  EXPECT_NE(table.str().find("small"), std::string::npos);
  EXPECT_EQ(csv.str().rfind("model,seq_len,runs,median_seconds,flops,speedup,flop_speedup\n", 0), 0u);
  const std::string text = csv.str();
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 3);
}

TEST(Bench, RejectsBadOptions) {
  TransformerModel m(tiny(1, 16), 1);
  BenchOptions options;
  options.seq_lens = {128};  // beyond max_positions
  EXPECT_THROW(bench({}, BenchTarget{"m", &m}, options), InvalidArgument);
  options.seq_lens = {};
  EXPECT_THROW(bench({}, BenchTarget{"m", &m}, options), InvalidArgument);
  EXPECT_THROW(bench({}, BenchTarget{"none", nullptr}), InvalidArgument);
}

TEST(Experiments, AblationReportsThreeScores) {
  AblationSpec spec = AblationSpec::frozen(3);
  spec.data.languages = {{"syn_a", 10, 5, 10}, {"syn_b", 10, 5, 10}};
  spec.data.unlabeled_per_language = 10;
  spec.teacher.layers = 1;
  spec.teacher.hidden = 8;
  spec.teacher.intermediate = 16;
  spec.teacher.heads = 2;
  spec.teacher_training.epochs = 1;
  spec.student_training.epochs = 1;
  spec.distill.epochs = 1;
  auto dir = std::filesystem::temp_directory_path() / "distag_ablation_small";
  auto r = ablation_distill(spec, dir);
  for (double f : {r.teacher_f1, r.distilled_f1, r.scratch_f1}) {
    EXPECT_GE(f, 0.0);
    EXPECT_LE(f, 1.0);
  }
  EXPECT_EQ(r.labeled_sentences, 20u);
  EXPECT_EQ(r.unlabeled_sentences, 20u);
  EXPECT_EQ(r.spec["student"]["hidden"], 4);
  std::ostringstream csv;
  write_ablation_csv(csv, std::span<const AblationReport>(&r, 1));
  EXPECT_EQ(csv.str().rfind("seed,teacher_f1,distilled_f1,scratch_f1", 0), 0u);
  std::filesystem::remove_all(dir);
}

TEST(Experiments, TransferReportsBothScores) {
  TransferSpec spec = TransferSpec::frozen(2);
  spec.data.languages = {{"syn_hi", 20, 5, 10}, {"syn_lo", 5, 5, 10}};
  spec.training.epochs = 1;
  auto r = lowresource_transfer(spec);
  EXPECT_EQ(r.language, "syn_lo");
  EXPECT_EQ(r.per_language_train, 5u);
  EXPECT_EQ(r.multilingual_train, 25u);
  EXPECT_GE(r.multilingual_f1, 0.0);
  EXPECT_LE(r.per_language_f1, 1.0);

  spec.data.languages.back().train = 51;
  EXPECT_THROW(lowresource_transfer(spec), InvalidArgument);
}
