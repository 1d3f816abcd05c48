#include <cmath>
#include <filesystem>
#include <map>
#include <limits>
#include <sstream>

#include <gtest/gtest.h>

#include "distag/errors.hpp"
#include "distag/evaluation.hpp"
#include "distag/synthetic.hpp"
#include "distag/training.hpp"

using namespace distag;
namespace fs = std::filesystem;

namespace {

EncoderConfig small_encoder(std::size_t vocab) {
  EncoderConfig c;
  c.layers = 1;
  c.hidden = 16;
  c.intermediate = 32;
  c.heads = 2;
  c.vocab = vocab;
  c.max_positions = 32;
  c.initializer_range = 0.1;
  return c;
}

SyntheticCorpus toy_corpus(std::size_t train = 20) {
  SyntheticTaskSpec spec;
  spec.languages = {{"syn_a", train, 10, 10}, {"syn_b", train, 10, 10}};
  return gen_synthetic(spec);
}

std::unique_ptr<TransformerTagger> toy_tagger(const SyntheticCorpus& corpus, std::uint64_t seed = 3) {
  return std::make_unique<TransformerTagger>(small_encoder(corpus.pieces.size()), corpus.vocab(),
                                             LabelInventory::build({}, Task::pos), seed, 32);
}

std::vector<Tensor> values_of(Tagger& t) {
  std::vector<Tensor> out;
  for (auto* p : t.parameters()) out.push_back(p->value);
  return out;
}

fs::path fresh(const std::string& name) {
  auto dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST(Adam, ZeroGradientLeavesParametersBitIdentical) {
  Parameter p{"w", Tensor::vector({0.3, -1.7, 2.0}), Tensor({3}, 0.0), false};
  const Tensor before = p.value;
  Adam adam({&p}, 0.1);
  for (int i = 0; i < 5; ++i) adam.step();
  EXPECT_EQ(p.value, before);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  Parameter p{"w", Tensor::vector({1.0, 1.0}), Tensor::vector({0.5, -2.0}), false};
  Adam adam({&p}, 0.01);
  adam.step();
  // bias-corrected first step: lr * g / (|g| + eps)
  EXPECT_NEAR(p.value[0], 1.0 - 0.01 * 0.5 / (0.5 + 1e-8), 1e-15);
  EXPECT_NEAR(p.value[1], 1.0 + 0.01 * 2.0 / (2.0 + 1e-8), 1e-15);
  Parameter q{"w", Tensor::vector({1.0}), Tensor::vector({0.0}), false};
  Adam decayed({&q}, 0.1, 0.5);
  decayed.step();
  EXPECT_NEAR(q.value[0], 1.0 - 0.1 * 0.5, 1e-15);
}

TEST(ClipGradNorm, RescalesToMaxNorm) {
  Parameter a{"a", Tensor::vector({0.0}), Tensor::vector({3.0}), false};
  Parameter b{"b", Tensor::vector({0.0}), Tensor::vector({4.0}), false};
  std::vector<Parameter*> ps = {&a, &b};
  EXPECT_DOUBLE_EQ(clip_grad_norm(ps, 1.0), 5.0);
  EXPECT_NEAR(a.grad[0], 0.6, 1e-15);
  EXPECT_NEAR(b.grad[0], 0.8, 1e-15);
  EXPECT_NEAR(clip_grad_norm(ps, 2.0), 1.0, 1e-15);
  EXPECT_NEAR(a.grad[0], 0.6, 1e-15);
}

TEST(EpochOrder, DeterministicPermutationPerEpoch) {
  auto a = epoch_order(50, 7, 1), b = epoch_order(50, 7, 1), c = epoch_order(50, 7, 2);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
  std::sort(c.begin(), c.end());
  for (std::size_t i = 0; i < c.size(); ++i) EXPECT_EQ(c[i], i);
}

TEST(Finetune, MemorizesOneSentence) {
  auto corpus = toy_corpus();
  auto tagger = toy_tagger(corpus);
  std::vector<Sentence> one = {corpus.train[0].sentences[0]};
  TrainConfig config;
  config.learning_rate = 1e-2;
  config.batch_size = 1;
  config.epochs = 50;
  auto log = finetune(*tagger, one, config);
  ASSERT_EQ(log.steps.size(), 50u);
  EXPECT_LT(log.steps.back().loss, 0.05);
  EXPECT_EQ(token_f1(one, tag_sentences(*tagger, one), Task::pos), 1.0);
}

TEST(Finetune, SameSeedSameLossCurve) {
  auto corpus = toy_corpus();
  auto train = mix_treebanks(corpus.train, 1);
  TrainConfig config;
  config.learning_rate = 3e-3;
  config.epochs = 2;
  auto a = toy_tagger(corpus), b = toy_tagger(corpus);
  auto la = finetune(*a, train, config), lb = finetune(*b, train, config);
  ASSERT_EQ(la.steps.size(), lb.steps.size());
  for (std::size_t i = 0; i < la.steps.size(); ++i) EXPECT_EQ(la.steps[i].loss, lb.steps[i].loss);
  EXPECT_EQ(values_of(*a), values_of(*b));
  std::ostringstream csv;
  la.write_csv(csv);
  EXPECT_EQ(csv.str().substr(0, 16), "epoch,step,loss\n");
}

TEST(Finetune, ResumedRunMatchesUninterruptedRun) {
  auto corpus = toy_corpus();
  auto train = mix_treebanks(corpus.train, 1);
  TrainConfig config;
  config.learning_rate = 3e-3;
  config.epochs = 3;
  config.batch_size = 8;
  FinetuneOptions options;
  options.dev = corpus.dev;
  options.checkpoint_dir = fresh("distag_resume");
  auto full = toy_tagger(corpus);
  auto log = finetune(*full, train, config, options);
  ASSERT_TRUE(fs::exists(options.checkpoint_dir / "epoch-3"));

  FinetuneOptions resume_options;
  resume_options.dev = corpus.dev;
  resume_options.checkpoint_dir = fresh("distag_resume_b");
  fs::create_directories(resume_options.checkpoint_dir);
  fs::copy(options.checkpoint_dir / "epoch-1", resume_options.checkpoint_dir / "epoch-1",
           fs::copy_options::recursive);
  auto resumed = resume_finetune(resume_options.checkpoint_dir / "epoch-1", train, resume_options);
  EXPECT_EQ(values_of(*resumed.tagger), values_of(*full));
  ASSERT_EQ(resumed.log.steps.size(), log.steps.size());
  for (std::size_t i = 0; i < log.steps.size(); ++i) EXPECT_EQ(resumed.log.steps[i].loss, log.steps[i].loss);
  EXPECT_EQ(resumed.log.best_epoch, log.best_epoch);
  fs::remove_all(options.checkpoint_dir);
  fs::remove_all(resume_options.checkpoint_dir);
}

TEST(Finetune, KeepsBestDevEpoch) {
  auto corpus = toy_corpus();
  auto train = mix_treebanks(corpus.train, 1);
  TrainConfig config;
  config.learning_rate = 3e-3;
  config.epochs = 4;
  FinetuneOptions options;
  options.dev = corpus.dev;
  auto tagger = toy_tagger(corpus);
  auto log = finetune(*tagger, train, config, options);
  ASSERT_GE(log.best_epoch, 1u);
  double best = 0.0;
  for (const auto& e : log.epochs) best = std::max(best, *e.dev_macro_f1);
  EXPECT_EQ(log.best_dev_f1, best);
  EXPECT_EQ(evaluate(*tagger, corpus.dev, Task::pos).macro_f1, best);
}

TEST(Finetune, NonFiniteLossNamesTheBatch) {
  auto corpus = toy_corpus();
  auto tagger = toy_tagger(corpus);
  tagger->head().parameters().at("head.bias").value[0] = std::numeric_limits<double>::quiet_NaN();
  std::vector<Sentence> one = {corpus.train[0].sentences[0]};
  TrainConfig config;
  config.epochs = 1;
  try {
    finetune(*tagger, one, config);
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("syn_a-train-1"), std::string::npos) << e.what();
  }
  config.task = Task::morph;
  EXPECT_THROW(finetune(*tagger, one, config), InvalidArgument);
}

TEST(Finetune, ToySyntheticTaskIsLearned) {
  auto corpus = toy_corpus(150);
  auto train = mix_treebanks(corpus.train, 1);
  EncoderConfig c = small_encoder(corpus.pieces.size());
  c.hidden = 32;
  c.intermediate = 128;
  TransformerTagger tagger(c, corpus.vocab(), LabelInventory::build({}, Task::pos), 1, 32);
  TrainConfig config;
  config.learning_rate = 3e-3;
  config.epochs = 10;
  FinetuneOptions options;
  options.dev = corpus.dev;
  auto log = finetune(tagger, train, config, options);
  EXPECT_LT(log.epochs[2].mean_loss, log.epochs[0].mean_loss);
  EXPECT_GT(log.best_dev_f1, 0.95);
}

namespace {

MetaLstmTagger toy_metalstm(const SyntheticCorpus& corpus) {
  MetaLstmConfig c;
  c.char_emb_dim = 8;
  c.char_hidden = 8;
  c.word_hidden = 8;
  c.joint_hidden = 8;
  std::vector<Sentence> all;
  for (const auto& tb : corpus.train) all.insert(all.end(), tb.sentences.begin(), tb.sentences.end());
  MetaLstmModel model(c, MetaLstmModel::collect_chars(all), synthetic_embeddings(corpus, 8, 1), 2);
  return MetaLstmTagger(std::move(model), LabelInventory::build({}, Task::pos), 2);
}

}  // namespace

TEST(MetaLstmStaged, RunsStagesInOrderAndDropsHeads) {
  auto corpus = toy_corpus(5);
  auto train = mix_treebanks(corpus.train, 1);
  auto tagger = toy_metalstm(corpus);
  std::map<std::string, Tensor> before;
  for (auto* p : tagger.parameters()) before.emplace(p->name, p->value);
  TrainConfig config;
  config.learning_rate = 1e-2;
  config.epochs = 1;
  std::ostringstream log;
  StagedOptions options;
  options.finetune.log = &log;
  auto staged = train_metalstm_staged(tagger, train, config, options);
  EXPECT_EQ(staged.stages, (std::vector<std::string>{"char", "word", "joint"}));
  EXPECT_LT(log.str().find("stage char begin"), log.str().find("stage word begin"));
  EXPECT_LT(log.str().find("stage word begin"), log.str().find("stage joint begin"));
  EXPECT_FALSE(tagger.has_stage_heads());
  for (auto* p : tagger.parameters()) EXPECT_FALSE(p->name.starts_with("head.char")) << p->name;
  EXPECT_EQ(tagger.model().parameters().at("word.embeddings").value, before.at("word.embeddings"));
}

TEST(MetaLstmStaged, FinalStageUpdatesCharAndWordNetworks) {
  auto corpus = toy_corpus(5);
  auto train = mix_treebanks(corpus.train, 1);
  auto tagger = toy_metalstm(corpus);
  TrainConfig config;
  config.learning_rate = 1e-2;
  config.epochs = 2;
  StagedOptions options;
  options.skip_pretraining = true;
  std::map<std::string, Tensor> before;
  for (auto* p : tagger.parameters()) before.emplace(p->name, p->value);
  auto staged = train_metalstm_staged(tagger, train, config, options);
  EXPECT_EQ(staged.stages, (std::vector<std::string>{"joint"}));
  for (const std::string name : {"char.lstm.fwd.input_weight", "word.lstm.bwd.recurrent_weight",
                                 "char.embeddings", "joint.lstm.fwd.bias"}) {
    EXPECT_FALSE(tagger.model().parameters().at(name).value == before.at(name)) << name;
  }
}
