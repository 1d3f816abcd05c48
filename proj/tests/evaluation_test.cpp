#include <filesystem>
#include <map>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "distag/errors.hpp"
#include "distag/evaluation.hpp"
#include "distag/synthetic.hpp"

using namespace distag;

namespace {

Sentence tagged(std::vector<std::string> upos) {
  Sentence s;
  for (std::size_t i = 0; i < upos.size(); ++i) s.tokens.push_back({"w" + std::to_string(i), upos[i], "_"});
  return s;
}

// Tags every token by the generating rules; a stand-in for a perfect model.
class OracleTagger : public Tagger {
 public:
  OracleTagger(const SyntheticCorpus& corpus, std::size_t language)
      : corpus_(corpus), language_(language), inventory_(LabelInventory::build({}, Task::pos)) {}
  std::string_view kind() const override { return "oracle"; }
  const LabelInventory& inventory() const override { return inventory_; }
  Var token_logits(Tape& tape, std::span<const Sentence> batch) override {
    std::vector<double> values;
    for (const auto& s : batch) {
      std::vector<std::string> forms;
      for (const auto& t : s.tokens) forms.push_back(t.form);
      for (const auto& t : corpus_.oracle_tag(language_, forms).tokens) {
        for (const auto& label : inventory_.labels()) values.push_back(label == t.upos ? 1.0 : 0.0);
      }
    }
    return tape.constant(Tensor::matrix(values.size() / inventory_.size(), inventory_.size(), values));
  }
  std::vector<Parameter*> trainable() override { return {}; }
  std::vector<Parameter*> parameters() override { return {}; }
  nlohmann::json meta() const override { return {}; }

 private:
  const SyntheticCorpus& corpus_;
  std::size_t language_;
  LabelInventory inventory_;
};

// Tagger with fixed logits per form, used to exercise the codemixed path.
class TableTagger : public Tagger {
 public:
  TableTagger(LabelInventory inv, std::map<std::string, std::vector<double>> table)
      : inventory_(std::move(inv)), table_(std::move(table)) {}
  std::string_view kind() const override { return "table"; }
  const LabelInventory& inventory() const override { return inventory_; }
  Var token_logits(Tape& tape, std::span<const Sentence> batch) override {
    std::vector<double> values;
    for (const auto& s : batch)
      for (const auto& t : s.tokens) {
        const auto& row = table_.at(t.form);
        values.insert(values.end(), row.begin(), row.end());
      }
    return tape.constant(Tensor::matrix(values.size() / inventory_.size(), inventory_.size(), values));
  }
  std::vector<Parameter*> trainable() override { return {}; }
  std::vector<Parameter*> parameters() override { return {}; }
  nlohmann::json meta() const override { return {}; }

 private:
  LabelInventory inventory_;
  std::map<std::string, std::vector<double>> table_;
};

}  // namespace

TEST(TokenF1, CountingExamples) {
  std::vector<Sentence> gold = {tagged({"NOUN", "VERB", "DET"}), tagged({"ADJ", "NOUN"})};
  std::vector<Sentence> four = {tagged({"NOUN", "VERB", "DET"}), tagged({"ADJ", "VERB"})};
  EXPECT_DOUBLE_EQ(token_f1(gold, four, Task::pos), 0.8);
  EXPECT_DOUBLE_EQ(token_f1(gold, gold, Task::pos), 1.0);
  std::vector<Sentence> none = {tagged({"X", "X", "X"}), tagged({"X", "X"})};
  EXPECT_DOUBLE_EQ(token_f1(gold, none, Task::pos), 0.0);
}

TEST(TokenF1, MismatchedSegmentationThrows) {
  std::vector<Sentence> gold = {tagged({"NOUN", "VERB"})};
  std::vector<Sentence> pred = {tagged({"NOUN"})};
  EXPECT_THROW(token_f1(gold, pred, Task::pos), InvalidArgument);
  EXPECT_THROW(token_f1(gold, {}, Task::pos), InvalidArgument);
}

TEST(TokenF1, MatchesBruteForceCounting) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> len(1, 20), label(0, 3);
  const std::vector<std::string> labels = {"NOUN", "VERB", "ADJ", "X"};
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<std::string> g(static_cast<std::size_t>(len(rng))), p(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
      g[i] = labels[static_cast<std::size_t>(label(rng))];
      p[i] = labels[static_cast<std::size_t>(label(rng))];
    }
    std::size_t correct = 0;
    for (std::size_t i = 0; i < g.size(); ++i) correct += g[i] == p[i];
    std::vector<Sentence> gs = {tagged(g)}, ps = {tagged(p)};
    EXPECT_DOUBLE_EQ(token_f1(gs, ps, Task::pos),
                     static_cast<double>(correct) / static_cast<double>(g.size()));
  }
}

TEST(TokenF1, MorphComparesFeats) {
  Sentence g = tagged({"NOUN", "NOUN"}), p = tagged({"NOUN", "VERB"});
  g.tokens[0].feats = "Number=Sing";
  p.tokens[0].feats = "Number=Plur";
  std::vector<Sentence> gs = {g}, ps = {p};
  EXPECT_DOUBLE_EQ(token_f1(gs, ps, Task::morph), 0.5);
}

TEST(MacroF1, UnweightedMean) {
  EXPECT_EQ(macro_f1({{"a", 1.0}, {"b", 0.5}}), 0.75);
  EXPECT_EQ(macro_f1({{"a", 0.3}}), 0.3);
  EXPECT_THROW(macro_f1({}), InvalidArgument);
}

TEST(Evaluate, CodemixedFlagUsesSecondBest) {
  LabelInventory inv(Task::pos, {"NOUN", "VERB", "X"});
  TableTagger tagger(inv, {{"foo", {2.0, 0.0, 3.0}}, {"bar", {0.0, 4.0, 1.0}}});
  Treebank tb;
  tb.id = "mix";
  Sentence s;
  s.tokens = {{"foo", "NOUN", "_"}, {"bar", "VERB", "_"}};
  tb.sentences = {s};
  std::vector<Treebank> tbs = {tb};
  EXPECT_DOUBLE_EQ(evaluate(tagger, tbs, Task::pos, false).macro_f1, 0.5);
  EXPECT_DOUBLE_EQ(evaluate(tagger, tbs, Task::pos, true).macro_f1, 1.0);
  EXPECT_THROW(evaluate(tagger, tbs, Task::morph), InvalidArgument);
}

TEST(Evaluate, OrderInvariantAndUnknownGoldRejected) {
  SyntheticTaskSpec spec;
  auto corpus = gen_synthetic(spec);
  OracleTagger oracle(corpus, 0);
  std::vector<Treebank> one = {corpus.test[0]};
  auto report = evaluate(oracle, one, Task::pos);
  EXPECT_EQ(report.macro_f1, 1.0);
  // language 1 tagged with language 0 rules: mostly wrong, but order must not matter
  std::vector<Treebank> ab = {corpus.test[0], corpus.test[1]}, ba = {corpus.test[1], corpus.test[0]};
  EXPECT_EQ(evaluate(oracle, ab, Task::pos).per_treebank_f1, evaluate(oracle, ba, Task::pos).per_treebank_f1);
  EXPECT_EQ(evaluate(oracle, ab, Task::pos).macro_f1, evaluate(oracle, ba, Task::pos).macro_f1);
  one[0].sentences[0].tokens[0].upos = "NOUNISH";
  EXPECT_THROW(evaluate(oracle, one, Task::pos), DataError);

  std::ostringstream table, csv;
  report.write_table(table);
  report.write_csv(csv);
  EXPECT_NE(table.str().find("macro-avg"), std::string::npos);
  EXPECT_EQ(csv.str().substr(0, csv.str().find('\n')), "treebank,task,codemixed,tokens,f1");
}

TEST(Synthetic, TwoLanguagesWriteParseableFiles) {
  SyntheticTaskSpec spec;
  spec.languages = {{"syn_a", 100, 10, 10}, {"syn_b", 100, 10, 10}};
  spec.unlabeled_per_language = 5;
  auto corpus = gen_synthetic(spec);
  auto dir = std::filesystem::temp_directory_path() / "distag_synthetic";
  std::filesystem::remove_all(dir);
  write_synthetic(corpus, dir);
  auto train = load_treebanks(dir / "train.manifest");
  ASSERT_EQ(train.size(), 2u);
  EXPECT_EQ(train[0].sentences.size(), 100u);
  EXPECT_EQ(train[1].sentences.size(), 100u);
  EXPECT_EQ(WordpieceVocab::load(dir / "vocab.txt").size(), corpus.pieces.size());
  EXPECT_EQ(corpus.unlabeled.size(), 10u);
  // every form is covered by the vocabulary without [UNK]
  auto vocab = corpus.vocab();
  for (const auto& tb : train)
    for (const auto& s : tb.sentences)
      for (const auto& t : s.tokens) {
        auto pieces = tokenize_word(t.form, vocab);
        ASSERT_EQ(pieces.size(), 2u) << t.form;
        EXPECT_NE(pieces[0], "[UNK]");
      }
  std::filesystem::remove_all(dir);
}

TEST(Synthetic, SameSeedSameCorpus) {
  SyntheticTaskSpec spec;
  spec.unlabeled_per_language = 20;
  auto a = gen_synthetic(spec), b = gen_synthetic(spec);
  std::ostringstream sa, sb;
  write_conllu(sa, a.train[0].sentences);
  write_conllu(sb, b.train[0].sentences);
  EXPECT_EQ(sa.str(), sb.str());
  EXPECT_EQ(a.unlabeled, b.unlabeled);
  EXPECT_EQ(a.pieces, b.pieces);
  spec.seed = 2;
  std::ostringstream sc;
  write_conllu(sc, gen_synthetic(spec).train[0].sentences);
  EXPECT_NE(sa.str(), sc.str());
}

TEST(Synthetic, OracleScoresPerfectlyAndVocabIsDisjoint) {
  SyntheticTaskSpec spec;
  spec.shared_fraction = 0.0;
  auto corpus = gen_synthetic(spec);
  for (std::size_t l = 0; l < corpus.test.size(); ++l) {
    OracleTagger oracle(corpus, l);
    std::vector<Treebank> tb = {corpus.test[l]};
    EXPECT_EQ(evaluate(oracle, tb, Task::pos).macro_f1, 1.0);
  }
  for (const auto& stem : corpus.languages[0].stems) {
    EXPECT_EQ(std::count(corpus.languages[1].stems.begin(), corpus.languages[1].stems.end(), stem), 0);
  }
  spec.shared_fraction = 0.5;
  auto shared = gen_synthetic(spec);
  std::size_t common = 0;
  for (const auto& stem : shared.languages[0].stems) {
    common += std::count(shared.languages[1].stems.begin(), shared.languages[1].stems.end(), stem);
  }
  EXPECT_EQ(common, 30u);
}

TEST(Synthetic, ContextRuleDependsOnPreviousTag) {
  SyntheticTaskSpec spec;
  auto corpus = gen_synthetic(spec);
  const auto& lang = corpus.languages[0];
  std::string det, ctx;
  for (const auto& [suffix, rule] : lang.rules) {
    if (rule.upos == "DET" && !rule.contextual) det = suffix;
    if (rule.contextual) ctx = suffix;
  }
  ASSERT_FALSE(det.empty());
  ASSERT_FALSE(ctx.empty());
  const auto& stem = lang.stems[0];
  auto s = corpus.oracle_tag(0, {stem + det, stem + ctx, stem + ctx});
  EXPECT_EQ(s.tokens[1].upos, "NOUN");
  EXPECT_EQ(s.tokens[2].upos, "VERB");
  EXPECT_THROW(gen_synthetic(SyntheticTaskSpec{.languages = {}}), InvalidArgument);
}
