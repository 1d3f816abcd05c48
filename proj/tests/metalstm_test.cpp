#include <cmath>
#include <filesystem>
#include <map>
#include <random>

#include <gtest/gtest.h>

#include "distag/errors.hpp"
#include "distag/metalstm.hpp"
#include "distag/ops.hpp"
#include "gradcheck.hpp"

using namespace distag;

namespace {

using Rows = std::vector<std::vector<double>>;

double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Scalar LSTM recurrence; returns the state after each input.
Rows lstm_trace(const Tensor& w_in, const Tensor& w_rec, const Tensor& b, const Rows& xs,
                bool reverse) {
  const std::size_t h = w_rec.dim(0);
  std::vector<double> state(h, 0.0), cell(h, 0.0);
  Rows out(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const std::size_t t = reverse ? xs.size() - 1 - i : i;
    std::vector<double> g(4 * h);
    for (std::size_t j = 0; j < 4 * h; ++j) {
      g[j] = b[j];
      for (std::size_t k = 0; k < xs[t].size(); ++k) g[j] += xs[t][k] * w_in.at(k, j);
      for (std::size_t k = 0; k < h; ++k) g[j] += state[k] * w_rec.at(k, j);
    }
    for (std::size_t k = 0; k < h; ++k) {
      cell[k] = sig(g[h + k]) * cell[k] + sig(g[k]) * std::tanh(g[2 * h + k]);
      state[k] = sig(g[3 * h + k]) * std::tanh(cell[k]);
    }
    out[t] = state;
  }
  return out;
}

Rows bilstm_trace(const ParameterSet& p, const std::string& prefix, const Rows& xs) {
  auto dir = [&](const std::string& d, bool rev) {
    return lstm_trace(p.at(prefix + d + ".input_weight").value,
                      p.at(prefix + d + ".recurrent_weight").value, p.at(prefix + d + ".bias").value,
                      xs, rev);
  };
  auto f = dir(".fwd", false), r = dir(".bwd", true);
  Rows out(xs.size());
  for (std::size_t t = 0; t < xs.size(); ++t) {
    out[t] = f[t];
    out[t].insert(out[t].end(), r[t].begin(), r[t].end());
  }
  return out;
}

Rows rows_of(const Tensor& t) {
  Rows out(t.rows());
  for (std::size_t r = 0; r < t.rows(); ++r) out[r].assign(t.row(r).begin(), t.row(r).end());
  return out;
}

void expect_rows_near(const Tensor& actual, const Rows& expected, double tol) {
  ASSERT_EQ(actual.rows(), expected.size());
  for (std::size_t r = 0; r < expected.size(); ++r) {
    ASSERT_EQ(actual.cols(), expected[r].size());
    for (std::size_t c = 0; c < expected[r].size(); ++c) {
      EXPECT_NEAR(actual.at(r, c), expected[r][c], tol) << r << "," << c;
    }
  }
}

EmbeddingTable small_table() {
  EmbeddingTable table(3);
  table.add("the", std::vector<double>{0.1, -0.2, 0.3});
  table.add("cat", std::vector<double>{0.5, 0.4, -0.1});
  table.add("sat", std::vector<double>{-0.3, 0.2, 0.9});
  table.finalize();
  return table;
}

MetaLstmConfig small_config() {
  MetaLstmConfig c;
  c.char_emb_dim = 3;
  c.char_hidden = 2;
  c.word_hidden = 3;
  c.joint_hidden = 2;
  return c;
}

Sentence sentence(std::vector<std::string> forms) {
  Sentence s;
  for (auto& f : forms) s.tokens.push_back({f, "NOUN", "_"});
  return s;
}

MetaLstmModel small_model(std::uint64_t seed = 7) {
  return MetaLstmModel(small_config(), {"a", "b", "c", "t"}, small_table(), seed);
}

}  // namespace

TEST(Lstm, HandSetTwoUnitTraceOnAb) {
  ParameterSet params;
  std::mt19937_64 rng(0);
  Lstm lstm(params, "l", 2, 2, rng);
  params.at("l.input_weight").value =
      Tensor::matrix(2, 8, {0.5, -0.3, 0.2, 0.1, -0.4, 0.7, 0.3, -0.2,
                            0.1, 0.2, -0.6, 0.4, 0.3, -0.1, 0.5, 0.2});
  params.at("l.recurrent_weight").value =
      Tensor::matrix(2, 8, {0.2, 0.1, -0.1, 0.3, 0.2, -0.2, 0.1, 0.4,
                            -0.3, 0.2, 0.1, 0.1, -0.2, 0.3, 0.2, -0.1});
  // "a" = [1,0], "b" = [0,1]
  Rows xs = {{1, 0}, {0, 1}};
  // unit 0 after "a": gate columns are i=0, f=2, g=4, o=6 and the cell starts at zero
  const double i0 = sig(0.5), g0 = std::tanh(-0.4), o0 = sig(0.3);
  const double c0 = i0 * g0;
  const double h0 = o0 * std::tanh(c0);
  Tape tape;
  Var out = lstm.run(tape, params, tape.constant(Tensor::matrix(2, 2, {1, 0, 0, 1})));
  EXPECT_NEAR(out.value().at(0, 0), h0, 1e-12);
  expect_rows_near(out.value(),
                   lstm_trace(params.at("l.input_weight").value,
                              params.at("l.recurrent_weight").value, params.at("l.bias").value, xs,
                              false),
                   1e-12);
}

TEST(CharEncode, SingleCharIsOneStepEachWay) {
  auto m = small_model();
  Tape tape;
  auto out = m.char_encode(tape, sentence({"a"})).value();
  Rows xs = {rows_of(m.parameters().at("char.embeddings").value)[static_cast<std::size_t>(m.char_id("a"))]};
  auto expected = bilstm_trace(m.parameters(), "char.lstm", xs);
  expect_rows_near(out, expected, 1e-12);
}

TEST(CharEncode, ReverseTokenSwapsHalvesWithTiedWeights) {
  auto m = small_model();
  for (std::string part : {".input_weight", ".recurrent_weight", ".bias"}) {
    m.parameters().at("char.lstm.bwd" + part).value = m.parameters().at("char.lstm.fwd" + part).value;
  }
  Tape tape;
  auto ab = m.char_encode(tape, sentence({"abc"})).value();
  auto ba = m.char_encode(tape, sentence({"cba"})).value();
  const std::size_t h = 2;
  for (std::size_t k = 0; k < h; ++k) {
    EXPECT_EQ(ab.at(0, k), ba.at(0, h + k));
    EXPECT_EQ(ab.at(0, h + k), ba.at(0, k));
  }
}

TEST(CharEncode, UnknownCharsShareRowZero) {
  auto m = small_model();
  EXPECT_EQ(m.char_id("z"), 0);
  EXPECT_EQ(m.char_id("q"), 0);
  EXPECT_NE(m.char_id("a"), 0);
  Tape tape;
  EXPECT_EQ(m.char_encode(tape, sentence({"zq"})).value(), m.char_encode(tape, sentence({"qz"})).value());
}

TEST(WordEncode, AllOovSentenceUsesUnkEverywhere) {
  auto m = small_model();
  EXPECT_EQ(m.word_id("dog"), m.word_id("ran"));
  EXPECT_EQ(m.word_id("dog"), static_cast<int>(m.words().size()) - 1);
  Tape tape;
  EXPECT_EQ(m.word_encode(tape, sentence({"dog", "ran", "far"})).value(),
            m.word_encode(tape, sentence({"x", "y", "z"})).value());
}

TEST(WordEncode, ThreeTokensMatchTrace) {
  auto m = small_model();
  auto s = sentence({"the", "cat", "dog"});
  Rows xs;
  auto table = rows_of(m.parameters().at("word.embeddings").value);
  for (const auto& t : s.tokens) xs.push_back(table[static_cast<std::size_t>(m.word_id(t.form))]);
  EXPECT_EQ(xs[0], (std::vector<double>{0.1, -0.2, 0.3}));
  Tape tape;
  expect_rows_near(m.word_encode(tape, s).value(), bilstm_trace(m.parameters(), "word.lstm", xs), 1e-12);
  expect_rows_near(m.word_encode(tape, sentence({"sat"})).value(),
                   bilstm_trace(m.parameters(), "word.lstm", {table[2]}), 1e-12);
}

TEST(JointEncode, TwoTokensMatchTrace) {
  auto m = small_model();
  auto s = sentence({"cat", "sat"});
  Tape tape;
  Var c = m.char_encode(tape, s), w = m.word_encode(tape, s);
  Rows xs = rows_of(c.value());
  auto wr = rows_of(w.value());
  for (std::size_t t = 0; t < xs.size(); ++t) xs[t].insert(xs[t].end(), wr[t].begin(), wr[t].end());
  expect_rows_near(m.joint_encode(tape, c, w).value(), bilstm_trace(m.parameters(), "joint.lstm", xs),
                   1e-12);
}

TEST(JointEncode, LengthMismatchThrows) {
  auto m = small_model();
  Tape tape;
  Var c = m.char_encode(tape, sentence({"a", "b", "c"}));
  Var w = m.word_encode(tape, sentence({"the", "cat", "sat", "the"}));
  EXPECT_THROW(m.joint_encode(tape, c, w), InvalidArgument);
}

TEST(JointEncode, ZeroCharOutputEqualsWordOnlyInput) {
  auto m = small_model();
  auto s = sentence({"the", "cat", "sat"});
  Tape tape;
  Var w = m.word_encode(tape, s);
  Var zeros = tape.constant(Tensor({3, 4}, 0.0));
  auto joint = m.joint_encode(tape, zeros, w).value();
  // a joint network that only sees the word features: drop the char rows
  ParameterSet reduced;
  for (std::string d : {".fwd", ".bwd"}) {
    const auto& full = m.parameters().at("joint.lstm" + d + ".input_weight").value;
    Tensor rows({full.rows() - 4, full.cols()});
    for (std::size_t r = 4; r < full.rows(); ++r) {
      std::copy(full.row(r).begin(), full.row(r).end(), rows.row(r - 4).begin());
    }
    reduced.add("j" + d + ".input_weight", rows);
    reduced.add("j" + d + ".recurrent_weight", m.parameters().at("joint.lstm" + d + ".recurrent_weight").value);
    reduced.add("j" + d + ".bias", m.parameters().at("joint.lstm" + d + ".bias").value);
  }
  expect_rows_near(joint, bilstm_trace(reduced, "j", rows_of(w.value())), 1e-12);
}

class StageGradient : public ::testing::TestWithParam<MetaLstmTagger::Stage> {};

TEST_P(StageGradient, FiniteDifferencesAgree) {
  MetaLstmTagger tagger(small_model(), LabelInventory(Task::pos, {"NOUN", "VERB", "X"}), 3);
  tagger.set_stage(GetParam());
  std::vector<Sentence> batch = {sentence({"the", "cat"}), sentence({"tab"})};
  batch[0].tokens[1].upos = "VERB";
  batch[1].tokens[0].upos = "X";
  auto params = tagger.trainable();
  ASSERT_FALSE(params.empty());
  for (auto* p : params) EXPECT_NE(p->name, "word.embeddings");
  auto result = test::grad_check([&](Tape& tape) { return tagger.loss(tape, batch); }, params);
  EXPECT_LT(result.max_rel_error, 1e-4) << result.worst;
}

INSTANTIATE_TEST_SUITE_P(Stages, StageGradient,
                         ::testing::Values(MetaLstmTagger::Stage::char_only,
                                           MetaLstmTagger::Stage::word_only,
                                           MetaLstmTagger::Stage::joint));

TEST(MetaLstmTagger, StagesTouchOnlyTheirSubNetwork) {
  MetaLstmTagger tagger(small_model(), LabelInventory(Task::pos, {"NOUN", "VERB"}), 3);
  tagger.set_stage(MetaLstmTagger::Stage::char_only);
  for (auto* p : tagger.trainable()) {
    EXPECT_TRUE(p->name.starts_with("char.") || p->name.starts_with("head.char")) << p->name;
  }
  tagger.set_stage(MetaLstmTagger::Stage::word_only);
  for (auto* p : tagger.trainable()) {
    EXPECT_TRUE(p->name.starts_with("word.") || p->name.starts_with("head.word")) << p->name;
  }
}

TEST(MetaLstmTagger, FrozenSubNetworksStayBitIdentical) {
  MetaLstmTagger tagger(small_model(), LabelInventory(Task::pos, {"NOUN", "VERB"}), 3);
  tagger.model().parameters().set_frozen("char.", true);
  tagger.model().parameters().set_frozen("word.", true);
  std::map<std::string, Tensor> before;
  for (auto* p : tagger.parameters()) before.emplace(p->name, p->value);
  std::vector<Sentence> batch = {sentence({"the", "cat", "sat"})};
  batch[0].tokens[1].upos = "VERB";
  for (int step = 0; step < 3; ++step) {
    for (auto* p : tagger.parameters()) p->grad.fill(0.0);
    Tape tape;
    tape.backward(tagger.loss(tape, batch));
    for (auto* p : tagger.parameters()) {
      for (std::size_t i = 0; i < p->value.size(); ++i) p->value[i] -= 0.5 * p->grad[i];
    }
  }
  bool joint_moved = false;
  for (auto* p : tagger.parameters()) {
    if (p->name.starts_with("char.") || p->name.starts_with("word.")) {
      EXPECT_EQ(p->value, before.at(p->name)) << p->name;
    } else if (p->name.starts_with("joint.") && !(p->value == before.at(p->name))) {
      joint_moved = true;
    }
  }
  EXPECT_TRUE(joint_moved);
}

TEST(MetaLstmTagger, CheckpointRoundTrip) {
  MetaLstmTagger tagger(small_model(), LabelInventory(Task::pos, {"NOUN", "VERB"}), 3);
  tagger.discard_stage_heads();
  auto dir = std::filesystem::temp_directory_path() / "distag_metalstm_roundtrip";
  std::filesystem::remove_all(dir);
  tagger.save(dir);
  auto loaded = load_tagger(dir);
  EXPECT_EQ(loaded->kind(), "metalstm");
  std::vector<Sentence> batch = {sentence({"the", "dog", "sat"})};
  Tape t1, t2;
  EXPECT_EQ(tagger.token_logits(t1, batch).value(), loaded->token_logits(t2, batch).value());
  std::filesystem::remove_all(dir);
}
