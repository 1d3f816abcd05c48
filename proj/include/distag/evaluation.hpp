#pragma once

#include <cstddef>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "distag/conllu.hpp"
#include "distag/tagger.hpp"

namespace distag {

// Matched-token F1 over label columns. With gold segmentation precision,
// recall and F1 all equal accuracy.
struct F1Counts {
  std::size_t gold_tokens = 0;
  std::size_t predicted_tokens = 0;
  std::size_t matched = 0;

  double precision() const;
  double recall() const;
  double f1() const;
};

F1Counts count_matches(std::span<const Sentence> gold, std::span<const Sentence> predicted,
                       Task task);
double token_f1(std::span<const Sentence> gold, std::span<const Sentence> predicted, Task task);

// Unweighted mean over treebanks.
double macro_f1(const std::map<std::string, double>& per_treebank);

struct EvalReport {
  Task task = Task::pos;
  bool codemixed = false;
  std::map<std::string, double> per_treebank_f1;
  std::map<std::string, std::size_t> per_treebank_tokens;
  double macro_f1 = 0.0;

  void write_table(std::ostream& out) const;
  void write_csv(std::ostream& out) const;
};

// Copies of the sentences with the tagger's labels filled in; with
// codemixed set, X predictions fall back to the second-best label.
std::vector<Sentence> tag_sentences(Tagger& tagger, std::span<const Sentence> sentences,
                                    bool codemixed = false);

EvalReport evaluate(Tagger& tagger, std::span<const Treebank> treebanks, Task task,
                    bool codemixed = false);

}  // namespace distag
