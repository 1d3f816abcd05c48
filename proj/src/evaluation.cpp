#include "distag/evaluation.hpp"

#include <iomanip>

#include "distag/errors.hpp"

namespace distag {

double F1Counts::precision() const {
  return predicted_tokens == 0 ? 0.0 : static_cast<double>(matched) / static_cast<double>(predicted_tokens);
}

double F1Counts::recall() const {
  return gold_tokens == 0 ? 0.0 : static_cast<double>(matched) / static_cast<double>(gold_tokens);
}

double F1Counts::f1() const {
  const double p = precision(), r = recall();
  return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}

F1Counts count_matches(std::span<const Sentence> gold, std::span<const Sentence> predicted,
                       Task task) {
  if (gold.size() != predicted.size()) {
    throw InvalidArgument("token_f1: " + std::to_string(gold.size()) + " gold vs " +
                          std::to_string(predicted.size()) + " predicted sentences");
  }
  F1Counts counts;
  for (std::size_t s = 0; s < gold.size(); ++s) {
    const auto& g = gold[s].tokens;
    const auto& p = predicted[s].tokens;
    if (g.size() != p.size()) {
      throw InvalidArgument("token_f1: sentence " + std::to_string(s) + " has " +
                            std::to_string(g.size()) + " gold vs " + std::to_string(p.size()) +
                            " predicted tokens (gold segmentation required)");
    }
    counts.gold_tokens += g.size();
    counts.predicted_tokens += p.size();
    for (std::size_t t = 0; t < g.size(); ++t) {
      if (gold_label(g[t], task) == gold_label(p[t], task)) ++counts.matched;
    }
  }
  return counts;
}

double token_f1(std::span<const Sentence> gold, std::span<const Sentence> predicted, Task task) {
  return count_matches(gold, predicted, task).f1();
}

double macro_f1(const std::map<std::string, double>& per_treebank) {
  if (per_treebank.empty()) throw InvalidArgument("macro_f1: no treebanks");
  double sum = 0.0;
  for (const auto& [id, f1] : per_treebank) sum += f1;
  return sum / static_cast<double>(per_treebank.size());
}

std::vector<Sentence> tag_sentences(Tagger& tagger, std::span<const Sentence> sentences,
                                    bool codemixed) {
  const Task task = tagger.inventory().task();
  auto predictions = tagger.predict(sentences);
  std::vector<Sentence> out(sentences.begin(), sentences.end());
  for (std::size_t s = 0; s < out.size(); ++s) {
    std::vector<std::string> labels;
    if (codemixed) {
      labels = resolve_codemixed(predictions[s], task);
    } else {
      for (const auto& p : predictions[s]) labels.push_back(p.label);
    }
    for (std::size_t t = 0; t < labels.size(); ++t) {
      (task == Task::pos ? out[s].tokens[t].upos : out[s].tokens[t].feats) = labels[t];
    }
  }
  return out;
}

EvalReport evaluate(Tagger& tagger, std::span<const Treebank> treebanks, Task task,
                    bool codemixed) {
  if (tagger.inventory().task() != task) {
    throw InvalidArgument("evaluate: model predicts " + std::string(task_name(tagger.inventory().task())) +
                          ", asked for " + std::string(task_name(task)));
  }
  EvalReport report;
  report.task = task;
  report.codemixed = codemixed;
  for (const auto& tb : treebanks) {
    for (const auto& s : tb.sentences) {
      for (const auto& t : s.tokens) {
        const auto& label = gold_label(t, task);
        if (task == Task::pos && !is_upos(label)) {
          throw DataError(tb.id + ": unknown gold label '" + label + "'");
        }
      }
    }
    auto predicted = tag_sentences(tagger, tb.sentences, codemixed);
    auto counts = count_matches(tb.sentences, predicted, task);
    report.per_treebank_f1[tb.id] = counts.f1();
    report.per_treebank_tokens[tb.id] = counts.gold_tokens;
  }
  report.macro_f1 = macro_f1(report.per_treebank_f1);
  return report;
}

void EvalReport::write_table(std::ostream& out) const {
  std::size_t width = 9;
  for (const auto& [id, f1] : per_treebank_f1) width = std::max(width, id.size());
  out << std::left << std::setw(static_cast<int>(width)) << "treebank" << "  " << std::right
      << std::setw(8) << "tokens" << "  " << std::setw(7) << "F1" << "\n";
  out << std::fixed << std::setprecision(2);
  for (const auto& [id, f1] : per_treebank_f1) {
    out << std::left << std::setw(static_cast<int>(width)) << id << "  " << std::right
        << std::setw(8) << per_treebank_tokens.at(id) << "  " << std::setw(7) << 100.0 * f1 << "\n";
  }
  out << std::left << std::setw(static_cast<int>(width)) << "macro-avg" << "  " << std::right
      << std::setw(8) << "" << "  " << std::setw(7) << 100.0 * macro_f1 << "\n";
  out << std::defaultfloat;
}

void EvalReport::write_csv(std::ostream& out) const {
  out << "treebank,task,codemixed,tokens,f1\n";
  out << std::setprecision(17);
  for (const auto& [id, f1] : per_treebank_f1) {
    out << id << "," << task_name(task) << "," << (codemixed ? 1 : 0) << ","
        << per_treebank_tokens.at(id) << "," << f1 << "\n";
  }
  out << "macro," << task_name(task) << "," << (codemixed ? 1 : 0) << ",," << macro_f1 << "\n";
  out << std::defaultfloat;
}

}  // namespace distag
