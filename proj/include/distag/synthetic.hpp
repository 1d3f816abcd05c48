#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "distag/conllu.hpp"
#include "distag/embeddings.hpp"
#include "distag/wordpiece.hpp"

namespace distag {

struct SyntheticLanguage {
  std::string id;
  std::size_t train = 100;
  std::size_t dev = 50;
  std::size_t test = 50;
};

// Toy treebanks standing in for UD data. Every word is a 3-letter stem plus
// a 2-letter suffix; the suffix fixes the tag, except for one suffix per
// language whose tag depends on the previous token (NOUN after DET, VERB
// otherwise). Stems and suffixes are disjoint across languages apart from
// a shared pool whose suffixes carry the same tag everywhere.
struct SyntheticTaskSpec {
  std::vector<SyntheticLanguage> languages = {{"syn_a"}, {"syn_b"}};
  std::size_t stems_per_language = 60;
  std::size_t suffixes_per_language = 10;
  double shared_fraction = 0.25;
  std::size_t min_length = 4;
  std::size_t max_length = 10;
  std::size_t unlabeled_per_language = 0;
  bool context_rule = true;
  std::uint64_t seed = 1;

  void validate() const;
  nlohmann::json to_json() const;
  static SyntheticTaskSpec from_json(const nlohmann::json& j);
};

struct SuffixRule {
  std::string upos;
  std::string feats;
  bool contextual = false;  // NOUN after DET, VERB otherwise
};

struct SyntheticLanguageRules {
  std::vector<std::string> stems;
  std::vector<std::string> suffixes;
  std::map<std::string, SuffixRule> rules;
};

struct SyntheticCorpus {
  SyntheticTaskSpec spec;
  std::vector<Treebank> train, dev, test;
  std::vector<std::string> unlabeled;  // one sentence per line
  std::vector<std::string> pieces;     // wordpiece inventory covering every form
  std::vector<SyntheticLanguageRules> languages;

  WordpieceVocab vocab() const { return WordpieceVocab(pieces); }
  // Labels the forms of a sentence by the generating rules of one language.
  Sentence oracle_tag(std::size_t language, const std::vector<std::string>& forms) const;
};

SyntheticCorpus gen_synthetic(const SyntheticTaskSpec& spec);

// Writes <id>-{train,dev,test}.conllu, {train,dev,test}.manifest,
// vocab.txt, unlabeled.txt and spec.json under dir.
void write_synthetic(const SyntheticCorpus& corpus, const std::filesystem::path& dir);

// Random word vectors for every form seen in the corpus (all splits), as a
// stand-in for pretrained embeddings.
EmbeddingTable synthetic_embeddings(const SyntheticCorpus& corpus, std::size_t dim,
                                    std::uint64_t seed);

}  // namespace distag
