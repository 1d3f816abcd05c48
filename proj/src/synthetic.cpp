#include "distag/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>

#include "distag/errors.hpp"

namespace distag {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kConsonants = "bcdfghjklmnprstvz";
constexpr std::string_view kVowels = "aeiou";
constexpr std::array<std::string_view, 13> kTagCycle = {
    "NOUN", "VERB", "ADJ", "ADV", "ADP", "PRON", "NUM", "AUX", "CCONJ", "PROPN", "PART", "SCONJ", "INTJ"};
constexpr std::array<std::string_view, 8> kFeats = {
    "_", "Number=Sing", "Number=Plur", "Case=Nom|Number=Sing", "Case=Acc|Number=Plur",
    "Tense=Past", "Tense=Pres", "Definite=Def"};

std::vector<std::string> all_stems() {
  std::vector<std::string> out;
  for (char a : kConsonants)
    for (char b : kVowels)
      for (char c : kConsonants) out.push_back(std::string{a, b, c});
  return out;
}

std::vector<std::string> all_suffixes() {
  std::vector<std::string> out;
  for (char a : kVowels)
    for (char b : kConsonants) out.push_back(std::string{a, b});
  return out;
}

// Takes n items from the back of a shuffled pool.
std::vector<std::string> take(std::vector<std::string>& pool, std::size_t n) {
  if (n > pool.size()) throw InvalidArgument("synthetic spec asks for more words than can be formed");
  std::vector<std::string> out(pool.end() - static_cast<std::ptrdiff_t>(n), pool.end());
  pool.resize(pool.size() - n);
  return out;
}

std::size_t shared_count(double fraction, std::size_t n) {
  return static_cast<std::size_t>(std::lround(fraction * static_cast<double>(n)));
}

}  // namespace

void SyntheticTaskSpec::validate() const {
  if (languages.empty()) throw InvalidArgument("synthetic spec needs at least one language");
  std::set<std::string> ids;
  for (const auto& l : languages) {
    if (l.id.empty() || !ids.insert(l.id).second) {
      throw InvalidArgument("synthetic language ids must be unique and non-empty");
    }
  }
  if (stems_per_language == 0) throw InvalidArgument("stems_per_language must be positive");
  if (suffixes_per_language < 3) throw InvalidArgument("suffixes_per_language must be at least 3");
  if (shared_fraction < 0.0 || shared_fraction > 1.0) {
    throw InvalidArgument("shared_fraction must lie in [0, 1]");
  }
  if (min_length == 0 || max_length < min_length) throw InvalidArgument("bad sentence length range");
  if (suffixes_per_language - shared_count(shared_fraction, suffixes_per_language) < 2) {
    throw InvalidArgument("each language needs two suffixes of its own");
  }
}

nlohmann::json SyntheticTaskSpec::to_json() const {
  nlohmann::json langs = nlohmann::json::array();
  for (const auto& l : languages) {
    langs.push_back({{"id", l.id}, {"train", l.train}, {"dev", l.dev}, {"test", l.test}});
  }
  return {{"languages", langs},
          {"stems_per_language", stems_per_language},
          {"suffixes_per_language", suffixes_per_language},
          {"shared_fraction", shared_fraction},
          {"min_length", min_length},
          {"max_length", max_length},
          {"unlabeled_per_language", unlabeled_per_language},
          {"context_rule", context_rule},
          {"seed", seed}};
}

SyntheticTaskSpec SyntheticTaskSpec::from_json(const nlohmann::json& j) {
  SyntheticTaskSpec s;
  s.languages.clear();
  for (const auto& l : j.at("languages")) {
    s.languages.push_back({l.at("id").get<std::string>(), l.at("train").get<std::size_t>(),
                           l.at("dev").get<std::size_t>(), l.at("test").get<std::size_t>()});
  }
  s.stems_per_language = j.at("stems_per_language").get<std::size_t>();
  s.suffixes_per_language = j.at("suffixes_per_language").get<std::size_t>();
  s.shared_fraction = j.at("shared_fraction").get<double>();
  s.min_length = j.at("min_length").get<std::size_t>();
  s.max_length = j.at("max_length").get<std::size_t>();
  s.unlabeled_per_language = j.at("unlabeled_per_language").get<std::size_t>();
  s.context_rule = j.at("context_rule").get<bool>();
  s.seed = j.at("seed").get<std::uint64_t>();
  return s;
}

Sentence SyntheticCorpus::oracle_tag(std::size_t language, const std::vector<std::string>& forms) const {
  const auto& rules = languages.at(language).rules;
  Sentence s;
  std::string previous;
  for (const auto& form : forms) {
    Token t;
    t.form = form;
    auto it = form.size() == 5 ? rules.find(form.substr(3)) : rules.end();
    if (it == rules.end()) {
      t.upos = "X";
    } else if (it->second.contextual) {
      const bool after_det = previous == "DET";
      t.upos = after_det ? "NOUN" : "VERB";
      t.feats = after_det ? "Number=Sing" : "Tense=Pres";
    } else {
      t.upos = it->second.upos;
      t.feats = it->second.feats;
    }
    previous = t.upos;
    s.tokens.push_back(std::move(t));
  }
  return s;
}

SyntheticCorpus gen_synthetic(const SyntheticTaskSpec& spec) {
  spec.validate();
  SyntheticCorpus corpus;
  corpus.spec = spec;
  std::mt19937_64 rng(spec.seed);

  auto stem_pool = all_stems();
  auto suffix_pool = all_suffixes();
  std::shuffle(stem_pool.begin(), stem_pool.end(), rng);
  std::shuffle(suffix_pool.begin(), suffix_pool.end(), rng);

  const std::size_t n_shared_stems = shared_count(spec.shared_fraction, spec.stems_per_language);
  const std::size_t n_shared_suffixes = shared_count(spec.shared_fraction, spec.suffixes_per_language);
  const auto shared_stems = take(stem_pool, n_shared_stems);
  const auto shared_suffixes = take(suffix_pool, n_shared_suffixes);
  std::map<std::string, SuffixRule> shared_rules;
  for (std::size_t k = 0; k < shared_suffixes.size(); ++k) {
    shared_rules[shared_suffixes[k]] = {std::string(kTagCycle[k % kTagCycle.size()]),
                                        std::string(kFeats[k % kFeats.size()]), false};
  }

  std::uniform_int_distribution<std::size_t> tag_dist(0, kTagCycle.size() - 1);
  std::uniform_int_distribution<std::size_t> feats_dist(0, kFeats.size() - 1);
  for (std::size_t l = 0; l < spec.languages.size(); ++l) {
    SyntheticLanguageRules lang;
    lang.stems = take(stem_pool, spec.stems_per_language - n_shared_stems);
    lang.stems.insert(lang.stems.end(), shared_stems.begin(), shared_stems.end());
    auto own = take(suffix_pool, spec.suffixes_per_language - n_shared_suffixes);
    for (std::size_t k = 0; k < own.size(); ++k) {
      SuffixRule rule;
      if (k == 0) {
        rule = {"DET", "Definite=Def", false};
      } else if (k == 1 && spec.context_rule) {
        rule = {"NOUN", "Number=Sing", true};
      } else {
        rule = {std::string(kTagCycle[tag_dist(rng)]), std::string(kFeats[feats_dist(rng)]), false};
      }
      lang.rules[own[k]] = rule;
    }
    lang.rules.insert(shared_rules.begin(), shared_rules.end());
    lang.suffixes = own;
    lang.suffixes.insert(lang.suffixes.end(), shared_suffixes.begin(), shared_suffixes.end());
    // frequency rank of each suffix is random; weights fall off as 1/rank
    std::shuffle(lang.suffixes.begin(), lang.suffixes.end(), rng);
    corpus.languages.push_back(std::move(lang));
  }

  auto sample_forms = [&](std::size_t l) {
    const auto& lang = corpus.languages[l];
    std::vector<double> weights;
    for (std::size_t r = 0; r < lang.suffixes.size(); ++r) weights.push_back(1.0 / static_cast<double>(r + 1));
    std::discrete_distribution<std::size_t> suffix_dist(weights.begin(), weights.end());
    std::uniform_int_distribution<std::size_t> stem_dist(0, lang.stems.size() - 1);
    std::uniform_int_distribution<std::size_t> len_dist(spec.min_length, spec.max_length);
    std::vector<std::string> forms(len_dist(rng));
    for (auto& f : forms) f = lang.stems[stem_dist(rng)] + lang.suffixes[suffix_dist(rng)];
    return forms;
  };

  for (std::size_t l = 0; l < spec.languages.size(); ++l) {
    const auto& cfg = spec.languages[l];
    auto make = [&](const std::string& split, std::size_t n) {
      Treebank tb;
      tb.id = cfg.id;
      for (std::size_t i = 0; i < n; ++i) {
        Sentence s = corpus.oracle_tag(l, sample_forms(l));
        s.treebank_id = cfg.id;
        s.sent_id = cfg.id + "-" + split + "-" + std::to_string(i + 1);
        tb.sentences.push_back(std::move(s));
      }
      return tb;
    };
    corpus.train.push_back(make("train", cfg.train));
    corpus.dev.push_back(make("dev", cfg.dev));
    corpus.test.push_back(make("test", cfg.test));
  }
  for (std::size_t i = 0; i < spec.unlabeled_per_language; ++i) {
    for (std::size_t l = 0; l < spec.languages.size(); ++l) {
      auto forms = sample_forms(l);
      std::string line;
      for (const auto& f : forms) line += (line.empty() ? "" : " ") + f;
      corpus.unlabeled.push_back(std::move(line));
    }
  }

  std::set<std::string> stems, suffixes;
  for (const auto& lang : corpus.languages) {
    stems.insert(lang.stems.begin(), lang.stems.end());
    suffixes.insert(lang.suffixes.begin(), lang.suffixes.end());
  }
  corpus.pieces = {"[PAD]", "[UNK]", "[CLS]", "[SEP]"};
  corpus.pieces.insert(corpus.pieces.end(), stems.begin(), stems.end());
  for (const auto& s : suffixes) corpus.pieces.push_back("##" + s);
  return corpus;
}

void write_synthetic(const SyntheticCorpus& corpus, const fs::path& dir) {
  fs::create_directories(dir);
  auto open = [&](const std::string& name) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw DataError("cannot write " + (dir / name).string());
    return out;
  };
  auto write_split = [&](const std::string& split, const std::vector<Treebank>& treebanks) {
    auto manifest = open(split + ".manifest");
    for (const auto& tb : treebanks) {
      const std::string file = tb.id + "-" + split + ".conllu";
      auto out = open(file);
      write_conllu(out, tb.sentences);
      manifest << tb.id << "\t" << file << "\n";
    }
  };
  write_split("train", corpus.train);
  write_split("dev", corpus.dev);
  write_split("test", corpus.test);
  corpus.vocab().save(dir / "vocab.txt");
  auto unlabeled = open("unlabeled.txt");
  for (const auto& line : corpus.unlabeled) unlabeled << line << "\n";
  open("spec.json") << corpus.spec.to_json().dump(2) << "\n";
}

EmbeddingTable synthetic_embeddings(const SyntheticCorpus& corpus, std::size_t dim,
                                    std::uint64_t seed) {
  std::set<std::string> forms;
  for (const auto* split : {&corpus.train, &corpus.dev, &corpus.test}) {
    for (const auto& tb : *split)
      for (const auto& s : tb.sentences)
        for (const auto& t : s.tokens) forms.insert(t.form);
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(static_cast<double>(dim)));
  EmbeddingTable table(dim);
  std::vector<double> vec(dim);
  for (const auto& f : forms) {
    for (auto& v : vec) v = dist(rng);
    table.add(f, vec);
  }
  table.finalize();
  return table;
}

}  // namespace distag
