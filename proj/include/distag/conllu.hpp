#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace distag {

// The 17 universal POS tags, alphabetical.
inline constexpr std::array<std::string_view, 17> kUposTags = {
    "ADJ",  "ADP",   "ADV",   "AUX",   "CCONJ", "DET", "INTJ", "NOUN", "NUM",
    "PART", "PRON",  "PROPN", "PUNCT", "SCONJ", "SYM", "VERB", "X"};

bool is_upos(std::string_view tag);

struct Token {
  std::string form;
  std::string upos = "_";
  std::string feats = "_";

  bool operator==(const Token&) const = default;
};

struct Sentence {
  std::vector<Token> tokens;
  std::string treebank_id;
  std::optional<std::string> sent_id;
};

struct Treebank {
  std::string id;
  std::vector<Sentence> sentences;
};

enum class Task { pos, morph };

Task parse_task(std::string_view name);
std::string_view task_name(Task task);
// UPOS for pos, the raw FEATS string for morph.
const std::string& gold_label(const Token& token, Task task);

// Reads CoNLL-U. Multiword ranges ("3-4") and empty nodes ("5.1") are
// skipped; comments are ignored except "# sent_id = ...". CRLF tolerated.
std::vector<Sentence> parse_conllu(std::istream& in, const std::string& treebank_id = "");
std::vector<Sentence> read_conllu(const std::filesystem::path& path,
                                  const std::string& treebank_id = "");

// Minimal 10-column CoNLL-U: ID, FORM, UPOS and FEATS filled, rest "_".
void write_conllu(std::ostream& out, std::span<const Sentence> sentences);

class LabelInventory {
 public:
  LabelInventory() = default;
  LabelInventory(Task task, std::vector<std::string> labels);

  // pos: the fixed UPOS-17 list, validated against the data.
  // morph: every distinct FEATS string, sorted bytewise ("_" included).
  static LabelInventory build(std::span<const Sentence> sentences, Task task);

  Task task() const { return task_; }
  std::size_t size() const { return labels_.size(); }
  const std::vector<std::string>& labels() const { return labels_; }
  const std::string& label(std::size_t index) const { return labels_.at(index); }
  bool contains(std::string_view label) const;
  std::size_t index(std::string_view label) const;  // throws InvalidArgument

  bool operator==(const LabelInventory& other) const {
    return task_ == other.task_ && labels_ == other.labels_;
  }

 private:
  Task task_ = Task::pos;
  std::vector<std::string> labels_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Concatenates every treebank and applies a seeded uniform shuffle.
std::vector<Sentence> mix_treebanks(std::span<const std::vector<Sentence>> treebanks,
                                    std::uint64_t seed);
std::vector<Sentence> mix_treebanks(std::span<const Treebank> treebanks, std::uint64_t seed);

// Treebank manifest: one "treebank_id<TAB>path" per line; relative paths
// resolve against the manifest's directory. Blank and '#' lines skipped.
struct ManifestEntry {
  std::string id;
  std::filesystem::path path;
};
std::vector<ManifestEntry> read_treebank_manifest(const std::filesystem::path& manifest);
std::vector<Treebank> load_treebanks(const std::filesystem::path& manifest);

}  // namespace distag
