#include "distag/conllu.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <set>
#include <sstream>

#include "distag/errors.hpp"

namespace distag {

bool is_upos(std::string_view tag) {
  return std::find(kUposTags.begin(), kUposTags.end(), tag) != kUposTags.end();
}

Task parse_task(std::string_view name) {
  if (name == "pos") return Task::pos;
  if (name == "morph") return Task::morph;
  throw InvalidArgument("unknown task '" + std::string(name) + "' (expected pos or morph)");
}

std::string_view task_name(Task task) { return task == Task::pos ? "pos" : "morph"; }

const std::string& gold_label(const Token& token, Task task) {
  return task == Task::pos ? token.upos : token.feats;
}

namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find('\t', start);
    out.push_back(line.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

bool is_range_or_empty_node(std::string_view id) {
  return id.find('-') != std::string_view::npos || id.find('.') != std::string_view::npos;
}

}  // namespace

std::vector<Sentence> parse_conllu(std::istream& in, const std::string& treebank_id) {
  std::vector<Sentence> out;
  Sentence current;
  current.treebank_id = treebank_id;
  auto flush = [&] {
    if (!current.tokens.empty()) out.push_back(std::move(current));
    current = Sentence{};
    current.treebank_id = treebank_id;
  };

  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) {
      flush();
      continue;
    }
    if (line.front() == '#') {
      constexpr std::string_view key = "# sent_id = ";
      if (line.starts_with(key)) current.sent_id = std::string(line.substr(key.size()));
      continue;
    }
    auto cols = split_tabs(line);
    if (cols.size() != 10) {
      throw ParseError("expected 10 tab-separated columns, found " + std::to_string(cols.size()),
                       line_no);
    }
    if (is_range_or_empty_node(cols[0])) continue;
    if (cols[1].empty()) throw ParseError("empty FORM column", line_no);
    current.tokens.push_back(Token{std::string(cols[1]), std::string(cols[3]),
                                   std::string(cols[5])});
  }
  flush();
  return out;
}

std::vector<Sentence> read_conllu(const std::filesystem::path& path,
                                  const std::string& treebank_id) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open CoNLL-U file " + path.string());
  try {
    return parse_conllu(in, treebank_id);
  } catch (const ParseError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_conllu(std::ostream& out, std::span<const Sentence> sentences) {
  for (const auto& s : sentences) {
    if (s.sent_id) out << "# sent_id = " << *s.sent_id << '\n';
    for (std::size_t i = 0; i < s.tokens.size(); ++i) {
      const auto& t = s.tokens[i];
      out << (i + 1) << '\t' << t.form << "\t_\t" << t.upos << "\t_\t" << t.feats
          << "\t_\t_\t_\t_\n";
    }
    out << '\n';
  }
}

LabelInventory::LabelInventory(Task task, std::vector<std::string> labels)
    : task_(task), labels_(std::move(labels)) {
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (!index_.emplace(labels_[i], i).second) {
      throw InvalidArgument("duplicate label in inventory: " + labels_[i]);
    }
  }
}

LabelInventory LabelInventory::build(std::span<const Sentence> sentences, Task task) {
  if (task == Task::pos) {
    for (const auto& s : sentences) {
      for (const auto& t : s.tokens) {
        if (!is_upos(t.upos)) throw DataError("unknown UPOS tag '" + t.upos + "'");
      }
    }
    return LabelInventory(Task::pos, {kUposTags.begin(), kUposTags.end()});
  }
  std::set<std::string> feats;
  for (const auto& s : sentences) {
    for (const auto& t : s.tokens) feats.insert(t.feats);
  }
  return LabelInventory(Task::morph, {feats.begin(), feats.end()});
}

bool LabelInventory::contains(std::string_view label) const {
  return index_.count(std::string(label)) != 0;
}

std::size_t LabelInventory::index(std::string_view label) const {
  auto it = index_.find(std::string(label));
  if (it == index_.end()) {
    throw InvalidArgument("label '" + std::string(label) + "' not in " +
                          std::string(task_name(task_)) + " inventory");
  }
  return it->second;
}

std::vector<Sentence> mix_treebanks(std::span<const std::vector<Sentence>> treebanks,
                                    std::uint64_t seed) {
  std::vector<Sentence> out;
  for (const auto& tb : treebanks) out.insert(out.end(), tb.begin(), tb.end());
  std::mt19937_64 rng(seed);
  std::shuffle(out.begin(), out.end(), rng);
  return out;
}

std::vector<Sentence> mix_treebanks(std::span<const Treebank> treebanks, std::uint64_t seed) {
  std::vector<std::vector<Sentence>> lists;
  lists.reserve(treebanks.size());
  for (const auto& tb : treebanks) lists.push_back(tb.sentences);
  return mix_treebanks(lists, seed);
}

std::vector<ManifestEntry> read_treebank_manifest(const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw DataError("cannot open treebank manifest " + manifest.string());
  std::vector<ManifestEntry> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || tab + 1 == line.size()) {
      throw DataError(manifest.string() + ":" + std::to_string(line_no) +
                      ": expected 'treebank_id<TAB>path'");
    }
    std::filesystem::path path = line.substr(tab + 1);
    if (path.is_relative()) path = manifest.parent_path() / path;
    out.push_back({line.substr(0, tab), path});
  }
  return out;
}

std::vector<Treebank> load_treebanks(const std::filesystem::path& manifest) {
  std::vector<Treebank> out;
  for (const auto& entry : read_treebank_manifest(manifest)) {
    out.push_back({entry.id, read_conllu(entry.path, entry.id)});
  }
  return out;
}

}  // namespace distag
