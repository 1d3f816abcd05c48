#include "distag/wordpiece.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include "distag/errors.hpp"

namespace distag {

WordpieceVocab::WordpieceVocab(std::vector<std::string> pieces) : pieces_(std::move(pieces)) {
  for (std::size_t i = 0; i < pieces_.size(); ++i) {
    if (pieces_[i].empty()) throw DataError("empty piece at vocab line " + std::to_string(i + 1));
    if (!index_.emplace(pieces_[i], static_cast<int>(i)).second) {
      throw DataError("duplicate vocab piece '" + pieces_[i] + "'");
    }
  }
  auto special = [&](std::string_view name) {
    auto id = find(name);
    if (!id) throw DataError("vocab is missing special piece " + std::string(name));
    return *id;
  };
  pad_ = special(kPad);
  unk_ = special(kUnk);
  cls_ = special(kCls);
  sep_ = special(kSep);
}

WordpieceVocab WordpieceVocab::load(std::istream& in) {
  std::vector<std::string> pieces;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    pieces.push_back(line);
  }
  return WordpieceVocab(std::move(pieces));
}

WordpieceVocab WordpieceVocab::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open vocab file " + path.string());
  return load(in);
}

void WordpieceVocab::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write vocab file " + path.string());
  for (const auto& p : pieces_) out << p << '\n';
}

std::optional<int> WordpieceVocab::find(std::string_view piece) const {
  auto it = index_.find(std::string(piece));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

int WordpieceVocab::id(std::string_view piece) const {
  auto found = find(piece);
  if (!found) throw InvalidArgument("piece '" + std::string(piece) + "' not in vocab");
  return *found;
}

namespace {

// Byte offsets of UTF-8 code point starts, plus the end offset.
std::vector<std::size_t> char_boundaries(std::string_view s) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if ((static_cast<unsigned char>(s[i]) & 0xC0) != 0x80) out.push_back(i);
  }
  out.push_back(s.size());
  return out;
}

}  // namespace

std::vector<int> tokenize_word_ids(std::string_view word, const WordpieceVocab& vocab) {
  if (word.empty()) throw InvalidArgument("tokenize_word: empty word");
  const auto bounds = char_boundaries(word);
  const std::size_t nchars = bounds.size() - 1;
  if (nchars > WordpieceVocab::kMaxCharsPerWord) return {vocab.unk_id()};

  std::vector<int> out;
  std::size_t start = 0;
  std::string candidate;
  while (start < nchars) {
    std::optional<int> match;
    std::size_t end = nchars;
    for (; end > start; --end) {
      candidate.clear();
      if (start > 0) candidate = "##";
      candidate.append(word.substr(bounds[start], bounds[end] - bounds[start]));
      if ((match = vocab.find(candidate))) break;
    }
    if (!match) return {vocab.unk_id()};
    out.push_back(*match);
    start = end;
  }
  return out;
}

std::vector<std::string> tokenize_word(std::string_view word, const WordpieceVocab& vocab) {
  std::vector<std::string> out;
  for (int id : tokenize_word_ids(word, vocab)) out.push_back(vocab.piece(id));
  return out;
}

std::vector<Encoding> encode_sentence(std::span<const std::string> tokens,
                                      const WordpieceVocab& vocab, std::size_t max_len) {
  if (max_len < 3) throw InvalidArgument("encode_sentence: max_len must be >= 3");
  const std::size_t budget = max_len - 2;
  std::vector<Encoding> out;
  Encoding current;
  auto start_chunk = [&](std::size_t offset) {
    current = Encoding{};
    current.token_offset = offset;
    current.piece_ids.push_back(vocab.cls_id());
  };
  auto finish_chunk = [&] {
    current.piece_ids.push_back(vocab.sep_id());
    current.length = current.piece_ids.size();
    current.piece_ids.resize(max_len, vocab.pad_id());
    out.push_back(std::move(current));
  };

  start_chunk(0);
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    auto pieces = tokenize_word_ids(tokens[t], vocab);
    if (pieces.size() > budget) pieces.resize(budget);
    const std::size_t used = current.piece_ids.size() - 1;
    if (used + pieces.size() > budget) {
      finish_chunk();
      start_chunk(t);
    }
    current.first_subword_index.push_back(current.piece_ids.size());
    current.piece_ids.insert(current.piece_ids.end(), pieces.begin(), pieces.end());
  }
  if (!current.first_subword_index.empty() || out.empty()) finish_chunk();
  return out;
}

}  // namespace distag
