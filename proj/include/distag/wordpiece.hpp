#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace distag {

// Wordpiece vocabulary: one piece per line, line number = id. Continuation
// pieces carry a "##" prefix. [PAD], [UNK], [CLS] and [SEP] must be present.
class WordpieceVocab {
 public:
  static constexpr std::string_view kPad = "[PAD]";
  static constexpr std::string_view kUnk = "[UNK]";
  static constexpr std::string_view kCls = "[CLS]";
  static constexpr std::string_view kSep = "[SEP]";
  static constexpr std::size_t kMaxCharsPerWord = 100;

  WordpieceVocab() = default;
  explicit WordpieceVocab(std::vector<std::string> pieces);

  static WordpieceVocab load(std::istream& in);
  static WordpieceVocab load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  std::size_t size() const { return pieces_.size(); }
  std::optional<int> find(std::string_view piece) const;
  int id(std::string_view piece) const;  // throws InvalidArgument
  const std::string& piece(int id) const { return pieces_.at(static_cast<std::size_t>(id)); }
  const std::vector<std::string>& pieces() const { return pieces_; }

  int pad_id() const { return pad_; }
  int unk_id() const { return unk_; }
  int cls_id() const { return cls_; }
  int sep_id() const { return sep_; }
  bool is_special(int id) const { return id == pad_ || id == unk_ || id == cls_ || id == sep_; }

  bool operator==(const WordpieceVocab& other) const { return pieces_ == other.pieces_; }

 private:
  std::vector<std::string> pieces_;
  std::unordered_map<std::string, int> index_;
  int pad_ = -1, unk_ = -1, cls_ = -1, sep_ = -1;
};

// Greedy longest-match-first. No case folding or normalization. Words longer
// than kMaxCharsPerWord code points, or with any unmatched chunk, become
// a single [UNK].
std::vector<std::string> tokenize_word(std::string_view word, const WordpieceVocab& vocab);
std::vector<int> tokenize_word_ids(std::string_view word, const WordpieceVocab& vocab);

// One model input: [CLS] pieces... [SEP] [PAD]... covering tokens
// [token_offset, token_offset + first_subword_index.size()).
struct Encoding {
  std::vector<int> piece_ids;  // padded to max_len
  std::size_t length = 0;      // unpadded length, including [CLS] and [SEP]
  std::size_t token_offset = 0;
  std::vector<std::size_t> first_subword_index;

  std::size_t token_count() const { return first_subword_index.size(); }
};

// Splits at token boundaries so each chunk fits in max_len; a single word
// whose pieces alone exceed max_len - 2 keeps only its leading pieces.
std::vector<Encoding> encode_sentence(std::span<const std::string> tokens,
                                      const WordpieceVocab& vocab, std::size_t max_len);

}  // namespace distag
