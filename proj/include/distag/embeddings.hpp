#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <ostream>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace distag {

// Word vectors in the fastText ".vec" text layout: a "count dim" header,
// then "word v1 ... v_dim" per line. Lookups of unknown words return the
// unk vector: the explicit "<unk>" entry when present, otherwise the mean
// of all vectors.
class EmbeddingTable {
 public:
  static constexpr std::string_view kUnkWord = "<unk>";

  EmbeddingTable() = default;
  explicit EmbeddingTable(std::size_t dim) : dim_(dim) {}

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return words_.size(); }
  // Number of words dropped by union_embeddings because an earlier table
  // already had them.
  std::size_t collisions() const { return collisions_; }

  bool contains(const std::string& word) const { return index_.count(word) != 0; }
  // Returns false (and leaves the table untouched) if the word exists.
  bool add(const std::string& word, std::span<const double> vec);
  std::span<const double> lookup(const std::string& word) const;
  std::span<const double> unk() const { return unk_; }
  const std::vector<std::string>& words() const { return words_; }

  // Recomputes unk after all entries are in.
  void finalize();

 private:
  friend EmbeddingTable union_embeddings(std::span<const EmbeddingTable> tables);

  std::size_t dim_ = 0;
  std::vector<std::string> words_;
  std::vector<double> data_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<double> unk_;
  std::size_t collisions_ = 0;
};

EmbeddingTable load_embeddings(std::istream& in);
EmbeddingTable load_embeddings(const std::filesystem::path& path);

// Same layout, values printed with round-trip precision.
void write_embeddings(std::ostream& out, const EmbeddingTable& table);

// Union keeping the first occurrence of each word across tables.
EmbeddingTable union_embeddings(std::span<const EmbeddingTable> tables);

}  // namespace distag
