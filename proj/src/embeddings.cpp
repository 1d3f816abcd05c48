#include "distag/embeddings.hpp"

#include <fstream>
#include <iomanip>
#include <istream>
#include <sstream>

#include "distag/errors.hpp"

namespace distag {

bool EmbeddingTable::add(const std::string& word, std::span<const double> vec) {
  if (vec.size() != dim_) {
    throw DataError("embedding for '" + word + "' has " + std::to_string(vec.size()) +
                    " values, expected " + std::to_string(dim_));
  }
  if (!index_.emplace(word, words_.size()).second) return false;
  words_.push_back(word);
  data_.insert(data_.end(), vec.begin(), vec.end());
  return true;
}

std::span<const double> EmbeddingTable::lookup(const std::string& word) const {
  auto it = index_.find(word);
  if (it == index_.end()) return unk_;
  return {data_.data() + it->second * dim_, dim_};
}

void EmbeddingTable::finalize() {
  unk_.assign(dim_, 0.0);
  auto it = index_.find(std::string(kUnkWord));
  if (it != index_.end()) {
    auto v = lookup(std::string(kUnkWord));
    unk_.assign(v.begin(), v.end());
    return;
  }
  if (words_.empty()) return;
  for (std::size_t w = 0; w < words_.size(); ++w) {
    for (std::size_t d = 0; d < dim_; ++d) unk_[d] += data_[w * dim_ + d];
  }
  for (auto& v : unk_) v /= static_cast<double>(words_.size());
}

EmbeddingTable load_embeddings(std::istream& in) {
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line)) throw DataError("embedding file is empty");
  std::istringstream header(line);
  std::size_t count = 0, dim = 0;
  if (!(header >> count >> dim) || dim == 0) {
    throw ParseError("embedding header must be 'count dim'", line_no);
  }
  EmbeddingTable table(dim);
  std::vector<double> vec(dim);
  std::size_t seen = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string word;
    fields >> word;
    std::size_t n = 0;
    double v;
    while (fields >> v) {
      if (n < dim) vec[n] = v;
      ++n;
    }
    if (!fields.eof() || n != dim) {
      throw ParseError("expected " + std::to_string(dim) + " numeric values after '" + word + "'",
                       line_no);
    }
    table.add(word, vec);
    ++seen;
  }
  if (seen != count) {
    throw DataError("embedding header declares " + std::to_string(count) + " words, found " +
                    std::to_string(seen));
  }
  table.finalize();
  return table;
}

void write_embeddings(std::ostream& out, const EmbeddingTable& table) {
  out << table.size() << ' ' << table.dim() << '\n' << std::setprecision(17);
  for (const auto& word : table.words()) {
    out << word;
    for (double v : table.lookup(word)) out << ' ' << v;
    out << '\n';
  }
}

EmbeddingTable load_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open embedding file " + path.string());
  try {
    return load_embeddings(in);
  } catch (const ParseError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

EmbeddingTable union_embeddings(std::span<const EmbeddingTable> tables) {
  if (tables.empty()) throw InvalidArgument("union_embeddings: no tables");
  EmbeddingTable out(tables[0].dim());
  for (const auto& t : tables) {
    if (t.dim() != out.dim()) {
      throw DataError("embedding dim mismatch in union: " + std::to_string(t.dim()) + " vs " +
                      std::to_string(out.dim()));
    }
    for (std::size_t w = 0; w < t.size(); ++w) {
      std::span<const double> vec(t.data_.data() + w * t.dim(), t.dim());
      if (!out.add(t.words_[w], vec)) ++out.collisions_;
    }
  }
  out.finalize();
  return out;
}

}  // namespace distag
