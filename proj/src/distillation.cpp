#include "distag/distillation.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "distag/errors.hpp"
#include "distag/ops.hpp"
#include "distag/text.hpp"

namespace distag {

namespace fs = std::filesystem;

void DistillConfig::validate() const {
  if (!(temperature > 0.0)) throw InvalidArgument("temperature must be positive");
  if (!(learning_rate > 0.0)) throw InvalidArgument("learning_rate must be positive");
  if (batch_size == 0) throw InvalidArgument("batch_size must be positive");
  if (epochs == 0) throw InvalidArgument("epochs must be positive");
  if (shard_size == 0) throw InvalidArgument("shard_size must be positive");
  if (!(clip_norm > 0.0)) throw InvalidArgument("clip_norm must be positive");
}

nlohmann::json DistillConfig::to_json() const {
  return {{"temperature", temperature},
          {"learning_rate", learning_rate},
          {"batch_size", batch_size},
          {"epochs", epochs},
          {"min_sentence_chars", min_sentence_chars},
          {"shard_size", shard_size},
          {"seed", seed},
          {"clip_norm", clip_norm}};
}

DistillConfig DistillConfig::from_json(const nlohmann::json& j) {
  DistillConfig c;
  c.temperature = j.at("temperature").get<double>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.epochs = j.at("epochs").get<std::size_t>();
  c.min_sentence_chars = j.at("min_sentence_chars").get<std::size_t>();
  c.shard_size = j.at("shard_size").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.clip_norm = j.at("clip_norm").get<double>();
  return c;
}

std::vector<std::string> prepare_unlabeled(std::istream& in, std::size_t min_chars) {
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    const auto first = line.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) continue;
    const auto last = line.find_last_not_of(" \t\r\n");
    std::string trimmed = line.substr(first, last - first + 1);
    if (utf8_length(trimmed) >= min_chars) out.push_back(std::move(trimmed));
  }
  return out;
}

std::vector<std::string> prepare_unlabeled(const fs::path& path, std::size_t min_chars) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return prepare_unlabeled(in, min_chars);
}

std::size_t LogitShard::rows() const {
  std::size_t n = 0;
  for (const auto& t : logits) n += t.rows();
  return n;
}

nlohmann::json ShardManifest::to_json() const {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& s : shards) {
    list.push_back({{"path", s.path}, {"checksum", s.checksum}, {"segments", s.segments}});
  }
  return {{"format", "distag-logit-shards"},
          {"inventory", inventory_to_json(inventory)},
          {"vocab_sha256", vocab_sha256},
          {"vocab_size", vocab_size},
          {"shards", list}};
}

ShardManifest ShardManifest::from_json(const nlohmann::json& j) {
  ShardManifest m;
  m.inventory = inventory_from_json(j.at("inventory"));
  m.vocab_sha256 = j.at("vocab_sha256").get<std::string>();
  m.vocab_size = j.at("vocab_size").get<std::size_t>();
  for (const auto& s : j.at("shards")) {
    m.shards.push_back({s.at("path").get<std::string>(), s.at("checksum").get<std::string>(),
                        s.at("segments").get<std::size_t>()});
  }
  return m;
}

std::string vocab_fingerprint(const WordpieceVocab& vocab) {
  std::string joined;
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    joined += vocab.piece(static_cast<int>(i));
    joined += '\n';
  }
  return sha256_hex(std::span(reinterpret_cast<const std::uint8_t*>(joined.data()), joined.size()));
}

namespace {

std::string write_shard(const fs::path& path, const LogitShard& shard, std::size_t labels) {
  std::vector<double> ids, offsets = {0.0};
  Tensor logits({std::max<std::size_t>(shard.rows(), 1), labels}, 0.0);
  std::size_t row = 0;
  for (std::size_t s = 0; s < shard.segments(); ++s) {
    ids.insert(ids.end(), shard.piece_ids[s].begin(), shard.piece_ids[s].end());
    offsets.push_back(static_cast<double>(ids.size()));
    const auto& t = shard.logits[s];
    std::copy(t.values().begin(), t.values().end(), logits.values().begin() + static_cast<std::ptrdiff_t>(row * labels));
    row += t.rows();
  }
  if (ids.empty()) throw InvalidArgument("write_shard: empty shard");
  std::vector<NamedTensor> tensors = {{"piece_ids", Tensor::vector(ids), DType::i32},
                                      {"offsets", Tensor::vector(offsets), DType::i32},
                                      {"logits", logits, DType::f64}};
  return write_archive(path, {{"format", "distag-logit-shard"}, {"segments", shard.segments()}}, tensors);
}

}  // namespace

ShardManifest generate_teacher_logits(TransformerTagger& teacher, std::span<const std::string> sentences,
                                      const fs::path& dir, std::size_t shard_size,
                                      const WordpieceVocab* tokenizer, std::size_t batch) {
  if (shard_size == 0 || batch == 0) throw InvalidArgument("shard_size and batch must be positive");
  ShardManifest manifest;
  manifest.inventory = teacher.inventory();
  manifest.vocab_sha256 = vocab_fingerprint(teacher.vocab());
  manifest.vocab_size = teacher.vocab().size();
  if (tokenizer && vocab_fingerprint(*tokenizer) != manifest.vocab_sha256) {
    throw DataError("tokenizer vocabulary (" + std::to_string(tokenizer->size()) +
                    " pieces) does not match the teacher's (" + std::to_string(teacher.vocab().size()) + ")");
  }

  std::vector<Encoding> segments;
  for (const auto& line : sentences) {
    std::vector<std::string> words;
    for (auto w : split_whitespace(line)) words.emplace_back(w);
    if (words.empty()) continue;
    auto enc = teacher.encode_words(words);
    for (auto& e : enc) {
      if (e.length > 2) segments.push_back(std::move(e));
    }
  }

  fs::create_directories(dir);
  const std::size_t labels = teacher.inventory().size();
  LogitShard shard;
  auto flush = [&]() {
    if (shard.segments() == 0) return;
    char name[32];
    std::snprintf(name, sizeof(name), "shard-%05zu", manifest.shards.size());
    ShardEntry entry{name, write_shard(dir / name, shard, labels), shard.segments()};
    manifest.shards.push_back(entry);
    shard = LogitShard{};
  };
  for (std::size_t begin = 0; begin < segments.size(); begin += batch) {
    const std::size_t end = std::min(segments.size(), begin + batch);
    std::span<const Encoding> group(segments.data() + begin, end - begin);
    Tape tape;
    const Tensor logits = teacher.content_logits(tape, group).value();
    std::size_t row = 0;
    for (const auto& e : group) {
      const std::size_t n = e.length - 2;
      Tensor t({n, labels});
      std::copy_n(logits.values().begin() + static_cast<std::ptrdiff_t>(row * labels), n * labels,
                  t.values().begin());
      row += n;
      shard.piece_ids.emplace_back(e.piece_ids.begin() + 1, e.piece_ids.begin() + static_cast<std::ptrdiff_t>(e.length - 1));
      shard.logits.push_back(std::move(t));
      if (shard.segments() == shard_size) flush();
    }
  }
  flush();
  std::ofstream out(dir / kShardManifest, std::ios::binary);
  if (!out) throw DataError("cannot write " + (dir / kShardManifest).string());
  out << manifest.to_json().dump(2) << "\n";
  return manifest;
}

ShardManifest read_shard_manifest(const fs::path& dir) {
  std::ifstream in(dir / kShardManifest, std::ios::binary);
  if (!in) throw DataError("no " + std::string(kShardManifest) + " in " + dir.string());
  try {
    return ShardManifest::from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(dir.string() + ": bad shard manifest: " + e.what());
  }
}

LogitShard read_shard(const fs::path& path, const std::string& expected_checksum) {
  Archive archive = read_archive(path);
  if (!expected_checksum.empty() && archive.checksum != expected_checksum) {
    throw DataError(path.string() + ": shard checksum differs from the shard manifest");
  }
  const auto& ids = archive.get("piece_ids");
  const auto& offsets = archive.get("offsets");
  const auto& logits = archive.get("logits");
  const std::size_t labels = logits.cols();
  LogitShard shard;
  shard.checksum = archive.checksum;
  std::size_t row = 0;
  for (std::size_t s = 0; s + 1 < offsets.size(); ++s) {
    const auto begin = static_cast<std::size_t>(offsets[s]);
    const auto end = static_cast<std::size_t>(offsets[s + 1]);
    if (end < begin || end > ids.size() || (row + end - begin) > logits.rows()) {
      throw DataError(path.string() + ": inconsistent shard offsets");
    }
    std::vector<int> piece_ids;
    for (std::size_t i = begin; i < end; ++i) piece_ids.push_back(static_cast<int>(ids[i]));
    Tensor t({end - begin, labels});
    std::copy_n(logits.values().begin() + static_cast<std::ptrdiff_t>(row * labels), (end - begin) * labels,
                t.values().begin());
    row += end - begin;
    shard.piece_ids.push_back(std::move(piece_ids));
    shard.logits.push_back(std::move(t));
  }
  return shard;
}

LogitShard load_shards(const fs::path& dir, ShardManifest* manifest_out) {
  ShardManifest manifest = read_shard_manifest(dir);
  LogitShard all;
  for (const auto& entry : manifest.shards) {
    LogitShard s = read_shard(dir / entry.path, entry.checksum);
    if (s.segments() != entry.segments) throw DataError(entry.path + ": segment count mismatch");
    for (std::size_t i = 0; i < s.segments(); ++i) {
      if (s.logits[i].cols() != manifest.inventory.size()) {
        throw DataError(entry.path + ": logit width does not match the label inventory");
      }
      all.piece_ids.push_back(std::move(s.piece_ids[i]));
      all.logits.push_back(std::move(s.logits[i]));
    }
  }
  if (manifest_out) *manifest_out = std::move(manifest);
  return all;
}

Var distill_loss(const Tensor& teacher_logits, const Var& student_logits, double temperature) {
  if (teacher_logits.shape() != student_logits.shape()) {
    throw InvalidArgument("distill_loss: teacher logits " + shape_string(teacher_logits.shape()) +
                          " vs student logits " + shape_string(student_logits.shape()));
  }
  Tape& tape = student_logits.tape();
  Var target = tape.constant(softmax_with_temperature(teacher_logits, temperature));
  return cross_entropy(target, softmax(student_logits, temperature));
}

Var distill_loss(const Var& teacher_logits, const Var& student_logits, double temperature) {
  return distill_loss(teacher_logits.value(), student_logits, temperature);
}

DistillLog distill(TransformerTagger& student, const ShardManifest& manifest, const LogitShard& shards,
                   const DistillConfig& config, std::span<const Sentence> labeled,
                   const TrainConfig& finetune_config, const DistillOptions& options) {
  config.validate();
  if (!(student.inventory() == manifest.inventory)) {
    throw DataError("teacher and student label spaces differ (" + std::to_string(manifest.inventory.size()) +
                    " vs " + std::to_string(student.inventory().size()) + " labels)");
  }
  if (vocab_fingerprint(student.vocab()) != manifest.vocab_sha256) {
    throw DataError("student wordpiece vocabulary differs from the one the shards were made with");
  }
  if (shards.segments() == 0) throw DataError("distill: no teacher logits");

  const auto& vocab = student.vocab();
  std::vector<Encoding> encodings;
  for (const auto& ids : shards.piece_ids) {
    Encoding e;
    e.piece_ids.push_back(vocab.cls_id());
    e.piece_ids.insert(e.piece_ids.end(), ids.begin(), ids.end());
    e.piece_ids.push_back(vocab.sep_id());
    e.length = e.piece_ids.size();
    encodings.push_back(std::move(e));
  }

  DistillLog log;
  Adam adam(student.trainable(), config.learning_rate);
  const auto& params = adam.parameters();
  const std::size_t labels = manifest.inventory.size();
  bool first = true;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto order = epoch_order(encodings.size(), config.seed, epoch);
    double total = 0.0;
    std::size_t batches = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      std::vector<Encoding> batch;
      std::size_t rows = 0;
      for (std::size_t i = begin; i < end; ++i) {
        batch.push_back(encodings[order[i]]);
        rows += shards.logits[order[i]].rows();
      }
      Tensor teacher({rows, labels});
      std::size_t offset = 0;
      for (std::size_t i = begin; i < end; ++i) {
        const auto& t = shards.logits[order[i]];
        std::copy(t.values().begin(), t.values().end(), teacher.values().begin() + static_cast<std::ptrdiff_t>(offset));
        offset += t.size();
      }
      for (auto* p : params) p->grad.fill(0.0);
      Tape tape;
      Var loss = distill_loss(teacher, student.content_logits(tape, batch), config.temperature);
      const double value = loss.value()[0];
      if (!std::isfinite(value)) {
        throw NumericalError("non-finite distillation loss at epoch " + std::to_string(epoch) + ", step " +
                             std::to_string(adam.steps() + 1));
      }
      if (first) {
        log.initial_loss = value;
        first = false;
      }
      tape.backward(loss);
      if (!std::isfinite(clip_grad_norm(params, config.clip_norm))) {
        throw NumericalError("non-finite distillation gradient at epoch " + std::to_string(epoch));
      }
      adam.step();
      log.steps.push_back({epoch, adam.steps(), value});
      total += value;
      ++batches;
    }
    log.epoch_loss.push_back(total / static_cast<double>(batches));
    if (options.log) *options.log << "[distill] epoch " << epoch << " loss " << log.epoch_loss.back() << "\n";
  }

  if (!labeled.empty()) {
    FinetuneOptions opts;
    opts.dev = options.dev;
    opts.checkpoint_dir = options.checkpoint_dir;
    opts.log = options.log;
    opts.label = "[finetune] ";
    log.finetune = finetune(student, labeled, finetune_config, opts);
  }
  return log;
}

double agreement(Tagger& a, Tagger& b, std::span<const Sentence> sentences) {
  auto pa = a.predict(sentences);
  auto pb = b.predict(sentences);
  std::size_t same = 0, total = 0;
  for (std::size_t s = 0; s < pa.size(); ++s) {
    for (std::size_t t = 0; t < pa[s].size(); ++t) {
      same += pa[s][t].label == pb[s][t].label;
      ++total;
    }
  }
  if (total == 0) throw InvalidArgument("agreement: no tokens");
  return static_cast<double>(same) / static_cast<double>(total);
}

std::vector<TemperatureRun> temperature_sweep(TransformerTagger& teacher, const EncoderConfig& student_config,
                                              std::uint64_t student_seed, const ShardManifest& manifest,
                                              const LogitShard& shards, const DistillConfig& config,
                                              std::span<const Sentence> labeled,
                                              const TrainConfig& finetune_config,
                                              std::span<const Sentence> eval,
                                              std::span<const double> temperatures) {
  std::vector<TemperatureRun> out;
  for (double T : temperatures) {
    TransformerTagger student(student_config, teacher.vocab(), teacher.inventory(), student_seed,
                              teacher.max_len());
    DistillConfig c = config;
    c.temperature = T;
    auto log = distill(student, manifest, shards, c, labeled, finetune_config);
    out.push_back({T, agreement(teacher, student, eval), log.epoch_loss.back()});
  }
  return out;
}

}  // namespace distag
