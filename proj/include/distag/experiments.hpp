#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <ostream>
#include <span>
#include <vector>

#include <json.hpp>

#include "distag/distillation.hpp"
#include "distag/synthetic.hpp"
#include "distag/training.hpp"
#include "distag/transformer.hpp"

namespace distag {

// Teacher vs distilled student vs the same student trained on labels only.
// Encoder vocab sizes are filled in from the generated corpus.
struct AblationSpec {
  SyntheticTaskSpec data;
  EncoderConfig teacher;
  EncoderConfig student;
  TrainConfig teacher_training;
  DistillConfig distill;
  TrainConfig student_training;  // distillation phase 2 and the from-scratch run
  std::size_t max_len = 64;

  // Settings fixed after the pilot: the student is too narrow to learn the
  // task from the labeled set alone.
  static AblationSpec frozen(std::uint64_t seed);
  nlohmann::json to_json() const;
};

struct AblationReport {
  std::uint64_t seed = 0;
  double teacher_f1 = 0.0;
  double distilled_f1 = 0.0;
  double scratch_f1 = 0.0;
  std::size_t labeled_sentences = 0;
  std::size_t unlabeled_sentences = 0;
  nlohmann::json spec;
};

// work_dir receives the teacher logit shards.
AblationReport ablation_distill(const AblationSpec& spec, const std::filesystem::path& work_dir,
                                std::ostream* log = nullptr);

// The last language of the data spec is the tiny one.
struct TransferSpec {
  SyntheticTaskSpec data;
  EncoderConfig encoder;
  TrainConfig training;
  std::size_t max_len = 64;

  static TransferSpec frozen(std::uint64_t seed);
  nlohmann::json to_json() const;
};

struct TransferReport {
  std::uint64_t seed = 0;
  std::string language;
  double per_language_f1 = 0.0;
  double multilingual_f1 = 0.0;
  std::size_t per_language_train = 0;
  std::size_t multilingual_train = 0;
  nlohmann::json spec;
};

TransferReport lowresource_transfer(const TransferSpec& spec, std::ostream* log = nullptr);

void write_ablation_csv(std::ostream& out, std::span<const AblationReport> reports);
void write_transfer_csv(std::ostream& out, std::span<const TransferReport> reports);

}  // namespace distag
