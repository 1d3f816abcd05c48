#include "distag/experiments.hpp"

#include <iomanip>

#include "distag/errors.hpp"
#include "distag/evaluation.hpp"

namespace distag {

namespace {

// Students and the scratch baseline share an init so the only difference
// between them is the distillation phase.
constexpr std::uint64_t kStudentSeedOffset = 100;

EncoderConfig with_vocab(EncoderConfig c, std::size_t vocab) {
  c.vocab = vocab;
  c.validate();
  return c;
}

}  // namespace

AblationSpec AblationSpec::frozen(std::uint64_t seed) {
  AblationSpec s;
  s.data.seed = seed;
  s.data.languages = {{"syn_a", 100, 30, 200}, {"syn_b", 100, 30, 200}};
  s.data.unlabeled_per_language = 500;

  s.teacher.layers = 2;
  s.teacher.hidden = 64;
  s.teacher.intermediate = 256;
  s.teacher.heads = 4;
  s.teacher.max_positions = 64;
  s.teacher.initializer_range = 0.1;

  s.student = s.teacher;
  s.student.layers = 1;
  s.student.hidden = 4;
  s.student.intermediate = 16;
  s.student.heads = 1;

  s.teacher_training.learning_rate = 3e-3;
  s.teacher_training.batch_size = 16;
  s.teacher_training.epochs = 30;
  s.teacher_training.seed = seed;
  s.student_training = s.teacher_training;

  s.distill.temperature = 3.0;
  s.distill.learning_rate = 1e-2;
  s.distill.batch_size = 32;
  s.distill.epochs = 20;
  s.distill.seed = seed;
  return s;
}

nlohmann::json AblationSpec::to_json() const {
  return {{"data", data.to_json()},
          {"teacher", teacher.to_json()},
          {"student", student.to_json()},
          {"teacher_training", teacher_training.to_json()},
          {"distill", distill.to_json()},
          {"student_training", student_training.to_json()},
          {"max_len", max_len}};
}

AblationReport ablation_distill(const AblationSpec& spec, const std::filesystem::path& work_dir,
                                std::ostream* log) {
  const auto corpus = gen_synthetic(spec.data);
  const auto train = mix_treebanks(corpus.train, spec.data.seed);
  const auto inventory = LabelInventory::build({}, Task::pos);
  const std::size_t vocab = corpus.pieces.size();
  const std::uint64_t seed = spec.data.seed;

  FinetuneOptions options;
  options.dev = corpus.dev;
  options.log = log;

  TransformerTagger teacher(with_vocab(spec.teacher, vocab), corpus.vocab(), inventory, seed, spec.max_len);
  options.label = "[teacher] ";
  finetune(teacher, train, spec.teacher_training, options);

  std::filesystem::remove_all(work_dir);
  const auto manifest = generate_teacher_logits(teacher, corpus.unlabeled, work_dir, spec.distill.shard_size);
  const auto shards = load_shards(work_dir);

  const EncoderConfig student_config = with_vocab(spec.student, vocab);
  TransformerTagger student(student_config, corpus.vocab(), inventory, seed + kStudentSeedOffset,
                            spec.max_len);
  DistillOptions distill_options;
  distill_options.dev = corpus.dev;
  distill_options.log = log;
  distill(student, manifest, shards, spec.distill, train, spec.student_training, distill_options);

  TransformerTagger scratch(student_config, corpus.vocab(), inventory, seed + kStudentSeedOffset,
                            spec.max_len);
  options.label = "[scratch] ";
  finetune(scratch, train, spec.student_training, options);

  AblationReport report;
  report.seed = seed;
  report.teacher_f1 = evaluate(teacher, corpus.test, Task::pos).macro_f1;
  report.distilled_f1 = evaluate(student, corpus.test, Task::pos).macro_f1;
  report.scratch_f1 = evaluate(scratch, corpus.test, Task::pos).macro_f1;
  report.labeled_sentences = train.size();
  report.unlabeled_sentences = corpus.unlabeled.size();
  report.spec = spec.to_json();
  return report;
}

TransferSpec TransferSpec::frozen(std::uint64_t seed) {
  TransferSpec s;
  s.data.seed = seed;
  s.data.shared_fraction = 0.5;
  s.data.languages = {{"syn_hi", 200, 30, 200}, {"syn_lo", 30, 30, 200}};
  s.encoder.layers = 1;
  s.encoder.hidden = 32;
  s.encoder.intermediate = 128;
  s.encoder.heads = 2;
  s.encoder.max_positions = 64;
  s.encoder.initializer_range = 0.1;
  s.training.learning_rate = 3e-3;
  s.training.batch_size = 16;
  s.training.epochs = 10;
  s.training.seed = seed;
  return s;
}

nlohmann::json TransferSpec::to_json() const {
  return {{"data", data.to_json()},
          {"encoder", encoder.to_json()},
          {"training", training.to_json()},
          {"max_len", max_len}};
}

TransferReport lowresource_transfer(const TransferSpec& spec, std::ostream* log) {
  if (spec.data.languages.size() < 2) {
    throw InvalidArgument("lowresource_transfer: needs at least two languages");
  }
  const auto& tiny = spec.data.languages.back();
  if (tiny.train > 50) {
    throw InvalidArgument("lowresource_transfer: tiny language has " + std::to_string(tiny.train) +
                          " training sentences (at most 50)");
  }
  const auto corpus = gen_synthetic(spec.data);
  const auto inventory = LabelInventory::build({}, Task::pos);
  const EncoderConfig config = with_vocab(spec.encoder, corpus.pieces.size());
  const std::uint64_t seed = spec.data.seed;

  FinetuneOptions options;
  options.log = log;
  const auto all = mix_treebanks(corpus.train, seed);
  TransformerTagger multi(config, corpus.vocab(), inventory, seed, spec.max_len);
  options.label = "[multilingual] ";
  finetune(multi, all, spec.training, options);

  const std::vector<Treebank> own{corpus.train.back()};
  const auto own_train = mix_treebanks(own, seed);
  TransformerTagger mono(config, corpus.vocab(), inventory, seed, spec.max_len);
  options.label = "[per-language] ";
  finetune(mono, own_train, spec.training, options);

  const std::vector<Treebank> test{corpus.test.back()};
  TransferReport report;
  report.seed = seed;
  report.language = tiny.id;
  report.multilingual_f1 = evaluate(multi, test, Task::pos).macro_f1;
  report.per_language_f1 = evaluate(mono, test, Task::pos).macro_f1;
  report.per_language_train = own_train.size();
  report.multilingual_train = all.size();
  report.spec = spec.to_json();
  return report;
}

void write_ablation_csv(std::ostream& out, std::span<const AblationReport> reports) {
  out << "seed,teacher_f1,distilled_f1,scratch_f1,labeled,unlabeled\n" << std::setprecision(6);
  for (const auto& r : reports) {
    out << r.seed << ',' << r.teacher_f1 << ',' << r.distilled_f1 << ',' << r.scratch_f1 << ','
        << r.labeled_sentences << ',' << r.unlabeled_sentences << '\n';
  }
}

void write_transfer_csv(std::ostream& out, std::span<const TransferReport> reports) {
  out << "seed,language,per_language_f1,multilingual_f1,per_language_train,multilingual_train\n"
      << std::setprecision(6);
  for (const auto& r : reports) {
    out << r.seed << ',' << r.language << ',' << r.per_language_f1 << ',' << r.multilingual_f1 << ','
        << r.per_language_train << ',' << r.multilingual_train << '\n';
  }
}

}  // namespace distag
