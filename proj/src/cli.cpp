#include "distag/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "distag/bench.hpp"
#include "distag/conllu.hpp"
#include "distag/distillation.hpp"
#include "distag/embeddings.hpp"
#include "distag/errors.hpp"
#include "distag/evaluation.hpp"
#include "distag/experiments.hpp"
#include "distag/metalstm.hpp"
#include "distag/synthetic.hpp"
#include "distag/tagger.hpp"
#include "distag/training.hpp"

namespace fs = std::filesystem;

namespace distag {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  for (std::string item; std::getline(in, item, ',');) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::size_t to_size(const std::string& key, const std::string& value) {
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(value, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != value.size() || value.empty() || value[0] == '-') {
    throw InvalidArgument(key + ": expected a non-negative integer, got '" + value + "'");
  }
  return static_cast<std::size_t>(v);
}

double to_double(const std::string& key, const std::string& value) {
  std::size_t pos = 0;
  double v = 0;
  try {
    v = std::stod(value, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != value.size() || value.empty()) {
    throw InvalidArgument(key + ": expected a number, got '" + value + "'");
  }
  return v;
}

EncoderConfig preset_config(const std::string& name, std::size_t vocab) {
  if (name == "minibert") return EncoderConfig::minibert(vocab);
  if (name == "bert-base") return EncoderConfig::bert_base(vocab);
  throw InvalidArgument("unknown encoder preset '" + name + "' (minibert, bert-base)");
}

// Records sha256 of every input file; directories contribute each regular
// file beneath them.
class InputLog {
 public:
  void file(const fs::path& path) {
    if (!fs::is_regular_file(path)) throw DataError("missing input file: " + path.string());
    sums_[path.string()] = sha256_file(path);
  }
  void dir(const fs::path& path) {
    if (!fs::is_directory(path)) throw DataError("missing input directory: " + path.string());
    for (const auto& e : fs::recursive_directory_iterator(path)) {
      if (e.is_regular_file()) sums_[e.path().string()] = sha256_file(e.path());
    }
  }
  void treebank_manifest(const fs::path& path) {
    file(path);
    for (const auto& entry : read_treebank_manifest(path)) file(entry.path);
  }
  nlohmann::json to_json() const { return sums_; }

 private:
  std::map<std::string, std::string> sums_;
};

std::string effective_value(const CLI::Option* opt) {
  if (opt->count() > 0) return opt->results().back();
  return opt->get_default_str();
}

// Flags record their default so run.cfg states every boolean explicitly.
CLI::Option* add_bool(CLI::App* app, const std::string& name, bool& value, const std::string& help) {
  return app->add_flag(name, value, help)->default_str(value ? "true" : "false");
}

bool is_bookkeeping(const CLI::Option* opt) {
  const std::string name = opt->get_single_name();
  return name == "help" || name == "config" || name == "version" || name.empty();
}

// run.json (config, seed, version, input checksums) plus run.cfg, which
// can be fed back through --config to repeat the run.
void write_run_manifest(const fs::path& json_path, const CLI::App& sub, std::uint64_t seed,
                        const InputLog& inputs) {
  nlohmann::json config = nlohmann::json::object();
  std::ostringstream cfg;
  cfg << "# " << sub.get_name() << " run, distag " << DISTAG_VERSION << "\n";
  for (const CLI::Option* opt : sub.get_options()) {
    if (is_bookkeeping(opt)) continue;
    const std::string value = effective_value(opt);
    config[opt->get_single_name()] = value;
    if (!value.empty()) cfg << opt->get_single_name() << " = " << value << "\n";
  }
  nlohmann::json j = {{"command", sub.get_name()},
                      {"version", DISTAG_VERSION},
                      {"seed", seed},
                      {"config", config},
                      {"inputs", inputs.to_json()}};
  if (json_path.has_parent_path()) fs::create_directories(json_path.parent_path());
  std::ofstream(json_path) << j.dump(2) << "\n";
  fs::path cfg_path = json_path;
  cfg_path.replace_extension(".cfg");
  std::ofstream(cfg_path) << cfg.str();
}

// Encoder flags shared by params, train and bench. Explicit values
// override the preset.
struct EncoderFlags {
  std::string preset = "minibert";
  std::size_t layers = 3, hidden = 256, intermediate = 1024, heads = 4, max_positions = 512;
  double initializer_range = 0.02;
  std::vector<std::pair<CLI::Option*, std::function<void(EncoderConfig&)>>> overrides;

  void add(CLI::App* app) {
    app->add_option("--preset", preset, "encoder preset: minibert (3x256) or bert-base (12x768)")
        ->check(CLI::IsMember({"minibert", "bert-base"}));
    auto reg = [&](CLI::Option* opt, std::function<void(EncoderConfig&)> apply) {
      overrides.emplace_back(opt, std::move(apply));
    };
    reg(app->add_option("--layers", layers, "transformer layers (overrides preset)"),
        [this](EncoderConfig& c) { c.layers = layers; });
    reg(app->add_option("--hidden", hidden, "hidden width (overrides preset)"),
        [this](EncoderConfig& c) { c.hidden = hidden; });
    reg(app->add_option("--intermediate", intermediate, "feed-forward width (overrides preset)"),
        [this](EncoderConfig& c) { c.intermediate = intermediate; });
    reg(app->add_option("--heads", heads, "attention heads (overrides preset)"),
        [this](EncoderConfig& c) { c.heads = heads; });
    reg(app->add_option("--max-positions", max_positions, "position table size (overrides preset)"),
        [this](EncoderConfig& c) { c.max_positions = max_positions; });
    reg(app->add_option("--initializer-range", initializer_range,
                        "stddev of the normal weight init; published setting 0.02"),
        [this](EncoderConfig& c) { c.initializer_range = initializer_range; });
  }

  EncoderConfig resolve(std::size_t vocab) const {
    EncoderConfig c = preset_config(preset, vocab);
    for (const auto& [opt, apply] : overrides) {
      if (opt->count() > 0) apply(c);
    }
    c.validate();
    return c;
  }
};

struct TrainFlags {
  TrainConfig config;
  std::string task = "pos";

  void add(CLI::App* app) {
    app->add_option("--learning-rate", config.learning_rate,
                    "finetuning learning rate; published setting 3e-5");
    app->add_option("--batch-size", config.batch_size, "sentences per batch; published setting 16");
    app->add_option("--epochs", config.epochs,
                    "training epochs; published setting 10 for pos, 50 for morph");
    app->add_option("--clip-norm", config.clip_norm, "global gradient norm cap");
    app->add_option("--weight-decay", config.weight_decay, "decoupled weight decay");
    app->add_option("--task", task, "label column: pos (UPOS) or morph (FEATS)")
        ->check(CLI::IsMember({"pos", "morph"}));
  }

  TrainConfig resolve(std::uint64_t seed) const {
    TrainConfig c = config;
    c.seed = seed;
    c.task = parse_task(task);
    c.validate();
    return c;
  }
};

std::vector<Treebank> load_gold(const fs::path& path, InputLog& inputs) {
  if (path.extension() == ".conllu") {
    inputs.file(path);
    return {Treebank{path.stem().string(), read_conllu(path, path.stem().string())}};
  }
  inputs.treebank_manifest(path);
  return load_treebanks(path);
}

void print_encoder(std::ostream& out, const EncoderConfig& c) {
  out << "layers " << c.layers << ", hidden " << c.hidden << ", intermediate " << c.intermediate
      << ", heads " << c.heads << ", vocab " << c.vocab << ", max_positions " << c.max_positions << "\n";
}

// ---- params ----

struct ParamsCommand {
  EncoderFlags encoder;
  std::size_t vocab = 119547;
  std::string seq_lens = "32,128";

  void add(CLI::App* app) {
    encoder.add(app);
    app->add_option("--vocab", vocab, "wordpiece vocabulary size; published setting 119547");
    app->add_option("--seq-lens", seq_lens, "comma-separated sequence lengths for the FLOP table");
  }

  void run(std::ostream& out) const {
    const EncoderConfig c = encoder.resolve(vocab);
    const ParameterBreakdown p = count_parameters(c);
    print_encoder(out, c);
    out << std::left << std::setw(12) << "component" << std::right << std::setw(14) << "parameters" << "\n";
    out << std::left << std::setw(12) << "embedding" << std::right << std::setw(14) << p.embedding << "\n";
    out << std::left << std::setw(12) << "hidden" << std::right << std::setw(14) << p.hidden << "\n";
    out << std::left << std::setw(12) << "total" << std::right << std::setw(14) << p.total() << "\n\n";
    out << std::left << std::setw(8) << "seq_len" << std::right << std::setw(18) << "attention_n2"
        << std::setw(18) << "projections" << std::setw(18) << "ffn" << std::setw(18) << "total" << "\n";
    out << std::fixed << std::setprecision(0);
    for (const auto& s : split_list(seq_lens)) {
      const std::size_t n = to_size("seq-lens", s);
      const FlopBreakdown f = count_flops(c, n);
      out << std::left << std::setw(8) << n << std::right << std::setw(18) << f.attention_quadratic
          << std::setw(18) << f.projections << std::setw(18) << f.ffn << std::setw(18) << f.total() << "\n";
    }
    out.unsetf(std::ios::fixed);
  }
};

// ---- gen-synthetic ----

struct GenCommand {
  SyntheticTaskSpec spec;
  std::string languages = "syn_a:100:50:50,syn_b:100:50:50";
  std::string out_dir;
  std::size_t embedding_dim = 16;

  void add(CLI::App* app) {
    app->add_option("--out", out_dir, "output directory")->required();
    app->add_option("--languages", languages, "comma-separated id:train:dev:test");
    app->add_option("--stems-per-language", spec.stems_per_language, "stems per language");
    app->add_option("--suffixes-per-language", spec.suffixes_per_language, "suffixes per language");
    app->add_option("--shared-fraction", spec.shared_fraction, "fraction of stems and suffixes shared by all languages");
    app->add_option("--min-length", spec.min_length, "shortest sentence in tokens");
    app->add_option("--max-length", spec.max_length, "longest sentence in tokens");
    app->add_option("--unlabeled-per-language", spec.unlabeled_per_language, "unlabeled sentences per language");
    app->add_option("--embedding-dim", embedding_dim, "width of the random word vectors in embeddings.vec");
    add_bool(app, "--context-rule", spec.context_rule, "one suffix per language is tagged by the previous token");
  }

  void run(const CLI::App& sub, std::uint64_t seed, std::ostream& out) {
    spec.seed = seed;
    spec.languages.clear();
    for (const auto& item : split_list(languages)) {
      std::vector<std::string> parts;
      std::stringstream in(item);
      for (std::string p; std::getline(in, p, ':');) parts.push_back(p);
      if (parts.size() != 4) throw InvalidArgument("languages: expected id:train:dev:test, got '" + item + "'");
      spec.languages.push_back({parts[0], to_size("languages", parts[1]), to_size("languages", parts[2]),
                                to_size("languages", parts[3])});
    }
    spec.validate();
    const auto corpus = gen_synthetic(spec);
    write_synthetic(corpus, out_dir);
    std::ofstream vec(fs::path(out_dir) / "embeddings.vec");
    write_embeddings(vec, synthetic_embeddings(corpus, embedding_dim, seed));
    write_run_manifest(fs::path(out_dir) / "run.json", sub, seed, InputLog{});
    out << "wrote " << corpus.train.size() << " languages, " << corpus.pieces.size() << " wordpieces to "
        << out_dir << "\n";
  }
};

// ---- train ----

struct TrainCommand {
  std::string model = "transformer";
  std::string train, dev, vocab, embeddings, resume, out_dir;
  std::size_t max_len = 128;
  EncoderFlags encoder;
  TrainFlags training;
  MetaLstmConfig lstm;
  bool skip_pretraining = false;
  std::size_t stage_epochs = 0;

  void add(CLI::App* app) {
    app->add_option("--model", model, "tagger architecture")->check(CLI::IsMember({"transformer", "metalstm"}));
    app->add_option("--train", train, "treebank manifest of training data")->required();
    app->add_option("--dev", dev, "treebank manifest for model selection");
    app->add_option("--vocab", vocab, "wordpiece vocabulary (transformer)");
    app->add_option("--embeddings", embeddings, "comma-separated .vec files, unioned (metalstm)");
    app->add_option("--resume", resume, "continue from an epoch-<k> checkpoint (transformer)");
    app->add_option("--out", out_dir, "output directory")->required();
    app->add_option("--max-len", max_len, "wordpieces per model input including [CLS] and [SEP]");
    encoder.add(app);
    training.add(app);
    app->add_option("--char-emb-dim", lstm.char_emb_dim, "character embedding width (metalstm)");
    app->add_option("--char-hidden", lstm.char_hidden, "character LSTM width per direction (metalstm)");
    app->add_option("--word-hidden", lstm.word_hidden, "word LSTM width per direction (metalstm)");
    app->add_option("--joint-hidden", lstm.joint_hidden, "joint LSTM width per direction (metalstm)");
    add_bool(app, "--skip-pretraining", skip_pretraining, "train the joint stage only (metalstm)");
    app->add_option("--stage-epochs", stage_epochs, "epochs for the char and word stages; 0 uses --epochs");
  }

  void run(const CLI::App& sub, std::uint64_t seed, std::ostream& out, std::ostream& err) {
    InputLog inputs;
    const TrainConfig config = training.resolve(seed);
    inputs.treebank_manifest(train);
    const auto train_banks = load_treebanks(train);
    const auto stream = mix_treebanks(train_banks, seed);
    std::vector<Treebank> dev_banks;
    if (!dev.empty()) {
      inputs.treebank_manifest(dev);
      dev_banks = load_treebanks(dev);
    }
    const fs::path root(out_dir);
    fs::create_directories(root);
    FinetuneOptions options;
    options.dev = dev_banks;
    options.checkpoint_dir = root / "checkpoints";
    options.log = &err;

    std::unique_ptr<Tagger> tagger;
    TrainLog log;
    if (!resume.empty()) {
      inputs.dir(resume);
      auto resumed = resume_finetune(resume, stream, options);
      tagger = std::move(resumed.tagger);
      log = std::move(resumed.log);
    } else if (model == "transformer") {
      if (vocab.empty()) throw InvalidArgument("train: --vocab is required for the transformer model");
      inputs.file(vocab);
      WordpieceVocab pieces = WordpieceVocab::load(fs::path(vocab));
      auto t = std::make_unique<TransformerTagger>(encoder.resolve(pieces.size()), pieces,
                                                   LabelInventory::build(stream, config.task), seed, max_len);
      log = finetune(*t, stream, config, options);
      tagger = std::move(t);
    } else {
      if (embeddings.empty()) throw InvalidArgument("train: --embeddings is required for the metalstm model");
      std::vector<EmbeddingTable> tables;
      for (const auto& path : split_list(embeddings)) {
        inputs.file(path);
        tables.push_back(load_embeddings(fs::path(path)));
      }
      const EmbeddingTable table = union_embeddings(tables);
      MetaLstmModel m(lstm, MetaLstmModel::collect_chars(stream), table, seed);
      auto t = std::make_unique<MetaLstmTagger>(std::move(m), LabelInventory::build(stream, config.task), seed);
      StagedOptions staged;
      staged.skip_pretraining = skip_pretraining;
      staged.stage_epochs = stage_epochs;
      staged.finetune = options;
      auto staged_log = train_metalstm_staged(*t, stream, config, staged);
      log = staged_log.logs.back();
      tagger = std::move(t);
    }
    tagger->save(root / "model", {{"train_log", log.to_json()}});
    std::ofstream csv(root / "loss.csv");
    log.write_csv(csv);
    write_run_manifest(root / "run.json", sub, seed, inputs);
    out << "saved " << tagger->kind() << " tagger to " << (root / "model").string();
    if (log.best_epoch > 0) out << " (best dev macro F1 " << log.best_dev_f1 << " at epoch " << log.best_epoch << ")";
    out << "\n";
  }
};

// ---- distill ----

struct DistillCommand {
  std::string teacher, unlabeled, shards, vocab, student_config, labeled, dev, out_dir;
  DistillConfig config;
  TrainFlags finetune;
  std::size_t max_len = 128;
  std::uint64_t student_seed = 0;

  void add(CLI::App* app) {
    app->add_option("--teacher", teacher, "teacher checkpoint directory (transformer)");
    app->add_option("--unlabeled", unlabeled, "unlabeled text, one sentence per line");
    app->add_option("--shards", shards, "logit shard directory; reused when it holds shards.json, else written");
    app->add_option("--vocab", vocab, "wordpiece vocabulary when training from existing shards without a teacher");
    app->add_option("--student-config", student_config, "key=value encoder config for the student (default minibert)");
    app->add_option("--labeled", labeled, "treebank manifest for the finetuning phase (omit to skip it)");
    app->add_option("--dev", dev, "treebank manifest for model selection in the finetuning phase");
    app->add_option("--out", out_dir, "output directory")->required();
    app->add_option("--temperature", config.temperature, "softmax temperature; published setting 3");
    app->add_option("--distill-learning-rate", config.learning_rate, "distillation learning rate; published setting 1e-4");
    app->add_option("--distill-batch-size", config.batch_size, "segments per distillation batch; published setting 256");
    app->add_option("--distill-epochs", config.epochs, "distillation epochs; published setting 24");
    app->add_option("--min-sentence-chars", config.min_sentence_chars,
                    "drop unlabeled lines shorter than this; published setting 10");
    app->add_option("--shard-size", config.shard_size, "segments per logit shard");
    app->add_option("--max-len", max_len, "wordpieces per student input including [CLS] and [SEP]");
    app->add_option("--student-seed", student_seed, "student initialization seed");
    finetune.add(app);
  }

  void run(const CLI::App& sub, std::uint64_t seed, std::ostream& out, std::ostream& err) {
    InputLog inputs;
    const fs::path root(out_dir);
    fs::create_directories(root);
    const fs::path shard_dir = shards.empty() ? root / "shards" : fs::path(shards);
    const bool reuse = fs::exists(shard_dir / std::string(kShardManifest));

    std::unique_ptr<TransformerTagger> teacher_model;
    if (!teacher.empty()) {
      inputs.dir(teacher);
      teacher_model = load_transformer_tagger(teacher);
    }
    WordpieceVocab pieces;
    if (teacher_model) {
      pieces = teacher_model->vocab();
    } else if (!vocab.empty()) {
      inputs.file(vocab);
      pieces = WordpieceVocab::load(fs::path(vocab));
    } else {
      throw InvalidArgument("distill: need --teacher, or --vocab with existing --shards");
    }

    if (!reuse) {
      if (!teacher_model) throw InvalidArgument("distill: no shards at " + shard_dir.string() + " and no --teacher");
      if (unlabeled.empty()) throw InvalidArgument("distill: --unlabeled is required to generate shards");
      inputs.file(unlabeled);
      const auto sentences = prepare_unlabeled(fs::path(unlabeled), config.min_sentence_chars);
      err << "[distill] " << sentences.size() << " unlabeled sentences\n";
      generate_teacher_logits(*teacher_model, sentences, shard_dir, config.shard_size, &pieces);
    } else {
      inputs.dir(shard_dir);
    }
    ShardManifest manifest;
    const LogitShard logits = load_shards(shard_dir, &manifest);

    std::map<std::string, std::string> keys;
    if (!student_config.empty()) {
      inputs.file(student_config);
      keys = read_key_values(student_config);
    }
    const EncoderConfig student_encoder = encoder_from_keys(keys, pieces.size());
    TransformerTagger student(student_encoder, pieces, manifest.inventory, student_seed, max_len);

    std::vector<Sentence> labeled_stream;
    if (!labeled.empty()) {
      inputs.treebank_manifest(labeled);
      labeled_stream = mix_treebanks(load_treebanks(labeled), seed);
    }
    std::vector<Treebank> dev_banks;
    if (!dev.empty()) {
      inputs.treebank_manifest(dev);
      dev_banks = load_treebanks(dev);
    }
    config.seed = seed;
    DistillOptions options;
    options.dev = dev_banks;
    options.checkpoint_dir = labeled.empty() ? fs::path() : root / "checkpoints";
    options.log = &err;
    TrainConfig finetune_config = finetune.resolve(seed);
    finetune_config.task = manifest.inventory.task();
    const DistillLog log = distill(student, manifest, logits, config, labeled_stream, finetune_config, options);

    student.save(root / "student", {{"distill_config", config.to_json()}});
    std::ofstream csv(root / "distill_loss.csv");
    csv << "epoch,step,loss\n" << std::setprecision(17);
    for (const auto& p : log.steps) csv << p.epoch << ',' << p.step << ',' << p.loss << '\n';
    if (!labeled.empty()) {
      std::ofstream ft(root / "loss.csv");
      log.finetune.write_csv(ft);
    }
    write_run_manifest(root / "run.json", sub, seed, inputs);
    out << "distillation loss " << log.initial_loss << " -> "
        << (log.epoch_loss.empty() ? log.initial_loss : log.epoch_loss.back()) << "; saved student to "
        << (root / "student").string() << "\n";
  }
};

// ---- tag ----

struct TagCommand {
  std::string model, input, output;
  bool codemixed = false;

  void add(CLI::App* app) {
    app->add_option("--model", model, "checkpoint directory")->required();
    app->add_option("--input", input, "CoNLL-U file to tag")->required();
    app->add_option("--output", output, "CoNLL-U output (stdout when empty)");
    add_bool(app, "--codemixed", codemixed, "replace X predictions with the second-best label");
  }

  void run(const CLI::App& sub, std::uint64_t seed, std::ostream& out) {
    InputLog inputs;
    inputs.dir(model);
    inputs.file(input);
    auto tagger = load_tagger(model);
    const auto sentences = read_conllu(input);
    const auto tagged = tag_sentences(*tagger, sentences, codemixed);
    if (output.empty()) {
      write_conllu(out, tagged);
      return;
    }
    {
      if (fs::path(output).has_parent_path()) fs::create_directories(fs::path(output).parent_path());
      std::ofstream file(output);
      write_conllu(file, tagged);
    }
    write_run_manifest(output + ".run.json", sub, seed, inputs);
  }
};

// ---- eval ----

struct EvalCommand {
  std::string model, gold, task, output;
  bool codemixed = false, table = false;

  void add(CLI::App* app) {
    app->add_option("--model", model, "checkpoint directory")->required();
    app->add_option("--gold", gold, "gold .conllu file or treebank manifest")->required();
    app->add_option("--task", task, "pos or morph (default: the model's task)")->check(CLI::IsMember({"pos", "morph"}));
    add_bool(app, "--codemixed", codemixed, "replace X predictions with the second-best label");
    add_bool(app, "--table", table, "print a table instead of CSV");
    app->add_option("--output", output, "also write the CSV report here");
  }

  void run(const CLI::App& sub, std::uint64_t seed, std::ostream& out) {
    InputLog inputs;
    inputs.dir(model);
    auto tagger = load_tagger(model);
    const auto banks = load_gold(gold, inputs);
    const Task t = task.empty() ? tagger->inventory().task() : parse_task(task);
    const EvalReport report = evaluate(*tagger, banks, t, codemixed);
    if (table) {
      report.write_table(out);
    } else {
      report.write_csv(out);
    }
    if (!output.empty()) {
      if (fs::path(output).has_parent_path()) fs::create_directories(fs::path(output).parent_path());
      std::ofstream file(output);
      report.write_csv(file);
      write_run_manifest(output + ".run.json", sub, seed, inputs);
    }
  }
};

// ---- bench ----

struct BenchCommand {
  std::string models = "minibert", reference = "bert-base", seq_lens = "32,128", output;
  std::size_t runs = 30, warmup = 5, vocab = 1000;

  void add(CLI::App* app) {
    app->add_option("--models", models, "comma-separated checkpoint directories or presets (minibert, bert-base)");
    app->add_option("--reference", reference, "checkpoint directory or preset that speedups are relative to");
    app->add_option("--seq-lens", seq_lens, "comma-separated sequence lengths; published setting 32,128");
    app->add_option("--runs", runs, "timed runs per cell (median reported)");
    app->add_option("--warmup", warmup, "untimed runs before timing");
    app->add_option("--vocab", vocab, "embedding rows for preset models (does not affect FLOPs)");
    app->add_option("--output", output, "also write the CSV report here");
  }

  void run(const CLI::App& sub, std::uint64_t seed, std::ostream& out) {
    InputLog inputs;
    std::vector<std::unique_ptr<TransformerModel>> owned;
    std::vector<std::unique_ptr<TransformerTagger>> taggers;
    auto target = [&](const std::string& spec) -> BenchTarget {
      if (spec == "minibert" || spec == "bert-base") {
        owned.push_back(std::make_unique<TransformerModel>(preset_config(spec, vocab), seed));
        return {spec, owned.back().get()};
      }
      inputs.dir(spec);
      taggers.push_back(load_transformer_tagger(spec));
      std::string id = spec;
      while (id.size() > 1 && id.back() == '/') id.pop_back();
      return {id, &taggers.back()->encoder()};
    };
    const BenchTarget ref = target(reference);
    std::vector<BenchTarget> list;
    for (const auto& m : split_list(models)) list.push_back(target(m));
    BenchOptions options;
    options.seq_lens.clear();
    for (const auto& s : split_list(seq_lens)) options.seq_lens.push_back(to_size("seq-lens", s));
    options.runs = runs;
    options.warmup = warmup;
    const auto reports = bench(list, ref, options);
    out << "speedup vs " << ref.id << " (batch 1, wall clock and FLOP ratio)\n";
    write_bench_table(out, reports);
    if (!output.empty()) {
      if (fs::path(output).has_parent_path()) fs::create_directories(fs::path(output).parent_path());
      std::ofstream file(output);
      write_bench_csv(file, reports);
      write_run_manifest(output + ".run.json", sub, seed, inputs);
    }
  }
};

// ---- ablate ----

struct AblateCommand {
  std::string experiment = "distill", out_dir;
  std::size_t seeds = 5;
  double shared_fraction = -1.0;

  void add(CLI::App* app) {
    app->add_option("--experiment", experiment, "distill (teacher / distilled / scratch) or lowresource")
        ->check(CLI::IsMember({"distill", "lowresource"}));
    app->add_option("--seeds", seeds, "number of seeds, starting at --seed");
    app->add_option("--shared-fraction", shared_fraction,
                    "lowresource only: shared vocabulary fraction (negative keeps the frozen 0.5)");
    app->add_option("--out", out_dir, "output directory for CSV, per-seed reports and shards");
  }

  void run(const CLI::App& sub, std::uint64_t seed, std::ostream& out, std::ostream& err) {
    if (seeds == 0) throw InvalidArgument("ablate: --seeds must be positive");
    const fs::path root = out_dir.empty() ? fs::temp_directory_path() / "distag_ablate" : fs::path(out_dir);
    fs::create_directories(root);
    nlohmann::json per_seed = nlohmann::json::array();
    std::ostringstream csv;
    if (experiment == "distill") {
      std::vector<AblationReport> reports;
      std::vector<double> t, d, s;
      for (std::size_t i = 0; i < seeds; ++i) {
        const AblationSpec spec = AblationSpec::frozen(seed + i);
        reports.push_back(ablation_distill(spec, root / ("shards-" + std::to_string(seed + i)), nullptr));
        const auto& r = reports.back();
        err << "[ablate] seed " << r.seed << " teacher " << r.teacher_f1 << " distilled " << r.distilled_f1
            << " scratch " << r.scratch_f1 << "\n";
        t.push_back(r.teacher_f1);
        d.push_back(r.distilled_f1);
        s.push_back(r.scratch_f1);
        per_seed.push_back({{"seed", r.seed}, {"teacher_f1", r.teacher_f1}, {"distilled_f1", r.distilled_f1},
                            {"scratch_f1", r.scratch_f1}, {"spec", r.spec}});
      }
      write_ablation_csv(csv, reports);
      out << csv.str() << "median teacher " << median(t) << " distilled " << median(d) << " scratch "
          << median(s) << "\n";
    } else {
      std::vector<TransferReport> reports;
      std::vector<double> mono, multi;
      for (std::size_t i = 0; i < seeds; ++i) {
        TransferSpec spec = TransferSpec::frozen(seed + i);
        if (shared_fraction >= 0.0) spec.data.shared_fraction = shared_fraction;
        reports.push_back(lowresource_transfer(spec, nullptr));
        const auto& r = reports.back();
        err << "[ablate] seed " << r.seed << " per-language " << r.per_language_f1 << " multilingual "
            << r.multilingual_f1 << "\n";
        mono.push_back(r.per_language_f1);
        multi.push_back(r.multilingual_f1);
        per_seed.push_back({{"seed", r.seed}, {"per_language_f1", r.per_language_f1},
                            {"multilingual_f1", r.multilingual_f1}, {"spec", r.spec}});
      }
      write_transfer_csv(csv, reports);
      out << csv.str() << "median per-language " << median(mono) << " multilingual " << median(multi) << "\n";
    }
    std::ofstream(root / (experiment + ".csv")) << csv.str();
    std::ofstream(root / (experiment + ".json")) << per_seed.dump(2) << "\n";
    write_run_manifest(root / "run.json", sub, seed, InputLog{});
  }
};

// Config file keys become --key=value arguments placed before the user's
// own, so explicit flags win (every option keeps its last value).
std::vector<std::string> expand_config(std::span<const std::string> args) {
  std::vector<std::string> out;
  std::vector<std::string> from_config;
  for (std::size_t i = 0; i < args.size(); ++i) {
    std::string path;
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[i + 1];
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
    }
    if (!path.empty()) {
      for (const auto& [key, value] : read_key_values(path)) {
        if (key != "config") from_config.push_back("--" + key + "=" + value);
      }
    }
  }
  if (args.empty()) return out;
  out.push_back(args[0]);
  out.insert(out.end(), from_config.begin(), from_config.end());
  out.insert(out.end(), args.begin() + 1, args.end());
  return out;
}

}  // namespace

std::map<std::string, std::string> read_key_values(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot read config file " + path.string());
  std::map<std::string, std::string> out;
  std::size_t number = 0;
  for (std::string line; std::getline(in, line);) {
    ++number;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw InvalidArgument(path.string() + ":" + std::to_string(number) + ": expected key = value");
    }
    std::string key = trim(t.substr(0, eq));
    std::replace(key.begin(), key.end(), '_', '-');
    if (key.empty()) throw InvalidArgument(path.string() + ":" + std::to_string(number) + ": empty key");
    out[key] = trim(t.substr(eq + 1));
  }
  return out;
}

EncoderConfig encoder_from_keys(const std::map<std::string, std::string>& keys, std::size_t vocab) {
  auto it = keys.find("preset");
  EncoderConfig c = preset_config(it == keys.end() ? "minibert" : it->second, vocab);
  for (const auto& [key, value] : keys) {
    if (key == "preset") continue;
    if (key == "layers") c.layers = to_size(key, value);
    else if (key == "hidden") c.hidden = to_size(key, value);
    else if (key == "intermediate") c.intermediate = to_size(key, value);
    else if (key == "heads") c.heads = to_size(key, value);
    else if (key == "max-positions") c.max_positions = to_size(key, value);
    else if (key == "initializer-range") c.initializer_range = to_double(key, value);
    else throw InvalidArgument("unknown encoder config key '" + key + "'");
  }
  c.validate();
  return c;
}

int run_cli(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multilingual POS and morphology tagging with teacher-student distillation", "distag"};
  app.set_version_flag("--version", DISTAG_VERSION);
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  std::uint64_t seed = 0;
  std::string config_path;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "key=value file; keys mirror the long flags, flags win");
    sub->add_option("--seed", seed, "seed for every random choice in the run");
  };

  ParamsCommand params;
  GenCommand gen;
  TrainCommand train;
  DistillCommand dist;
  TagCommand tag;
  EvalCommand eval;
  BenchCommand benchc;
  AblateCommand ablate;
  auto* params_app = app.add_subcommand("params", "parameter and FLOP counts for an encoder config");
  auto* gen_app = app.add_subcommand("gen-synthetic", "write a synthetic multilingual treebank set");
  auto* train_app = app.add_subcommand("train", "train a transformer or Meta-LSTM tagger");
  auto* distill_app = app.add_subcommand("distill", "distill a transformer teacher into a student");
  auto* tag_app = app.add_subcommand("tag", "tag a CoNLL-U file");
  auto* eval_app = app.add_subcommand("eval", "per-treebank and macro F1 against gold files");
  auto* bench_app = app.add_subcommand("bench", "batch-1 inference latency and FLOP speedups");
  auto* ablate_app = app.add_subcommand("ablate", "frozen toy experiments over several seeds");
  for (auto* sub : {params_app, gen_app, train_app, distill_app, tag_app, eval_app, bench_app, ablate_app}) {
    common(sub);
  }
  params.add(params_app);
  gen.add(gen_app);
  train.add(train_app);
  dist.add(distill_app);
  tag.add(tag_app);
  eval.add(eval_app);
  benchc.add(bench_app);
  ablate.add(ablate_app);

  try {
    std::vector<std::string> expanded = expand_config(args);
    std::reverse(expanded.begin(), expanded.end());
    app.parse(expanded);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  } catch (const InvalidArgument& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (params_app->parsed()) params.run(out);
    if (gen_app->parsed()) gen.run(*gen_app, seed, out);
    if (train_app->parsed()) train.run(*train_app, seed, out, err);
    if (distill_app->parsed()) dist.run(*distill_app, seed, out, err);
    if (tag_app->parsed()) tag.run(*tag_app, seed, out);
    if (eval_app->parsed()) eval.run(*eval_app, seed, out);
    if (bench_app->parsed()) benchc.run(*bench_app, seed, out);
    if (ablate_app->parsed()) ablate.run(*ablate_app, seed, out, err);
  } catch (const InvalidArgument& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitOk;
}

}  // namespace distag
