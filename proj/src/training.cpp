#include "distag/training.hpp"

#include <cmath>
#include <numeric>

#include "distag/errors.hpp"
#include "distag/evaluation.hpp"

namespace distag {

namespace fs = std::filesystem;

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw InvalidArgument("learning_rate must be positive");
  if (batch_size == 0) throw InvalidArgument("batch_size must be positive");
  if (epochs == 0) throw InvalidArgument("epochs must be positive");
  if (!(clip_norm > 0.0)) throw InvalidArgument("clip_norm must be positive");
  if (weight_decay < 0.0) throw InvalidArgument("weight_decay must be non-negative");
}

nlohmann::json TrainConfig::to_json() const {
  return {{"learning_rate", learning_rate}, {"batch_size", batch_size}, {"epochs", epochs},
          {"seed", seed},                   {"task", task_name(task)},   {"clip_norm", clip_norm},
          {"weight_decay", weight_decay}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.learning_rate = j.at("learning_rate").get<double>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.epochs = j.at("epochs").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.task = parse_task(j.at("task").get<std::string>());
  c.clip_norm = j.at("clip_norm").get<double>();
  c.weight_decay = j.at("weight_decay").get<double>();
  return c;
}

Adam::Adam(std::vector<Parameter*> params, double learning_rate, double weight_decay)
    : params_(std::move(params)), lr_(learning_rate), weight_decay_(weight_decay) {
  for (auto* p : params_) {
    m_.emplace_back(p->value.shape(), 0.0);
    v_.emplace_back(p->value.shape(), 0.0);
  }
}

void Adam::step() {
  ++steps_;
  const double t = static_cast<double>(steps_);
  const double c1 = 1.0 - std::pow(kBeta1, t);
  const double c2 = 1.0 - std::pow(kBeta2, t);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto value = params_[i]->value.values();
    const auto grad = params_[i]->grad.values();
    auto m = m_[i].values();
    auto v = v_[i].values();
    for (std::size_t k = 0; k < value.size(); ++k) {
      m[k] = kBeta1 * m[k] + (1.0 - kBeta1) * grad[k];
      v[k] = kBeta2 * v[k] + (1.0 - kBeta2) * grad[k] * grad[k];
      value[k] -= lr_ * (m[k] / c1) / (std::sqrt(v[k] / c2) + kEpsilon);
      if (weight_decay_ != 0.0) value[k] -= lr_ * weight_decay_ * value[k];
    }
  }
}

std::vector<NamedTensor> Adam::state() const {
  std::vector<NamedTensor> out;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    out.push_back({"optimizer.m." + params_[i]->name, m_[i], DType::f64});
    out.push_back({"optimizer.v." + params_[i]->name, v_[i], DType::f64});
  }
  return out;
}

void Adam::load_state(const Archive& archive, std::size_t steps) {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto& m = archive.get("optimizer.m." + params_[i]->name);
    const auto& v = archive.get("optimizer.v." + params_[i]->name);
    if (m.shape() != m_[i].shape() || v.shape() != v_[i].shape()) {
      throw DataError("optimizer state shape mismatch for " + params_[i]->name);
    }
    m_[i] = m;
    v_[i] = v;
  }
  steps_ = steps;
}

double clip_grad_norm(std::span<Parameter* const> params, double max_norm) {
  double sq = 0.0;
  for (const auto* p : params) {
    for (double g : p->grad.values()) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double scale = max_norm / norm;
    for (auto* p : params) {
      for (double& g : p->grad.values()) g *= scale;
    }
  }
  return norm;
}

std::mt19937_64 derived_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::size_t epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  auto rng = derived_rng(seed, epoch);
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

void TrainLog::write_csv(std::ostream& out) const {
  out << "epoch,step,loss\n";
  const auto precision = out.precision(17);
  for (const auto& p : steps) out << p.epoch << "," << p.step << "," << p.loss << "\n";
  out.precision(precision);
}

nlohmann::json TrainLog::to_json() const {
  nlohmann::json j;
  j["steps"] = nlohmann::json::array();
  for (const auto& p : steps) j["steps"].push_back({p.epoch, p.step, p.loss});
  j["epochs"] = nlohmann::json::array();
  for (const auto& e : epochs) {
    nlohmann::json r = {{"epoch", e.epoch}, {"mean_loss", e.mean_loss}};
    if (e.dev_macro_f1) r["dev_macro_f1"] = *e.dev_macro_f1;
    j["epochs"].push_back(r);
  }
  j["best_epoch"] = best_epoch;
  j["best_dev_f1"] = best_dev_f1;
  return j;
}

TrainLog TrainLog::from_json(const nlohmann::json& j) {
  TrainLog log;
  for (const auto& p : j.at("steps")) {
    log.steps.push_back({p.at(0).get<std::size_t>(), p.at(1).get<std::size_t>(), p.at(2).get<double>()});
  }
  for (const auto& r : j.at("epochs")) {
    EpochRecord e{r.at("epoch").get<std::size_t>(), r.at("mean_loss").get<double>(), std::nullopt};
    if (r.contains("dev_macro_f1")) e.dev_macro_f1 = r.at("dev_macro_f1").get<double>();
    log.epochs.push_back(e);
  }
  log.best_epoch = j.at("best_epoch").get<std::size_t>();
  log.best_dev_f1 = j.at("best_dev_f1").get<double>();
  return log;
}

namespace {

std::string batch_ids(std::span<const Sentence> train, std::span<const std::size_t> idx) {
  std::string out;
  for (std::size_t i : idx) {
    if (!out.empty()) out += ",";
    out += train[i].sent_id ? *train[i].sent_id : "#" + std::to_string(i);
  }
  return out;
}

fs::path epoch_dir(const fs::path& root, std::size_t epoch) {
  return root / ("epoch-" + std::to_string(epoch));
}

std::vector<Tensor> snapshot(Tagger& tagger) {
  std::vector<Tensor> out;
  for (auto* p : tagger.parameters()) out.push_back(p->value);
  return out;
}

void restore(Tagger& tagger, const std::vector<Tensor>& values) {
  auto params = tagger.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = values[i];
}

void run_epochs(Tagger& tagger, Adam& adam, std::span<const Sentence> train,
                const TrainConfig& config, const FinetuneOptions& options, std::size_t first_epoch,
                TrainLog& log, std::vector<Tensor>& best) {
  const auto& params = adam.parameters();
  for (std::size_t epoch = first_epoch; epoch <= config.epochs; ++epoch) {
    const auto order = epoch_order(train.size(), config.seed, epoch);
    double total = 0.0;
    std::size_t batches = 0;
    std::vector<Sentence> batch;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      std::span<const std::size_t> idx(order.data() + begin, end - begin);
      batch.clear();
      for (std::size_t i : idx) {
        if (!train[i].tokens.empty()) batch.push_back(train[i]);
      }
      if (batch.empty()) continue;
      for (auto* p : params) p->grad.fill(0.0);
      Tape tape;
      Var loss = tagger.loss(tape, batch);
      const double value = loss.value()[0];
      if (!std::isfinite(value)) {
        throw NumericalError("non-finite training loss at epoch " + std::to_string(epoch) +
                             ", step " + std::to_string(adam.steps() + 1) +
                             "; batch sentences: " + batch_ids(train, idx));
      }
      tape.backward(loss);
      const double norm = clip_grad_norm(params, config.clip_norm);
      if (!std::isfinite(norm)) {
        throw NumericalError("non-finite gradient at epoch " + std::to_string(epoch) +
                             "; batch sentences: " + batch_ids(train, idx));
      }
      adam.step();
      log.steps.push_back({epoch, adam.steps(), value});
      total += value;
      ++batches;
    }
    EpochRecord record{epoch, batches ? total / static_cast<double>(batches) : 0.0, std::nullopt};
    bool improved = false;
    if (!options.dev.empty()) {
      record.dev_macro_f1 = evaluate(tagger, options.dev, tagger.inventory().task()).macro_f1;
      if (*record.dev_macro_f1 > log.best_dev_f1) {
        log.best_dev_f1 = *record.dev_macro_f1;
        log.best_epoch = epoch;
        best = snapshot(tagger);
        improved = true;
      }
    }
    log.epochs.push_back(record);
    if (options.log) {
      *options.log << options.label << "epoch " << epoch << " loss " << record.mean_loss;
      if (record.dev_macro_f1) *options.log << " dev-f1 " << *record.dev_macro_f1;
      *options.log << "\n";
    }
    if (!options.checkpoint_dir.empty()) {
      nlohmann::json extra = {{"epoch", epoch},
                              {"train_config", config.to_json()},
                              {"optimizer_steps", adam.steps()},
                              {"log", log.to_json()}};
      tagger.save(epoch_dir(options.checkpoint_dir, epoch), extra, adam.state());
      if (improved) tagger.save(options.checkpoint_dir / "best", {{"epoch", epoch}});
    }
  }
  if (!best.empty()) restore(tagger, best);
}

}  // namespace

TrainLog finetune(Tagger& tagger, std::span<const Sentence> train, const TrainConfig& config,
                  const FinetuneOptions& options) {
  config.validate();
  if (tagger.inventory().task() != config.task) {
    throw InvalidArgument("finetune: model labels " + std::string(task_name(tagger.inventory().task())) +
                          " but config task is " + std::string(task_name(config.task)));
  }
  Adam adam(tagger.trainable(), config.learning_rate, config.weight_decay);
  TrainLog log;
  std::vector<Tensor> best;
  run_epochs(tagger, adam, train, config, options, 1, log, best);
  return log;
}

Resumed resume_finetune(const fs::path& epoch_checkpoint, std::span<const Sentence> train,
                        const FinetuneOptions& options) {
  Archive archive;
  Resumed out;
  out.tagger = load_tagger(epoch_checkpoint, &archive);
  if (!archive.meta.contains("extra") || !archive.meta["extra"].contains("optimizer_steps")) {
    throw DataError(epoch_checkpoint.string() + " is not a training checkpoint");
  }
  const nlohmann::json extra = archive.meta["extra"];
  const auto config = TrainConfig::from_json(extra.at("train_config"));
  out.log = TrainLog::from_json(extra.at("log"));
  Adam adam(out.tagger->trainable(), config.learning_rate, config.weight_decay);
  adam.load_state(archive, extra.at("optimizer_steps").get<std::size_t>());

  std::vector<Tensor> best;
  if (out.log.best_epoch != 0) {
    Archive best_archive = read_archive(epoch_dir(epoch_checkpoint.parent_path(), out.log.best_epoch));
    for (auto* p : out.tagger->parameters()) best.push_back(best_archive.get(p->name));
  }
  FinetuneOptions opts = options;
  if (opts.checkpoint_dir.empty()) opts.checkpoint_dir = epoch_checkpoint.parent_path();
  run_epochs(*out.tagger, adam, train, config, opts, extra.at("epoch").get<std::size_t>() + 1, out.log,
             best);
  return out;
}

StagedLog train_metalstm_staged(MetaLstmTagger& tagger, std::span<const Sentence> train,
                                const TrainConfig& config, const StagedOptions& options) {
  using Stage = MetaLstmTagger::Stage;
  std::vector<Stage> stages;
  if (!options.skip_pretraining) stages = {Stage::char_only, Stage::word_only};
  stages.push_back(Stage::joint);

  StagedLog out;
  for (Stage stage : stages) {
    const std::string name(stage_name(stage));
    if (options.finetune.log) *options.finetune.log << "stage " << name << " begin\n";
    tagger.set_stage(stage);
    TrainConfig stage_config = config;
    if (stage != Stage::joint && options.stage_epochs != 0) stage_config.epochs = options.stage_epochs;
    FinetuneOptions opts = options.finetune;
    opts.label = options.finetune.label + "[" + name + "] ";
    if (!opts.checkpoint_dir.empty()) opts.checkpoint_dir = opts.checkpoint_dir / name;
    if (stage != Stage::joint) opts.dev = {};
    out.logs.push_back(finetune(tagger, train, stage_config, opts));
    out.stages.push_back(name);
    if (options.finetune.log) *options.finetune.log << "stage " << name << " end\n";
  }
  tagger.discard_stage_heads();
  return out;
}

}  // namespace distag
