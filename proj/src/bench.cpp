#include "distag/bench.hpp"

#include <algorithm>
#include <chrono>
#include <iomanip>
#include <map>
#include <sstream>

#include "distag/errors.hpp"

namespace distag {

void BenchOptions::validate() const {
  if (seq_lens.empty()) throw InvalidArgument("bench: no sequence lengths");
  for (auto n : seq_lens) {
    if (n == 0) throw InvalidArgument("bench: sequence length must be positive");
  }
  if (runs == 0) throw InvalidArgument("bench: runs must be positive");
}

double median(std::vector<double> values) {
  if (values.empty()) throw InvalidArgument("median of nothing");
  std::sort(values.begin(), values.end());
  const std::size_t m = values.size() / 2;
  return values.size() % 2 ? values[m] : 0.5 * (values[m - 1] + values[m]);
}

namespace {

PieceBatch synthetic_batch(const EncoderConfig& config, std::size_t n) {
  if (n > config.max_positions) {
    throw InvalidArgument("bench: sequence length " + std::to_string(n) + " exceeds max_positions " +
                          std::to_string(config.max_positions));
  }
  PieceBatch batch;
  batch.seq_len = n;
  batch.lengths = {n};
  batch.ids.resize(n);
  for (std::size_t i = 0; i < n; ++i) batch.ids[i] = static_cast<int>((7 * i + 1) % config.vocab);
  return batch;
}

double time_forward(TransformerModel& model, std::size_t n, const BenchOptions& options) {
  const PieceBatch batch = synthetic_batch(model.config(), n);
  auto once = [&] {
    Tape tape;
    const auto start = std::chrono::steady_clock::now();
    Var out = model.forward(tape, batch);
    const auto stop = std::chrono::steady_clock::now();
    if (out.value().size() == 0) throw NumericalError("bench: empty forward output");
    return std::chrono::duration<double>(stop - start).count();
  };
  for (std::size_t i = 0; i < options.warmup; ++i) once();
  std::vector<double> times;
  times.reserve(options.runs);
  for (std::size_t i = 0; i < options.runs; ++i) times.push_back(once());
  return median(std::move(times));
}

}  // namespace

std::vector<BenchReport> bench(std::span<const BenchTarget> models, const BenchTarget& reference,
                               const BenchOptions& options) {
  options.validate();
  if (reference.model == nullptr) throw InvalidArgument("bench: missing reference model");
  for (const auto& m : models) {
    if (m.model == nullptr) throw InvalidArgument("bench: missing model " + m.id);
  }
  std::vector<BenchReport> out;
  for (auto n : options.seq_lens) {
    const double ref_time = time_forward(*reference.model, n, options);
    const double ref_flops = count_flops(reference.model->config(), n).total();
    auto report = [&](const std::string& id, double t, double flops) {
      out.push_back({id, n, options.runs, t, flops, ref_time / t, ref_flops / flops});
    };
    report(reference.id, ref_time, ref_flops);
    for (const auto& m : models) {
      report(m.id, time_forward(*m.model, n, options), count_flops(m.model->config(), n).total());
    }
  }
  return out;
}

void write_bench_table(std::ostream& out, std::span<const BenchReport> reports) {
  std::vector<std::size_t> lens;
  std::vector<std::string> ids;
  std::map<std::pair<std::string, std::size_t>, const BenchReport*> cell;
  for (const auto& r : reports) {
    if (std::find(lens.begin(), lens.end(), r.seq_len) == lens.end()) lens.push_back(r.seq_len);
    if (std::find(ids.begin(), ids.end(), r.model) == ids.end()) ids.push_back(r.model);
    cell[{r.model, r.seq_len}] = &r;
  }
  std::size_t width = 5;
  for (const auto& id : ids) width = std::max(width, id.size());
  out << std::left << std::setw(static_cast<int>(width)) << "model";
  for (auto n : lens) {
    const std::string head = std::to_string(n) + " words";
    out << "  " << std::right << std::setw(12) << head << std::setw(10) << "FLOP x";
  }
  out << '\n';
  for (const auto& id : ids) {
    out << std::left << std::setw(static_cast<int>(width)) << id << std::right << std::fixed;
    for (auto n : lens) {
      auto it = cell.find({id, n});
      if (it == cell.end()) {
        out << "  " << std::setw(12) << "-" << std::setw(10) << "-";
        continue;
      }
      std::ostringstream speed;
      speed << std::fixed << std::setprecision(2) << it->second->speedup << 'x';
      std::ostringstream flops;
      flops << std::fixed << std::setprecision(2) << it->second->flop_speedup << 'x';
      out << "  " << std::setw(12) << speed.str() << std::setw(10) << flops.str();
    }
    out << '\n';
  }
  out.unsetf(std::ios::fixed);
}

void write_bench_csv(std::ostream& out, std::span<const BenchReport> reports) {
  out << "model,seq_len,runs,median_seconds,flops,speedup,flop_speedup\n";
  out << std::setprecision(9);
  for (const auto& r : reports) {
    out << r.model << ',' << r.seq_len << ',' << r.runs << ',' << r.median_seconds << ','
        << std::setprecision(12) << r.flops << std::setprecision(9) << ',' << r.speedup << ','
        << r.flop_speedup << '\n';
  }
}

}  // namespace distag
