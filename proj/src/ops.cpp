#include "distag/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "distag/errors.hpp"

namespace distag {

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw InvalidArgument(std::string(op) + ": shape mismatch " + shape_string(a.shape()) +
                          " vs " + shape_string(b.shape()));
  }
}

void require_same_tape(const Var& a, const Var& b) {
  if (&a.tape() != &b.tape()) throw TapeError("op inputs recorded on different tapes");
}

// c[m,n] += a[m,k] * b[k,n]
void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    const double* ai = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ai[p];
      if (av == 0.0) continue;
      const double* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

// c[m,k] += a[m,n] * b[k,n]^T
void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t n,
             std::size_t k) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * n;
    double* ci = c + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double* bp = b + p * n;
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += ai[j] * bp[j];
      ci[p] += s;
    }
  }
}

// c[k,n] += a[m,k]^T * b[m,n]
void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    const double* bi = b + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ai[p];
      if (av == 0.0) continue;
      double* cp = c + p * n;
      for (std::size_t j = 0; j < n; ++j) cp[j] += av * bi[j];
    }
  }
}

template <typename Fwd, typename Deriv>
Var unary(const Var& x, Fwd fwd, Deriv deriv) {
  const Tensor& xv = x.value();
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = fwd(xv[i]);
  Var inputs[] = {x};
  return x.tape().record(std::move(out), inputs, [x, deriv](Tape& t, const Tensor& g) {
    const Tensor& xv = t.value(x);
    Tensor& gx = t.grad(x);
    for (std::size_t i = 0; i < xv.size(); ++i) gx[i] += g[i] * deriv(xv[i]);
  });
}

double sigmoid_scalar(double v) {
  if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

}  // namespace

Var matmul(const Var& x, const Var& w) {
  require_same_tape(x, w);
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  if (wv.rank() != 2 || xv.cols() != wv.dim(0)) {
    throw InvalidArgument("matmul: cannot multiply " + shape_string(xv.shape()) + " by " +
                          shape_string(wv.shape()));
  }
  const std::size_t m = xv.rows(), k = wv.dim(0), n = wv.dim(1);
  Shape shape = xv.shape();
  shape.back() = n;
  Tensor out(shape, 0.0);
  gemm_nn(xv.data(), wv.data(), out.data(), m, k, n);
  Var inputs[] = {x, w};
  return x.tape().record(std::move(out), inputs, [x, w, m, k, n](Tape& t, const Tensor& g) {
    if (x.requires_grad()) gemm_nt(g.data(), t.value(w).data(), t.grad(x).data(), m, n, k);
    if (w.requires_grad()) gemm_tn(t.value(x).data(), g.data(), t.grad(w).data(), m, k, n);
  });
}

Var add(const Var& a, const Var& b) {
  require_same_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const bool broadcast = av.shape() != bv.shape();
  if (broadcast && !(bv.rank() == 1 && bv.size() == av.cols())) {
    throw InvalidArgument("add: shape mismatch " + shape_string(av.shape()) + " vs " +
                          shape_string(bv.shape()));
  }
  Tensor out = av;
  const std::size_t cols = av.cols();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += broadcast ? bv[i % cols] : bv[i];
  Var inputs[] = {a, b};
  return a.tape().record(std::move(out), inputs, [a, b, broadcast, cols](Tape& t, const Tensor& g) {
    if (a.requires_grad()) {
      Tensor& ga = t.grad(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (b.requires_grad()) {
      Tensor& gb = t.grad(b);
      for (std::size_t i = 0; i < g.size(); ++i) gb[broadcast ? i % cols : i] += g[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_same_shape(av, bv, "mul");
  Tensor out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  Var inputs[] = {a, b};
  return a.tape().record(std::move(out), inputs, [a, b](Tape& t, const Tensor& g) {
    if (a.requires_grad()) {
      Tensor& ga = t.grad(a);
      const Tensor& bv = t.value(b);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
    }
    if (b.requires_grad()) {
      Tensor& gb = t.grad(b);
      const Tensor& av = t.value(a);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
    }
  });
}

Var scale(const Var& a, double factor) {
  return unary(a, [factor](double v) { return v * factor; },
               [factor](double) { return factor; });
}

Var tanh(const Var& x) {
  return unary(x, [](double v) { return std::tanh(v); },
               [](double v) {
                 const double y = std::tanh(v);
                 return 1.0 - y * y;
               });
}

Var sigmoid(const Var& x) {
  return unary(x, sigmoid_scalar, [](double v) {
    const double y = sigmoid_scalar(v);
    return y * (1.0 - y);
  });
}

Var gelu(const Var& x) {
  return unary(
      x, [](double v) { return 0.5 * v * (1.0 + std::erf(v / std::numbers::sqrt2)); },
      [](double v) {
        const double cdf = 0.5 * (1.0 + std::erf(v / std::numbers::sqrt2));
        const double pdf = std::exp(-0.5 * v * v) / std::sqrt(2.0 * std::numbers::pi);
        return cdf + v * pdf;
      });
}

Var relu(const Var& x) {
  return unary(x, [](double v) { return v > 0 ? v : 0.0; },
               [](double v) { return v > 0 ? 1.0 : 0.0; });
}

Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps) {
  require_same_tape(x, gain);
  require_same_tape(x, bias);
  const Tensor& xv = x.value();
  const std::size_t rows = xv.rows(), cols = xv.cols();
  if (gain.value().size() != cols || bias.value().size() != cols) {
    throw InvalidArgument("layer_norm: gain/bias length must equal " + std::to_string(cols));
  }
  Tensor normed(xv.shape());
  std::vector<double> inv_std(rows);
  Tensor out(xv.shape());
  const Tensor& gv = gain.value();
  const Tensor& bv = bias.value();
  for (std::size_t r = 0; r < rows; ++r) {
    auto in = xv.row(r);
    double mu = 0.0;
    for (double v : in) mu += v;
    mu /= static_cast<double>(cols);
    double var = 0.0;
    for (double v : in) var += (v - mu) * (v - mu);
    var /= static_cast<double>(cols);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t c = 0; c < cols; ++c) {
      const double h = (in[c] - mu) * inv_std[r];
      normed.at(r, c) = h;
      out.at(r, c) = gv[c] * h + bv[c];
    }
  }
  Var inputs[] = {x, gain, bias};
  return x.tape().record(
      std::move(out), inputs,
      [x, gain, bias, normed = std::move(normed), inv_std = std::move(inv_std), rows, cols](
          Tape& t, const Tensor& g) {
        const Tensor& gv = t.value(gain);
        if (gain.requires_grad() || bias.requires_grad()) {
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < cols; ++c) {
              if (gain.requires_grad()) t.grad(gain)[c] += g.at(r, c) * normed.at(r, c);
              if (bias.requires_grad()) t.grad(bias)[c] += g.at(r, c);
            }
          }
        }
        if (!x.requires_grad()) return;
        Tensor& gx = t.grad(x);
        const double n = static_cast<double>(cols);
        for (std::size_t r = 0; r < rows; ++r) {
          double mean_d = 0.0, mean_dh = 0.0;
          for (std::size_t c = 0; c < cols; ++c) {
            const double d = g.at(r, c) * gv[c];
            mean_d += d;
            mean_dh += d * normed.at(r, c);
          }
          mean_d /= n;
          mean_dh /= n;
          for (std::size_t c = 0; c < cols; ++c) {
            const double d = g.at(r, c) * gv[c];
            gx.at(r, c) += inv_std[r] * (d - mean_d - normed.at(r, c) * mean_dh);
          }
        }
      });
}

Var softmax(const Var& logits, double temperature) {
  if (!(temperature > 0.0)) {
    throw InvalidArgument("softmax temperature must be positive, got " +
                          std::to_string(temperature));
  }
  const Tensor& lv = logits.value();
  const std::size_t rows = lv.rows(), cols = lv.cols();
  Tensor out(lv.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    auto in = lv.row(r);
    auto o = out.row(r);
    const double mx = *std::max_element(in.begin(), in.end());
    double z = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      o[c] = std::exp((in[c] - mx) / temperature);
      z += o[c];
    }
    for (auto& v : o) v /= z;
  }
  Var inputs[] = {logits};
  Tensor probs = out;
  return logits.tape().record(
      std::move(out), inputs,
      [logits, probs = std::move(probs), rows, cols, temperature](Tape& t, const Tensor& g) {
        Tensor& gl = t.grad(logits);
        for (std::size_t r = 0; r < rows; ++r) {
          auto y = probs.row(r);
          auto gr = g.row(r);
          double dot = 0.0;
          for (std::size_t c = 0; c < cols; ++c) dot += gr[c] * y[c];
          for (std::size_t c = 0; c < cols; ++c) {
            gl.at(r, c) += y[c] * (gr[c] - dot) / temperature;
          }
        }
      });
}

Var cross_entropy(const Var& target, const Var& predicted) {
  require_same_tape(target, predicted);
  const Tensor& pv = target.value();
  const Tensor& qv = predicted.value();
  require_same_shape(pv, qv, "cross_entropy");
  if (pv.rank() > 2) throw InvalidArgument("cross_entropy: expects rank 1 or 2");
  const double rows = static_cast<double>(pv.rows());
  double total = 0.0;
  for (std::size_t i = 0; i < pv.size(); ++i) {
    if (pv[i] != 0.0) total -= pv[i] * std::log(std::max(qv[i], kLogClamp));
  }
  Var inputs[] = {target, predicted};
  return target.tape().record(
      Tensor({1}, total / rows), inputs, [target, predicted, rows](Tape& t, const Tensor& g) {
        const Tensor& pv = t.value(target);
        const Tensor& qv = t.value(predicted);
        const double scale = g[0] / rows;
        if (target.requires_grad()) {
          Tensor& gp = t.grad(target);
          for (std::size_t i = 0; i < pv.size(); ++i) {
            gp[i] -= scale * std::log(std::max(qv[i], kLogClamp));
          }
        }
        if (predicted.requires_grad()) {
          Tensor& gq = t.grad(predicted);
          for (std::size_t i = 0; i < pv.size(); ++i) {
            if (qv[i] > kLogClamp) gq[i] -= scale * pv[i] / qv[i];
          }
        }
      });
}

Var sum(const Var& x) {
  const Tensor& xv = x.value();
  double s = 0.0;
  for (double v : xv.values()) s += v;
  Var inputs[] = {x};
  return x.tape().record(Tensor({1}, s), inputs, [x](Tape& t, const Tensor& g) {
    Tensor& gx = t.grad(x);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[0];
  });
}

Var mean(const Var& x) {
  return scale(sum(x), 1.0 / static_cast<double>(x.value().size()));
}

Var embedding(const Var& table, std::span<const int> ids) {
  const Tensor& tv = table.value();
  if (tv.rank() != 2) throw InvalidArgument("embedding: table must be rank 2");
  if (ids.empty()) throw InvalidArgument("embedding: empty id list");
  const std::size_t cols = tv.cols();
  Tensor out({ids.size(), cols});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= tv.dim(0)) {
      throw InvalidArgument("embedding: id " + std::to_string(ids[i]) + " out of range [0, " +
                            std::to_string(tv.dim(0)) + ")");
    }
    auto src = tv.row(static_cast<std::size_t>(ids[i]));
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  Var inputs[] = {table};
  return table.tape().record(
      std::move(out), inputs,
      [table, ids = std::vector<int>(ids.begin(), ids.end()), cols](Tape& t, const Tensor& g) {
        Tensor& gt = t.grad(table);
        for (std::size_t i = 0; i < ids.size(); ++i) {
          auto dst = gt.row(static_cast<std::size_t>(ids[i]));
          auto src = g.row(i);
          for (std::size_t c = 0; c < cols; ++c) dst[c] += src[c];
        }
      });
}

Var concat(std::span<const Var> parts) {
  if (parts.empty()) throw InvalidArgument("concat: no inputs");
  const std::size_t rows = parts[0].value().rows();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& p : parts) {
    require_same_tape(parts[0], p);
    if (p.value().rows() != rows) throw InvalidArgument("concat: row count mismatch");
    widths.push_back(p.value().cols());
    total += widths.back();
  }
  Shape shape = parts[0].value().shape();
  shape.back() = total;
  Tensor out(shape);
  for (std::size_t r = 0; r < rows; ++r) {
    std::size_t offset = 0;
    for (std::size_t i = 0; i < parts.size(); ++i) {
      auto src = parts[i].value().row(r);
      std::copy(src.begin(), src.end(), out.row(r).begin() + static_cast<std::ptrdiff_t>(offset));
      offset += widths[i];
    }
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return parts[0].tape().record(
      std::move(out), inputs, [inputs, widths, rows](Tape& t, const Tensor& g) {
        std::size_t offset = 0;
        for (std::size_t i = 0; i < inputs.size(); ++i) {
          if (inputs[i].requires_grad()) {
            Tensor& gi = t.grad(inputs[i]);
            for (std::size_t r = 0; r < rows; ++r) {
              auto src = g.row(r);
              for (std::size_t c = 0; c < widths[i]; ++c) gi.at(r, c) += src[offset + c];
            }
          }
          offset += widths[i];
        }
      });
}

Var concat(std::initializer_list<Var> parts) {
  return concat(std::span<const Var>(parts.begin(), parts.size()));
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw InvalidArgument("concat_rows: no inputs");
  const std::size_t cols = parts[0].value().cols();
  std::size_t rows = 0;
  for (const auto& p : parts) {
    require_same_tape(parts[0], p);
    if (p.value().cols() != cols) throw InvalidArgument("concat_rows: column count mismatch");
    rows += p.value().rows();
  }
  std::vector<double> data;
  data.reserve(rows * cols);
  for (const auto& p : parts) {
    auto v = p.value().values();
    data.insert(data.end(), v.begin(), v.end());
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return parts[0].tape().record(Tensor({rows, cols}, std::move(data)), inputs,
                                [inputs](Tape& t, const Tensor& g) {
                                  std::size_t offset = 0;
                                  for (const auto& in : inputs) {
                                    const std::size_t n = t.value(in).size();
                                    if (in.requires_grad()) {
                                      Tensor& gi = t.grad(in);
                                      for (std::size_t i = 0; i < n; ++i) gi[i] += g[offset + i];
                                    }
                                    offset += n;
                                  }
                                });
}

Var slice_cols(const Var& x, std::size_t begin, std::size_t end) {
  const Tensor& xv = x.value();
  const std::size_t cols = xv.cols(), rows = xv.rows();
  if (begin >= end || end > cols) {
    throw InvalidArgument("slice_cols: bad range [" + std::to_string(begin) + ", " +
                          std::to_string(end) + ") for width " + std::to_string(cols));
  }
  Shape shape = xv.shape();
  shape.back() = end - begin;
  Tensor out(shape);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = begin; c < end; ++c) out.at(r, c - begin) = xv.at(r, c);
  }
  Var inputs[] = {x};
  return x.tape().record(std::move(out), inputs, [x, begin, end, rows](Tape& t, const Tensor& g) {
    Tensor& gx = t.grad(x);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = begin; c < end; ++c) gx.at(r, c) += g.at(r, c - begin);
    }
  });
}

Var gather_rows(const Var& x, std::span<const std::size_t> rows) {
  const Tensor& xv = x.value();
  if (rows.empty()) throw InvalidArgument("gather_rows: empty row list");
  const std::size_t cols = xv.cols();
  Tensor out({rows.size(), cols});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= xv.rows()) throw InvalidArgument("gather_rows: row index out of range");
    auto src = xv.row(rows[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  Var inputs[] = {x};
  return x.tape().record(
      std::move(out), inputs,
      [x, idx = std::vector<std::size_t>(rows.begin(), rows.end()), cols](Tape& t, const Tensor& g) {
        Tensor& gx = t.grad(x);
        for (std::size_t i = 0; i < idx.size(); ++i) {
          auto dst = gx.row(idx[i]);
          auto src = g.row(i);
          for (std::size_t c = 0; c < cols; ++c) dst[c] += src[c];
        }
      });
}

Var slice_rows(const Var& x, std::size_t begin, std::size_t end) {
  if (begin >= end) throw InvalidArgument("slice_rows: empty range");
  std::vector<std::size_t> idx(end - begin);
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = begin + i;
  return gather_rows(x, idx);
}

Var multi_head_attention(const Var& q, const Var& k, const Var& v, std::size_t heads,
                         std::size_t seq_len, std::span<const std::size_t> lengths) {
  require_same_tape(q, k);
  require_same_tape(q, v);
  const Tensor& qv = q.value();
  const std::size_t hidden = qv.cols();
  const std::size_t batch = lengths.size();
  if (heads == 0 || hidden % heads != 0) {
    throw InvalidArgument("attention: hidden size not divisible by head count");
  }
  if (qv.rows() != batch * seq_len || k.value().shape() != qv.shape() ||
      v.value().shape() != qv.shape()) {
    throw InvalidArgument("attention: q/k/v must all be [batch * seq_len, hidden]");
  }
  for (auto len : lengths) {
    if (len == 0 || len > seq_len) throw InvalidArgument("attention: bad sequence length");
  }
  const std::size_t dh = hidden / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  const Tensor& kv = k.value();
  const Tensor& vv = v.value();

  // probs[b][h] is [seq_len x len_b], row-major.
  std::vector<std::vector<double>> probs(batch * heads);
  Tensor out(qv.shape(), 0.0);
  for (std::size_t b = 0; b < batch; ++b) {
    const std::size_t len = lengths[b];
    const std::size_t base = b * seq_len;
    for (std::size_t h = 0; h < heads; ++h) {
      auto& p = probs[b * heads + h];
      p.assign(seq_len * len, 0.0);
      const std::size_t off = h * dh;
      for (std::size_t i = 0; i < seq_len; ++i) {
        const double* qi = qv.data() + (base + i) * hidden + off;
        double* pi = p.data() + i * len;
        double mx = -INFINITY;
        for (std::size_t j = 0; j < len; ++j) {
          const double* kj = kv.data() + (base + j) * hidden + off;
          double s = 0.0;
          for (std::size_t d = 0; d < dh; ++d) s += qi[d] * kj[d];
          pi[j] = s * inv_sqrt;
          mx = std::max(mx, pi[j]);
        }
        double z = 0.0;
        for (std::size_t j = 0; j < len; ++j) {
          pi[j] = std::exp(pi[j] - mx);
          z += pi[j];
        }
        double* oi = out.data() + (base + i) * hidden + off;
        for (std::size_t j = 0; j < len; ++j) {
          pi[j] /= z;
          const double* vj = vv.data() + (base + j) * hidden + off;
          for (std::size_t d = 0; d < dh; ++d) oi[d] += pi[j] * vj[d];
        }
      }
    }
  }

  Var inputs[] = {q, k, v};
  return q.tape().record(
      std::move(out), inputs,
      [q, k, v, heads, seq_len, hidden, dh, inv_sqrt, probs = std::move(probs),
       lens = std::vector<std::size_t>(lengths.begin(), lengths.end())](Tape& t, const Tensor& g) {
        const Tensor& qv = t.value(q);
        const Tensor& kv = t.value(k);
        const Tensor& vv = t.value(v);
        Tensor* gq = q.requires_grad() ? &t.grad(q) : nullptr;
        Tensor* gk = k.requires_grad() ? &t.grad(k) : nullptr;
        Tensor* gv = v.requires_grad() ? &t.grad(v) : nullptr;
        std::vector<double> dscore;
        for (std::size_t b = 0; b < lens.size(); ++b) {
          const std::size_t len = lens[b];
          const std::size_t base = b * seq_len;
          dscore.assign(len, 0.0);
          for (std::size_t h = 0; h < heads; ++h) {
            const auto& p = probs[b * heads + h];
            const std::size_t off = h * dh;
            for (std::size_t i = 0; i < seq_len; ++i) {
              const double* gi = g.data() + (base + i) * hidden + off;
              const double* pi = p.data() + i * len;
              double dot = 0.0;
              for (std::size_t j = 0; j < len; ++j) {
                const double* vj = vv.data() + (base + j) * hidden + off;
                double dp = 0.0;
                for (std::size_t d = 0; d < dh; ++d) dp += gi[d] * vj[d];
                dscore[j] = dp;
                dot += dp * pi[j];
                if (gv) {
                  double* gvj = gv->data() + (base + j) * hidden + off;
                  for (std::size_t d = 0; d < dh; ++d) gvj[d] += pi[j] * gi[d];
                }
              }
              const double* qi = qv.data() + (base + i) * hidden + off;
              for (std::size_t j = 0; j < len; ++j) {
                const double ds = pi[j] * (dscore[j] - dot) * inv_sqrt;
                if (ds == 0.0) continue;
                const double* kj = kv.data() + (base + j) * hidden + off;
                if (gq) {
                  double* gqi = gq->data() + (base + i) * hidden + off;
                  for (std::size_t d = 0; d < dh; ++d) gqi[d] += ds * kj[d];
                }
                if (gk) {
                  double* gkj = gk->data() + (base + j) * hidden + off;
                  for (std::size_t d = 0; d < dh; ++d) gkj[d] += ds * qi[d];
                }
              }
            }
          }
        }
      });
}

}  // namespace distag

namespace distag {

Tensor softmax_with_temperature(const Tensor& logits, double temperature) {
  Tape tape;
  return softmax(tape.constant(logits), temperature).value();
}

double cross_entropy(const Tensor& target, const Tensor& predicted) {
  Tape tape;
  return cross_entropy(tape.constant(target), tape.constant(predicted)).value()[0];
}

double entropy(const Tensor& probs) { return cross_entropy(probs, probs); }

}  // namespace distag
