#include "dialoglow/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace dialoglow::ad {

namespace {

[[noreturn]] void shape_mismatch(const char* op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op) + ": shape " + to_string(a) + " vs " + to_string(b));
}

void require_same_shape(const char* op, const Var& a, const Var& b) {
  if (a.shape() != b.shape()) {
    shape_mismatch(op, a.shape(), b.shape());
  }
}

template <typename Forward, typename Derivative>
Var unary(const Var& a, Forward f, Derivative df) {
  const Tensor& x = a.value();
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    y[i] = f(x[i]);
  }
  return a.tape().record(std::move(y), {a}, [a, df](Tape& tape, const Tensor& g) {
    if (Tensor* ga = tape.grad_sink(a)) {
      const Tensor& x = a.value();
      for (std::size_t i = 0; i < x.size(); ++i) {
        (*ga)[i] += g[i] * df(x[i]);
      }
    }
  });
}

Shape matrix_shape(std::size_t rows, std::size_t cols) { return Shape{rows, cols}; }

}  // namespace

Var matmul(const Var& a, const Var& b) {
  const Tensor& x = a.value();
  const Tensor& w = b.value();
  const std::size_t p = x.rows(), q = x.cols(), r = w.cols();
  if (w.rows() != q) {
    shape_mismatch("matmul", x.shape(), w.shape());
  }
  Tensor y(matrix_shape(p, r));
  for (std::size_t i = 0; i < p; ++i) {
    double* yi = y.row(i).data();
    for (std::size_t k = 0; k < q; ++k) {
      const double xik = x.at(i, k);
      const double* wk = w.row(k).data();
      for (std::size_t j = 0; j < r; ++j) {
        yi[j] += xik * wk[j];
      }
    }
  }
  return a.tape().record(std::move(y), {a, b}, [a, b, p, q, r](Tape& tape, const Tensor& g) {
    const Tensor& x = a.value();
    const Tensor& w = b.value();
    if (Tensor* ga = tape.grad_sink(a)) {
      for (std::size_t i = 0; i < p; ++i) {
        const double* gi = g.row(i).data();
        for (std::size_t k = 0; k < q; ++k) {
          const double* wk = w.row(k).data();
          double acc = 0.0;
          for (std::size_t j = 0; j < r; ++j) {
            acc += gi[j] * wk[j];
          }
          (*ga)[i * q + k] += acc;
        }
      }
    }
    if (Tensor* gb = tape.grad_sink(b)) {
      for (std::size_t i = 0; i < p; ++i) {
        const double* gi = g.row(i).data();
        for (std::size_t k = 0; k < q; ++k) {
          const double xik = x.at(i, k);
          double* gbk = gb->values().data() + k * r;
          for (std::size_t j = 0; j < r; ++j) {
            gbk[j] += xik * gi[j];
          }
        }
      }
    }
  });
}

Var matmul_nt(const Var& a, const Var& b) {
  const Tensor& x = a.value();
  const Tensor& w = b.value();
  const std::size_t p = x.rows(), q = x.cols(), r = w.rows();
  if (w.cols() != q) {
    shape_mismatch("matmul_nt", x.shape(), w.shape());
  }
  Tensor y(matrix_shape(p, r));
  for (std::size_t i = 0; i < p; ++i) {
    const double* xi = x.row(i).data();
    for (std::size_t j = 0; j < r; ++j) {
      const double* wj = w.row(j).data();
      double acc = 0.0;
      for (std::size_t k = 0; k < q; ++k) {
        acc += xi[k] * wj[k];
      }
      y.at(i, j) = acc;
    }
  }
  return a.tape().record(std::move(y), {a, b}, [a, b, p, q, r](Tape& tape, const Tensor& g) {
    const Tensor& x = a.value();
    const Tensor& w = b.value();
    if (Tensor* ga = tape.grad_sink(a)) {
      for (std::size_t i = 0; i < p; ++i) {
        double* gai = ga->values().data() + i * q;
        for (std::size_t j = 0; j < r; ++j) {
          const double gij = g.at(i, j);
          if (gij == 0.0) {
            continue;
          }
          const double* wj = w.row(j).data();
          for (std::size_t k = 0; k < q; ++k) {
            gai[k] += gij * wj[k];
          }
        }
      }
    }
    if (Tensor* gb = tape.grad_sink(b)) {
      for (std::size_t i = 0; i < p; ++i) {
        const double* xi = x.row(i).data();
        for (std::size_t j = 0; j < r; ++j) {
          const double gij = g.at(i, j);
          if (gij == 0.0) {
            continue;
          }
          double* gbj = gb->values().data() + j * q;
          for (std::size_t k = 0; k < q; ++k) {
            gbj[k] += gij * xi[k];
          }
        }
      }
    }
  });
}

Var affine(const Var& x, const Var& weight, const Var& bias) { return add_row(matmul_nt(x, weight), bias); }

Var add(const Var& a, const Var& b) {
  require_same_shape("add", a, b);
  Tensor y = a.value();
  y += b.value();
  return a.tape().record(std::move(y), {a, b}, [a, b](Tape& tape, const Tensor& g) {
    if (Tensor* ga = tape.grad_sink(a)) {
      *ga += g;
    }
    if (Tensor* gb = tape.grad_sink(b)) {
      *gb += g;
    }
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape("sub", a, b);
  Tensor y = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) {
    y[i] -= bv[i];
  }
  return a.tape().record(std::move(y), {a, b}, [a, b](Tape& tape, const Tensor& g) {
    if (Tensor* ga = tape.grad_sink(a)) {
      *ga += g;
    }
    if (Tensor* gb = tape.grad_sink(b)) {
      for (std::size_t i = 0; i < g.size(); ++i) {
        (*gb)[i] -= g[i];
      }
    }
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape("mul", a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Tensor y(av.shape());
  for (std::size_t i = 0; i < y.size(); ++i) {
    y[i] = av[i] * bv[i];
  }
  return a.tape().record(std::move(y), {a, b}, [a, b](Tape& tape, const Tensor& g) {
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (Tensor* ga = tape.grad_sink(a)) {
      for (std::size_t i = 0; i < g.size(); ++i) {
        (*ga)[i] += g[i] * bv[i];
      }
    }
    if (Tensor* gb = tape.grad_sink(b)) {
      for (std::size_t i = 0; i < g.size(); ++i) {
        (*gb)[i] += g[i] * av[i];
      }
    }
  });
}

Var scale(const Var& a, double factor) {
  Tensor y = a.value();
  for (double& v : y.values()) {
    v *= factor;
  }
  return a.tape().record(std::move(y), {a}, [a, factor](Tape& tape, const Tensor& g) {
    if (Tensor* ga = tape.grad_sink(a)) {
      for (std::size_t i = 0; i < g.size(); ++i) {
        (*ga)[i] += g[i] * factor;
      }
    }
  });
}

Var add_row(const Var& a, const Var& row) {
  const Tensor& x = a.value();
  const Tensor& b = row.value();
  if (b.rows() != 1 || b.cols() != x.cols()) {
    shape_mismatch("add_row", x.shape(), b.shape());
  }
  Tensor y = x;
  const std::size_t r = x.rows(), c = x.cols();
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      y.at(i, j) += b[j];
    }
  }
  return a.tape().record(std::move(y), {a, row}, [a, row, r, c](Tape& tape, const Tensor& g) {
    if (Tensor* ga = tape.grad_sink(a)) {
      *ga += g;
    }
    if (Tensor* gb = tape.grad_sink(row)) {
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) {
          (*gb)[j] += g[i * c + j];
        }
      }
    }
  });
}

Var sigmoid(const Var& a) {
  auto f = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
  return unary(a, f, [f](double x) {
    const double s = f(x);
    return s * (1.0 - s);
  });
}

Var tanh(const Var& a) {
  return unary(a, [](double x) { return std::tanh(x); },
               [](double x) {
                 const double t = std::tanh(x);
                 return 1.0 - t * t;
               });
}

Var relu(const Var& a) {
  return unary(a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x) { return x > 0.0 ? 1.0 : 0.0; });
}

Var concat(std::span<const Var> parts, std::size_t axis) {
  if (parts.empty()) {
    throw ShapeError("concat: no inputs");
  }
  if (axis > 1) {
    throw ShapeError("concat: axis must be 0 or 1");
  }
  const std::size_t first_rows = parts[0].rows(), first_cols = parts[0].cols();
  std::size_t total = 0;
  for (const Var& p : parts) {
    if (axis == 0 && p.cols() != first_cols) {
      shape_mismatch("concat(axis 0)", parts[0].shape(), p.shape());
    }
    if (axis == 1 && p.rows() != first_rows) {
      shape_mismatch("concat(axis 1)", parts[0].shape(), p.shape());
    }
    total += axis == 0 ? p.rows() : p.cols();
  }
  const std::size_t rows = axis == 0 ? total : first_rows;
  const std::size_t cols = axis == 0 ? first_cols : total;
  Tensor y(matrix_shape(rows, cols));
  std::size_t offset = 0;
  for (const Var& p : parts) {
    const Tensor& v = p.value();
    for (std::size_t i = 0; i < v.rows(); ++i) {
      for (std::size_t j = 0; j < v.cols(); ++j) {
        if (axis == 0) {
          y.at(offset + i, j) = v.at(i, j);
        } else {
          y.at(i, offset + j) = v.at(i, j);
        }
      }
    }
    offset += axis == 0 ? v.rows() : v.cols();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return parts[0].tape().record(std::move(y), parts, [inputs, axis](Tape& tape, const Tensor& g) {
    std::size_t offset = 0;
    for (const Var& p : inputs) {
      const std::size_t pr = p.rows(), pc = p.cols();
      if (Tensor* gp = tape.grad_sink(p)) {
        for (std::size_t i = 0; i < pr; ++i) {
          for (std::size_t j = 0; j < pc; ++j) {
            (*gp)[i * pc + j] += axis == 0 ? g.at(offset + i, j) : g.at(i, offset + j);
          }
        }
      }
      offset += axis == 0 ? pr : pc;
    }
  });
}

Var concat(std::initializer_list<Var> parts, std::size_t axis) {
  return concat(std::span<const Var>(parts.begin(), parts.size()), axis);
}

Var slice_rows(const Var& a, std::size_t begin, std::size_t end) {
  const Tensor& x = a.value();
  if (begin > end || end > x.rows()) {
    throw ShapeError("slice_rows: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") outside " + to_string(x.shape()));
  }
  const std::size_t c = x.cols();
  Tensor y(matrix_shape(end - begin, c));
  std::copy(x.values().begin() + static_cast<std::ptrdiff_t>(begin * c),
            x.values().begin() + static_cast<std::ptrdiff_t>(end * c), y.values().begin());
  return a.tape().record(std::move(y), {a}, [a, begin, c](Tape& tape, const Tensor& g) {
    if (Tensor* ga = tape.grad_sink(a)) {
      for (std::size_t i = 0; i < g.size(); ++i) {
        (*ga)[begin * c + i] += g[i];
      }
    }
  });
}

Var slice_cols(const Var& a, std::size_t begin, std::size_t end) {
  const Tensor& x = a.value();
  if (begin > end || end > x.cols()) {
    throw ShapeError("slice_cols: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") outside " + to_string(x.shape()));
  }
  const std::size_t r = x.rows(), c = x.cols(), w = end - begin;
  Tensor y(matrix_shape(r, w));
  for (std::size_t i = 0; i < r; ++i) {
    std::copy_n(x.row(i).begin() + static_cast<std::ptrdiff_t>(begin), w, y.row(i).begin());
  }
  return a.tape().record(std::move(y), {a}, [a, begin, r, c, w](Tape& tape, const Tensor& g) {
    if (Tensor* ga = tape.grad_sink(a)) {
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < w; ++j) {
          (*ga)[i * c + begin + j] += g[i * w + j];
        }
      }
    }
  });
}

Var pad_rows(const Var& a, std::size_t total_rows) {
  const Tensor& x = a.value();
  if (total_rows < x.rows()) {
    throw ShapeError("pad_rows: cannot pad " + to_string(x.shape()) + " to " + std::to_string(total_rows) +
                     " rows");
  }
  Tensor y(matrix_shape(total_rows, x.cols()));
  std::copy(x.values().begin(), x.values().end(), y.values().begin());
  return a.tape().record(std::move(y), {a}, [a](Tape& tape, const Tensor& g) {
    if (Tensor* ga = tape.grad_sink(a)) {
      for (std::size_t i = 0; i < ga->size(); ++i) {
        (*ga)[i] += g[i];
      }
    }
  });
}

Var gather_rows(const Var& table, std::span<const std::uint32_t> ids) {
  const Tensor& t = table.value();
  const std::size_t c = t.cols();
  Tensor y(matrix_shape(ids.size(), c));
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= t.rows()) {
      throw std::out_of_range("gather_rows: id " + std::to_string(ids[i]) + " outside table of " +
                              std::to_string(t.rows()) + " rows");
    }
    std::copy_n(t.row(ids[i]).begin(), c, y.row(i).begin());
  }
  std::vector<std::uint32_t> kept(ids.begin(), ids.end());
  return table.tape().record(std::move(y), {table}, [table, kept = std::move(kept), c](Tape& tape, const Tensor& g) {
    if (Tensor* gt = tape.grad_sink(table)) {
      for (std::size_t i = 0; i < kept.size(); ++i) {
        double* dst = gt->values().data() + static_cast<std::size_t>(kept[i]) * c;
        for (std::size_t j = 0; j < c; ++j) {
          dst[j] += g[i * c + j];
        }
      }
    }
  });
}

Var sum(const Var& a) {
  double total = 0.0;
  for (double v : a.value().values()) {
    total += v;
  }
  return a.tape().record(Tensor::scalar(total), {a}, [a](Tape& tape, const Tensor& g) {
    if (Tensor* ga = tape.grad_sink(a)) {
      for (double& v : ga->values()) {
        v += g[0];
      }
    }
  });
}

Var max_over_time(const Var& h, std::size_t valid_len) {
  const Tensor& x = h.value();
  if (valid_len == 0 || valid_len > x.rows()) {
    throw std::invalid_argument("max_over_time: valid_len " + std::to_string(valid_len) + " outside [1, " +
                                std::to_string(x.rows()) + "]");
  }
  const std::size_t c = x.cols();
  Tensor y(matrix_shape(1, c));
  std::vector<std::size_t> argmax(c, 0);
  for (std::size_t j = 0; j < c; ++j) {
    double best = x.at(0, j);
    for (std::size_t t = 1; t < valid_len; ++t) {
      if (x.at(t, j) > best) {
        best = x.at(t, j);
        argmax[j] = t;
      }
    }
    y[j] = best;
  }
  return h.tape().record(std::move(y), {h}, [h, argmax = std::move(argmax), c](Tape& tape, const Tensor& g) {
    if (Tensor* gh = tape.grad_sink(h)) {
      for (std::size_t j = 0; j < c; ++j) {
        (*gh)[argmax[j] * c + j] += g[j];
      }
    }
  });
}

namespace {

// Softmax of each row over its unmasked entries; fully masked rows are zero.
Tensor masked_softmax_values(const Tensor& x, const std::vector<bool>& mask) {
  const std::size_t r = x.rows(), c = x.cols();
  Tensor y(x.shape());
  for (std::size_t i = 0; i < r; ++i) {
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < c; ++j) {
      if (mask[i * c + j]) {
        peak = std::max(peak, x.at(i, j));
      }
    }
    if (peak == -std::numeric_limits<double>::infinity()) {
      continue;
    }
    double denom = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      if (mask[i * c + j]) {
        const double e = std::exp(x.at(i, j) - peak);
        y.at(i, j) = e;
        denom += e;
      }
    }
    for (std::size_t j = 0; j < c; ++j) {
      y.at(i, j) /= denom;
    }
  }
  return y;
}

Var masked_softmax_impl(const Var& scores, const std::vector<bool>& mask) {
  const Tensor& x = scores.value();
  if (mask.size() != x.size()) {
    throw ShapeError("masked_softmax: mask of " + std::to_string(mask.size()) + " entries vs scores " +
                     to_string(x.shape()));
  }
  Tensor y = masked_softmax_values(x, mask);
  const std::size_t r = x.rows(), c = x.cols();
  const std::size_t out_id = scores.tape().size();
  return scores.tape().record(std::move(y), {scores}, [scores, out_id, r, c](Tape& tape, const Tensor& g) {
    if (Tensor* gs = tape.grad_sink(scores)) {
      const Tensor& y = tape.value(out_id);
      // dx_j = y_j (g_j - sum_k g_k y_k); masked entries have y = 0.
      for (std::size_t i = 0; i < r; ++i) {
        double dot = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
          dot += g.at(i, j) * y.at(i, j);
        }
        for (std::size_t j = 0; j < c; ++j) {
          (*gs)[i * c + j] += y.at(i, j) * (g.at(i, j) - dot);
        }
      }
    }
  });
}

}  // namespace

Var masked_softmax(const Var& scores, const std::vector<bool>& mask) {
  if (scores.rows() != 1) {
    throw ShapeError("masked_softmax: expected a single row, got " + to_string(scores.shape()));
  }
  if (std::none_of(mask.begin(), mask.end(), [](bool b) { return b; })) {
    throw std::invalid_argument("masked_softmax: every entry is masked");
  }
  return masked_softmax_impl(scores, mask);
}

Var masked_softmax_rows(const Var& scores, const std::vector<bool>& mask) {
  return masked_softmax_impl(scores, mask);
}

Var dropout(const Var& x, double p, Mode mode, CounterRng& rng) {
  if (!(p >= 0.0 && p < 1.0)) {
    throw std::invalid_argument("dropout: p must lie in [0, 1)");
  }
  if (mode == Mode::Eval || p == 0.0) {
    return x;
  }
  const CounterRng stream = rng.split(rng.next());
  const double keep_scale = 1.0 / (1.0 - p);
  const Tensor& v = x.value();
  std::vector<double> factor(v.size());
  Tensor y(v.shape());
  for (std::size_t i = 0; i < v.size(); ++i) {
    factor[i] = CounterRng::to_unit(stream.at(i)) < p ? 0.0 : keep_scale;
    y[i] = v[i] * factor[i];
  }
  x.tape().mark_stochastic();
  return x.tape().record(std::move(y), {x}, [x, factor = std::move(factor)](Tape& tape, const Tensor& g) {
    if (Tensor* gx = tape.grad_sink(x)) {
      for (std::size_t i = 0; i < g.size(); ++i) {
        (*gx)[i] += g[i] * factor[i];
      }
    }
  });
}

Var weighted_cross_entropy(const Var& logits, std::span<const std::size_t> golds,
                           std::span<const double> class_weights) {
  const Tensor& z = logits.value();
  const std::size_t n = z.rows(), c = z.cols();
  if (golds.size() != n) {
    throw ShapeError("weighted_cross_entropy: " + std::to_string(golds.size()) + " golds vs logits " +
                     to_string(z.shape()));
  }
  if (class_weights.size() != c) {
    throw ShapeError("weighted_cross_entropy: " + std::to_string(class_weights.size()) +
                     " class weights vs logits " + to_string(z.shape()));
  }
  if (n == 0) {
    throw std::invalid_argument("weighted_cross_entropy: empty batch");
  }

  // Row-wise softmax, kept for the backward pass.
  Tensor probs(z.shape());
  std::vector<double> row_weight(n);
  double weight_sum = 0.0;
  double weighted_nll = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (golds[i] >= c) {
      throw std::out_of_range("weighted_cross_entropy: gold index " + std::to_string(golds[i]));
    }
    const auto row = z.row(i);
    const double peak = *std::max_element(row.begin(), row.end());
    double denom = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      denom += std::exp(row[j] - peak);
    }
    for (std::size_t j = 0; j < c; ++j) {
      probs.at(i, j) = std::exp(row[j] - peak) / denom;
    }
    row_weight[i] = class_weights[golds[i]];
    if (row_weight[i] != 0.0) {
      const double log_p = row[golds[i]] - peak - std::log(denom);
      weighted_nll += row_weight[i] * -log_p;
      weight_sum += row_weight[i];
    }
  }
  const double loss = weight_sum > 0.0 ? weighted_nll / weight_sum : 0.0;

  std::vector<std::size_t> gold_copy(golds.begin(), golds.end());
  return logits.tape().record(
      Tensor::scalar(loss), {logits},
      [logits, probs = std::move(probs), row_weight = std::move(row_weight), gold_copy = std::move(gold_copy),
       weight_sum, n, c](Tape& tape, const Tensor& g) {
        if (weight_sum <= 0.0) {
          return;
        }
        if (Tensor* gz = tape.grad_sink(logits)) {
          for (std::size_t i = 0; i < n; ++i) {
            if (row_weight[i] == 0.0) {
              continue;
            }
            const double k = g[0] * row_weight[i] / weight_sum;
            for (std::size_t j = 0; j < c; ++j) {
              const double target = j == gold_copy[i] ? 1.0 : 0.0;
              (*gz)[i * c + j] += k * (probs.at(i, j) - target);
            }
          }
        }
      });
}

}  // namespace dialoglow::ad
