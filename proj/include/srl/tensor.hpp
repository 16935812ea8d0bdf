#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <utility>
#include <vector>

#include "srl/rng.hpp"
#include "srl/util.hpp"

namespace srl {

struct TensorData {
  std::vector<std::size_t> shape;
  std::vector<double> v;
  std::vector<double> g;  // empty until touched by backward / zero_grad
  bool requires_grad = false;
};

// Shared handle to a shaped 64-bit float buffer. Copies alias the same data.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<std::size_t> shape, bool requires_grad = false) {
    auto d = std::make_shared<TensorData>();
    std::size_t n = 1;
    for (std::size_t s : shape) {
      require(s > 0, "tensor: zero dimension in shape ", shape_str(shape));
      n *= s;
    }
    d->shape = std::move(shape);
    d->v.assign(n, 0.0);
    d->requires_grad = requires_grad;
    return Tensor(std::move(d));
  }

  static Tensor from(std::vector<std::size_t> shape, std::vector<double> values,
                     bool requires_grad = false) {
    Tensor t = zeros(std::move(shape), requires_grad);
    require(values.size() == t.numel(), "tensor: ", values.size(), " values for shape ",
            shape_str(t.shape()));
    t.data_->v = std::move(values);
    return t;
  }

  static Tensor vec(std::vector<double> values, bool requires_grad = false) {
    std::size_t n = values.size();
    return from({n}, std::move(values), requires_grad);
  }

  static Tensor scalar(double value, bool requires_grad = false) {
    return from({1}, {value}, requires_grad);
  }

  bool defined() const { return static_cast<bool>(data_); }
  const std::vector<std::size_t>& shape() const { return data_->shape; }
  std::size_t rank() const { return data_->shape.size(); }
  std::size_t dim(std::size_t i) const { return data_->shape[i]; }
  std::size_t numel() const { return data_->v.size(); }

  // A Tensor is a shared handle: const handles still expose the mutable
  // underlying buffers (shared_ptr semantics).
  std::vector<double>& vals() const { return data_->v; }

  bool requires_grad() const { return data_->requires_grad; }
  void set_requires_grad(bool b) const { data_->requires_grad = b; }

  bool has_grad() const { return !data_->g.empty(); }
  std::vector<double>& grad() const {
    if (data_->g.empty()) data_->g.assign(data_->v.size(), 0.0);
    return data_->g;
  }
  void zero_grad() const { data_->g.assign(data_->v.size(), 0.0); }

  double item() const {
    require(numel() == 1, "tensor: item() on shape ", shape_str(shape()));
    return data_->v[0];
  }

  TensorData* node() const { return data_.get(); }

 private:
  explicit Tensor(std::shared_ptr<TensorData> d) : data_(std::move(d)) {}
  std::shared_ptr<TensorData> data_;
};

inline bool all_finite(const Tensor& t) {
  for (double x : t.vals())
    if (!std::isfinite(x)) return false;
  return true;
}

inline double sigmoid_val(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

// Reverse-mode tape. Ops record a backward closure when any input requires a
// gradient; backward() replays the closures in reverse creation order, which
// is a topological order by construction. One tape per forward pass; tapes
// over shared read-only parameters may run concurrently.
class Tape {
 public:
  explicit Tape(bool recording = true) : recording_(recording) {}

  bool recording() const { return recording_; }
  std::size_t size() const { return nodes_.size(); }

  Tensor matmul(const Tensor& a, const Tensor& b) {
    require(a.rank() >= 1 && a.rank() <= 2 && b.rank() >= 1 && b.rank() <= 2,
            "matmul: rank must be 1 or 2, got ", shape_str(a.shape()), " and ",
            shape_str(b.shape()));
    // Rank-1 left operand acts as a row vector, rank-1 right as a column.
    std::size_t m = a.rank() == 2 ? a.dim(0) : 1;
    std::size_t k = a.rank() == 2 ? a.dim(1) : a.dim(0);
    std::size_t n = b.rank() == 2 ? b.dim(1) : 1;
    require(k == b.dim(0), "matmul: incompatible shapes ", shape_str(a.shape()), " and ",
            shape_str(b.shape()));
    std::vector<std::size_t> out_shape;
    if (a.rank() == 2 && b.rank() == 2)
      out_shape = {m, n};
    else if (a.rank() == 2)
      out_shape = {m};
    else if (b.rank() == 2)
      out_shape = {n};
    else
      out_shape = {1};
    Tensor out = Tensor::zeros(out_shape);
    {
      const double* pa = a.vals().data();
      const double* pb = b.vals().data();
      double* po = out.vals().data();
      if (n == 1) {  // matrix-vector: contiguous dot per row
        for (std::size_t i = 0; i < m; ++i) {
          const double* parow = pa + i * k;
          double acc = 0.0;
          for (std::size_t l = 0; l < k; ++l) acc += parow[l] * pb[l];
          po[i] = acc;
        }
      } else {
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t l = 0; l < k; ++l) {
            double av = pa[i * k + l];
            const double* pbrow = pb + l * n;
            double* porow = po + i * n;
            for (std::size_t j = 0; j < n; ++j) porow[j] += av * pbrow[j];
          }
      }
    }
    if (track(a, b)) {
      out.set_requires_grad(true);
      push([a, b, out, m, k, n]() mutable {
        const double* go = out.grad().data();
        if (a.requires_grad()) {
          double* ga = a.grad().data();
          const double* pb = b.vals().data();
          if (n == 1) {  // dA += go * b^T, rank-1 rows
            for (std::size_t i = 0; i < m; ++i) {
              double g = go[i];
              double* garow = ga + i * k;
              for (std::size_t l = 0; l < k; ++l) garow[l] += g * pb[l];
            }
          } else {
            for (std::size_t i = 0; i < m; ++i)
              for (std::size_t l = 0; l < k; ++l) {
                double acc = 0.0;
                const double* pbrow = pb + l * n;
                const double* gorow = go + i * n;
                for (std::size_t j = 0; j < n; ++j) acc += gorow[j] * pbrow[j];
                ga[i * k + l] += acc;
              }
          }
        }
        if (b.requires_grad()) {
          double* gb = b.grad().data();
          const double* pa = a.vals().data();
          if (n == 1) {  // db += A^T * go
            for (std::size_t i = 0; i < m; ++i) {
              double g = go[i];
              const double* parow = pa + i * k;
              for (std::size_t l = 0; l < k; ++l) gb[l] += g * parow[l];
            }
          } else {
            for (std::size_t l = 0; l < k; ++l)
              for (std::size_t i = 0; i < m; ++i) {
                double av = pa[i * k + l];
                const double* gorow = go + i * n;
                double* gbrow = gb + l * n;
                for (std::size_t j = 0; j < n; ++j) gbrow[j] += av * gorow[j];
              }
          }
        }
      });
    }
    return out;
  }

  // Elementwise add; either operand may be a scalar (numel 1) broadcast.
  Tensor add(const Tensor& a, const Tensor& b) { return zip("add", a, b, false); }

  // Elementwise multiply; either operand may be a scalar broadcast.
  Tensor mul(const Tensor& a, const Tensor& b) { return zip("elementwise-mul", a, b, true); }

  Tensor concat(const std::vector<Tensor>& xs) {
    require(!xs.empty(), "concat: empty input list");
    std::size_t total = 0;
    for (const auto& x : xs) {
      require(x.rank() == 1, "concat: rank-1 inputs required, got ", shape_str(x.shape()));
      total += x.numel();
    }
    Tensor out = Tensor::zeros({total});
    std::size_t off = 0;
    for (const auto& x : xs) {
      std::copy(x.vals().begin(), x.vals().end(), out.vals().begin() + off);
      off += x.numel();
    }
    bool rec = false;
    for (const auto& x : xs) rec = rec || x.requires_grad();
    if (recording_ && rec) {
      out.set_requires_grad(true);
      push([xs, out]() mutable {
        const double* go = out.grad().data();
        std::size_t off = 0;
        for (auto& x : xs) {
          if (x.requires_grad()) {
            double* gx = x.grad().data();
            for (std::size_t i = 0; i < x.numel(); ++i) gx[i] += go[off + i];
          }
          off += x.numel();
        }
      });
    }
    return out;
  }

  Tensor sigmoid(const Tensor& x) {
    return unary(
        x, [](double v) { return sigmoid_val(v); },
        [](double /*v*/, double y) { return y * (1.0 - y); });
  }

  Tensor tanh(const Tensor& x) {
    return unary(
        x, [](double v) { return std::tanh(v); },
        [](double /*v*/, double y) { return 1.0 - y * y; });
  }

  Tensor relu(const Tensor& x) {
    return unary(
        x, [](double v) { return v > 0.0 ? v : 0.0; },
        [](double v, double /*y*/) { return v > 0.0 ? 1.0 : 0.0; });
  }

  // Scalar affine map a*x + b with plain double coefficients.
  Tensor affine(const Tensor& x, double a, double b) {
    return unary(
        x, [a, b](double v) { return a * v + b; }, [a](double, double) { return a; });
  }

  // Softmax with max-subtraction; rank-1 over the whole vector, rank-2 per row.
  Tensor softmax(const Tensor& x) {
    require(x.rank() == 1 || x.rank() == 2, "softmax: rank 1 or 2 required, got ",
            shape_str(x.shape()));
    std::size_t rows = x.rank() == 2 ? x.dim(0) : 1;
    std::size_t cols = x.rank() == 2 ? x.dim(1) : x.dim(0);
    Tensor out = Tensor::zeros(x.shape());
    for (std::size_t r = 0; r < rows; ++r) {
      const double* px = x.vals().data() + r * cols;
      double* po = out.vals().data() + r * cols;
      double mx = px[0];
      for (std::size_t j = 1; j < cols; ++j) mx = std::max(mx, px[j]);
      double z = 0.0;
      for (std::size_t j = 0; j < cols; ++j) {
        po[j] = std::exp(px[j] - mx);
        z += po[j];
      }
      for (std::size_t j = 0; j < cols; ++j) po[j] /= z;
    }
    if (track(x)) {
      out.set_requires_grad(true);
      push([x, out, rows, cols]() mutable {
        double* gx = x.grad().data();
        const double* go = out.grad().data();
        const double* y = out.vals().data();
        for (std::size_t r = 0; r < rows; ++r) {
          double dot = 0.0;
          for (std::size_t j = 0; j < cols; ++j) dot += go[r * cols + j] * y[r * cols + j];
          for (std::size_t j = 0; j < cols; ++j)
            gx[r * cols + j] += y[r * cols + j] * (go[r * cols + j] - dot);
        }
      });
    }
    return out;
  }

  // Sum of a set of same-shaped tensors (e.g. child-state sums).
  Tensor sum(const std::vector<Tensor>& xs) {
    require(!xs.empty(), "sum-over-set: empty input list");
    for (const auto& x : xs)
      require(x.shape() == xs[0].shape(), "sum-over-set: mismatched shapes ",
              shape_str(xs[0].shape()), " and ", shape_str(x.shape()));
    Tensor out = Tensor::zeros(xs[0].shape());
    for (const auto& x : xs)
      for (std::size_t i = 0; i < out.numel(); ++i) out.vals()[i] += x.vals()[i];
    bool rec = false;
    for (const auto& x : xs) rec = rec || x.requires_grad();
    if (recording_ && rec) {
      out.set_requires_grad(true);
      push([xs, out]() mutable {
        const double* go = out.grad().data();
        for (auto& x : xs) {
          if (!x.requires_grad()) continue;
          double* gx = x.grad().data();
          for (std::size_t i = 0; i < x.numel(); ++i) gx[i] += go[i];
        }
      });
    }
    return out;
  }

  // Reduce all elements to a scalar.
  Tensor reduce_sum(const Tensor& x) {
    double acc = 0.0;
    for (double v : x.vals()) acc += v;
    Tensor out = Tensor::scalar(acc);
    if (track(x)) {
      out.set_requires_grad(true);
      push([x, out]() mutable {
        double go = out.grad()[0];
        double* gx = x.grad().data();
        for (std::size_t i = 0; i < x.numel(); ++i) gx[i] += go;
      });
    }
    return out;
  }

  // Row lookup in a rank-2 table; gradient flows only to the looked-up row.
  Tensor lookup(const Tensor& table, std::size_t row) {
    require(table.rank() == 2, "embedding-lookup: table must be rank 2, got ",
            shape_str(table.shape()));
    require(row < table.dim(0), "embedding-lookup: row ", row, " out of range for ",
            shape_str(table.shape()));
    std::size_t d = table.dim(1);
    Tensor out = Tensor::zeros({d});
    std::copy(table.vals().begin() + row * d, table.vals().begin() + (row + 1) * d,
              out.vals().begin());
    if (track(table)) {
      out.set_requires_grad(true);
      push([table, out, row, d]() mutable {
        double* gt = table.grad().data();
        const double* go = out.grad().data();
        for (std::size_t i = 0; i < d; ++i) gt[row * d + i] += go[i];
      });
    }
    return out;
  }

  // Select a single element as a scalar tensor.
  Tensor pick(const Tensor& x, std::size_t i) {
    require(i < x.numel(), "pick: index ", i, " out of range for ", shape_str(x.shape()));
    Tensor out = Tensor::scalar(x.vals()[i]);
    if (track(x)) {
      out.set_requires_grad(true);
      push([x, out, i]() mutable { x.grad()[i] += out.grad()[0]; });
    }
    return out;
  }

  Tensor slice(const Tensor& x, std::size_t offset, std::size_t len) {
    require(x.rank() == 1, "slice: rank-1 input required, got ", shape_str(x.shape()));
    require(offset + len <= x.numel(), "slice: [", offset, ", ", offset + len,
            ") out of range for ", shape_str(x.shape()));
    Tensor out = Tensor::zeros({len});
    std::copy(x.vals().begin() + offset, x.vals().begin() + offset + len, out.vals().begin());
    if (track(x)) {
      out.set_requires_grad(true);
      push([x, out, offset, len]() mutable {
        double* gx = x.grad().data();
        const double* go = out.grad().data();
        for (std::size_t i = 0; i < len; ++i) gx[offset + i] += go[i];
      });
    }
    return out;
  }

  Tensor reshape(const Tensor& x, std::vector<std::size_t> shape) {
    Tensor out = Tensor::from(std::move(shape), x.vals());
    require(out.numel() == x.numel(), "reshape: numel mismatch ", shape_str(x.shape()), " -> ",
            shape_str(out.shape()));
    if (track(x)) {
      out.set_requires_grad(true);
      push([x, out]() mutable {
        double* gx = x.grad().data();
        const double* go = out.grad().data();
        for (std::size_t i = 0; i < x.numel(); ++i) gx[i] += go[i];
      });
    }
    return out;
  }

  // Seeded inverted dropout; identity when not training or rate == 0.
  Tensor dropout(const Tensor& x, double rate, Rng& rng, bool training) {
    require(rate >= 0.0 && rate < 1.0, "dropout-mask: rate ", rate, " outside [0, 1)");
    if (!training || rate == 0.0) return x;
    auto mask = std::make_shared<std::vector<double>>(x.numel());
    double keep = 1.0 - rate;
    for (auto& m : *mask) m = rng.bernoulli(keep) ? 1.0 / keep : 0.0;
    Tensor out = Tensor::zeros(x.shape());
    for (std::size_t i = 0; i < x.numel(); ++i) out.vals()[i] = x.vals()[i] * (*mask)[i];
    if (track(x)) {
      out.set_requires_grad(true);
      push([x, out, mask]() mutable {
        double* gx = x.grad().data();
        const double* go = out.grad().data();
        for (std::size_t i = 0; i < x.numel(); ++i) gx[i] += go[i] * (*mask)[i];
      });
    }
    return out;
  }

  // -log softmax(logits)[target], fused for stability.
  Tensor cross_entropy(const Tensor& logits, std::size_t target) {
    require(logits.rank() == 1, "cross-entropy: rank-1 logits required, got ",
            shape_str(logits.shape()));
    require(target < logits.numel(), "cross-entropy: target ", target, " out of range for ",
            shape_str(logits.shape()));
    const auto& x = logits.vals();
    double mx = x[0];
    for (double v : x) mx = std::max(mx, v);
    double z = 0.0;
    for (double v : x) z += std::exp(v - mx);
    double lse = mx + std::log(z);
    Tensor out = Tensor::scalar(lse - x[target]);
    if (track(logits)) {
      out.set_requires_grad(true);
      push([logits, out, target, lse]() mutable {
        double go = out.grad()[0];
        double* gx = logits.grad().data();
        const double* px = logits.vals().data();
        for (std::size_t i = 0; i < logits.numel(); ++i) {
          double p = std::exp(px[i] - lse);
          gx[i] += go * (p - (i == target ? 1.0 : 0.0));
        }
      });
    }
    return out;
  }

  // Binary cross-entropy on sigmoid(score) against label y, numerically stable.
  Tensor bce_with_logits(const Tensor& score, double y) {
    require(score.numel() == 1, "bce: scalar score required, got ", shape_str(score.shape()));
    double s = score.vals()[0];
    double loss = std::max(s, 0.0) - s * y + std::log1p(std::exp(-std::fabs(s)));
    Tensor out = Tensor::scalar(loss);
    if (track(score)) {
      out.set_requires_grad(true);
      push([score, out, y]() mutable {
        score.grad()[0] += out.grad()[0] * (sigmoid_val(score.vals()[0]) - y);
      });
    }
    return out;
  }

  // Seeds d(loss)/d(loss) = 1 and replays recorded closures in reverse.
  // Already-populated gradients accumulate (a tensor feeding two consumers
  // receives the sum of both contributions).
  void backward(const Tensor& loss) {
    require(loss.numel() == 1, "backward: loss must be scalar, got ", shape_str(loss.shape()));
    require(recording_, "backward: tape was created in no-record mode");
    loss.grad()[0] += 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
  }

 private:
  bool track(const Tensor& a) const { return recording_ && a.requires_grad(); }
  bool track(const Tensor& a, const Tensor& b) const {
    return recording_ && (a.requires_grad() || b.requires_grad());
  }

  void push(std::function<void()> f) { nodes_.push_back(std::move(f)); }

  template <typename F, typename DF>
  Tensor unary(const Tensor& x, F f, DF df) {
    Tensor out = Tensor::zeros(x.shape());
    for (std::size_t i = 0; i < x.numel(); ++i) out.vals()[i] = f(x.vals()[i]);
    if (track(x)) {
      out.set_requires_grad(true);
      push([x, out, df]() mutable {
        double* gx = x.grad().data();
        const double* go = out.grad().data();
        const double* pv = x.vals().data();
        const double* py = out.vals().data();
        for (std::size_t i = 0; i < x.numel(); ++i) gx[i] += go[i] * df(pv[i], py[i]);
      });
    }
    return out;
  }

  Tensor zip(const char* name, const Tensor& a, const Tensor& b, bool is_mul) {
    bool a_scalar = a.numel() == 1;
    bool b_scalar = b.numel() == 1;
    require(a.shape() == b.shape() || a_scalar || b_scalar, name, ": incompatible shapes ",
            shape_str(a.shape()), " and ", shape_str(b.shape()));
    const Tensor& big = (!a_scalar || a.shape() == b.shape()) ? a : b;
    Tensor out = Tensor::zeros(big.shape());
    std::size_t n = out.numel();
    for (std::size_t i = 0; i < n; ++i) {
      double av = a_scalar ? a.vals()[0] : a.vals()[i];
      double bv = b_scalar ? b.vals()[0] : b.vals()[i];
      out.vals()[i] = is_mul ? av * bv : av + bv;
    }
    if (track(a, b)) {
      out.set_requires_grad(true);
      push([a, b, out, a_scalar, b_scalar, is_mul, n]() mutable {
        const double* go = out.grad().data();
        if (a.requires_grad()) {
          double* ga = a.grad().data();
          for (std::size_t i = 0; i < n; ++i) {
            double d = is_mul ? go[i] * (b_scalar ? b.vals()[0] : b.vals()[i]) : go[i];
            ga[a_scalar ? 0 : i] += d;
          }
        }
        if (b.requires_grad()) {
          double* gb = b.grad().data();
          for (std::size_t i = 0; i < n; ++i) {
            double d = is_mul ? go[i] * (a_scalar ? a.vals()[0] : a.vals()[i]) : go[i];
            gb[b_scalar ? 0 : i] += d;
          }
        }
      });
    }
    return out;
  }

  bool recording_;
  std::vector<std::function<void()>> nodes_;
};

}  // namespace srl
