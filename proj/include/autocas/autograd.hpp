#pragma once

// Reverse-mode automatic differentiation over dense 2-D tensors.
//
// A Tensor is a shared handle to a value matrix and an optional gradient.
// Primitives take a Tape, compute their value eagerly and, when any input
// requires a gradient, append a backward closure to the tape. Tape::backward
// replays those closures in reverse order exactly once. Tensors that do not
// require gradients (frozen weights, constants) never get a gradient buffer.

#include <cmath>
#include <functional>
#include <memory>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "autocas/error.hpp"

namespace autocas::ag {

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
struct TensorData {
  Matrix<T> value;
  Matrix<T> grad;  // empty until something flows into it
  bool requires_grad = false;
  std::string name;

  template <typename Expr>
  void accumulate(const Expr& g) {
    if (grad.size() == 0) {
      grad = g;
    } else {
      grad += g;
    }
  }
};

template <typename T>
class Tensor {
 public:
  using Scalar = T;

  Tensor() = default;

  static Tensor constant(Matrix<T> value, std::string name = {}) { return make(std::move(value), false, std::move(name)); }
  static Tensor parameter(Matrix<T> value, std::string name) { return make(std::move(value), true, std::move(name)); }

  bool defined() const { return data_ != nullptr; }
  Eigen::Index rows() const { return data_->value.rows(); }
  Eigen::Index cols() const { return data_->value.cols(); }
  Eigen::Index size() const { return data_->value.size(); }

  const Matrix<T>& value() const { return data_->value; }
  Matrix<T>& value_mut() { return data_->value; }
  const Matrix<T>& grad() const { return data_->grad; }
  bool has_grad() const { return data_->grad.size() != 0; }
  void zero_grad() { data_->grad.resize(0, 0); }

  bool requires_grad() const { return data_->requires_grad; }
  void set_requires_grad(bool flag) {
    data_->requires_grad = flag;
    if (!flag) zero_grad();
  }

  const std::string& name() const { return data_->name; }
  T item() const {
    if (size() != 1) throw ShapeError("item: tensor is " + shape() + ", not 1x1");
    return data_->value(0, 0);
  }
  std::string shape() const { return std::to_string(rows()) + "x" + std::to_string(cols()); }

  const std::shared_ptr<TensorData<T>>& data() const { return data_; }

 private:
  static Tensor make(Matrix<T> value, bool requires_grad, std::string name) {
    Tensor t;
    t.data_ = std::make_shared<TensorData<T>>();
    t.data_->value = std::move(value);
    t.data_->requires_grad = requires_grad;
    t.data_->name = std::move(name);
    return t;
  }

  std::shared_ptr<TensorData<T>> data_;
};

template <typename T>
class Tape {
 public:
  using Backward = std::function<void()>;

  void record(Backward fn) { ops_.push_back(std::move(fn)); }
  std::size_t size() const { return ops_.size(); }
  void clear() { ops_.clear(); }

  /// Seeds d(loss)/d(loss) = 1 and runs every recorded closure in reverse.
  /// The tape is consumed.
  void backward(const Tensor<T>& loss) {
    if (loss.rows() != 1 || loss.cols() != 1) {
      throw ShapeError("backward: loss must be a scalar tensor, got " + loss.shape());
    }
    if (!loss.requires_grad()) {
      ops_.clear();
      return;
    }
    loss.data()->accumulate(Matrix<T>::Ones(1, 1));
    for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
    ops_.clear();
  }

 private:
  std::vector<Backward> ops_;
};

/// Whether primitives record backward closures on this thread.
inline bool& grad_mode() {
  thread_local bool enabled = true;
  return enabled;
}

/// Disables recording for its lifetime (inference).
class NoGradGuard {
 public:
  NoGradGuard() : previous_(grad_mode()) { grad_mode() = false; }
  ~NoGradGuard() { grad_mode() = previous_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

namespace detail {

template <typename T>
Tensor<T> result(Matrix<T> value, std::initializer_list<const Tensor<T>*> inputs) {
  bool needs = false;
  if (grad_mode()) {
    for (const auto* in : inputs) needs = needs || in->requires_grad();
  }
  auto out = Tensor<T>::constant(std::move(value));
  out.set_requires_grad(needs);
  return out;
}

template <typename T>
[[noreturn]] void shape_fail(const char* primitive, const Tensor<T>& a, const Tensor<T>& b) {
  throw ShapeError(std::string(primitive) + ": incompatible shapes " + a.shape() + " and " + b.shape());
}

}  // namespace detail

template <typename T>
Tensor<T> matmul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.cols() != b.rows()) detail::shape_fail("matmul", a, b);
  Matrix<T> value = a.value() * b.value();
  auto out = detail::result<T>(std::move(value), {&a, &b});
  if (out.requires_grad()) {
    tape.record([a = a.data(), b = b.data(), o = out.data()] {
      if (o->grad.size() == 0) return;
      if (a->requires_grad) a->accumulate(o->grad * b->value.transpose());
      if (b->requires_grad) b->accumulate(a->value.transpose() * o->grad);
    });
  }
  return out;
}

template <typename T>
Tensor<T> add(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) detail::shape_fail("add", a, b);
  auto out = detail::result<T>(a.value() + b.value(), {&a, &b});
  if (out.requires_grad()) {
    tape.record([a = a.data(), b = b.data(), o = out.data()] {
      if (o->grad.size() == 0) return;
      if (a->requires_grad) a->accumulate(o->grad);
      if (b->requires_grad) b->accumulate(o->grad);
    });
  }
  return out;
}

/// A (r x c) plus a 1 x c row broadcast over every row.
template <typename T>
Tensor<T> add_row(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) detail::shape_fail("add_row", a, row);
  Matrix<T> value = a.value().rowwise() + row.value().row(0);
  auto out = detail::result<T>(std::move(value), {&a, &row});
  if (out.requires_grad()) {
    tape.record([a = a.data(), r = row.data(), o = out.data()] {
      if (o->grad.size() == 0) return;
      if (a->requires_grad) a->accumulate(o->grad);
      if (r->requires_grad) r->accumulate(o->grad.colwise().sum());
    });
  }
  return out;
}

template <typename T>
Tensor<T> scale(Tape<T>& tape, const Tensor<T>& a, T c) {
  auto out = detail::result<T>(a.value() * c, {&a});
  if (out.requires_grad()) {
    tape.record([a = a.data(), o = out.data(), c] {
      if (o->grad.size() == 0) return;
      a->accumulate(o->grad * c);
    });
  }
  return out;
}

/// tanh approximation of GELU.
template <typename T>
Tensor<T> gelu(Tape<T>& tape, const Tensor<T>& a) {
  static constexpr T k = static_cast<T>(0.7978845608028654);  // sqrt(2 / pi)
  static constexpr T c = static_cast<T>(0.044715);
  const auto& x = a.value().array();
  const Eigen::Array<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> th = (k * (x + c * x.cube())).tanh();
  Matrix<T> value = (T(0.5) * x * (T(1) + th)).matrix();
  auto out = detail::result<T>(std::move(value), {&a});
  if (out.requires_grad()) {
    tape.record([a = a.data(), o = out.data(), th] {
      if (o->grad.size() == 0) return;
      const auto& x = a->value.array();
      const auto d = T(0.5) * (T(1) + th) + T(0.5) * x * (T(1) - th.square()) * k * (T(1) + T(3) * c * x.square());
      a->accumulate((o->grad.array() * d).matrix());
    });
  }
  return out;
}

template <typename T>
Tensor<T> tanh(Tape<T>& tape, const Tensor<T>& a) {
  Matrix<T> value = a.value().array().tanh().matrix();
  auto out = detail::result<T>(std::move(value), {&a});
  if (out.requires_grad()) {
    tape.record([a = a.data(), o = out.data()] {
      if (o->grad.size() == 0) return;
      a->accumulate((o->grad.array() * (T(1) - o->value.array().square())).matrix());
    });
  }
  return out;
}

template <typename T>
Tensor<T> softmax_rows(Tape<T>& tape, const Tensor<T>& a) {
  Matrix<T> value(a.rows(), a.cols());
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    const T peak = a.value().row(r).maxCoeff();
    value.row(r) = (a.value().row(r).array() - peak).exp().matrix();
    value.row(r) /= value.row(r).sum();
  }
  auto out = detail::result<T>(std::move(value), {&a});
  if (out.requires_grad()) {
    tape.record([a = a.data(), o = out.data()] {
      if (o->grad.size() == 0) return;
      const auto& y = o->value;
      const auto& dy = o->grad;
      Matrix<T> dx(y.rows(), y.cols());
      for (Eigen::Index r = 0; r < y.rows(); ++r) {
        const T dot = y.row(r).dot(dy.row(r));
        dx.row(r) = (y.row(r).array() * (dy.row(r).array() - dot)).matrix();
      }
      a->accumulate(dx);
    });
  }
  return out;
}

/// Row-wise normalization to mean 0, variance 1 followed by gamma * x + beta.
template <typename T>
Tensor<T> layernorm(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& gamma, const Tensor<T>& beta,
                    T eps = static_cast<T>(1e-5)) {
  if (gamma.rows() != 1 || gamma.cols() != a.cols()) detail::shape_fail("layernorm", a, gamma);
  if (beta.rows() != 1 || beta.cols() != a.cols()) detail::shape_fail("layernorm", a, beta);
  const Eigen::Index rows = a.rows();
  const auto width = static_cast<T>(a.cols());
  Matrix<T> normalized(rows, a.cols());
  Eigen::Matrix<T, Eigen::Dynamic, 1> inv_std(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const T mean = a.value().row(r).mean();
    const auto centered = (a.value().row(r).array() - mean).eval();
    const T var = centered.square().sum() / width;
    inv_std(r) = T(1) / std::sqrt(var + eps);
    normalized.row(r) = (centered * inv_std(r)).matrix();
  }
  Matrix<T> value = (normalized.array().rowwise() * gamma.value().row(0).array()).matrix();
  value.rowwise() += beta.value().row(0);
  auto out = detail::result<T>(std::move(value), {&a, &gamma, &beta});
  if (out.requires_grad()) {
    tape.record([a = a.data(), g = gamma.data(), b = beta.data(), o = out.data(), normalized, inv_std] {
      if (o->grad.size() == 0) return;
      const auto& dy = o->grad;
      if (b->requires_grad) b->accumulate(dy.colwise().sum());
      if (g->requires_grad) g->accumulate((dy.array() * normalized.array()).matrix().colwise().sum());
      if (!a->requires_grad) return;
      const Matrix<T> dxhat = (dy.array().rowwise() * g->value.row(0).array()).matrix();
      Matrix<T> dx(dy.rows(), dy.cols());
      for (Eigen::Index r = 0; r < dy.rows(); ++r) {
        const T mean_d = dxhat.row(r).mean();
        const T mean_dx = dxhat.row(r).dot(normalized.row(r)) / static_cast<T>(dy.cols());
        dx.row(r) =
            (inv_std(r) * (dxhat.row(r).array() - mean_d - normalized.row(r).array() * mean_dx)).matrix();
      }
      a->accumulate(dx);
    });
  }
  return out;
}

/// Sum of squared differences, as a 1 x 1 tensor.
template <typename T>
Tensor<T> mse_sum(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) detail::shape_fail("mse_sum", a, b);
  const Matrix<T> diff = a.value() - b.value();
  Matrix<T> value(1, 1);
  value(0, 0) = diff.squaredNorm();
  auto out = detail::result<T>(std::move(value), {&a, &b});
  if (out.requires_grad()) {
    tape.record([a = a.data(), b = b.data(), o = out.data(), diff] {
      if (o->grad.size() == 0) return;
      const T g = T(2) * o->grad(0, 0);
      if (a->requires_grad) a->accumulate(diff * g);
      if (b->requires_grad) b->accumulate(diff * (-g));
    });
  }
  return out;
}

/// Rows `index[i]` of `a`, in order.
template <typename T>
Tensor<T> take_rows(Tape<T>& tape, const Tensor<T>& a, std::vector<Eigen::Index> index) {
  Matrix<T> value(static_cast<Eigen::Index>(index.size()), a.cols());
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] < 0 || index[i] >= a.rows()) {
      throw ShapeError("take_rows: row " + std::to_string(index[i]) + " outside " + a.shape());
    }
    value.row(static_cast<Eigen::Index>(i)) = a.value().row(index[i]);
  }
  auto out = detail::result<T>(std::move(value), {&a});
  if (out.requires_grad()) {
    tape.record([a = a.data(), o = out.data(), index = std::move(index)] {
      if (o->grad.size() == 0) return;
      Matrix<T> g = Matrix<T>::Zero(a->value.rows(), a->value.cols());
      for (std::size_t i = 0; i < index.size(); ++i) g.row(index[i]) += o->grad.row(static_cast<Eigen::Index>(i));
      a->accumulate(g);
    });
  }
  return out;
}

/// Mean of each consecutive block of `group` rows.
template <typename T>
Tensor<T> segment_mean(Tape<T>& tape, const Tensor<T>& a, Eigen::Index group) {
  if (group < 1 || a.rows() % group != 0) {
    throw ShapeError("segment_mean: " + a.shape() + " not divisible into groups of " + std::to_string(group));
  }
  const Eigen::Index segments = a.rows() / group;
  Matrix<T> value(segments, a.cols());
  for (Eigen::Index s = 0; s < segments; ++s) value.row(s) = a.value().middleRows(s * group, group).colwise().mean();
  auto out = detail::result<T>(std::move(value), {&a});
  if (out.requires_grad()) {
    tape.record([a = a.data(), o = out.data(), group] {
      if (o->grad.size() == 0) return;
      Matrix<T> g(a->value.rows(), a->value.cols());
      const T w = T(1) / static_cast<T>(group);
      for (Eigen::Index r = 0; r < g.rows(); ++r) g.row(r) = o->grad.row(r / group) * w;
      a->accumulate(g);
    });
  }
  return out;
}

/// Row r of `a` plus row (r mod seq_len) of `table` (positional or prompt rows).
template <typename T>
Tensor<T> add_positions(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& table, Eigen::Index seq_len) {
  if (table.cols() != a.cols() || seq_len < 1 || seq_len > table.rows() || a.rows() % seq_len != 0) {
    detail::shape_fail("add_positions", a, table);
  }
  Matrix<T> value = a.value();
  for (Eigen::Index r = 0; r < value.rows(); ++r) value.row(r) += table.value().row(r % seq_len);
  auto out = detail::result<T>(std::move(value), {&a, &table});
  if (out.requires_grad()) {
    tape.record([a = a.data(), t = table.data(), o = out.data(), seq_len] {
      if (o->grad.size() == 0) return;
      if (a->requires_grad) a->accumulate(o->grad);
      if (t->requires_grad) {
        Matrix<T> g = Matrix<T>::Zero(t->value.rows(), t->value.cols());
        for (Eigen::Index r = 0; r < o->grad.rows(); ++r) g.row(r % seq_len) += o->grad.row(r);
        t->accumulate(g);
      }
    });
  }
  return out;
}

/// Multi-head causal self-attention over stacked sequences.
///
/// `qkv` holds [Q | K | V] (each of width D) for B sequences of `seq_len`
/// rows, sequence-major. Position i attends to positions j <= i of its own
/// sequence. Output is B*seq_len x D with heads concatenated.
template <typename T>
Tensor<T> causal_attention(Tape<T>& tape, const Tensor<T>& qkv, Eigen::Index seq_len, Eigen::Index heads) {
  if (qkv.cols() % 3 != 0 || seq_len < 1 || qkv.rows() % seq_len != 0 || heads < 1 ||
      (qkv.cols() / 3) % heads != 0) {
    throw ShapeError("causal_attention: bad input " + qkv.shape() + " for seq_len " + std::to_string(seq_len) +
                     " and " + std::to_string(heads) + " heads");
  }
  using Block = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const Eigen::Index model = qkv.cols() / 3;
  const Eigen::Index head_dim = model / heads;
  const Eigen::Index sequences = qkv.rows() / seq_len;
  const T inv_scale = T(1) / std::sqrt(static_cast<T>(head_dim));

  // Attention weights per (sequence, head), saved for backward.
  std::vector<Block> weights(static_cast<std::size_t>(sequences * heads));
  Matrix<T> value(qkv.rows(), model);
  const auto& in = qkv.value();
  for (Eigen::Index s = 0; s < sequences; ++s) {
    for (Eigen::Index h = 0; h < heads; ++h) {
      const auto q = in.block(s * seq_len, h * head_dim, seq_len, head_dim);
      const auto k = in.block(s * seq_len, model + h * head_dim, seq_len, head_dim);
      const auto v = in.block(s * seq_len, 2 * model + h * head_dim, seq_len, head_dim);
      Block p = (q * k.transpose()) * inv_scale;
      for (Eigen::Index i = 0; i < seq_len; ++i) {
        const T peak = p.row(i).head(i + 1).maxCoeff();
        p.row(i).head(i + 1) = (p.row(i).head(i + 1).array() - peak).exp().matrix();
        p.row(i).head(i + 1) /= p.row(i).head(i + 1).sum();
        p.row(i).tail(seq_len - i - 1).setZero();
      }
      value.block(s * seq_len, h * head_dim, seq_len, head_dim) = p * v;
      weights[static_cast<std::size_t>(s * heads + h)] = std::move(p);
    }
  }
  auto out = detail::result<T>(std::move(value), {&qkv});
  if (out.requires_grad()) {
    tape.record([x = qkv.data(), o = out.data(), weights = std::move(weights), seq_len, heads, model, head_dim,
                 sequences, inv_scale] {
      if (o->grad.size() == 0) return;
      const auto& in = x->value;
      Matrix<T> g = Matrix<T>::Zero(in.rows(), in.cols());
      for (Eigen::Index s = 0; s < sequences; ++s) {
        for (Eigen::Index h = 0; h < heads; ++h) {
          const auto& p = weights[static_cast<std::size_t>(s * heads + h)];
          const auto q = in.block(s * seq_len, h * head_dim, seq_len, head_dim);
          const auto k = in.block(s * seq_len, model + h * head_dim, seq_len, head_dim);
          const auto v = in.block(s * seq_len, 2 * model + h * head_dim, seq_len, head_dim);
          const auto dout = o->grad.block(s * seq_len, h * head_dim, seq_len, head_dim);
          g.block(s * seq_len, 2 * model + h * head_dim, seq_len, head_dim) += p.transpose() * dout;
          const Block dp = dout * v.transpose();
          Block ds(seq_len, seq_len);
          for (Eigen::Index i = 0; i < seq_len; ++i) {
            const T dot = p.row(i).dot(dp.row(i));
            ds.row(i) = (p.row(i).array() * (dp.row(i).array() - dot)).matrix();
          }
          ds *= inv_scale;
          g.block(s * seq_len, h * head_dim, seq_len, head_dim) += ds * k;
          g.block(s * seq_len, model + h * head_dim, seq_len, head_dim) += ds.transpose() * q;
        }
      }
      x->accumulate(g);
    });
  }
  return out;
}

/// Elman recurrence h_t = tanh(x_t Wx + h_{t-1} Wh + b), h_0 = 0, over
/// stacked sequences of `seq_len` rows. Returns every hidden state.
template <typename T>
Tensor<T> tanh_rnn(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& wx, const Tensor<T>& wh, const Tensor<T>& b,
                   Eigen::Index seq_len) {
  if (x.cols() != wx.rows()) detail::shape_fail("tanh_rnn", x, wx);
  if (wh.rows() != wx.cols() || wh.cols() != wx.cols()) detail::shape_fail("tanh_rnn", wx, wh);
  if (b.rows() != 1 || b.cols() != wx.cols()) detail::shape_fail("tanh_rnn", wx, b);
  if (seq_len < 1 || x.rows() % seq_len != 0) {
    throw ShapeError("tanh_rnn: " + x.shape() + " not divisible into sequences of " + std::to_string(seq_len));
  }
  const Eigen::Index sequences = x.rows() / seq_len;
  const Matrix<T> projected = (x.value() * wx.value()).rowwise() + b.value().row(0);
  Matrix<T> hidden(x.rows(), wx.cols());
  for (Eigen::Index s = 0; s < sequences; ++s) {
    for (Eigen::Index t = 0; t < seq_len; ++t) {
      const Eigen::Index r = s * seq_len + t;
      if (t == 0) {
        hidden.row(r) = projected.row(r).array().tanh().matrix();
      } else {
        hidden.row(r) = (projected.row(r) + hidden.row(r - 1) * wh.value()).array().tanh().matrix();
      }
    }
  }
  auto out = detail::result<T>(std::move(hidden), {&x, &wx, &wh, &b});
  if (out.requires_grad()) {
    tape.record([x = x.data(), wx = wx.data(), wh = wh.data(), b = b.data(), o = out.data(), seq_len, sequences] {
      if (o->grad.size() == 0) return;
      const auto& h = o->value;
      Matrix<T> da(h.rows(), h.cols());
      for (Eigen::Index s = 0; s < sequences; ++s) {
        Eigen::Matrix<T, 1, Eigen::Dynamic> carry = Eigen::Matrix<T, 1, Eigen::Dynamic>::Zero(h.cols());
        for (Eigen::Index t = seq_len - 1; t >= 0; --t) {
          const Eigen::Index r = s * seq_len + t;
          const auto dh = (o->grad.row(r) + carry).eval();
          da.row(r) = (dh.array() * (T(1) - h.row(r).array().square())).matrix();
          carry = da.row(r) * wh->value.transpose();
        }
      }
      if (x->requires_grad) x->accumulate(da * wx->value.transpose());
      if (wx->requires_grad) wx->accumulate(x->value.transpose() * da);
      if (b->requires_grad) b->accumulate(da.colwise().sum());
      if (wh->requires_grad) {
        Matrix<T> g = Matrix<T>::Zero(wh->value.rows(), wh->value.cols());
        for (Eigen::Index s = 0; s < sequences; ++s) {
          for (Eigen::Index t = 1; t < seq_len; ++t) {
            const Eigen::Index r = s * seq_len + t;
            g.noalias() += h.row(r - 1).transpose() * da.row(r);
          }
        }
        wh->accumulate(g);
      }
    });
  }
  return out;
}

}  // namespace autocas::ag
