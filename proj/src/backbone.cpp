#include "autocas/backbone.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "autocas/optim.hpp"

namespace autocas {

void BackboneConfig::validate() const {
  if (layers < 1) throw ConfigError("backbone: layers must be >= 1");
  if (model_dim < 1 || heads < 1) throw ConfigError("backbone: model_dim and heads must be positive");
  if (model_dim % heads != 0) {
    throw ConfigError(detail::concat("backbone: model_dim ", model_dim, " is not divisible by heads ", heads));
  }
  if (ffn_mult < 1) throw ConfigError("backbone: ffn_mult must be >= 1");
  if (max_context < 1) throw ConfigError("backbone: max_context must be >= 1");
}

std::size_t BackboneConfig::parameter_count() const {
  const std::size_t d = static_cast<std::size_t>(model_dim);
  const std::size_t f = d * static_cast<std::size_t>(ffn_mult);
  const std::size_t per_layer = (3 * d * d + 3 * d) + (d * d + d) + (2 * f * d + f + d) + 4 * d;
  return static_cast<std::size_t>(layers) * per_layer + 2 * d + static_cast<std::size_t>(max_context) * d;
}

template <typename T>
Backbone<T>::Backbone(const BackboneConfig& cfg, const std::string& prefix) : cfg_(cfg) {
  cfg_.validate();
  const Eigen::Index d = cfg_.model_dim;
  const Eigen::Index f = d * cfg_.ffn_mult;
  std::mt19937_64 rng(cfg_.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double proj_std = 0.02 / std::sqrt(static_cast<double>(cfg_.layers));

  auto gaussian = [&](Eigen::Index rows, Eigen::Index cols, double std, const std::string& name) {
    ag::Matrix<T> m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(std * normal(rng));
    auto t = ag::Tensor<T>::constant(std::move(m), prefix + "." + name);
    tensors_.push_back(t);
    return t;
  };
  auto filled = [&](Eigen::Index cols, T value, const std::string& name) {
    auto t = ag::Tensor<T>::constant(ag::Matrix<T>::Constant(1, cols, value), prefix + "." + name);
    tensors_.push_back(t);
    return t;
  };

  positions_ = gaussian(cfg_.max_context, d, 0.02, "positions");
  for (int l = 0; l < cfg_.layers; ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    Layer layer;
    layer.ln1_gamma = filled(d, T(1), p + "ln1.gamma");
    layer.ln1_beta = filled(d, T(0), p + "ln1.beta");
    layer.w_qkv = gaussian(d, 3 * d, proj_std, p + "attn.w_qkv");
    layer.b_qkv = filled(3 * d, T(0), p + "attn.b_qkv");
    layer.w_out = gaussian(d, d, proj_std, p + "attn.w_out");
    layer.b_out = filled(d, T(0), p + "attn.b_out");
    layer.ln2_gamma = filled(d, T(1), p + "ln2.gamma");
    layer.ln2_beta = filled(d, T(0), p + "ln2.beta");
    layer.w_ff1 = gaussian(d, f, proj_std, p + "ffn.w1");
    layer.b_ff1 = filled(f, T(0), p + "ffn.b1");
    layer.w_ff2 = gaussian(f, d, proj_std, p + "ffn.w2");
    layer.b_ff2 = filled(d, T(0), p + "ffn.b2");
    layers_.push_back(std::move(layer));
  }
  final_gamma_ = filled(d, T(1), "final.gamma");
  final_beta_ = filled(d, T(0), "final.beta");
}

template <typename T>
ag::Tensor<T> Backbone<T>::forward(ag::Tape<T>& tape, const ag::Tensor<T>& z, Eigen::Index seq_len) const {
  if (z.cols() != cfg_.model_dim) {
    throw ShapeError(detail::concat("backbone: input is ", z.shape(), ", expected width ", cfg_.model_dim));
  }
  if (seq_len > cfg_.max_context) {
    throw ShapeError(detail::concat("backbone: sequence length ", seq_len, " exceeds max_context ", cfg_.max_context,
                                    "; raise backbone.max_context"));
  }
  if (seq_len < 1 || z.rows() % seq_len != 0) {
    throw ShapeError(detail::concat("backbone: ", z.rows(), " rows are not whole sequences of ", seq_len));
  }
  auto x = ag::add_positions(tape, z, positions_, seq_len);
  for (const auto& layer : layers_) {
    auto h = ag::layernorm(tape, x, layer.ln1_gamma, layer.ln1_beta);
    auto qkv = ag::add_row(tape, ag::matmul(tape, h, layer.w_qkv), layer.b_qkv);
    auto attended = ag::causal_attention(tape, qkv, seq_len, cfg_.heads);
    x = ag::add(tape, x, ag::add_row(tape, ag::matmul(tape, attended, layer.w_out), layer.b_out));
    h = ag::layernorm(tape, x, layer.ln2_gamma, layer.ln2_beta);
    h = ag::gelu(tape, ag::add_row(tape, ag::matmul(tape, h, layer.w_ff1), layer.b_ff1));
    x = ag::add(tape, x, ag::add_row(tape, ag::matmul(tape, h, layer.w_ff2), layer.b_ff2));
  }
  return ag::layernorm(tape, x, final_gamma_, final_beta_);
}

template <typename T>
std::size_t Backbone<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += static_cast<std::size_t>(t.size());
  return n;
}

template <typename T>
void Backbone<T>::set_trainable(bool trainable) {
  if (locked_) throw std::logic_error("backbone: tensors are locked frozen");
  for (auto& t : tensors_) t.set_requires_grad(trainable);
}

template <typename T>
void Backbone<T>::lock() {
  for (auto& t : tensors_) t.set_requires_grad(false);
  locked_ = true;
}

template <typename T>
std::uint64_t Backbone<T>::checksum() const {
  std::uint64_t h = kFnvOffset;
  for (const auto& t : tensors_) {
    h = fnv1a(t.name().data(), t.name().size(), h);
    h = fnv1a(t.value().data(), static_cast<std::size_t>(t.size()) * sizeof(T), h);
  }
  return h;
}

template <typename T>
void Backbone<T>::load_state(const std::vector<NamedTensor>& stored) {
  if (locked_) throw std::logic_error("backbone: tensors are locked frozen");
  restore(tensors_, stored);
}

template <typename T>
ag::Matrix<T> smooth_sequences(int count, int len, int dim, std::uint64_t seed) {
  constexpr int kFeatures = 6;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  std::uniform_real_distribution<double> freq(0.1, 0.6);
  ag::Matrix<T> out(static_cast<Eigen::Index>(count) * len, dim);
  Eigen::MatrixXd mix(kFeatures, dim);
  Eigen::RowVectorXd f(kFeatures);
  for (int s = 0; s < count; ++s) {
    for (Eigen::Index i = 0; i < mix.size(); ++i) mix.data()[i] = normal(rng) / std::sqrt(double(kFeatures));
    const double w1 = freq(rng), w2 = freq(rng), p1 = phase(rng), p2 = phase(rng);
    const double rate = std::abs(normal(rng));
    for (int t = 0; t < len; ++t) {
      const double u = static_cast<double>(t) / len;
      f << 1.0, rate * u, std::sqrt(u), u * u, std::sin(w1 * t + p1), std::cos(w2 * t + p2);
      out.row(static_cast<Eigen::Index>(s) * len + t) = (f * mix).template cast<T>();
    }
  }
  return out;
}

template <typename T>
PretrainReport pretrain_backbone(Backbone<T>& backbone, const PretrainConfig& cfg) {
  if (backbone.locked()) throw std::logic_error("pretrain_backbone: backbone is locked frozen");
  const int len = cfg.seq_len > 0 ? cfg.seq_len : backbone.config().max_context;
  if (len < 2 || len > backbone.config().max_context) {
    throw ConfigError(detail::concat("pretrain_backbone: sequence length ", len, " outside [2, max_context]"));
  }
  const int dim = backbone.config().model_dim;
  std::vector<Eigen::Index> inputs, targets;
  auto loss_on = [&](ag::Tape<T>& tape, const ag::Matrix<T>& batch, int count) {
    inputs.clear();
    targets.clear();
    for (int s = 0; s < count; ++s) {
      for (int t = 0; t + 1 < len; ++t) {
        inputs.push_back(static_cast<Eigen::Index>(s) * len + t);
        targets.push_back(static_cast<Eigen::Index>(s) * len + t + 1);
      }
    }
    auto x = ag::Tensor<T>::constant(batch);
    auto out = backbone.forward(tape, x, len);
    auto predicted = ag::take_rows(tape, out, inputs);
    auto wanted = ag::take_rows(tape, x, targets);
    return ag::scale(tape, ag::mse_sum(tape, predicted, wanted), T(1) / static_cast<T>(count * (len - 1)));
  };

  const auto held_out = smooth_sequences<T>(cfg.batch, len, dim, cfg.seed ^ 0x5eedULL);
  PretrainReport report;
  {
    ag::Tape<T> tape;
    report.initial_loss = static_cast<double>(loss_on(tape, held_out, cfg.batch).item());
  }
  if (cfg.steps > 0) {
    backbone.set_trainable(true);
    ag::Adam<T> adam(backbone.tensors(), {cfg.learning_rate});
    for (int step = 0; step < cfg.steps; ++step) {
      const auto batch = smooth_sequences<T>(cfg.batch, len, dim, cfg.seed + static_cast<std::uint64_t>(step) + 1);
      ag::Tape<T> tape;
      auto loss = loss_on(tape, batch, cfg.batch);
      if (!std::isfinite(static_cast<double>(loss.item()))) {
        backbone.set_trainable(false);
        throw NumericError(detail::concat("pretrain_backbone: non-finite loss at step ", step));
      }
      tape.backward(loss);
      adam.step();
      adam.zero_grad();
    }
    backbone.set_trainable(false);
  }
  {
    ag::Tape<T> tape;
    report.final_loss = static_cast<double>(loss_on(tape, held_out, cfg.batch).item());
  }
  report.steps = cfg.steps;
  return report;
}

template class Backbone<float>;
template class Backbone<double>;
template ag::Matrix<float> smooth_sequences<float>(int, int, int, std::uint64_t);
template ag::Matrix<double> smooth_sequences<double>(int, int, int, std::uint64_t);
template PretrainReport pretrain_backbone<float>(Backbone<float>&, const PretrainConfig&);
template PretrainReport pretrain_backbone<double>(Backbone<double>&, const PretrainConfig&);

}  // namespace autocas
