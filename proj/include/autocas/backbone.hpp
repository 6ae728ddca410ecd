#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "autocas/autograd.hpp"
#include "autocas/checkpoint.hpp"

namespace autocas {

struct BackboneConfig {
  int model_dim = 64;  // D
  int layers = 4;
  int heads = 4;
  int ffn_mult = 4;
  int max_context = 16;
  std::uint64_t seed = 7;

  void validate() const;
  /// Closed form: per layer 3D^2+3D (qkv) + D^2+D (output) + 2*F*D+F+D (ffn)
  /// + 4D (two norms), plus 2D for the final norm and max_context*D positions.
  std::size_t parameter_count() const;
};

/// Pre-norm decoder-only transformer with learned absolute positions.
///
/// Input rows are B stacked sequences of `seq_len` rows each. Output row k of
/// a sequence only depends on input rows 0..k of that sequence.
template <typename T>
class Backbone {
 public:
  /// Seeded init: N(0, (0.02/sqrt(layers))^2) projections, zero biases,
  /// unit norm gains, N(0, 0.02^2) positions. All tensors start frozen.
  explicit Backbone(const BackboneConfig& cfg, const std::string& prefix = "backbone");

  const BackboneConfig& config() const { return cfg_; }

  ag::Tensor<T> forward(ag::Tape<T>& tape, const ag::Tensor<T>& z, Eigen::Index seq_len) const;

  /// Every tensor, in a fixed order, named "<prefix>.*".
  const std::vector<ag::Tensor<T>>& tensors() const { return tensors_; }
  std::size_t parameter_count() const;

  /// Flags every tensor trainable or frozen. Throws once locked.
  void set_trainable(bool trainable);
  /// Freezes every tensor permanently.
  void lock();
  bool locked() const { return locked_; }

  /// FNV-1a over the raw value bytes of every tensor.
  std::uint64_t checksum() const;

  std::vector<NamedTensor> state() const { return snapshot(tensors_); }
  void load_state(const std::vector<NamedTensor>& stored);

 private:
  struct Layer {
    ag::Tensor<T> ln1_gamma, ln1_beta, w_qkv, b_qkv, w_out, b_out;
    ag::Tensor<T> ln2_gamma, ln2_beta, w_ff1, b_ff1, w_ff2, b_ff2;
  };

  BackboneConfig cfg_;
  std::vector<Layer> layers_;
  ag::Tensor<T> positions_;
  ag::Tensor<T> final_gamma_, final_beta_;
  std::vector<ag::Tensor<T>> tensors_;
  bool locked_ = false;
};

struct PretrainConfig {
  int steps = 400;
  int batch = 16;
  int seq_len = 0;  // 0: use the backbone's max_context
  double learning_rate = 1e-3;
  std::uint64_t seed = 11;
};

struct PretrainReport {
  double initial_loss = 0.0;  // on a fixed held-out batch
  double final_loss = 0.0;
  int steps = 0;
};

/// Smooth random sequences: per sequence a random linear map of a monotone
/// trend and two sinusoids, evaluated at t = 0..len-1. Returns count*len x dim.
template <typename T>
ag::Matrix<T> smooth_sequences(int count, int len, int dim, std::uint64_t seed);

/// Next-vector regression on smooth sequences; output row k is fitted to
/// input row k+1. Leaves every tensor frozen. Throws when the backbone is locked.
template <typename T>
PretrainReport pretrain_backbone(Backbone<T>& backbone, const PretrainConfig& cfg);

extern template class Backbone<float>;
extern template class Backbone<double>;

}  // namespace autocas
