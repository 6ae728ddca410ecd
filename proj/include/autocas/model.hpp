#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "autocas/adapter.hpp"
#include "autocas/autograd.hpp"
#include "autocas/backbone.hpp"
#include "autocas/checkpoint.hpp"

namespace autocas {

enum class Variant { full, wo_auto, wo_prompt, wo_mapping, wo_global, wo_llm, llm2trans, llm2rnn };

/// "full", "wo-auto", "wo-prompt", "wo-mapping", "wo-global", "wo-llm", "llm2trans", "llm2rnn".
const std::vector<std::string>& variant_names();
std::string variant_name(Variant v);
/// Throws ConfigError listing the valid names.
Variant parse_variant(const std::string& name);

struct ModelConfig {
  Eigen::Index token_dim = 512;  // S
  Eigen::Index hidden = 0;       // projector/adapter hidden width; 0 means max(S, D)
  Eigen::Index head_hidden = 64;
  Variant variant = Variant::full;
  std::uint64_t seed = 1;
};

/// Projector -> (+prompt) -> backbone -> adapter, with a task head on the
/// last predicted token.
///
/// A batch is B sequences of N tokens stacked row-wise (B*N x S). Positions
/// 1..N-1 are projected, offset by their prompt rows and run through the
/// backbone; output k is adapted back to token space as the prediction of
/// token k+1, which the token loss compares against the observed token. The
/// head reads the prediction of token N and returns log2(popularity + 1).
template <typename T>
class AutoCasModel {
 public:
  struct Output {
    ag::Tensor<T> log_popularity;  // B x 1
    ag::Tensor<T> token_loss;      // 1 x 1; undefined for wo-auto
  };

  /// `backbone` must be frozen; it is shared, never modified.
  AutoCasModel(const ModelConfig& cfg, std::shared_ptr<const Backbone<T>> backbone, const PromptEncoder& prompts);

  Output forward(ag::Tape<T>& tape, const ag::Tensor<T>& tokens, Eigen::Index seq_len) const;

  const ModelConfig& config() const { return cfg_; }
  Variant variant() const { return cfg_.variant; }
  Eigen::Index model_dim() const { return model_dim_; }
  /// Longest token sequence the model accepts.
  Eigen::Index max_tokens() const;

  const std::vector<ag::Tensor<T>>& trainable() const { return trainable_; }
  /// Frozen tensors that take part in the forward pass.
  std::vector<ag::Tensor<T>> frozen() const;
  std::size_t learnable_count() const;
  std::size_t total_count() const;

  /// Throws std::logic_error if any tensor outside the trainable set has
  /// requires-grad set, or any trainable tensor lacks it.
  void audit_trainable() const;

  Mlp<T>& head() { return head_; }
  const Mlp<T>& head() const { return head_; }
  const Mlp<T>& projector() const { return projector_; }
  const Mlp<T>& adapter() const { return adapter_; }
  /// The frozen backbone, or null for variants that do not use it.
  const Backbone<T>* backbone() const;
  /// The frozen backbone handed to the constructor, used or not.
  const Backbone<T>& shared_backbone() const { return *backbone_; }

  std::vector<NamedTensor> state() const { return snapshot(trainable_); }
  void load_state(const std::vector<NamedTensor>& stored);

 private:
  bool uses_sequence_model() const { return cfg_.variant != Variant::wo_auto; }
  ag::Tensor<T> sequence_model(ag::Tape<T>& tape, const ag::Tensor<T>& z, Eigen::Index seq_len) const;

  ModelConfig cfg_;
  Eigen::Index model_dim_;
  std::shared_ptr<const Backbone<T>> backbone_;
  ag::Tensor<T> prompt_table_;  // max_context x D, frozen
  Mlp<T> projector_, adapter_, head_;
  std::optional<Backbone<T>> block_;                   // llm2trans
  ag::Tensor<T> rnn_wx_, rnn_wh_, rnn_b_;              // llm2rnn
  std::vector<ag::Tensor<T>> trainable_;
};

extern template class AutoCasModel<float>;
extern template class AutoCasModel<double>;

}  // namespace autocas
