#include "autocas/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <unordered_set>

namespace autocas {

namespace {

const std::vector<std::pair<Variant, std::string>>& variant_table() {
  static const std::vector<std::pair<Variant, std::string>> table{
      {Variant::full, "full"},           {Variant::wo_auto, "wo-auto"},       {Variant::wo_prompt, "wo-prompt"},
      {Variant::wo_mapping, "wo-mapping"}, {Variant::wo_global, "wo-global"}, {Variant::wo_llm, "wo-llm"},
      {Variant::llm2trans, "llm2trans"}, {Variant::llm2rnn, "llm2rnn"}};
  return table;
}

template <typename T>
ag::Tensor<T> gaussian_parameter(Eigen::Index rows, Eigen::Index cols, double std, std::mt19937_64& rng,
                                 const std::string& name) {
  std::normal_distribution<double> normal(0.0, std);
  ag::Matrix<T> m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(normal(rng));
  return ag::Tensor<T>::parameter(std::move(m), name);
}

}  // namespace

const std::vector<std::string>& variant_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& [v, name] : variant_table()) out.push_back(name);
    return out;
  }();
  return names;
}

std::string variant_name(Variant v) {
  for (const auto& [candidate, name] : variant_table()) {
    if (candidate == v) return name;
  }
  return "unknown";
}

Variant parse_variant(const std::string& name) {
  for (const auto& [v, candidate] : variant_table()) {
    if (candidate == name) return v;
  }
  std::string valid;
  for (const auto& n : variant_names()) valid += (valid.empty() ? "" : ", ") + n;
  throw ConfigError("unknown variant '" + name + "'; valid variants: " + valid);
}

template <typename T>
AutoCasModel<T>::AutoCasModel(const ModelConfig& cfg, std::shared_ptr<const Backbone<T>> backbone,
                              const PromptEncoder& prompts)
    : cfg_(cfg), backbone_(std::move(backbone)) {
  if (!backbone_) throw ConfigError("model: a backbone is required (it fixes D and the context length)");
  const auto& bcfg = backbone_->config();
  model_dim_ = bcfg.model_dim;
  if (prompts.dim() != model_dim_) {
    throw ShapeError(detail::concat("model: prompt dim ", prompts.dim(), " differs from backbone dim ", model_dim_));
  }
  for (const auto& t : backbone_->tensors()) {
    if (t.requires_grad()) throw ConfigError("model: backbone tensor '" + t.name() + "' is not frozen");
  }
  const Eigen::Index s = cfg_.token_dim;
  const Eigen::Index hidden = cfg_.hidden > 0 ? cfg_.hidden : std::max(s, model_dim_);

  head_ = Mlp<T>({s, cfg_.head_hidden, 1}, cfg_.seed * 7 + 3, "head");
  if (uses_sequence_model()) {
    if (cfg_.variant == Variant::wo_mapping) {
      projector_ = Mlp<T>({s, model_dim_}, cfg_.seed * 7 + 1, "projector");
      adapter_ = Mlp<T>({model_dim_, s}, cfg_.seed * 7 + 2, "adapter");
    } else {
      projector_ = Mlp<T>({s, hidden, model_dim_}, cfg_.seed * 7 + 1, "projector");
      adapter_ = Mlp<T>({model_dim_, hidden, s}, cfg_.seed * 7 + 2, "adapter");
    }
    const auto table = prompts.table(bcfg.max_context);
    prompt_table_ = ag::Tensor<T>::constant(table.template cast<T>(), "prompts");
    for (const auto& p : projector_.parameters()) trainable_.push_back(p);
    for (const auto& p : adapter_.parameters()) trainable_.push_back(p);
  }
  if (cfg_.variant == Variant::llm2trans) {
    auto block_cfg = bcfg;
    block_cfg.layers = 1;
    block_cfg.seed = cfg_.seed * 7 + 4;
    block_.emplace(block_cfg, "block");
    block_->set_trainable(true);
    for (const auto& t : block_->tensors()) trainable_.push_back(t);
  } else if (cfg_.variant == Variant::llm2rnn) {
    std::mt19937_64 rng(cfg_.seed * 7 + 5);
    const double std = 1.0 / std::sqrt(static_cast<double>(model_dim_));
    rnn_wx_ = gaussian_parameter<T>(model_dim_, model_dim_, std, rng, "rnn.wx");
    rnn_wh_ = gaussian_parameter<T>(model_dim_, model_dim_, std, rng, "rnn.wh");
    rnn_b_ = ag::Tensor<T>::parameter(ag::Matrix<T>::Zero(1, model_dim_), "rnn.b");
    for (const auto& t : {rnn_wx_, rnn_wh_, rnn_b_}) trainable_.push_back(t);
  }
  for (const auto& p : head_.parameters()) trainable_.push_back(p);
}

template <typename T>
const Backbone<T>* AutoCasModel<T>::backbone() const {
  switch (cfg_.variant) {
    case Variant::wo_auto:
    case Variant::wo_llm:
    case Variant::llm2trans:
    case Variant::llm2rnn:
      return nullptr;
    default:
      return backbone_.get();
  }
}

template <typename T>
Eigen::Index AutoCasModel<T>::max_tokens() const {
  if (!uses_sequence_model()) return std::numeric_limits<Eigen::Index>::max();
  return backbone_->config().max_context + 1;
}

template <typename T>
ag::Tensor<T> AutoCasModel<T>::sequence_model(ag::Tape<T>& tape, const ag::Tensor<T>& z, Eigen::Index seq_len) const {
  switch (cfg_.variant) {
    case Variant::wo_llm:
      return z;
    case Variant::llm2trans:
      return block_->forward(tape, z, seq_len);
    case Variant::llm2rnn:
      return ag::tanh_rnn(tape, z, rnn_wx_, rnn_wh_, rnn_b_, seq_len);
    default:
      return backbone_->forward(tape, z, seq_len);
  }
}

template <typename T>
typename AutoCasModel<T>::Output AutoCasModel<T>::forward(ag::Tape<T>& tape, const ag::Tensor<T>& tokens,
                                                          Eigen::Index seq_len) const {
  if (tokens.cols() != cfg_.token_dim) {
    throw ShapeError(detail::concat("model: tokens are ", tokens.shape(), ", expected width ", cfg_.token_dim));
  }
  if (seq_len < 2 || tokens.rows() % seq_len != 0) {
    throw ShapeError(detail::concat("model: ", tokens.rows(), " token rows are not whole sequences of ", seq_len,
                                    " (need at least 2 tokens per sequence)"));
  }
  const Eigen::Index batch = tokens.rows() / seq_len;
  Output out;
  if (!uses_sequence_model()) {
    out.log_popularity = head_.forward(tape, ag::segment_mean(tape, tokens, seq_len));
    return out;
  }
  if (seq_len > max_tokens()) {
    throw ShapeError(detail::concat("model: ", seq_len, " tokens exceed the backbone context (max ", max_tokens(),
                                    " tokens); raise backbone.max_context"));
  }
  const Eigen::Index steps = seq_len - 1;
  std::vector<Eigen::Index> inputs, targets, last;
  inputs.reserve(static_cast<std::size_t>(batch * steps));
  targets.reserve(static_cast<std::size_t>(batch * steps));
  for (Eigen::Index b = 0; b < batch; ++b) {
    for (Eigen::Index k = 0; k < steps; ++k) {
      inputs.push_back(b * seq_len + k);
      targets.push_back(b * seq_len + k + 1);
    }
    last.push_back(b * steps + steps - 1);
  }
  auto z = projector_.forward(tape, ag::take_rows(tape, tokens, inputs));
  if (cfg_.variant != Variant::wo_prompt) z = ag::add_positions(tape, z, prompt_table_, steps);
  auto predicted = adapter_.forward(tape, sequence_model(tape, z, steps));
  auto observed = ag::take_rows(tape, tokens, targets);
  out.token_loss = ag::scale(tape, ag::mse_sum(tape, predicted, observed), T(1) / static_cast<T>(batch * steps));
  out.log_popularity = head_.forward(tape, ag::take_rows(tape, predicted, last));
  return out;
}

template <typename T>
std::vector<ag::Tensor<T>> AutoCasModel<T>::frozen() const {
  std::vector<ag::Tensor<T>> out;
  if (const auto* b = backbone()) out = b->tensors();
  return out;
}

template <typename T>
std::size_t AutoCasModel<T>::learnable_count() const {
  std::size_t n = 0;
  for (const auto& t : trainable_) n += static_cast<std::size_t>(t.size());
  return n;
}

template <typename T>
std::size_t AutoCasModel<T>::total_count() const {
  std::size_t n = learnable_count();
  for (const auto& t : frozen()) n += static_cast<std::size_t>(t.size());
  return n;
}

template <typename T>
void AutoCasModel<T>::audit_trainable() const {
  std::unordered_set<const void*> allowed;
  for (const auto& t : trainable_) {
    if (!t.requires_grad()) throw std::logic_error("trainable tensor '" + t.name() + "' has requires-grad unset");
    allowed.insert(t.data().get());
  }
  std::vector<ag::Tensor<T>> others = backbone_->tensors();
  if (prompt_table_.defined()) others.push_back(prompt_table_);
  for (const auto& t : others) {
    if (t.requires_grad() && !allowed.contains(t.data().get())) {
      throw std::logic_error("tensor '" + t.name() + "' outside the trainable set has requires-grad set");
    }
  }
}

template <typename T>
void AutoCasModel<T>::load_state(const std::vector<NamedTensor>& stored) {
  restore(trainable_, stored);
}

template class AutoCasModel<float>;
template class AutoCasModel<double>;

}  // namespace autocas
