#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "autocas/autograd.hpp"

namespace autocas {

/// Stack of affine layers with GELU between them. Widths {in, hidden, out}
/// give the usual two-layer perceptron; {in, out} a single linear map.
template <typename T>
class Mlp {
 public:
  Mlp() = default;
  /// Weights ~ N(0, 1/fan_in), biases zero; all trainable.
  Mlp(std::vector<Eigen::Index> widths, std::uint64_t seed, const std::string& name);

  ag::Tensor<T> forward(ag::Tape<T>& tape, const ag::Tensor<T>& x) const;

  Eigen::Index in_dim() const { return widths_.front(); }
  Eigen::Index out_dim() const { return widths_.back(); }
  std::size_t layer_count() const { return weights_.size(); }

  /// Weights and biases interleaved per layer.
  const std::vector<ag::Tensor<T>>& parameters() const { return params_; }
  std::size_t parameter_count() const;

  void set_output_bias(T value);
  void zero_parameters();

 private:
  std::vector<Eigen::Index> widths_;
  std::vector<ag::Tensor<T>> weights_;
  std::vector<ag::Tensor<T>> biases_;
  std::vector<ag::Tensor<T>> params_;
};

/// Frozen hashed bag-of-words prompt embedding.
///
/// The template is rendered for token index n by replacing its first "n-th"
/// with "<n>-th". The text is lowercased and split on anything that is not a
/// letter or digit; each word is hashed (FNV-1a 64 mod V) into a count vector
/// c, and P_n = c W / sqrt(V) with W a seeded V x D standard normal matrix.
class PromptEncoder {
 public:
  PromptEncoder(std::string template_text, int vocab_size, int dim, std::uint64_t seed);

  static std::vector<std::string> words(const std::string& text);

  std::string render(int n) const;
  Eigen::VectorXd counts(const std::string& text) const;
  Eigen::RowVectorXd encode_text(const std::string& text) const;
  Eigen::RowVectorXd encode(int n) const;
  /// Rows P_1..P_count.
  Eigen::MatrixXd table(int count) const;

  int vocab_size() const { return vocab_; }
  int dim() const { return static_cast<int>(projection_.cols()); }
  const std::string& template_text() const { return template_; }
  /// Largest Euclidean norm among the V per-word vectors of W.
  double max_word_vector_norm() const;

 private:
  std::string template_;
  int vocab_;
  Eigen::MatrixXd projection_;  // V x D
};

/// Reads a prompt template file; throws if it cannot be opened.
std::string load_prompt_template(const std::filesystem::path& path);

/// Bundled template for a dataset name ("weibo", "twitter", "aps",
/// "synthetic"); unknown names fall back to the synthetic one.
std::string builtin_prompt_template(const std::string& dataset);

/// (1/M) * sum over rows of the squared Euclidean distance; M = rows >= 1.
double token_loss(const Eigen::Ref<const Eigen::MatrixXd>& predicted, const Eigen::Ref<const Eigen::MatrixXd>& truth);

/// log2(P + 1).
double log_popularity(double count);
/// max(1, round(2^y - 1)).
std::int64_t popularity_from_log(double y);

/// (1/M) sum (y_m - log2(P_m + 1))^2.
double msle(const std::vector<double>& predicted_log, const std::vector<double>& truth_counts);
/// (1/M) sum |y_m - log2(P_m + 1)| / log2(P_m + 2).
double mape(const std::vector<double>& predicted_log, const std::vector<double>& truth_counts);

extern template class Mlp<float>;
extern template class Mlp<double>;

}  // namespace autocas
