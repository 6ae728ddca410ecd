#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"

#include "autocas/model.hpp"
#include "autocas/tokenizer.hpp"

namespace autocas {

/// Token sequences of M cascades, N tokens each, stacked row-wise.
struct TokenDataset {
  TokenMatrix tokens;              // M*N x S
  Eigen::Index seq_len = 0;        // N
  std::vector<double> popularity;  // final popularity per cascade
  std::vector<std::string> ids;

  std::size_t size() const { return popularity.size(); }
  Eigen::Index token_dim() const { return tokens.cols(); }
  void validate() const;
  TokenDataset subset(const std::vector<std::size_t>& rows) const;
};

struct TrainConfig {
  double learning_rate = 1e-3;
  int batch_size = 64;
  int max_epochs = 100;
  int patience = 16;
  double token_loss_weight = 1.0;  // lambda
  std::uint64_t seed = 1;
  /// Token loss alone for `stage_one_epochs`, then the head alone on MSLE.
  bool staged = false;
  int stage_one_epochs = 10;

  void validate() const;
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double train_msle = 0.0;
  double train_token_loss = 0.0;
  double val_msle = 0.0;
};

struct EvalResult {
  double msle = 0.0;
  double mape = 0.0;
  std::vector<double> predicted_log;
};

struct RunReport {
  static constexpr int kSchemaVersion = 1;

  std::string run_id;
  std::string dataset;
  std::string variant;
  double t_obs = 0.0;
  std::vector<EpochStats> epochs;
  int best_epoch = 0;
  bool stopped_early = false;
  double best_val_msle = 0.0;
  double test_msle = 0.0;
  double test_mape = 0.0;
  double wall_clock_s = 0.0;
  std::size_t learnable_params = 0;
  std::size_t total_params = 0;
  std::uint64_t backbone_checksum_before = 0;
  std::uint64_t backbone_checksum_after = 0;

  nlohmann::json to_json() const;
  static RunReport from_json(const nlohmann::json& j);
  static std::string csv_header();
  std::string csv_row() const;
};

/// Called after each epoch with the measured validation MSLE; its return
/// value is what early stopping sees. Lets tests force a validation curve.
using ValidationHook = std::function<double(int epoch, double measured)>;

/// Adam on MSLE + lambda * token loss over the model's trainable tensors,
/// early stopping on validation MSLE. The best-validation state is restored
/// before returning. The frozen backbone checksum is compared before and
/// after; a change throws std::logic_error. A non-finite loss throws
/// NumericError naming the first non-finite tensor.
RunReport train(AutoCasModel<float>& model, const TokenDataset& train_set, const TokenDataset& val_set,
                const TrainConfig& cfg, const ValidationHook& hook = {});

/// Predictions and metrics over a whole split. Throws on an empty split.
EvalResult evaluate(const AutoCasModel<float>& model, const TokenDataset& data, int batch_size = 256);

}  // namespace autocas
