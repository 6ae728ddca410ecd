#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "autocas/cascade.hpp"
#include "autocas/trainer.hpp"

namespace autocas {

/// Hand-crafted cascade features: observed popularity at each boundary,
/// log2(popularity at the last boundary + 1), mean gap between consecutive
/// adoption times (0 for a root-only cascade) and depth of the observed tree.
Eigen::RowVectorXd cascade_features(const CascadeGraph& graph, const std::vector<double>& boundaries);

struct FeatureDataset {
  Eigen::MatrixXd x;
  std::vector<double> popularity;

  std::size_t size() const { return popularity.size(); }
  /// log2(P + 1) per row.
  Eigen::VectorXd log_targets() const;
};

/// Per-column standardization fitted on one matrix; constant columns are
/// centred only.
class Standardizer {
 public:
  void fit(const Eigen::MatrixXd& x);
  Eigen::MatrixXd transform(const Eigen::MatrixXd& x) const;

 private:
  Eigen::RowVectorXd mean_;
  Eigen::RowVectorXd scale_;
};

/// Least squares with intercept on standardized features.
class LinearBaseline {
 public:
  void fit(const FeatureDataset& train);
  std::vector<double> predict(const Eigen::MatrixXd& x) const;

 private:
  Standardizer standardizer_;
  Eigen::VectorXd coef_;  // intercept first
};

struct MlpBaselineConfig {
  std::vector<int> hidden_options{16, 64};
  double learning_rate = 3e-3;
  int batch_size = 64;
  int max_epochs = 300;
  int patience = 16;
  std::uint64_t seed = 5;
};

/// Two-layer perceptron on standardized features, trained with Adam on the
/// log target with early stopping; the hidden width is picked on validation.
class MlpBaseline {
 public:
  explicit MlpBaseline(MlpBaselineConfig cfg = {}) : cfg_(std::move(cfg)) {}
  void fit(const FeatureDataset& train, const FeatureDataset& val);
  std::vector<double> predict(const Eigen::MatrixXd& x) const;
  int chosen_hidden() const { return chosen_hidden_; }

 private:
  MlpBaselineConfig cfg_;
  Standardizer standardizer_;
  Mlp<double> net_;
  int chosen_hidden_ = 0;
};

enum class BaselineKind { linear, mlp };
BaselineKind parse_baseline(const std::string& name);
std::string baseline_name(BaselineKind kind);

/// Fits on train (and val for the MLP) and scores on test.
EvalResult run_baseline(BaselineKind kind, const FeatureDataset& train, const FeatureDataset& val,
                        const FeatureDataset& test, const MlpBaselineConfig& mlp_cfg = {});

}  // namespace autocas
