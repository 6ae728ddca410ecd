#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "autocas/backbone.hpp"
#include "autocas/baselines.hpp"
#include "autocas/cascade.hpp"
#include "autocas/global_embed.hpp"
#include "autocas/local_embed.hpp"
#include "autocas/model.hpp"
#include "autocas/synthetic.hpp"
#include "autocas/tokenizer.hpp"
#include "autocas/trainer.hpp"

namespace autocas {

struct PipelineConfig {
  std::string dataset = "synthetic";
  double observation_time = 3600.0;  // t_o used for training
  SplitRatios split;
  std::uint64_t split_seed = 42;

  SyntheticConfig synthetic;
  TokenizerConfig tokenizer;  // observation_time is taken from above
  LocalEmbedConfig local;
  GlobalEmbedConfig global;
  /// Global rows are rescaled to this root-mean-square entry; <= 0 keeps them raw.
  double global_rms = 0.5;

  BackboneConfig backbone;
  bool pretrain = true;
  PretrainConfig pretrain_cfg;

  ModelConfig model;  // token_dim is derived
  int prompt_vocab = 4096;
  std::uint64_t prompt_seed = 3;
  /// Template file; empty selects the bundled template for `dataset`.
  std::string prompt_template;

  TrainConfig train;
  MlpBaselineConfig mlp_baseline;

  Eigen::Index embedding_dim() const { return local.dim() + global.dim; }
  Eigen::Index token_dim() const { return tokenizer.max_length * embedding_dim(); }
  void validate() const;
};

/// Desk-scale settings: N = 8, l = 32, d_l = d_g = 8 (S = 512), D = 64 with
/// 4 layers and 4 heads.
PipelineConfig desk_defaults();

GlobalTable compute_global_embeddings(const Corpus& corpus, const PipelineConfig& cfg);
/// One table per record, built on the cascade graph observed up to t_obs.
std::vector<UserTable> compute_local_embeddings(const Corpus& corpus, double t_obs, const LocalEmbedConfig& cfg);

/// Tokens at `boundaries` for the records at `indices`. Local rows come from
/// `local` (aligned with corpus.records); global rows are zeroed when
/// `zero_global` is set. Records must carry a final popularity.
TokenDataset build_token_dataset(const Corpus& corpus, const std::vector<std::size_t>& indices,
                                 const std::vector<UserTable>& local, const GlobalTable& global,
                                 const std::vector<double>& boundaries, int max_length, bool zero_global = false);

FeatureDataset build_feature_dataset(const Corpus& corpus, const std::vector<std::size_t>& indices,
                                     const std::vector<double>& boundaries);

/// Boundaries for applying a model trained with N patches over t_obs_train to
/// a window t_obs_new: the patch length stays t_obs_train / N and
/// N' = round(t_obs_new / patch). Throws ConfigError when the window is not a
/// whole number of patches.
std::vector<double> cross_partition_boundaries(double t_obs_train, int num_patches, double t_obs_new);

PromptEncoder build_prompt_encoder(const PipelineConfig& cfg);
/// Seeded backbone, pretrained when cfg.pretrain is set, then locked frozen.
std::shared_ptr<Backbone<float>> build_backbone(const PipelineConfig& cfg, PretrainReport* report = nullptr);
AutoCasModel<float> build_model(const PipelineConfig& cfg, Variant variant,
                                std::shared_ptr<const Backbone<float>> backbone);

/// Corpus, split, embeddings and backbone for one configuration, computed
/// on first use and shared across runs (all variants see the same
/// embeddings and split).
class Experiment {
 public:
  struct Splits {
    TokenDataset train, val, test;
  };
  struct VariantRun {
    RunReport report;
    std::shared_ptr<AutoCasModel<float>> model;
  };

  Experiment(PipelineConfig cfg, Corpus corpus);

  const PipelineConfig& config() const { return cfg_; }
  const Corpus& corpus() const { return corpus_; }
  const CorpusSplit& split() const { return split_; }

  const GlobalTable& global_table();
  const std::vector<UserTable>& local_tables(double t_obs);
  const Splits& tokens(double t_obs, bool zero_global = false);
  std::shared_ptr<const Backbone<float>> backbone();
  /// Setters preload cached artifacts so they are not recomputed.
  void set_backbone(std::shared_ptr<Backbone<float>> backbone);
  void set_global_table(GlobalTable table);
  void set_local_tables(double t_obs, std::vector<UserTable> tables);
  void set_tokens(double t_obs, bool zero_global, Splits splits);
  const std::optional<PretrainReport>& pretrain_report() const { return pretrain_report_; }

  VariantRun run_variant(Variant variant, double t_obs, const ValidationHook& hook = {});
  EvalResult run_baseline(BaselineKind kind, double t_obs);
  /// Applies `model` (trained at t_obs_train) to the test split observed
  /// until t_obs_new, without retraining.
  EvalResult cross_partition(const AutoCasModel<float>& model, double t_obs_train, double t_obs_new);

 private:
  PipelineConfig cfg_;
  Corpus corpus_;
  CorpusSplit split_;
  std::optional<GlobalTable> global_;
  std::map<double, std::vector<UserTable>> local_;
  std::map<std::pair<double, bool>, Splits> tokens_;
  std::shared_ptr<Backbone<float>> backbone_;
  std::optional<PretrainReport> pretrain_report_;
};

}  // namespace autocas
