#include "autocas/pipeline.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

namespace autocas {

void PipelineConfig::validate() const {
  if (!(observation_time > 0.0)) throw ConfigError("data.observation_time must be positive");
  tokenizer.validate();
  local.validate();
  global.validate();
  backbone.validate();
  train.validate();
  if (tokenizer.num_patches - 1 > backbone.max_context) {
    throw ConfigError(detail::concat("backbone.max_context ", backbone.max_context, " is shorter than the ",
                                     tokenizer.num_patches - 1, " inputs of an N = ", tokenizer.num_patches,
                                     " sequence"));
  }
  if (prompt_vocab < 1) throw ConfigError("model.prompt_vocab must be positive");
}

PipelineConfig desk_defaults() {
  PipelineConfig cfg;
  cfg.tokenizer.num_patches = 8;
  cfg.tokenizer.max_length = 32;
  cfg.local.scales = {0.5, 1.5};
  cfg.local.sample_points = {0.0, 5.0};
  cfg.global.dim = 8;
  cfg.backbone = BackboneConfig{};
  return cfg;
}

GlobalTable compute_global_embeddings(const Corpus& corpus, const PipelineConfig& cfg) {
  auto table = global_embed(corpus.graph, cfg.global);
  if (cfg.global_rms > 0.0) table.rescale_rms(cfg.global_rms);
  return table;
}

std::vector<UserTable> compute_local_embeddings(const Corpus& corpus, double t_obs, const LocalEmbedConfig& cfg) {
  std::vector<UserTable> tables;
  tables.reserve(corpus.records.size());
  for (const auto& record : corpus.records) tables.push_back(local_embed(build_cascade_graph(record, t_obs), cfg));
  return tables;
}

TokenDataset build_token_dataset(const Corpus& corpus, const std::vector<std::size_t>& indices,
                                 const std::vector<UserTable>& local, const GlobalTable& global,
                                 const std::vector<double>& boundaries, int max_length, bool zero_global) {
  if (local.size() != corpus.records.size()) throw ShapeError("tokens: one local table per record is required");
  if (boundaries.empty()) throw ConfigError("tokens: no patch boundaries");
  const double t_obs = boundaries.back();
  TokenDataset data;
  data.seq_len = static_cast<Eigen::Index>(boundaries.size());
  Eigen::Index local_dim = -1;
  const Eigen::Index global_dim = global.dim();
  std::vector<TokenMatrix> blocks;
  blocks.reserve(indices.size());
  for (const auto i : indices) {
    const auto& record = corpus.records.at(i);
    if (!record.final_popularity) {
      throw ValidationError("tokens: cascade '" + record.id + "' has no final popularity");
    }
    const auto& table = local[i];
    if (local_dim < 0) local_dim = table.dim();
    if (table.dim() != local_dim) throw ShapeError("tokens: local tables disagree on dimension");
    const auto graph = build_cascade_graph(record, t_obs);
    Eigen::RowVectorXd global_row(global_dim);
    const EmbeddingLookup lookup = [&](UserId user, std::span<double> out) {
      const auto row = table.row_of(user);
      if (!row) throw ValidationError(detail::concat("tokens: user ", user, " has no local embedding"));
      if (zero_global) {
        global_row.setZero();
      } else {
        global.lookup(user, std::span<double>(global_row.data(), static_cast<std::size_t>(global_dim)));
      }
      const auto h = fuse(std::span<const double>(table.rows().row(*row).data(), static_cast<std::size_t>(local_dim)),
                          std::span<const double>(global_row.data(), static_cast<std::size_t>(global_dim)),
                          local_dim, global_dim);
      std::copy(h.data(), h.data() + h.size(), out.begin());
    };
    blocks.push_back(build_sequence(graph, boundaries, max_length, lookup, local_dim + global_dim).tokens);
    data.popularity.push_back(static_cast<double>(*record.final_popularity));
    data.ids.push_back(record.id);
  }
  const Eigen::Index s = max_length * (std::max<Eigen::Index>(local_dim, 0) + global_dim);
  data.tokens.resize(static_cast<Eigen::Index>(blocks.size()) * data.seq_len, s);
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    data.tokens.middleRows(static_cast<Eigen::Index>(b) * data.seq_len, data.seq_len) = blocks[b];
  }
  return data;
}

FeatureDataset build_feature_dataset(const Corpus& corpus, const std::vector<std::size_t>& indices,
                                     const std::vector<double>& boundaries) {
  FeatureDataset data;
  data.x.resize(static_cast<Eigen::Index>(indices.size()), static_cast<Eigen::Index>(boundaries.size()) + 3);
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const auto& record = corpus.records.at(indices[k]);
    if (!record.final_popularity) {
      throw ValidationError("features: cascade '" + record.id + "' has no final popularity");
    }
    data.x.row(static_cast<Eigen::Index>(k)) =
        cascade_features(build_cascade_graph(record, boundaries.back()), boundaries);
    data.popularity.push_back(static_cast<double>(*record.final_popularity));
  }
  return data;
}

std::vector<double> cross_partition_boundaries(double t_obs_train, int num_patches, double t_obs_new) {
  if (!(t_obs_train > 0.0) || !(t_obs_new > 0.0) || num_patches < 2) {
    throw ConfigError("cross-partition: observation times must be positive and N >= 2");
  }
  const double patch = t_obs_train / num_patches;
  const double ratio = t_obs_new / patch;
  const auto count = static_cast<int>(std::lround(ratio));
  if (count < 2 || std::abs(ratio - count) > 1e-6 * ratio) {
    throw ConfigError(detail::concat("cross-partition: window ", t_obs_new, " is not a whole number (>= 2) of ",
                                     patch, "-second patches"));
  }
  std::vector<double> bounds(static_cast<std::size_t>(count));
  for (int n = 1; n <= count; ++n) bounds[static_cast<std::size_t>(n - 1)] = n * patch;
  bounds.back() = t_obs_new;
  return bounds;
}

PromptEncoder build_prompt_encoder(const PipelineConfig& cfg) {
  const auto text =
      cfg.prompt_template.empty() ? builtin_prompt_template(cfg.dataset) : load_prompt_template(cfg.prompt_template);
  return PromptEncoder(text, cfg.prompt_vocab, cfg.backbone.model_dim, cfg.prompt_seed);
}

std::shared_ptr<Backbone<float>> build_backbone(const PipelineConfig& cfg, PretrainReport* report) {
  auto backbone = std::make_shared<Backbone<float>>(cfg.backbone);
  if (cfg.pretrain) {
    const auto r = pretrain_backbone(*backbone, cfg.pretrain_cfg);
    if (report) *report = r;
  }
  backbone->lock();
  return backbone;
}

AutoCasModel<float> build_model(const PipelineConfig& cfg, Variant variant,
                                std::shared_ptr<const Backbone<float>> backbone) {
  ModelConfig mcfg = cfg.model;
  mcfg.token_dim = cfg.token_dim();
  mcfg.variant = variant;
  return AutoCasModel<float>(mcfg, std::move(backbone), build_prompt_encoder(cfg));
}

Experiment::Experiment(PipelineConfig cfg, Corpus corpus) : cfg_(std::move(cfg)), corpus_(std::move(corpus)) {
  cfg_.validate();
  split_ = split_corpus(corpus_.records.size(), cfg_.split, cfg_.split_seed);
}

const GlobalTable& Experiment::global_table() {
  if (!global_) global_ = compute_global_embeddings(corpus_, cfg_);
  return *global_;
}

const std::vector<UserTable>& Experiment::local_tables(double t_obs) {
  auto it = local_.find(t_obs);
  if (it == local_.end()) it = local_.emplace(t_obs, compute_local_embeddings(corpus_, t_obs, cfg_.local)).first;
  return it->second;
}

const Experiment::Splits& Experiment::tokens(double t_obs, bool zero_global) {
  const auto key = std::make_pair(t_obs, zero_global);
  auto it = tokens_.find(key);
  if (it != tokens_.end()) return it->second;
  const auto bounds = patch_boundaries(t_obs, cfg_.tokenizer.num_patches);
  const auto& local = local_tables(t_obs);
  const auto& global = global_table();
  const int l = cfg_.tokenizer.max_length;
  Splits s{build_token_dataset(corpus_, split_.train, local, global, bounds, l, zero_global),
           build_token_dataset(corpus_, split_.val, local, global, bounds, l, zero_global),
           build_token_dataset(corpus_, split_.test, local, global, bounds, l, zero_global)};
  return tokens_.emplace(key, std::move(s)).first->second;
}

std::shared_ptr<const Backbone<float>> Experiment::backbone() {
  if (!backbone_) {
    PretrainReport report;
    backbone_ = build_backbone(cfg_, &report);
    if (cfg_.pretrain) pretrain_report_ = report;
  }
  return backbone_;
}

void Experiment::set_backbone(std::shared_ptr<Backbone<float>> backbone) {
  if (!backbone || !backbone->locked()) throw ConfigError("experiment: backbone must be locked frozen");
  backbone_ = std::move(backbone);
}

void Experiment::set_global_table(GlobalTable table) { global_ = std::move(table); }

void Experiment::set_local_tables(double t_obs, std::vector<UserTable> tables) {
  if (tables.size() != corpus_.records.size()) throw ShapeError("experiment: one local table per record is required");
  local_[t_obs] = std::move(tables);
}

void Experiment::set_tokens(double t_obs, bool zero_global, Splits splits) {
  for (const auto* d : {&splits.train, &splits.val, &splits.test}) {
    d->validate();
    if (d->token_dim() != cfg_.token_dim() || d->seq_len != cfg_.tokenizer.num_patches) {
      throw ShapeError("experiment: cached tokens do not match the configured N and S");
    }
  }
  tokens_[std::make_pair(t_obs, zero_global)] = std::move(splits);
}

Experiment::VariantRun Experiment::run_variant(Variant variant, double t_obs, const ValidationHook& hook) {
  const auto& data = tokens(t_obs, variant == Variant::wo_global);
  VariantRun run;
  run.model = std::make_shared<AutoCasModel<float>>(build_model(cfg_, variant, backbone()));
  // Start the head at the mean training target.
  double mean = 0.0;
  for (const double p : data.train.popularity) mean += log_popularity(p);
  run.model->head().set_output_bias(static_cast<float>(mean / static_cast<double>(data.train.size())));

  run.report = train(*run.model, data.train, data.val, cfg_.train, hook);
  const auto test = evaluate(*run.model, data.test);
  run.report.test_msle = test.msle;
  run.report.test_mape = test.mape;
  run.report.dataset = cfg_.dataset;
  run.report.t_obs = t_obs;
  std::ostringstream id;
  id << cfg_.dataset << '-' << variant_name(variant) << "-t" << std::setprecision(10) << t_obs << "-s"
     << cfg_.train.seed;
  run.report.run_id = id.str();
  return run;
}

EvalResult Experiment::run_baseline(BaselineKind kind, double t_obs) {
  const auto bounds = patch_boundaries(t_obs, cfg_.tokenizer.num_patches);
  return autocas::run_baseline(kind, build_feature_dataset(corpus_, split_.train, bounds),
                               build_feature_dataset(corpus_, split_.val, bounds),
                               build_feature_dataset(corpus_, split_.test, bounds), cfg_.mlp_baseline);
}

EvalResult Experiment::cross_partition(const AutoCasModel<float>& model, double t_obs_train, double t_obs_new) {
  const auto bounds = cross_partition_boundaries(t_obs_train, cfg_.tokenizer.num_patches, t_obs_new);
  if (static_cast<Eigen::Index>(bounds.size()) > model.max_tokens()) {
    throw ConfigError(detail::concat("cross-partition: ", bounds.size(), " tokens exceed the backbone context of ",
                                     model.max_tokens(), " tokens; raise backbone.max_context"));
  }
  const bool zero_global = model.variant() == Variant::wo_global;
  const auto data = build_token_dataset(corpus_, split_.test, local_tables(t_obs_new), global_table(), bounds,
                                        cfg_.tokenizer.max_length, zero_global);
  return evaluate(model, data);
}

}  // namespace autocas
