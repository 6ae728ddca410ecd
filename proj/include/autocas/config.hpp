#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "autocas/pipeline.hpp"

namespace autocas {

/// INI run configuration. Every key is optional and defaults to
/// desk_defaults(); unknown sections or keys are rejected.
///
///   [data]      dataset, observation_time, split_seed, train_ratio, val_ratio, test_ratio
///   [synthetic] num_cascades, graph_size, edges_per_node, communities, mixing, branching,
///               progeny_spread, time_spread, mean_wait, time_horizon, seed
///   [tokenizer] num_patches, max_length
///   [local]     scales, sample_points (comma lists), cheb_order
///   [global]    dim, oversampling, power_iterations, propagation_order, mu, theta, seed, target_rms
///   [backbone]  model_dim, layers, heads, ffn_mult, max_context, seed,
///               pretrain, pretrain_steps, pretrain_batch, pretrain_lr, pretrain_seed
///   [model]     hidden, head_hidden, seed, prompt_vocab, prompt_seed, prompt_template
///   [train]     learning_rate, batch_size, max_epochs, patience, lambda, seed, staged, stage_one_epochs
///   [baseline]  mlp_hidden (comma list), mlp_learning_rate, mlp_max_epochs, mlp_patience, mlp_seed
///
/// Overrides have the form "section.key=value" and are applied after the file.
PipelineConfig parse_config(std::istream& in, const std::vector<std::string>& overrides = {});
PipelineConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});
PipelineConfig config_from_overrides(const std::vector<std::string>& overrides);

/// Writes every key in the same INI layout.
void write_config(std::ostream& out, const PipelineConfig& cfg);

}  // namespace autocas
