#include "autocas/tokenizer.hpp"

#include <algorithm>

#include "autocas/error.hpp"

namespace autocas {

void TokenizerConfig::validate() const {
  if (num_patches < 2) throw ConfigError("tokenizer: number of patches N must be >= 2");
  if (max_length < 1) throw ConfigError("tokenizer: max length l must be >= 1");
  if (!(observation_time > 0.0)) throw ConfigError("tokenizer: observation time must be positive");
}

Eigen::RowVectorXd fuse(std::span<const double> local, std::span<const double> global, Eigen::Index local_dim,
                        Eigen::Index global_dim) {
  if (static_cast<Eigen::Index>(local.size()) != local_dim || static_cast<Eigen::Index>(global.size()) != global_dim) {
    throw ShapeError(detail::concat("fuse: got local ", local.size(), " + global ", global.size(), ", expected ",
                                    local_dim, " + ", global_dim));
  }
  Eigen::RowVectorXd h(local_dim + global_dim);
  std::copy(local.begin(), local.end(), h.data());
  std::copy(global.begin(), global.end(), h.data() + local_dim);
  return h;
}

std::vector<double> patch_boundaries(double t_obs, int num_patches) {
  if (!(t_obs > 0.0)) throw ConfigError("patch_boundaries: observation time must be positive");
  if (num_patches < 2) throw ConfigError("patch_boundaries: need at least 2 patches");
  std::vector<double> bounds(static_cast<std::size_t>(num_patches));
  for (int n = 1; n < num_patches; ++n) bounds[static_cast<std::size_t>(n - 1)] = n * t_obs / num_patches;
  bounds.back() = t_obs;
  return bounds;
}

Eigen::RowVectorXf build_token(const CascadeGraph& graph, double until, const EmbeddingLookup& embeddings,
                               Eigen::Index dim, int max_length, int* active_count) {
  std::vector<Adopter> active;
  active.reserve(graph.users.size());
  for (const auto& a : graph.users) {
    if (a.time <= until) active.push_back(a);
  }
  std::sort(active.begin(), active.end(), [](const Adopter& x, const Adopter& y) {
    return x.time != y.time ? x.time < y.time : x.user < y.user;
  });
  const auto kept = std::min<std::size_t>(active.size(), static_cast<std::size_t>(max_length));
  Eigen::RowVectorXf token = Eigen::RowVectorXf::Zero(dim * max_length);
  Eigen::RowVectorXd row(dim);
  for (std::size_t i = 0; i < kept; ++i) {
    embeddings(active[i].user, std::span<double>(row.data(), static_cast<std::size_t>(dim)));
    token.segment(static_cast<Eigen::Index>(i) * dim, dim) = row.cast<float>();
  }
  if (active_count) *active_count = static_cast<int>(kept);
  return token;
}

TokenSequence build_sequence(const CascadeGraph& graph, const std::vector<double>& boundaries, int max_length,
                             const EmbeddingLookup& embeddings, Eigen::Index dim) {
  TokenSequence seq;
  seq.boundaries = boundaries;
  seq.tokens.resize(static_cast<Eigen::Index>(boundaries.size()), dim * max_length);
  seq.active_counts.resize(boundaries.size());
  for (std::size_t n = 0; n < boundaries.size(); ++n) {
    seq.tokens.row(static_cast<Eigen::Index>(n)) =
        build_token(graph, boundaries[n], embeddings, dim, max_length, &seq.active_counts[n]);
  }
  return seq;
}

TokenSequence build_sequence(const CascadeGraph& graph, const TokenizerConfig& cfg, const EmbeddingLookup& embeddings,
                             Eigen::Index dim) {
  cfg.validate();
  return build_sequence(graph, patch_boundaries(cfg.observation_time, cfg.num_patches), cfg.max_length, embeddings,
                        dim);
}

}  // namespace autocas
