#pragma once

#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "autocas/cascade.hpp"
#include "autocas/sparse.hpp"

namespace autocas {

using TokenMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct TokenizerConfig {
  int num_patches = 8;      // N
  int max_length = 32;      // l
  double observation_time = 3600.0;

  void validate() const;
};

/// H = [le | ge]. Throws ShapeError when either part has the wrong size.
Eigen::RowVectorXd fuse(std::span<const double> local, std::span<const double> global, Eigen::Index local_dim,
                        Eigen::Index global_dim);

/// Uniform boundaries t_n = n * t_o / N, with t_N = t_o exactly.
std::vector<double> patch_boundaries(double t_obs, int num_patches);

/// Fused embedding rows for the users of one cascade.
using EmbeddingLookup = std::function<void(UserId, std::span<double>)>;

/// Users adopted by `until`, ordered by (time, id), first `max_length` kept,
/// concatenated user-major and zero padded to max_length * dim.
Eigen::RowVectorXf build_token(const CascadeGraph& graph, double until, const EmbeddingLookup& embeddings,
                               Eigen::Index dim, int max_length, int* active_count = nullptr);

struct TokenSequence {
  TokenMatrix tokens;               // N x S
  std::vector<int> active_counts;   // per token, capped at l
  std::vector<double> boundaries;

  Eigen::Index length() const { return tokens.rows(); }
  Eigen::Index token_dim() const { return tokens.cols(); }
};

/// Tokens at the N patch boundaries of [0, cfg.observation_time].
TokenSequence build_sequence(const CascadeGraph& graph, const TokenizerConfig& cfg, const EmbeddingLookup& embeddings,
                             Eigen::Index dim);

/// Same, for arbitrary boundaries (variable-length inference).
TokenSequence build_sequence(const CascadeGraph& graph, const std::vector<double>& boundaries, int max_length,
                             const EmbeddingLookup& embeddings, Eigen::Index dim);

}  // namespace autocas
