#pragma once

#include <atomic>
#include <cstdint>
#include <span>

#include "autocas/cascade.hpp"
#include "autocas/sparse.hpp"

namespace autocas {

struct GlobalEmbedConfig {
  Eigen::Index dim = 40;
  Eigen::Index oversampling = 10;
  int power_iterations = 2;
  int propagation_order = 10;
  double mu = 0.2;
  double theta = 0.5;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TruncatedSvd {
  DenseMatrix u;           // rows x k
  Eigen::VectorXd sigma;   // k, descending
  DenseMatrix v;           // cols x k
};

/// Rank-k factorization from a seeded Gaussian sketch of width k + p with q
/// power iterations (re-orthonormalized every pass). Each left singular vector
/// is signed so its largest-magnitude entry is positive.
TruncatedSvd randomized_tsvd(const SparseMatrix& m, Eigen::Index k, Eigen::Index p, int q, std::uint64_t seed);

/// Positional embedding table over the dense ids of a global graph.
class GlobalTable {
 public:
  GlobalTable() = default;
  explicit GlobalTable(DenseMatrix rows) : rows_(std::move(rows)) {}
  GlobalTable(const GlobalTable& other) : rows_(other.rows_) {}
  GlobalTable& operator=(const GlobalTable& other) {
    rows_ = other.rows_;
    misses_ = 0;
    return *this;
  }

  Eigen::Index dim() const { return rows_.cols(); }
  Eigen::Index size() const { return rows_.rows(); }
  const DenseMatrix& rows() const { return rows_; }
  DenseMatrix& rows() { return rows_; }

  /// Copies the row of `user` into `out`; unknown users get zeros and count as a miss.
  void lookup(std::int64_t user, std::span<double> out) const;
  Eigen::RowVectorXd lookup(std::int64_t user) const;

  std::uint64_t miss_count() const { return misses_.load(); }
  void reset_misses() { misses_ = 0; }

  /// Multiplies every row by one scalar so the mean squared entry is `target_rms`^2.
  void rescale_rms(double target_rms);

 private:
  DenseMatrix rows_;
  mutable std::atomic<std::uint64_t> misses_{0};
};

/// Embeds each connected component separately with the same seed: the
/// random-walk matrix D^{-1}A is factorized (randomized_tsvd, or an exact SVD
/// when the component is smaller than k + p), U_k Sigma_k^{1/2} is propagated
/// through the band-pass filter of the normalized Laplacian, and isolated
/// nodes get zero rows.
GlobalTable global_embed(const GlobalGraph& graph, const GlobalEmbedConfig& cfg);

}  // namespace autocas
