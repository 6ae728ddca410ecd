#pragma once

#include <optional>
#include <unordered_map>
#include <vector>

#include "autocas/cascade.hpp"
#include "autocas/sparse.hpp"
#include "autocas/spectral.hpp"

namespace autocas {

struct LocalEmbedConfig {
  std::vector<double> scales{0.5, 1.5};
  /// Characteristic-function evaluation points; the first must be 0.
  std::vector<double> sample_points{0.0, 10.0 / 9, 20.0 / 9, 30.0 / 9, 40.0 / 9,
                                    50.0 / 9, 60.0 / 9, 70.0 / 9, 80.0 / 9, 10.0};
  int cheb_order = 30;
  Eigen::Index exact_max_nodes = kDefaultExactMaxNodes;

  /// d_l = 2 * |scales| * |sample_points|.
  Eigen::Index dim() const { return static_cast<Eigen::Index>(2 * scales.size() * sample_points.size()); }
  void validate() const;
};

enum class WaveletPath { automatic, exact, chebyshev };

/// Per-user rows aligned with an ordered user list.
class UserTable {
 public:
  UserTable() = default;
  UserTable(std::vector<UserId> users, DenseMatrix rows);

  const std::vector<UserId>& users() const { return users_; }
  const DenseMatrix& rows() const { return rows_; }
  Eigen::Index dim() const { return rows_.cols(); }
  std::optional<Eigen::Index> row_of(UserId user) const;

 private:
  std::vector<UserId> users_;
  DenseMatrix rows_;
  std::unordered_map<UserId, Eigen::Index> index_;
};

/// Heat-kernel wavelet matrix Psi = g_s(L) (symmetric, column a is the wavelet of node a).
DenseMatrix heat_wavelets(const SparseMatrix& laplacian, double scale, WaveletPath path, int cheb_order,
                          Eigen::Index exact_max_nodes = kDefaultExactMaxNodes);

/// Structural embedding of every observed user of `graph` (rows in `graph.users` order).
UserTable local_embed(const CascadeGraph& graph, const LocalEmbedConfig& cfg,
                      WaveletPath path = WaveletPath::automatic);

}  // namespace autocas
