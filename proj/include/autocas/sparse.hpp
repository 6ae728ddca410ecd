#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "autocas/cascade.hpp"

namespace autocas {

using DenseMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Triplet {
  Eigen::Index row;
  Eigen::Index col;
  double value;
};

/// Compressed sparse row matrix. Column indices are sorted per row and no
/// explicit zeros are stored.
class SparseMatrix {
 public:
  SparseMatrix() = default;

  /// Duplicate coordinates are summed; entries that sum to zero are dropped.
  static SparseMatrix from_triplets(Eigen::Index rows, Eigen::Index cols, std::vector<Triplet> triplets);
  static SparseMatrix from_dense(const DenseMatrix& dense);
  static SparseMatrix identity(Eigen::Index n);

  Eigen::Index rows() const { return rows_; }
  Eigen::Index cols() const { return cols_; }
  std::size_t nonzeros() const { return values_.size(); }

  const std::vector<Eigen::Index>& offsets() const { return offsets_; }
  const std::vector<Eigen::Index>& columns() const { return columns_; }
  const std::vector<double>& values() const { return values_; }

  /// Y = M X.
  DenseMatrix multiply(const DenseMatrix& x) const;
  /// Y = M^T X.
  DenseMatrix transpose_multiply(const DenseMatrix& x) const;

  double coeff(Eigen::Index row, Eigen::Index col) const;
  DenseMatrix to_dense() const;
  bool is_symmetric(double tolerance = 0.0) const;

 private:
  Eigen::Index rows_ = 0;
  Eigen::Index cols_ = 0;
  std::vector<Eigen::Index> offsets_{0};
  std::vector<Eigen::Index> columns_;
  std::vector<double> values_;
};

/// How rows of isolated (degree zero) nodes appear in the normalized Laplacian.
enum class IsolatedNodes {
  unit_diagonal,  // L_ii = 1: the D^{-1/2} term is taken as zero
  zero_diagonal,  // L_ii = 0: the node is a null direction of L
};

/// L = I - D^{-1/2} A D^{-1/2} for an undirected edge list over n nodes.
SparseMatrix normalized_laplacian(Eigen::Index n, const std::vector<std::pair<Eigen::Index, Eigen::Index>>& edges,
                                  IsolatedNodes isolated = IsolatedNodes::unit_diagonal);
SparseMatrix normalized_laplacian(const GlobalGraph& graph, IsolatedNodes isolated = IsolatedNodes::unit_diagonal);
/// Treats the cascade tree as undirected; node i is `graph.users[i]`.
SparseMatrix normalized_laplacian(const CascadeGraph& graph, IsolatedNodes isolated = IsolatedNodes::unit_diagonal);

/// Random-walk matrix D^{-1} A. Rows of isolated nodes are empty.
SparseMatrix random_walk_matrix(const GlobalGraph& graph);

}  // namespace autocas
