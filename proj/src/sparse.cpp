#include "autocas/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "autocas/error.hpp"

namespace autocas {

SparseMatrix SparseMatrix::from_triplets(Eigen::Index rows, Eigen::Index cols, std::vector<Triplet> triplets) {
  for (const auto& t : triplets) {
    if (t.row < 0 || t.row >= rows || t.col < 0 || t.col >= cols) {
      throw ShapeError(detail::concat("triplet (", t.row, ",", t.col, ") outside ", rows, "x", cols));
    }
  }
  std::sort(triplets.begin(), triplets.end(),
            [](const Triplet& a, const Triplet& b) { return a.row != b.row ? a.row < b.row : a.col < b.col; });
  SparseMatrix m;
  m.rows_ = rows;
  m.cols_ = cols;
  m.offsets_.assign(static_cast<std::size_t>(rows) + 1, 0);
  std::size_t i = 0;
  while (i < triplets.size()) {
    const auto row = triplets[i].row;
    const auto col = triplets[i].col;
    double sum = 0.0;
    while (i < triplets.size() && triplets[i].row == row && triplets[i].col == col) sum += triplets[i++].value;
    if (sum != 0.0) {
      m.columns_.push_back(col);
      m.values_.push_back(sum);
      ++m.offsets_[static_cast<std::size_t>(row) + 1];
    }
  }
  for (std::size_t r = 0; r < static_cast<std::size_t>(rows); ++r) m.offsets_[r + 1] += m.offsets_[r];
  return m;
}

SparseMatrix SparseMatrix::from_dense(const DenseMatrix& dense) {
  std::vector<Triplet> triplets;
  for (Eigen::Index r = 0; r < dense.rows(); ++r) {
    for (Eigen::Index c = 0; c < dense.cols(); ++c) {
      if (dense(r, c) != 0.0) triplets.push_back({r, c, dense(r, c)});
    }
  }
  return from_triplets(dense.rows(), dense.cols(), std::move(triplets));
}

SparseMatrix SparseMatrix::identity(Eigen::Index n) {
  std::vector<Triplet> triplets;
  triplets.reserve(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) triplets.push_back({i, i, 1.0});
  return from_triplets(n, n, std::move(triplets));
}

DenseMatrix SparseMatrix::multiply(const DenseMatrix& x) const {
  if (x.rows() != cols_) {
    throw ShapeError(detail::concat("sparse multiply: ", rows_, "x", cols_, " times ", x.rows(), "x", x.cols()));
  }
  DenseMatrix y = DenseMatrix::Zero(rows_, x.cols());
  for (Eigen::Index r = 0; r < rows_; ++r) {
    auto out = y.row(r);
    for (auto k = offsets_[static_cast<std::size_t>(r)]; k < offsets_[static_cast<std::size_t>(r) + 1]; ++k) {
      out.noalias() += values_[static_cast<std::size_t>(k)] * x.row(columns_[static_cast<std::size_t>(k)]);
    }
  }
  return y;
}

DenseMatrix SparseMatrix::transpose_multiply(const DenseMatrix& x) const {
  if (x.rows() != rows_) {
    throw ShapeError(detail::concat("sparse transpose multiply: (", rows_, "x", cols_, ")^T times ", x.rows(), "x",
                                    x.cols()));
  }
  DenseMatrix y = DenseMatrix::Zero(cols_, x.cols());
  for (Eigen::Index r = 0; r < rows_; ++r) {
    const auto in = x.row(r);
    for (auto k = offsets_[static_cast<std::size_t>(r)]; k < offsets_[static_cast<std::size_t>(r) + 1]; ++k) {
      y.row(columns_[static_cast<std::size_t>(k)]).noalias() += values_[static_cast<std::size_t>(k)] * in;
    }
  }
  return y;
}

double SparseMatrix::coeff(Eigen::Index row, Eigen::Index col) const {
  const auto first = columns_.begin() + offsets_[static_cast<std::size_t>(row)];
  const auto last = columns_.begin() + offsets_[static_cast<std::size_t>(row) + 1];
  const auto it = std::lower_bound(first, last, col);
  if (it == last || *it != col) return 0.0;
  return values_[static_cast<std::size_t>(it - columns_.begin())];
}

DenseMatrix SparseMatrix::to_dense() const {
  DenseMatrix d = DenseMatrix::Zero(rows_, cols_);
  for (Eigen::Index r = 0; r < rows_; ++r) {
    for (auto k = offsets_[static_cast<std::size_t>(r)]; k < offsets_[static_cast<std::size_t>(r) + 1]; ++k) {
      d(r, columns_[static_cast<std::size_t>(k)]) = values_[static_cast<std::size_t>(k)];
    }
  }
  return d;
}

bool SparseMatrix::is_symmetric(double tolerance) const {
  if (rows_ != cols_) return false;
  for (Eigen::Index r = 0; r < rows_; ++r) {
    for (auto k = offsets_[static_cast<std::size_t>(r)]; k < offsets_[static_cast<std::size_t>(r) + 1]; ++k) {
      const auto c = columns_[static_cast<std::size_t>(k)];
      if (std::abs(values_[static_cast<std::size_t>(k)] - coeff(c, r)) > tolerance) return false;
    }
  }
  return true;
}

SparseMatrix normalized_laplacian(Eigen::Index n, const std::vector<std::pair<Eigen::Index, Eigen::Index>>& edges,
                                  IsolatedNodes isolated) {
  if (n <= 0) throw ValidationError("normalized_laplacian: graph must be nonempty");
  std::vector<std::pair<Eigen::Index, Eigen::Index>> unique;
  unique.reserve(edges.size());
  for (auto [u, v] : edges) {
    if (u < 0 || v < 0 || u >= n || v >= n) {
      throw ShapeError(detail::concat("normalized_laplacian: edge (", u, ",", v, ") outside ", n, " nodes"));
    }
    if (u == v) continue;
    if (u > v) std::swap(u, v);
    unique.emplace_back(u, v);
  }
  std::sort(unique.begin(), unique.end());
  unique.erase(std::unique(unique.begin(), unique.end()), unique.end());

  std::vector<double> degree(static_cast<std::size_t>(n), 0.0);
  for (const auto& [u, v] : unique) {
    degree[static_cast<std::size_t>(u)] += 1.0;
    degree[static_cast<std::size_t>(v)] += 1.0;
  }
  std::vector<Triplet> triplets;
  triplets.reserve(2 * unique.size() + static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    if (degree[static_cast<std::size_t>(i)] > 0.0 || isolated == IsolatedNodes::unit_diagonal) {
      triplets.push_back({i, i, 1.0});
    }
  }
  for (const auto& [u, v] : unique) {
    const double w = -1.0 / std::sqrt(degree[static_cast<std::size_t>(u)] * degree[static_cast<std::size_t>(v)]);
    triplets.push_back({u, v, w});
    triplets.push_back({v, u, w});
  }
  return SparseMatrix::from_triplets(n, n, std::move(triplets));
}

SparseMatrix normalized_laplacian(const GlobalGraph& graph, IsolatedNodes isolated) {
  std::vector<std::pair<Eigen::Index, Eigen::Index>> edges;
  edges.reserve(graph.neighbors.size() / 2);
  for (std::int64_t u = 0; u < graph.node_count; ++u) {
    for (auto k = graph.offsets[static_cast<std::size_t>(u)]; k < graph.offsets[static_cast<std::size_t>(u) + 1]; ++k) {
      const auto v = graph.neighbors[static_cast<std::size_t>(k)];
      if (u < v) edges.emplace_back(u, v);
    }
  }
  return normalized_laplacian(graph.node_count, edges, isolated);
}

SparseMatrix normalized_laplacian(const CascadeGraph& graph, IsolatedNodes isolated) {
  std::unordered_map<UserId, Eigen::Index> index;
  for (std::size_t i = 0; i < graph.users.size(); ++i) index.emplace(graph.users[i].user, static_cast<Eigen::Index>(i));
  std::vector<std::pair<Eigen::Index, Eigen::Index>> edges;
  edges.reserve(graph.edges.size());
  for (const auto& e : graph.edges) {
    const auto p = index.find(e.parent);
    const auto c = index.find(e.child);
    // A parent missing from the observed users (broken path in raw data) leaves the child isolated.
    if (p != index.end() && c != index.end()) edges.emplace_back(p->second, c->second);
  }
  return normalized_laplacian(static_cast<Eigen::Index>(graph.users.size()), edges, isolated);
}

SparseMatrix random_walk_matrix(const GlobalGraph& graph) {
  std::vector<Triplet> triplets;
  triplets.reserve(graph.neighbors.size());
  for (std::int64_t u = 0; u < graph.node_count; ++u) {
    const auto deg = graph.degree(u);
    for (auto k = graph.offsets[static_cast<std::size_t>(u)]; k < graph.offsets[static_cast<std::size_t>(u) + 1]; ++k) {
      triplets.push_back({u, graph.neighbors[static_cast<std::size_t>(k)], 1.0 / static_cast<double>(deg)});
    }
  }
  return SparseMatrix::from_triplets(graph.node_count, graph.node_count, std::move(triplets));
}

}  // namespace autocas
