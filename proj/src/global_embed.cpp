#include "autocas/global_embed.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "autocas/error.hpp"
#include "autocas/spectral.hpp"

namespace autocas {

namespace {

Eigen::MatrixXd orthonormal_basis(const Eigen::MatrixXd& y) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(y);
  return qr.householderQ() * Eigen::MatrixXd::Identity(y.rows(), y.cols());
}

void fix_signs(TruncatedSvd& svd) {
  for (Eigen::Index j = 0; j < svd.u.cols(); ++j) {
    Eigen::Index arg = 0;
    svd.u.col(j).cwiseAbs().maxCoeff(&arg);
    if (svd.u(arg, j) < 0.0) {
      svd.u.col(j) *= -1.0;
      svd.v.col(j) *= -1.0;
    }
  }
}

TruncatedSvd exact_tsvd(const SparseMatrix& m, Eigen::Index k) {
  const Eigen::MatrixXd dense = m.to_dense();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(dense, Eigen::ComputeThinU | Eigen::ComputeThinV);
  TruncatedSvd out{svd.matrixU().leftCols(k), svd.singularValues().head(k), svd.matrixV().leftCols(k)};
  fix_signs(out);
  return out;
}

std::vector<std::vector<std::int64_t>> connected_components(const GlobalGraph& graph) {
  std::vector<std::int64_t> label(static_cast<std::size_t>(graph.node_count), -1);
  std::vector<std::vector<std::int64_t>> components;
  std::vector<std::int64_t> stack;
  for (std::int64_t start = 0; start < graph.node_count; ++start) {
    if (label[static_cast<std::size_t>(start)] >= 0) continue;
    const auto id = static_cast<std::int64_t>(components.size());
    components.emplace_back();
    auto& members = components.back();
    stack.push_back(start);
    label[static_cast<std::size_t>(start)] = id;
    while (!stack.empty()) {
      const auto u = stack.back();
      stack.pop_back();
      members.push_back(u);
      for (auto k = graph.offsets[static_cast<std::size_t>(u)]; k < graph.offsets[static_cast<std::size_t>(u) + 1]; ++k) {
        const auto v = graph.neighbors[static_cast<std::size_t>(k)];
        if (label[static_cast<std::size_t>(v)] < 0) {
          label[static_cast<std::size_t>(v)] = id;
          stack.push_back(v);
        }
      }
    }
    std::sort(members.begin(), members.end());
  }
  return components;
}

}  // namespace

void GlobalEmbedConfig::validate() const {
  if (dim < 1) throw ConfigError("global embedding dim must be >= 1");
  if (oversampling < 0) throw ConfigError("global embedding oversampling must be >= 0");
  if (power_iterations < 0) throw ConfigError("global embedding power iterations must be >= 0");
  if (propagation_order < 1) throw ConfigError("global embedding propagation order must be >= 1");
}

TruncatedSvd randomized_tsvd(const SparseMatrix& m, Eigen::Index k, Eigen::Index p, int q, std::uint64_t seed) {
  if (k < 1 || p < 0 || q < 0) throw ConfigError("randomized_tsvd: need k >= 1, p >= 0, q >= 0");
  if (k + p > std::min(m.rows(), m.cols())) {
    throw ConfigError(detail::concat("randomized_tsvd: k + p = ", k + p, " exceeds min dimension of ", m.rows(), "x",
                                     m.cols()));
  }
  const Eigen::Index width = k + p;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  DenseMatrix sketch(m.cols(), width);
  for (Eigen::Index i = 0; i < sketch.rows(); ++i) {
    for (Eigen::Index j = 0; j < width; ++j) sketch(i, j) = gauss(rng);
  }

  Eigen::MatrixXd basis = orthonormal_basis(m.multiply(sketch));
  for (int iter = 0; iter < q; ++iter) {
    const Eigen::MatrixXd co_basis = orthonormal_basis(m.transpose_multiply(basis));
    basis = orthonormal_basis(m.multiply(co_basis));
  }
  // B^T = M^T Q is cols x width; its SVD gives B = (V_b S U_b^T)^T.
  const Eigen::MatrixXd bt = m.transpose_multiply(basis);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(bt, Eigen::ComputeThinU | Eigen::ComputeThinV);
  TruncatedSvd out;
  out.u = basis * svd.matrixV().leftCols(k);
  out.sigma = svd.singularValues().head(k);
  out.v = svd.matrixU().leftCols(k);
  fix_signs(out);
  return out;
}

void GlobalTable::lookup(std::int64_t user, std::span<double> out) const {
  if (static_cast<Eigen::Index>(out.size()) != dim()) {
    throw ShapeError(detail::concat("global lookup: buffer of ", out.size(), " for dim ", dim()));
  }
  if (user >= 0 && user < rows_.rows()) {
    for (Eigen::Index j = 0; j < dim(); ++j) out[static_cast<std::size_t>(j)] = rows_(user, j);
    return;
  }
  std::fill(out.begin(), out.end(), 0.0);
  misses_.fetch_add(1);
}

Eigen::RowVectorXd GlobalTable::lookup(std::int64_t user) const {
  Eigen::RowVectorXd row(dim());
  lookup(user, std::span<double>(row.data(), static_cast<std::size_t>(row.size())));
  return row;
}

void GlobalTable::rescale_rms(double target_rms) {
  if (rows_.size() == 0) return;
  const double rms = std::sqrt(rows_.squaredNorm() / static_cast<double>(rows_.size()));
  if (rms > 0.0) rows_ *= target_rms / rms;
}

GlobalTable global_embed(const GlobalGraph& graph, const GlobalEmbedConfig& cfg) {
  cfg.validate();
  if (graph.node_count <= 0) throw ValidationError("global_embed: graph is empty");
  DenseMatrix table = DenseMatrix::Zero(graph.node_count, cfg.dim);
  const auto filter = cheb_fit_band_pass(cfg.mu, cfg.theta, 0.0, 2.0, cfg.propagation_order);

  for (const auto& members : connected_components(graph)) {
    const auto n = static_cast<Eigen::Index>(members.size());
    if (n < 2) continue;  // isolated node: zero row

    std::vector<Triplet> walk;
    std::vector<std::pair<Eigen::Index, Eigen::Index>> edges;
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto u = members[static_cast<std::size_t>(i)];
      const double inv_deg = 1.0 / static_cast<double>(graph.degree(u));
      for (auto k = graph.offsets[static_cast<std::size_t>(u)]; k < graph.offsets[static_cast<std::size_t>(u) + 1]; ++k) {
        const auto v = graph.neighbors[static_cast<std::size_t>(k)];
        const auto j = static_cast<Eigen::Index>(std::lower_bound(members.begin(), members.end(), v) - members.begin());
        walk.push_back({i, j, inv_deg});
        if (i < j) edges.emplace_back(i, j);
      }
    }
    const auto walk_matrix = SparseMatrix::from_triplets(n, n, std::move(walk));
    const auto laplacian = normalized_laplacian(n, edges);

    const Eigen::Index k = std::min(cfg.dim, n);
    const TruncatedSvd svd = k + cfg.oversampling <= n
                                 ? randomized_tsvd(walk_matrix, k, cfg.oversampling, cfg.power_iterations, cfg.seed)
                                 : exact_tsvd(walk_matrix, k);
    DenseMatrix base = DenseMatrix::Zero(n, cfg.dim);
    base.leftCols(k) = svd.u * svd.sigma.cwiseSqrt().asDiagonal();
    const DenseMatrix propagated = cheb_apply(filter, laplacian, base);
    for (Eigen::Index i = 0; i < n; ++i) table.row(members[static_cast<std::size_t>(i)]) = propagated.row(i);
  }
  return GlobalTable(std::move(table));
}

}  // namespace autocas
