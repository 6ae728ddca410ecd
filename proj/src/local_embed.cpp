#include "autocas/local_embed.hpp"

#include <cmath>

#include "autocas/error.hpp"

namespace autocas {

void LocalEmbedConfig::validate() const {
  if (scales.empty()) throw ConfigError("local embedding needs at least one scale");
  for (const double s : scales) {
    if (!(s > 0.0)) throw ConfigError("local embedding scales must be positive");
  }
  if (sample_points.empty() || sample_points.front() != 0.0) {
    throw ConfigError("local embedding sample points must start at 0");
  }
  if (cheb_order < 1) throw ConfigError("local embedding Chebyshev order must be >= 1");
}

UserTable::UserTable(std::vector<UserId> users, DenseMatrix rows) : users_(std::move(users)), rows_(std::move(rows)) {
  if (static_cast<Eigen::Index>(users_.size()) != rows_.rows()) {
    throw ShapeError(detail::concat("user table: ", users_.size(), " users but ", rows_.rows(), " rows"));
  }
  index_.reserve(users_.size());
  for (std::size_t i = 0; i < users_.size(); ++i) index_.emplace(users_[i], static_cast<Eigen::Index>(i));
}

std::optional<Eigen::Index> UserTable::row_of(UserId user) const {
  const auto it = index_.find(user);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

DenseMatrix heat_wavelets(const SparseMatrix& laplacian, double scale, WaveletPath path, int cheb_order,
                          Eigen::Index exact_max_nodes) {
  const auto n = laplacian.rows();
  const bool exact =
      path == WaveletPath::exact || (path == WaveletPath::automatic && n <= exact_max_nodes);
  if (exact) {
    const auto eig = eig_small(laplacian, std::max(exact_max_nodes, n));
    const Eigen::VectorXd response = (-scale * eig.values.array()).exp();
    return eig.vectors * response.asDiagonal() * eig.vectors.transpose();
  }
  // Normalized Laplacian spectrum lies in [0, 2].
  const auto filter = cheb_fit_heat(scale, 0.0, 2.0, cheb_order, 1e-6);
  return cheb_apply(filter, laplacian, DenseMatrix::Identity(n, n));
}

UserTable local_embed(const CascadeGraph& graph, const LocalEmbedConfig& cfg, WaveletPath path) {
  cfg.validate();
  if (graph.users.empty()) throw ValidationError("local_embed: cascade graph is empty");
  const auto n = static_cast<Eigen::Index>(graph.users.size());
  // Isolated nodes contribute a zero diagonal so their heat kernel is the identity.
  const auto laplacian = normalized_laplacian(graph, IsolatedNodes::zero_diagonal);

  std::vector<UserId> users;
  users.reserve(graph.users.size());
  for (const auto& a : graph.users) users.push_back(a.user);
  DenseMatrix rows(n, cfg.dim());

  const auto points = static_cast<Eigen::Index>(cfg.sample_points.size());
  for (std::size_t si = 0; si < cfg.scales.size(); ++si) {
    const DenseMatrix psi = heat_wavelets(laplacian, cfg.scales[si], path, cfg.cheb_order, cfg.exact_max_nodes);
    const Eigen::Index base = static_cast<Eigen::Index>(si) * points * 2;
    for (Eigen::Index a = 0; a < n; ++a) {
      for (Eigen::Index j = 0; j < points; ++j) {
        const double t = cfg.sample_points[static_cast<std::size_t>(j)];
        double re = 0.0;
        double im = 0.0;
        for (Eigen::Index m = 0; m < n; ++m) {
          const double phase = t * psi(m, a);
          re += std::cos(phase);
          im += std::sin(phase);
        }
        rows(a, base + 2 * j) = re / static_cast<double>(n);
        rows(a, base + 2 * j + 1) = im / static_cast<double>(n);
      }
    }
  }
  return UserTable(std::move(users), std::move(rows));
}

}  // namespace autocas
