#include "doctest.h"

#include <random>

#include "autocas/error.hpp"
#include "autocas/sparse.hpp"
#include "autocas/spectral.hpp"

using namespace autocas;

namespace {

std::vector<std::pair<Eigen::Index, Eigen::Index>> random_edges(Eigen::Index n, double p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution coin(p);
  std::vector<std::pair<Eigen::Index, Eigen::Index>> edges;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      if (coin(rng)) edges.emplace_back(i, j);
    }
  }
  return edges;
}

}  // namespace

TEST_CASE("sparse storage invariants") {
  const auto m = SparseMatrix::from_triplets(3, 3, {{0, 2, 1.0}, {0, 0, 2.0}, {1, 1, 1.0}, {1, 1, -1.0}, {2, 0, 4.0}});
  CHECK(m.nonzeros() == 3);
  CHECK(m.coeff(1, 1) == 0.0);
  CHECK(m.columns()[0] == 0);
  CHECK(m.columns()[1] == 2);
  DenseMatrix x = DenseMatrix::Random(3, 2);
  CHECK((m.multiply(x) - m.to_dense() * x).norm() < 1e-14);
  CHECK((m.transpose_multiply(x) - m.to_dense().transpose() * x).norm() < 1e-14);
}

TEST_CASE("normalized Laplacian closed forms") {
  const auto k2 = normalized_laplacian(2, {{0, 1}}).to_dense();
  CHECK(k2(0, 0) == 1.0);
  CHECK(k2(0, 1) == -1.0);
  CHECK(k2(1, 0) == -1.0);
  CHECK(k2(1, 1) == 1.0);

  const auto empty = normalized_laplacian(4, {}).to_dense();
  CHECK(empty == DenseMatrix::Identity(4, 4));
}

TEST_CASE("normalized Laplacian spectrum lies in [0, 2]") {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Eigen::Index n = 5 + static_cast<Eigen::Index>(s * 2);
    const auto l = normalized_laplacian(n, random_edges(n, 0.2, s));
    CHECK(l.is_symmetric(1e-15));
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> oracle(l.to_dense());
    CHECK(oracle.eigenvalues().minCoeff() >= -1e-12);
    CHECK(oracle.eigenvalues().maxCoeff() <= 2.0 + 1e-12);
  }
}

TEST_CASE("eig_small") {
  const auto d = eig_small(SparseMatrix::from_triplets(2, 2, {{0, 0, 3.0}, {1, 1, 1.0}}));
  CHECK(d.values(0) == doctest::Approx(1.0));
  CHECK(d.values(1) == doctest::Approx(3.0));
  CHECK(std::abs(d.vectors(1, 0)) == doctest::Approx(1.0));
  CHECK(std::abs(d.vectors(0, 1)) == doctest::Approx(1.0));

  const auto k2 = eig_small(normalized_laplacian(2, {{0, 1}}));
  CHECK(k2.values(0) == doctest::Approx(0.0));
  CHECK(k2.values(1) == doctest::Approx(2.0));
  CHECK(std::abs(k2.vectors(0, 0)) == doctest::Approx(1.0 / std::sqrt(2.0)));
  CHECK(k2.vectors(0, 1) * k2.vectors(1, 1) == doctest::Approx(-0.5));

  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal;
  DenseMatrix a(20, 20);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = normal(rng);
  const DenseMatrix sym = (a + a.transpose()) / 2;
  const auto e = eig_small(SparseMatrix::from_dense(sym));
  const DenseMatrix u = e.vectors;
  CHECK((u.transpose() * u - DenseMatrix::Identity(20, 20)).norm() < 1e-8);
  CHECK((u * e.values.asDiagonal() * u.transpose() - sym).norm() / sym.norm() < 1e-6);

  CHECK_THROWS(eig_small(SparseMatrix::from_triplets(2, 2, {{0, 1, 1.0}})));
  CHECK_THROWS(eig_small(SparseMatrix::identity(10), 5));
}

TEST_CASE("Chebyshev fit of the heat kernel") {
  const auto flat = cheb_fit_heat(1e-12, 0.0, 2.0, 10);
  CHECK(flat.coefficients[0] == doctest::Approx(1.0).epsilon(1e-9));
  for (std::size_t k = 1; k < flat.coefficients.size(); ++k) CHECK(std::abs(flat.coefficients[k]) < 1e-9);

  const auto heat = [](double l) { return std::exp(-l); };
  const auto k30 = cheb_fit_heat(1.0, 0.0, 2.0, 30);
  CHECK(cheb_sup_error(k30, heat) <= 1e-8);
  const auto k1 = cheb_fit(heat, 0.0, 2.0, 1);
  CHECK(cheb_sup_error(k30, heat) <= cheb_sup_error(k1, heat));

  CHECK_THROWS_AS(cheb_fit_heat(5.0, 0.0, 2.0, 1, 1e-12), NumericError);
  CHECK_THROWS(cheb_fit_heat(-1.0, 0.0, 2.0, 10));
}

TEST_CASE("Chebyshev application") {
  const auto one = cheb_fit([](double) { return 1.0; }, 0.0, 2.0, 5);
  const auto lap = normalized_laplacian(6, random_edges(6, 0.5, 1));
  DenseMatrix x = DenseMatrix::Random(6, 3);
  CHECK((cheb_apply(one, lap, x) - x).cwiseAbs().maxCoeff() < 1e-12);

  const std::vector<double> lambdas{0.0, 0.3, 1.1, 1.9};
  std::vector<Triplet> diag;
  for (std::size_t i = 0; i < lambdas.size(); ++i) diag.push_back({Eigen::Index(i), Eigen::Index(i), lambdas[i]});
  const auto d = SparseMatrix::from_triplets(4, 4, diag);
  const auto heat = cheb_fit_heat(0.7, 0.0, 2.0, 30);
  const DenseMatrix out = cheb_apply(heat, d, DenseMatrix::Identity(4, 4));
  for (Eigen::Index i = 0; i < 4; ++i) {
    CHECK(out(i, i) == doctest::Approx(std::exp(-0.7 * lambdas[static_cast<std::size_t>(i)])).epsilon(1e-6));
  }

  for (std::uint64_t s = 0; s < 10; ++s) {
    const Eigen::Index n = 10 + static_cast<Eigen::Index>(4 * s);
    const auto l = normalized_laplacian(n, random_edges(n, 0.15, 100 + s));
    const auto e = eig_small(l);
    const DenseMatrix x2 = DenseMatrix::Random(n, 2);
    const DenseMatrix exact =
        e.vectors * (-0.7 * e.values.array()).exp().matrix().asDiagonal() * e.vectors.transpose() * x2;
    CHECK((cheb_apply(heat, l, x2) - exact).cwiseAbs().maxCoeff() <= 1e-3);
    const DenseMatrix psi = cheb_apply(heat, l, DenseMatrix::Identity(n, n));
    CHECK((psi - psi.transpose()).cwiseAbs().maxCoeff() < 1e-6);
  }
  CHECK_THROWS_AS(cheb_apply(heat, lap, DenseMatrix::Zero(5, 1)), ShapeError);
}
