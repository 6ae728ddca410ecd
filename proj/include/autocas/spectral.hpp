#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "autocas/sparse.hpp"

namespace autocas {

struct EigenDecomposition {
  Eigen::VectorXd values;  // ascending
  DenseMatrix vectors;     // column j pairs with values[j]
};

inline constexpr Eigen::Index kDefaultExactMaxNodes = 2000;

/// Dense symmetric eigendecomposition; the exact path for small graphs.
EigenDecomposition eig_small(const SparseMatrix& m, Eigen::Index max_nodes = kDefaultExactMaxNodes);

/// Chebyshev expansion sum_k c_k T_k(x) of a spectral function on [lower, upper],
/// with x the affine image of lambda in [-1, 1].
struct ChebFilter {
  std::vector<double> coefficients;
  double lower = 0.0;
  double upper = 2.0;

  int order() const { return static_cast<int>(coefficients.size()) - 1; }
  double evaluate(double lambda) const;
  void validate() const;
};

/// Interpolates f at the K+1 Chebyshev nodes of [lower, upper].
ChebFilter cheb_fit(const std::function<double(double)>& f, double lower, double upper, int order);

/// Max |filter(lambda) - f(lambda)| over `points` equispaced points of the interval.
double cheb_sup_error(const ChebFilter& filter, const std::function<double(double)>& f, int points = 1000);

/// Heat kernel g(lambda) = exp(-scale * lambda). Throws NumericError if the
/// grid error exceeds `tolerance`.
ChebFilter cheb_fit_heat(double scale, double lower, double upper, int order, double tolerance = 1e-6);

/// Band-pass kernel exp(-theta/2 * ((lambda - mu)^2 - 1)) used for spectral propagation.
double band_pass(double lambda, double mu, double theta);
ChebFilter cheb_fit_band_pass(double mu, double theta, double lower, double upper, int order);

/// g(L) X via the three-term recurrence; L is never densified.
DenseMatrix cheb_apply(const ChebFilter& filter, const SparseMatrix& laplacian, const DenseMatrix& x);

}  // namespace autocas
