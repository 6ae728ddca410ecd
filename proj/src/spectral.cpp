#include "autocas/spectral.hpp"

#include <cmath>
#include <numbers>

#include "autocas/error.hpp"

namespace autocas {

EigenDecomposition eig_small(const SparseMatrix& m, Eigen::Index max_nodes) {
  if (m.rows() != m.cols()) throw ShapeError(detail::concat("eig_small: matrix is ", m.rows(), "x", m.cols()));
  if (m.rows() > max_nodes) {
    throw ConfigError(detail::concat("eig_small: ", m.rows(), " nodes exceeds exact-path limit ", max_nodes));
  }
  if (!m.is_symmetric(1e-12)) throw ValidationError("eig_small: matrix is not symmetric");
  const Eigen::MatrixXd dense = m.to_dense();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(dense);
  if (solver.info() != Eigen::Success) throw NumericError("eig_small: eigensolver did not converge");
  return {solver.eigenvalues(), solver.eigenvectors()};
}

double ChebFilter::evaluate(double lambda) const {
  const double x = (2.0 * lambda - (upper + lower)) / (upper - lower);
  double t_prev = 1.0;
  double t_curr = x;
  double sum = coefficients.empty() ? 0.0 : coefficients[0];
  for (std::size_t k = 1; k < coefficients.size(); ++k) {
    sum += coefficients[k] * t_curr;
    const double t_next = 2.0 * x * t_curr - t_prev;
    t_prev = t_curr;
    t_curr = t_next;
  }
  return sum;
}

void ChebFilter::validate() const {
  if (coefficients.size() < 2) throw ConfigError("Chebyshev filter needs order K >= 1");
  if (!(upper > lower)) throw ConfigError("Chebyshev filter interval must satisfy upper > lower");
}

ChebFilter cheb_fit(const std::function<double(double)>& f, double lower, double upper, int order) {
  if (order < 1) throw ConfigError("cheb_fit: order must be >= 1");
  if (!(upper > lower)) throw ConfigError("cheb_fit: interval must satisfy upper > lower");
  const int nodes = order + 1;
  std::vector<double> samples(static_cast<std::size_t>(nodes));
  std::vector<double> angles(static_cast<std::size_t>(nodes));
  for (int k = 0; k < nodes; ++k) {
    angles[static_cast<std::size_t>(k)] = std::numbers::pi * (k + 0.5) / nodes;
    const double x = std::cos(angles[static_cast<std::size_t>(k)]);
    samples[static_cast<std::size_t>(k)] = f(0.5 * (upper - lower) * x + 0.5 * (upper + lower));
  }
  ChebFilter filter;
  filter.lower = lower;
  filter.upper = upper;
  filter.coefficients.resize(static_cast<std::size_t>(nodes));
  for (int j = 0; j < nodes; ++j) {
    double sum = 0.0;
    for (int k = 0; k < nodes; ++k) {
      sum += samples[static_cast<std::size_t>(k)] * std::cos(j * angles[static_cast<std::size_t>(k)]);
    }
    filter.coefficients[static_cast<std::size_t>(j)] = (j == 0 ? 1.0 : 2.0) * sum / nodes;
  }
  return filter;
}

double cheb_sup_error(const ChebFilter& filter, const std::function<double(double)>& f, int points) {
  double worst = 0.0;
  for (int i = 0; i < points; ++i) {
    const double lambda = filter.lower + (filter.upper - filter.lower) * i / (points - 1);
    worst = std::max(worst, std::abs(filter.evaluate(lambda) - f(lambda)));
  }
  return worst;
}

ChebFilter cheb_fit_heat(double scale, double lower, double upper, int order, double tolerance) {
  if (!(scale > 0.0)) throw ConfigError("cheb_fit_heat: scale must be positive");
  const auto heat = [scale](double lambda) { return std::exp(-scale * lambda); };
  ChebFilter filter = cheb_fit(heat, lower, upper, order);
  const double error = cheb_sup_error(filter, heat);
  if (error > tolerance) {
    throw NumericError(detail::concat("cheb_fit_heat: order ", order, " reaches grid error ", error,
                                      " above tolerance ", tolerance));
  }
  return filter;
}

double band_pass(double lambda, double mu, double theta) {
  const double shifted = lambda - mu;
  return std::exp(-0.5 * theta * (shifted * shifted - 1.0));
}

ChebFilter cheb_fit_band_pass(double mu, double theta, double lower, double upper, int order) {
  return cheb_fit([mu, theta](double lambda) { return band_pass(lambda, mu, theta); }, lower, upper, order);
}

DenseMatrix cheb_apply(const ChebFilter& filter, const SparseMatrix& laplacian, const DenseMatrix& x) {
  filter.validate();
  if (laplacian.rows() != laplacian.cols() || laplacian.cols() != x.rows()) {
    throw ShapeError(detail::concat("cheb_apply: operator ", laplacian.rows(), "x", laplacian.cols(),
                                    " applied to ", x.rows(), "x", x.cols()));
  }
  // Shifted operator Ls = a L - b I maps the interval onto [-1, 1].
  const double a = 2.0 / (filter.upper - filter.lower);
  const double b = (filter.upper + filter.lower) / (filter.upper - filter.lower);
  const auto apply_shifted = [&](const DenseMatrix& v) -> DenseMatrix {
    DenseMatrix out = laplacian.multiply(v);
    out *= a;
    out -= b * v;
    return out;
  };

  const auto& c = filter.coefficients;
  DenseMatrix prev = x;
  DenseMatrix result = c[0] * prev;
  DenseMatrix curr = apply_shifted(prev);
  result += c[1] * curr;
  for (std::size_t k = 2; k < c.size(); ++k) {
    DenseMatrix next = 2.0 * apply_shifted(curr) - prev;
    result += c[k] * next;
    prev = std::move(curr);
    curr = std::move(next);
  }
  return result;
}

}  // namespace autocas
