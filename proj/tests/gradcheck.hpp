#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "autocas/autograd.hpp"

namespace autocas::testing {

using TensorD = ag::Tensor<double>;
using MatrixD = ag::Matrix<double>;
using Forward = std::function<TensorD(ag::Tape<double>&)>;

inline MatrixD random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, scale);
  MatrixD m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return m;
}

// Scalar readout 0.5 * sum((out - r)^2) with a fixed random r so that every
// output entry carries a distinct weight.
inline TensorD readout(ag::Tape<double>& tape, const TensorD& out, std::uint64_t seed = 99) {
  if (out.rows() == 1 && out.cols() == 1) return out;
  const auto r = TensorD::constant(random_matrix(out.rows(), out.cols(), seed));
  return ag::scale(tape, ag::mse_sum(tape, out, r), 0.5);
}

struct GradCheck {
  double worst = 0.0;  // largest normwise relative error over the checked tensors
  std::string worst_name;
};

// Central differences (step h) against the analytic gradient for every
// tensor in `inputs`; the error of one tensor is |g_a - g_n| / max(|g_a|, |g_n|).
inline GradCheck check_gradients(const Forward& forward, std::vector<TensorD> inputs, double h = 1e-5) {
  for (auto& t : inputs) t.zero_grad();
  {
    ag::Tape<double> tape;
    auto loss = readout(tape, forward(tape));
    tape.backward(loss);
  }
  GradCheck out;
  for (auto& t : inputs) {
    MatrixD analytic = t.has_grad() ? t.grad() : MatrixD::Zero(t.rows(), t.cols());
    MatrixD numeric(t.rows(), t.cols());
    for (Eigen::Index i = 0; i < t.size(); ++i) {
      double& x = t.value_mut().data()[i];
      const double saved = x;
      auto eval = [&] {
        ag::NoGradGuard guard;
        ag::Tape<double> tape;
        return readout(tape, forward(tape)).item();
      };
      x = saved + h;
      const double up = eval();
      x = saved - h;
      const double down = eval();
      x = saved;
      numeric.data()[i] = (up - down) / (2.0 * h);
    }
    const double scale = std::max({analytic.norm(), numeric.norm(), 1e-12});
    const double err = (analytic - numeric).norm() / scale;
    if (err >= out.worst) {
      out.worst = err;
      out.worst_name = t.name();
    }
  }
  return out;
}

}  // namespace autocas::testing
