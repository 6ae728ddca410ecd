#include "autocas/baselines.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <unordered_map>

#include "autocas/optim.hpp"

namespace autocas {

Eigen::RowVectorXd cascade_features(const CascadeGraph& graph, const std::vector<double>& boundaries) {
  const auto nb = static_cast<Eigen::Index>(boundaries.size());
  Eigen::RowVectorXd f = Eigen::RowVectorXd::Zero(nb + 3);
  std::vector<double> times;
  times.reserve(graph.users.size());
  for (const auto& a : graph.users) times.push_back(a.time);
  std::sort(times.begin(), times.end());
  for (Eigen::Index n = 0; n < nb; ++n) {
    const auto count = std::upper_bound(times.begin(), times.end(), boundaries[static_cast<std::size_t>(n)]) - times.begin();
    f(n) = static_cast<double>(count);
  }
  const double last = nb > 0 ? f(nb - 1) : static_cast<double>(times.size());
  f(nb) = std::log2(last + 1.0);
  if (times.size() > 1) f(nb + 1) = (times.back() - times.front()) / static_cast<double>(times.size() - 1);

  std::unordered_map<UserId, int> depth;
  if (!graph.users.empty()) depth[graph.users.front().user] = 0;
  int deepest = 0;
  for (const auto& e : graph.edges) {
    const auto parent = depth.find(e.parent);
    const int d = (parent == depth.end() ? 0 : parent->second) + 1;
    depth[e.child] = d;
    deepest = std::max(deepest, d);
  }
  f(nb + 2) = deepest;
  return f;
}

Eigen::VectorXd FeatureDataset::log_targets() const {
  Eigen::VectorXd y(static_cast<Eigen::Index>(size()));
  for (std::size_t i = 0; i < size(); ++i) y(static_cast<Eigen::Index>(i)) = log_popularity(popularity[i]);
  return y;
}

void Standardizer::fit(const Eigen::MatrixXd& x) {
  mean_ = x.colwise().mean();
  scale_.resize(x.cols());
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    const double var = (x.col(c).array() - mean_(c)).square().mean();
    scale_(c) = var > 1e-24 ? 1.0 / std::sqrt(var) : 1.0;
  }
}

Eigen::MatrixXd Standardizer::transform(const Eigen::MatrixXd& x) const {
  return ((x.rowwise() - mean_).array().rowwise() * scale_.array()).matrix();
}

void LinearBaseline::fit(const FeatureDataset& train) {
  if (train.size() == 0) throw ValidationError("linear baseline: empty training set");
  standardizer_.fit(train.x);
  Eigen::MatrixXd design(train.x.rows(), train.x.cols() + 1);
  design.col(0).setOnes();
  design.rightCols(train.x.cols()) = standardizer_.transform(train.x);
  coef_ = design.colPivHouseholderQr().solve(train.log_targets());
}

std::vector<double> LinearBaseline::predict(const Eigen::MatrixXd& x) const {
  const Eigen::VectorXd y = (standardizer_.transform(x) * coef_.tail(coef_.size() - 1)).array() + coef_(0);
  return {y.data(), y.data() + y.size()};
}

namespace {

double fit_mlp(Mlp<double>& net, const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::MatrixXd& vx,
               const std::vector<double>& vp, const MlpBaselineConfig& cfg, std::uint64_t seed) {
  using Tensor = ag::Tensor<double>;
  ag::Adam<double> adam(net.parameters(), {cfg.learning_rate});
  std::mt19937_64 rng(seed);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(x.rows()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  auto predict = [&](const Eigen::MatrixXd& in) {
    ag::NoGradGuard no_grad;
    ag::Tape<double> tape;
    const auto out = net.forward(tape, Tensor::constant(in));
    return std::vector<double>(out.value().data(), out.value().data() + out.value().size());
  };
  double best = std::numeric_limits<double>::infinity();
  int best_epoch = 0;
  auto best_params = snapshot(net.parameters());
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t begin = 0; begin < order.size(); begin += static_cast<std::size_t>(cfg.batch_size)) {
      const auto end = std::min(order.size(), begin + static_cast<std::size_t>(cfg.batch_size));
      std::vector<Eigen::Index> rows(order.begin() + static_cast<std::ptrdiff_t>(begin),
                                     order.begin() + static_cast<std::ptrdiff_t>(end));
      ag::Matrix<double> bx(static_cast<Eigen::Index>(rows.size()), x.cols());
      ag::Matrix<double> by(static_cast<Eigen::Index>(rows.size()), 1);
      for (std::size_t i = 0; i < rows.size(); ++i) {
        bx.row(static_cast<Eigen::Index>(i)) = x.row(rows[i]);
        by(static_cast<Eigen::Index>(i), 0) = y(rows[i]);
      }
      ag::Tape<double> tape;
      const auto out = net.forward(tape, Tensor::constant(bx));
      const auto loss = ag::scale(tape, ag::mse_sum(tape, out, Tensor::constant(by)), 1.0 / double(rows.size()));
      tape.backward(loss);
      adam.step();
      adam.zero_grad();
    }
    const double val = msle(predict(vx), vp);
    if (val < best) {
      best = val;
      best_epoch = epoch;
      best_params = snapshot(net.parameters());
    } else if (epoch - best_epoch >= cfg.patience) {
      break;
    }
  }
  auto params = net.parameters();
  restore(params, best_params);
  return best;
}

}  // namespace

void MlpBaseline::fit(const FeatureDataset& train, const FeatureDataset& val) {
  if (train.size() == 0 || val.size() == 0) throw ValidationError("mlp baseline: empty training or validation set");
  if (cfg_.hidden_options.empty()) throw ConfigError("mlp baseline: no hidden widths to try");
  standardizer_.fit(train.x);
  const Eigen::MatrixXd x = standardizer_.transform(train.x);
  const Eigen::MatrixXd vx = standardizer_.transform(val.x);
  const Eigen::VectorXd y = train.log_targets();
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < cfg_.hidden_options.size(); ++i) {
    const int hidden = cfg_.hidden_options[i];
    Mlp<double> net({x.cols(), hidden, 1}, cfg_.seed + i, "mlp_baseline");
    net.set_output_bias(y.mean());
    const double val_msle = fit_mlp(net, x, y, vx, val.popularity, cfg_, cfg_.seed + 100 + i);
    if (val_msle < best) {
      best = val_msle;
      net_ = net;
      chosen_hidden_ = hidden;
    }
  }
}

std::vector<double> MlpBaseline::predict(const Eigen::MatrixXd& x) const {
  ag::NoGradGuard no_grad;
  ag::Tape<double> tape;
  const auto out = net_.forward(tape, ag::Tensor<double>::constant(standardizer_.transform(x)));
  return {out.value().data(), out.value().data() + out.value().size()};
}

BaselineKind parse_baseline(const std::string& name) {
  if (name == "linear") return BaselineKind::linear;
  if (name == "mlp") return BaselineKind::mlp;
  throw ConfigError("unknown baseline '" + name + "'; valid baselines: linear, mlp");
}

std::string baseline_name(BaselineKind kind) { return kind == BaselineKind::linear ? "feat-linear" : "feat-mlp"; }

EvalResult run_baseline(BaselineKind kind, const FeatureDataset& train, const FeatureDataset& val,
                        const FeatureDataset& test, const MlpBaselineConfig& mlp_cfg) {
  if (test.size() == 0) throw ValidationError("baseline: empty test split");
  EvalResult result;
  if (kind == BaselineKind::linear) {
    LinearBaseline model;
    model.fit(train);
    result.predicted_log = model.predict(test.x);
  } else {
    MlpBaseline model(mlp_cfg);
    model.fit(train, val);
    result.predicted_log = model.predict(test.x);
  }
  result.msle = msle(result.predicted_log, test.popularity);
  result.mape = mape(result.predicted_log, test.popularity);
  return result;
}

}  // namespace autocas
