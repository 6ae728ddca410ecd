#include "autocas/trainer.hpp"

#include <chrono>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>

#include "autocas/optim.hpp"

namespace autocas {

namespace {

using Tensor = ag::Tensor<float>;
using Tape = ag::Tape<float>;

ag::Matrix<float> gather_sequences(const TokenDataset& data, const std::vector<std::size_t>& order, std::size_t begin,
                                   std::size_t end) {
  const Eigen::Index n = data.seq_len;
  ag::Matrix<float> batch(static_cast<Eigen::Index>(end - begin) * n, data.token_dim());
  for (std::size_t i = begin; i < end; ++i) {
    batch.middleRows(static_cast<Eigen::Index>(i - begin) * n, n) =
        data.tokens.middleRows(static_cast<Eigen::Index>(order[i]) * n, n);
  }
  return batch;
}

ag::Matrix<float> gather_targets(const TokenDataset& data, const std::vector<std::size_t>& order, std::size_t begin,
                                 std::size_t end) {
  ag::Matrix<float> y(static_cast<Eigen::Index>(end - begin), 1);
  for (std::size_t i = begin; i < end; ++i) {
    y(static_cast<Eigen::Index>(i - begin), 0) = static_cast<float>(log_popularity(data.popularity[order[i]]));
  }
  return y;
}

bool all_finite(const ag::Matrix<float>& m) { return m.allFinite(); }

[[noreturn]] void report_non_finite(const AutoCasModel<float>& model, const AutoCasModel<float>::Output& out, int epoch,
                                    std::size_t batch) {
  std::string culprit = "loss";
  for (const auto& t : model.trainable()) {
    if (!all_finite(t.value())) {
      culprit = t.name();
      break;
    }
  }
  if (culprit == "loss") {
    if (!all_finite(out.log_popularity.value())) {
      culprit = "head output";
    } else if (out.token_loss.defined() && !all_finite(out.token_loss.value())) {
      culprit = "token_loss";
    }
  }
  throw NumericError(detail::concat("train: non-finite loss at epoch ", epoch, ", batch ", batch,
                                    "; first non-finite tensor: ", culprit));
}

std::string format_time(double t) {
  std::ostringstream s;
  s << std::setprecision(10) << t;
  return s.str();
}

}  // namespace

void TokenDataset::validate() const {
  if (seq_len < 1) throw ValidationError("dataset: sequence length must be positive");
  if (tokens.rows() != static_cast<Eigen::Index>(size()) * seq_len) {
    throw ValidationError(detail::concat("dataset: ", tokens.rows(), " token rows for ", size(), " cascades of ",
                                         seq_len, " tokens"));
  }
  if (!ids.empty() && ids.size() != size()) throw ValidationError("dataset: id count differs from cascade count");
}

TokenDataset TokenDataset::subset(const std::vector<std::size_t>& rows) const {
  TokenDataset out;
  out.seq_len = seq_len;
  out.tokens = gather_sequences(*this, rows, 0, rows.size());
  for (const auto r : rows) {
    out.popularity.push_back(popularity.at(r));
    if (!ids.empty()) out.ids.push_back(ids.at(r));
  }
  return out;
}

void TrainConfig::validate() const {
  if (patience < 1) throw ConfigError("train: patience must be >= 1");
  if (!(token_loss_weight >= 0.0)) throw ConfigError("train: token loss weight lambda must be >= 0");
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (max_epochs < 1) throw ConfigError("train: max_epochs must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("train: learning_rate must be positive");
  if (staged && stage_one_epochs < 0) throw ConfigError("train: stage_one_epochs must be >= 0");
}

EvalResult evaluate(const AutoCasModel<float>& model, const TokenDataset& data, int batch_size) {
  data.validate();
  if (data.size() == 0) throw ValidationError("evaluate: empty split");
  ag::NoGradGuard no_grad;
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  EvalResult result;
  result.predicted_log.reserve(data.size());
  const auto step = static_cast<std::size_t>(std::max(1, batch_size));
  for (std::size_t begin = 0; begin < data.size(); begin += step) {
    const auto end = std::min(data.size(), begin + step);
    Tape tape;
    const auto out = model.forward(tape, Tensor::constant(gather_sequences(data, order, begin, end)), data.seq_len);
    for (Eigen::Index i = 0; i < out.log_popularity.rows(); ++i) {
      result.predicted_log.push_back(static_cast<double>(out.log_popularity.value()(i, 0)));
    }
  }
  result.msle = msle(result.predicted_log, data.popularity);
  result.mape = mape(result.predicted_log, data.popularity);
  return result;
}

RunReport train(AutoCasModel<float>& model, const TokenDataset& train_set, const TokenDataset& val_set,
                const TrainConfig& cfg, const ValidationHook& hook) {
  cfg.validate();
  train_set.validate();
  val_set.validate();
  if (train_set.size() == 0) throw ValidationError("train: empty training split");
  if (val_set.size() == 0) throw ValidationError("train: empty validation split");
  model.audit_trainable();

  const auto started = std::chrono::steady_clock::now();
  RunReport report;
  report.variant = variant_name(model.variant());
  report.learnable_params = model.learnable_count();
  report.total_params = model.total_count();
  report.backbone_checksum_before = model.shared_backbone().checksum();

  // Stage one (staged mode only) fits projector/adapter to the token loss.
  std::vector<Tensor> sequence_params, head_params;
  for (const auto& t : model.trainable()) {
    (t.name().rfind("head.", 0) == 0 ? head_params : sequence_params).push_back(t);
  }
  const bool staged = cfg.staged && !sequence_params.empty();
  const int stage_one = staged ? std::min(cfg.stage_one_epochs, cfg.max_epochs - 1) : 0;

  ag::AdamConfig adam_cfg{cfg.learning_rate};
  std::optional<ag::Adam<float>> adam;
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto batch_size = static_cast<std::size_t>(cfg.batch_size);

  double best = std::numeric_limits<double>::infinity();
  auto best_state = model.state();
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const bool token_phase = epoch <= stage_one;
    if (epoch == 1 || epoch == stage_one + 1) {
      if (!staged) {
        adam.emplace(model.trainable(), adam_cfg);
      } else {
        adam.emplace(token_phase ? sequence_params : head_params, adam_cfg);
      }
    }
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0, msle_sum = 0.0, token_sum = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += batch_size, ++batch_index) {
      const auto end = std::min(order.size(), begin + batch_size);
      const auto count = static_cast<float>(end - begin);
      Tape tape;
      const auto tokens = Tensor::constant(gather_sequences(train_set, order, begin, end));
      const auto targets = Tensor::constant(gather_targets(train_set, order, begin, end));
      const auto out = model.forward(tape, tokens, train_set.seq_len);
      const auto msle_loss = ag::scale(tape, ag::mse_sum(tape, out.log_popularity, targets), 1.0f / count);
      Tensor loss;
      if (token_phase) {
        loss = out.token_loss;
      } else if (staged) {
        loss = msle_loss;
      } else if (out.token_loss.defined() && cfg.token_loss_weight > 0.0) {
        loss = ag::add(tape, msle_loss, ag::scale(tape, out.token_loss, static_cast<float>(cfg.token_loss_weight)));
      } else {
        loss = msle_loss;
      }
      if (!std::isfinite(loss.item())) report_non_finite(model, out, epoch, batch_index);
      tape.backward(loss);
      adam->step();
      for (auto t : model.trainable()) t.zero_grad();

      loss_sum += static_cast<double>(loss.item()) * count;
      msle_sum += static_cast<double>(msle_loss.item()) * count;
      if (out.token_loss.defined()) token_sum += static_cast<double>(out.token_loss.item()) * count;
    }
    EpochStats stats;
    stats.epoch = epoch;
    const auto n = static_cast<double>(train_set.size());
    stats.train_loss = loss_sum / n;
    stats.train_msle = msle_sum / n;
    stats.train_token_loss = token_sum / n;
    stats.val_msle = evaluate(model, val_set).msle;
    if (hook) stats.val_msle = hook(epoch, stats.val_msle);
    report.epochs.push_back(stats);
    if (token_phase) continue;

    if (stats.val_msle < best) {
      best = stats.val_msle;
      report.best_epoch = epoch;
      best_state = model.state();
    } else if (epoch - report.best_epoch >= cfg.patience) {
      report.stopped_early = true;
      break;
    }
  }
  model.load_state(best_state);
  report.best_val_msle = best;

  report.backbone_checksum_after = model.shared_backbone().checksum();
  if (report.backbone_checksum_after != report.backbone_checksum_before) {
    throw std::logic_error("train: frozen backbone changed during training");
  }
  model.audit_trainable();
  report.wall_clock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return report;
}

nlohmann::json RunReport::to_json() const {
  nlohmann::json epochs_json = nlohmann::json::array();
  for (const auto& e : epochs) {
    epochs_json.push_back({{"epoch", e.epoch},
                           {"train_loss", e.train_loss},
                           {"train_msle", e.train_msle},
                           {"train_token_loss", e.train_token_loss},
                           {"val_msle", e.val_msle}});
  }
  return {{"schema_version", kSchemaVersion},
          {"run_id", run_id},
          {"dataset", dataset},
          {"variant", variant},
          {"t_obs", t_obs},
          {"epochs", epochs_json},
          {"best_epoch", best_epoch},
          {"stopped_early", stopped_early},
          {"best_val_msle", best_val_msle},
          {"test_msle", test_msle},
          {"test_mape", test_mape},
          {"wall_clock_s", wall_clock_s},
          {"learnable_params", learnable_params},
          {"total_params", total_params},
          {"backbone_checksum_before", backbone_checksum_before},
          {"backbone_checksum_after", backbone_checksum_after}};
}

RunReport RunReport::from_json(const nlohmann::json& j) {
  const int version = j.at("schema_version").get<int>();
  if (version != kSchemaVersion) {
    throw ParseError(detail::concat("run report: unsupported schema version ", version), 0);
  }
  RunReport r;
  r.run_id = j.at("run_id").get<std::string>();
  r.dataset = j.at("dataset").get<std::string>();
  r.variant = j.at("variant").get<std::string>();
  r.t_obs = j.at("t_obs").get<double>();
  for (const auto& e : j.at("epochs")) {
    r.epochs.push_back({e.at("epoch").get<int>(), e.at("train_loss").get<double>(), e.at("train_msle").get<double>(),
                        e.at("train_token_loss").get<double>(), e.at("val_msle").get<double>()});
  }
  r.best_epoch = j.at("best_epoch").get<int>();
  r.stopped_early = j.at("stopped_early").get<bool>();
  r.best_val_msle = j.at("best_val_msle").get<double>();
  r.test_msle = j.at("test_msle").get<double>();
  r.test_mape = j.at("test_mape").get<double>();
  r.wall_clock_s = j.at("wall_clock_s").get<double>();
  r.learnable_params = j.at("learnable_params").get<std::size_t>();
  r.total_params = j.at("total_params").get<std::size_t>();
  r.backbone_checksum_before = j.at("backbone_checksum_before").get<std::uint64_t>();
  r.backbone_checksum_after = j.at("backbone_checksum_after").get<std::uint64_t>();
  return r;
}

std::string RunReport::csv_header() {
  return "run_id,dataset,t_obs,variant,msle,mape,epochs,wall_clock_s,learnable_params,total_params";
}

std::string RunReport::csv_row() const {
  std::ostringstream s;
  s << run_id << ',' << dataset << ',' << format_time(t_obs) << ',' << variant << ',' << std::setprecision(8)
    << test_msle << ',' << test_mape << ',' << epochs.size() << ',' << std::setprecision(6) << wall_clock_s << ','
    << learnable_params << ',' << total_params;
  return s.str();
}

}  // namespace autocas
