#include "autocas/adapter.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "autocas/checkpoint.hpp"

namespace autocas {

template <typename T>
Mlp<T>::Mlp(std::vector<Eigen::Index> widths, std::uint64_t seed, const std::string& name)
    : widths_(std::move(widths)) {
  if (widths_.size() < 2) throw ConfigError("mlp: need at least input and output widths");
  for (const auto w : widths_) {
    if (w < 1) throw ConfigError("mlp: widths must be positive");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
    const double std = 1.0 / std::sqrt(static_cast<double>(widths_[l]));
    ag::Matrix<T> w(widths_[l], widths_[l + 1]);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = static_cast<T>(std * normal(rng));
    const std::string layer = name + ".l" + std::to_string(l);
    weights_.push_back(ag::Tensor<T>::parameter(std::move(w), layer + ".weight"));
    biases_.push_back(ag::Tensor<T>::parameter(ag::Matrix<T>::Zero(1, widths_[l + 1]), layer + ".bias"));
    params_.push_back(weights_.back());
    params_.push_back(biases_.back());
  }
}

template <typename T>
ag::Tensor<T> Mlp<T>::forward(ag::Tape<T>& tape, const ag::Tensor<T>& x) const {
  if (x.cols() != in_dim()) {
    throw ShapeError(detail::concat("mlp '", weights_.front().name(), "': input is ", x.shape(), ", expected width ",
                                    in_dim()));
  }
  auto h = x;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    h = ag::add_row(tape, ag::matmul(tape, h, weights_[l]), biases_[l]);
    if (l + 1 < weights_.size()) h = ag::gelu(tape, h);
  }
  return h;
}

template <typename T>
std::size_t Mlp<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p.size());
  return n;
}

template <typename T>
void Mlp<T>::set_output_bias(T value) {
  biases_.back().value_mut().setConstant(value);
}

template <typename T>
void Mlp<T>::zero_parameters() {
  for (auto& p : params_) p.value_mut().setZero();
}

template class Mlp<float>;
template class Mlp<double>;

PromptEncoder::PromptEncoder(std::string template_text, int vocab_size, int dim, std::uint64_t seed)
    : template_(std::move(template_text)), vocab_(vocab_size) {
  if (vocab_size < 1 || dim < 1) throw ConfigError("prompt encoder: vocab_size and dim must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  projection_.resize(vocab_size, dim);
  for (Eigen::Index i = 0; i < projection_.rows(); ++i) {
    for (Eigen::Index j = 0; j < projection_.cols(); ++j) projection_(i, j) = normal(rng);
  }
}

std::vector<std::string> PromptEncoder::words(const std::string& text) {
  std::vector<std::string> out;
  std::string current;
  for (const char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else if (!current.empty()) {
      out.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) out.push_back(std::move(current));
  return out;
}

std::string PromptEncoder::render(int n) const {
  if (n < 1) throw ConfigError("prompt encoder: token index must be >= 1");
  std::string text = template_;
  const auto at = text.find("n-th");
  if (at != std::string::npos) text.replace(at, 1, std::to_string(n));
  return text;
}

Eigen::VectorXd PromptEncoder::counts(const std::string& text) const {
  Eigen::VectorXd c = Eigen::VectorXd::Zero(vocab_);
  for (const auto& w : words(text)) c(static_cast<Eigen::Index>(fnv1a(w.data(), w.size()) % static_cast<std::uint64_t>(vocab_))) += 1.0;
  return c;
}

Eigen::RowVectorXd PromptEncoder::encode_text(const std::string& text) const {
  return (counts(text).transpose() * projection_) / std::sqrt(static_cast<double>(vocab_));
}

Eigen::RowVectorXd PromptEncoder::encode(int n) const { return encode_text(render(n)); }

Eigen::MatrixXd PromptEncoder::table(int count) const {
  Eigen::MatrixXd out(count, dim());
  for (int n = 1; n <= count; ++n) out.row(n - 1) = encode(n);
  return out;
}

double PromptEncoder::max_word_vector_norm() const { return projection_.rowwise().norm().maxCoeff(); }

std::string load_prompt_template(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("prompt template: cannot open " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return text.str();
}

std::string builtin_prompt_template(const std::string& dataset) {
  const std::filesystem::path dir = std::filesystem::path(AUTOCAS_DATA_DIR) / "prompts";
  for (const char* known : {"weibo", "twitter", "aps"}) {
    if (dataset == known) return load_prompt_template(dir / (dataset + ".txt"));
  }
  return load_prompt_template(dir / "synthetic.txt");
}

double token_loss(const Eigen::Ref<const Eigen::MatrixXd>& predicted, const Eigen::Ref<const Eigen::MatrixXd>& truth) {
  if (predicted.rows() < 1) throw ShapeError("token_loss: need at least one supervised token (N >= 2)");
  if (predicted.rows() != truth.rows() || predicted.cols() != truth.cols()) {
    throw ShapeError(detail::concat("token_loss: shapes ", predicted.rows(), "x", predicted.cols(), " and ",
                                    truth.rows(), "x", truth.cols(), " differ"));
  }
  return (predicted - truth).squaredNorm() / static_cast<double>(predicted.rows());
}

double log_popularity(double count) { return std::log2(count + 1.0); }

std::int64_t popularity_from_log(double y) {
  const double count = std::round(std::exp2(y) - 1.0);
  return count < 1.0 ? 1 : static_cast<std::int64_t>(count);
}

namespace {

void check_metric_inputs(const char* name, const std::vector<double>& predicted, const std::vector<double>& truth) {
  if (predicted.empty()) throw ValidationError(std::string(name) + ": empty prediction list");
  if (predicted.size() != truth.size()) {
    throw ValidationError(detail::concat(name, ": ", predicted.size(), " predictions for ", truth.size(), " targets"));
  }
  for (const double p : truth) {
    if (!(p >= 1.0)) throw ValidationError(detail::concat(name, ": popularity ", p, " is below 1"));
  }
}

}  // namespace

double msle(const std::vector<double>& predicted_log, const std::vector<double>& truth_counts) {
  check_metric_inputs("msle", predicted_log, truth_counts);
  double sum = 0.0;
  for (std::size_t i = 0; i < predicted_log.size(); ++i) {
    const double e = predicted_log[i] - log_popularity(truth_counts[i]);
    sum += e * e;
  }
  return sum / static_cast<double>(predicted_log.size());
}

double mape(const std::vector<double>& predicted_log, const std::vector<double>& truth_counts) {
  check_metric_inputs("mape", predicted_log, truth_counts);
  double sum = 0.0;
  for (std::size_t i = 0; i < predicted_log.size(); ++i) {
    sum += std::abs(predicted_log[i] - log_popularity(truth_counts[i])) / std::log2(truth_counts[i] + 2.0);
  }
  return sum / static_cast<double>(predicted_log.size());
}

}  // namespace autocas
