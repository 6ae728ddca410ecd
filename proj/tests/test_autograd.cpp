#include "doctest.h"

#include "autocas/autograd.hpp"
#include "autocas/optim.hpp"
#include "gradcheck.hpp"

using namespace autocas;
using namespace autocas::testing;

namespace {

TensorD param(Eigen::Index r, Eigen::Index c, std::uint64_t seed, const char* name, double scale = 1.0) {
  return TensorD::parameter(random_matrix(r, c, seed, scale), name);
}

constexpr double kTol = 1e-4;

}  // namespace

TEST_CASE("forward identities") {
  ag::Tape<double> tape;
  const auto x = TensorD::constant(random_matrix(4, 5, 1));
  const auto eye = TensorD::constant(MatrixD::Identity(4, 4));
  CHECK(ag::matmul(tape, eye, x).value() == x.value());

  const auto flat = TensorD::constant(MatrixD::Constant(2, 7, 3.5));
  const auto s = ag::softmax_rows(tape, flat);
  for (Eigen::Index i = 0; i < s.size(); ++i) CHECK(s.value().data()[i] == doctest::Approx(1.0 / 7).epsilon(1e-15));

  CHECK(ag::gelu(tape, TensorD::constant(MatrixD::Zero(1, 1))).item() == 0.0);
  CHECK(ag::mse_sum(tape, x, x).item() == 0.0);
}

TEST_CASE("softmax rows sum to one and layernorm rows are standardized") {
  ag::Tape<double> tape;
  const auto x = TensorD::constant(random_matrix(6, 9, 2, 3.0));
  const auto s = ag::softmax_rows(tape, x).value();
  for (Eigen::Index r = 0; r < s.rows(); ++r) CHECK(s.row(r).sum() == doctest::Approx(1.0).epsilon(1e-12));

  const auto ones = TensorD::constant(MatrixD::Ones(1, 9));
  const auto zeros = TensorD::constant(MatrixD::Zero(1, 9));
  const auto y = ag::layernorm(tape, x, ones, zeros, 0.0).value();
  for (Eigen::Index r = 0; r < y.rows(); ++r) {
    const double mean = y.row(r).mean();
    const double var = (y.row(r).array() - mean).square().mean();
    CHECK(std::abs(mean) < 1e-6);
    CHECK(var == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("backward of sum of squares") {
  auto x = TensorD::parameter(MatrixD{{3.0, -1.0}}, "x");
  ag::Tape<double> tape;
  auto loss = ag::mse_sum(tape, x, TensorD::constant(MatrixD::Zero(1, 2)));
  tape.backward(loss);
  CHECK(x.grad()(0, 0) == 6.0);
  CHECK(x.grad()(0, 1) == -2.0);
}

TEST_CASE("fan-out gradients accumulate") {
  auto x = TensorD::parameter(MatrixD{{2.0}}, "x");
  ag::Tape<double> tape;
  auto y = ag::add(tape, x, x);
  auto loss = ag::add(tape, y, x);
  tape.backward(loss);
  CHECK(x.grad()(0, 0) == 3.0);
}

TEST_CASE("backward rejects a non-scalar loss") {
  auto x = param(2, 2, 3, "x");
  ag::Tape<double> tape;
  auto y = ag::scale(tape, x, 2.0);
  CHECK_THROWS_AS(tape.backward(y), ShapeError);
}

TEST_CASE("shape errors name the primitive") {
  ag::Tape<double> tape;
  const auto a = TensorD::constant(MatrixD::Zero(2, 3));
  const auto b = TensorD::constant(MatrixD::Zero(2, 3));
  try {
    ag::matmul(tape, a, b);
    FAIL("matmul accepted 2x3 * 2x3");
  } catch (const ShapeError& e) {
    const std::string what = e.what();
    CHECK(what.find("matmul") != std::string::npos);
    CHECK(what.find("2x3") != std::string::npos);
  }
  CHECK_THROWS_AS(ag::add(tape, a, TensorD::constant(MatrixD::Zero(3, 2))), ShapeError);
  CHECK_THROWS_AS(ag::mse_sum(tape, a, TensorD::constant(MatrixD::Zero(1, 3))), ShapeError);
}

TEST_CASE("frozen tensors never receive a gradient") {
  auto w = TensorD::constant(random_matrix(5, 3, 4), "frozen");
  auto x = param(4, 5, 5, "x");
  ag::Tape<double> tape;
  auto loss = readout(tape, ag::matmul(tape, x, w));
  tape.backward(loss);
  CHECK_FALSE(w.has_grad());
  CHECK(x.has_grad());
}

TEST_CASE("no-grad mode records nothing") {
  auto x = param(4, 5, 6, "x");
  ag::Tape<double> tape;
  {
    ag::NoGradGuard guard;
    ag::gelu(tape, x);
  }
  CHECK(tape.size() == 0);
}

TEST_CASE("finite-difference checks of every primitive") {
  auto a = param(4, 5, 10, "a");
  auto b = param(4, 5, 11, "b");
  auto c = param(5, 3, 12, "c");
  auto row = param(1, 5, 13, "row");
  auto gamma = param(1, 5, 14, "gamma");
  auto beta = param(1, 5, 15, "beta");

  SUBCASE("matmul") {
    CHECK(check_gradients([&](auto& t) { return ag::matmul(t, a, c); }, {a, c}).worst <= kTol);
  }
  SUBCASE("add") {
    CHECK(check_gradients([&](auto& t) { return ag::add(t, a, b); }, {a, b}).worst <= kTol);
  }
  SUBCASE("add_row") {
    CHECK(check_gradients([&](auto& t) { return ag::add_row(t, a, row); }, {a, row}).worst <= kTol);
  }
  SUBCASE("scale") {
    CHECK(check_gradients([&](auto& t) { return ag::scale(t, a, -1.7); }, {a}).worst <= kTol);
  }
  SUBCASE("gelu") {
    CHECK(check_gradients([&](auto& t) { return ag::gelu(t, a); }, {a}).worst <= kTol);
  }
  SUBCASE("tanh") {
    CHECK(check_gradients([&](auto& t) { return ag::tanh(t, a); }, {a}).worst <= kTol);
  }
  SUBCASE("softmax_rows") {
    CHECK(check_gradients([&](auto& t) { return ag::softmax_rows(t, a); }, {a}).worst <= kTol);
  }
  SUBCASE("layernorm") {
    CHECK(check_gradients([&](auto& t) { return ag::layernorm(t, a, gamma, beta); }, {a, gamma, beta}).worst <=
          kTol);
  }
  SUBCASE("mse_sum") {
    CHECK(check_gradients([&](auto& t) { return ag::mse_sum(t, a, b); }, {a, b}).worst <= kTol);
  }
  SUBCASE("softmax then mse_sum") {
    CHECK(check_gradients([&](auto& t) { return ag::mse_sum(t, ag::softmax_rows(t, a), ag::softmax_rows(t, b)); },
                          {a, b})
              .worst <= kTol);
  }
  SUBCASE("take_rows with repeats") {
    CHECK(check_gradients([&](auto& t) { return ag::take_rows(t, a, {3, 0, 3, 1}); }, {a}).worst <= kTol);
  }
  SUBCASE("segment_mean") {
    CHECK(check_gradients([&](auto& t) { return ag::segment_mean(t, a, 2); }, {a}).worst <= kTol);
  }
  SUBCASE("add_positions") {
    auto table = param(3, 5, 16, "table");
    CHECK(check_gradients([&](auto& t) { return ag::add_positions(t, a, table, 2); }, {a, table}).worst <= kTol);
  }
  SUBCASE("causal_attention") {
    auto qkv = param(6, 12, 17, "qkv");
    CHECK(check_gradients([&](auto& t) { return ag::causal_attention(t, qkv, 3, 2); }, {qkv}).worst <= kTol);
  }
  SUBCASE("tanh_rnn") {
    auto x = param(6, 3, 18, "x");
    auto wx = param(3, 3, 19, "wx", 0.5);
    auto wh = param(3, 3, 20, "wh", 0.5);
    auto bias = param(1, 3, 21, "b");
    CHECK(check_gradients([&](auto& t) { return ag::tanh_rnn(t, x, wx, wh, bias, 3); }, {x, wx, wh, bias}).worst <=
          kTol);
  }
}

TEST_CASE("causal attention ignores later rows") {
  auto qkv = random_matrix(5, 12, 30);
  ag::Tape<double> tape;
  const auto before = ag::causal_attention(tape, TensorD::constant(qkv), 5, 2).value();
  qkv.row(3).array() += 1.0;
  const auto after = ag::causal_attention(tape, TensorD::constant(qkv), 5, 2).value();
  CHECK(before.topRows(3) == after.topRows(3));
  CHECK(before.row(3) != after.row(3));
}

TEST_CASE("adam moves a quadratic toward its minimum") {
  auto x = TensorD::parameter(MatrixD{{4.0, -3.0}}, "x");
  ag::Adam<double> opt({x}, {.learning_rate = 0.1});
  const auto zero = TensorD::constant(MatrixD::Zero(1, 2));
  double first = 0.0, last = 0.0;
  for (int i = 0; i < 200; ++i) {
    ag::Tape<double> tape;
    auto loss = ag::mse_sum(tape, x, zero);
    if (i == 0) first = loss.item();
    last = loss.item();
    tape.backward(loss);
    opt.step();
    opt.zero_grad();
  }
  CHECK(last < 1e-2 * first);
  CHECK(opt.steps() == 200);
}
