#include "doctest.h"

#include <random>

#include "autocas/error.hpp"
#include "autocas/tokenizer.hpp"

using namespace autocas;

namespace {

// Each user's embedding is (user, user + 0.5) scaled, so positions are easy to read back.
EmbeddingLookup simple_lookup() {
  return [](UserId u, std::span<double> out) {
    for (std::size_t j = 0; j < out.size(); ++j) out[j] = static_cast<double>(u) + 0.5 * static_cast<double>(j) + 1.0;
  };
}

CascadeGraph chain(const std::vector<std::pair<UserId, double>>& adopters) {
  CascadeGraph g;
  for (const auto& [u, t] : adopters) g.users.push_back({u, t});
  return g;
}

}  // namespace

TEST_CASE("fuse concatenates local then global") {
  const std::vector<double> le(40, 1.0), ge(40, 2.0);
  const auto h = fuse(le, ge, 40, 40);
  CHECK(h.size() == 80);
  CHECK(h.head(40) == Eigen::RowVectorXd::Constant(40, 1.0));
  CHECK(h.tail(40) == Eigen::RowVectorXd::Constant(40, 2.0));

  const std::vector<double> zero(3, 0.0), g{4.0, 5.0};
  const auto z = fuse(zero, g, 3, 2);
  CHECK(z == (Eigen::RowVectorXd(5) << 0, 0, 0, 4, 5).finished());
  CHECK_THROWS_AS(fuse(zero, g, 4, 2), ShapeError);
}

TEST_CASE("patch boundaries") {
  CHECK(patch_boundaries(8.0, 4) == std::vector<double>{2, 4, 6, 8});
  CHECK(patch_boundaries(7.0, 2) == std::vector<double>{3.5, 7.0});
  for (int n = 2; n < 40; ++n) {
    const auto b = patch_boundaries(1234.567, n);
    CHECK(b.back() == 1234.567);
    for (std::size_t i = 1; i < b.size(); ++i) CHECK(b[i] > b[i - 1]);
  }
}

TEST_CASE("single user token is zero padded") {
  const auto lookup = [](UserId, std::span<double> out) {
    out[0] = 3.0;
    out[1] = -2.0;
  };
  int active = 0;
  const auto t = build_token(chain({{5, 0.0}}), 10.0, lookup, 2, 3, &active);
  CHECK(active == 1);
  CHECK(t == (Eigen::RowVectorXf(6) << 3, -2, 0, 0, 0, 0).finished());
}

TEST_CASE("truncation keeps the earliest users with id tie-break") {
  const auto g = chain({{9, 0.0}, {8, 5.0}, {3, 5.0}, {1, 7.0}, {2, 7.0}});
  const auto t = build_token(g, 10.0, simple_lookup(), 1, 3);
  CHECK(t == (Eigen::RowVectorXf(3) << 10, 4, 9).finished());
}

TEST_CASE("sequence of a cascade finished in the first patch is constant") {
  const auto g = chain({{0, 0.0}, {1, 1.0}, {2, 2.0}});
  TokenizerConfig cfg;
  cfg.num_patches = 5;
  cfg.max_length = 4;
  cfg.observation_time = 100.0;
  const auto s = build_sequence(g, cfg, simple_lookup(), 2);
  CHECK(s.token_dim() == 8);
  for (Eigen::Index n = 1; n < s.length(); ++n) CHECK(s.tokens.row(n) == s.tokens.row(0));
}

TEST_CASE("later boundaries saturate") {
  const auto g = chain({{0, 0.0}, {4, 30.0}, {2, 60.0}});
  const auto at_obs = build_token(g, 60.0, simple_lookup(), 2, 5);
  CHECK(build_token(g, 500.0, simple_lookup(), 2, 5) == at_obs);
}

TEST_CASE("prefix property and padding on random cascades") {
  std::mt19937_64 rng(77);
  std::exponential_distribution<double> wait(1.0 / 200.0);
  constexpr Eigen::Index kDim = 3;
  constexpr int kLength = 64;
  for (int c = 0; c < 200; ++c) {
    CascadeGraph g;
    g.users.push_back({0, 0.0});
    double t = 0.0;
    const int size = 1 + static_cast<int>(rng() % 40);
    for (int u = 1; u < size; ++u) g.users.push_back({u, t += wait(rng)});
    const auto s = build_sequence(g, patch_boundaries(3600.0, 6), kLength, simple_lookup(), kDim);
    REQUIRE(s.token_dim() == kLength * kDim);
    for (Eigen::Index n = 0; n < s.length(); ++n) {
      const auto active = s.active_counts[static_cast<std::size_t>(n)] * kDim;
      CHECK(s.tokens.row(n).tail(s.token_dim() - active).isZero(0.0f));
      if (n > 0) {
        const auto before = s.active_counts[static_cast<std::size_t>(n - 1)];
        CHECK(before <= s.active_counts[static_cast<std::size_t>(n)]);
        CHECK(s.tokens.row(n).head(before * kDim) == s.tokens.row(n - 1).head(before * kDim));
      }
    }
  }
}

TEST_CASE("token width for the full-scale Weibo settings") {
  const auto g = chain({{0, 0.0}});
  const auto t = build_token(g, 1.0, [](UserId, std::span<double> out) { std::fill(out.begin(), out.end(), 1.0); },
                             80, 500);
  CHECK(t.size() == 40000);
}

TEST_CASE("tokenizer config validation") {
  TokenizerConfig cfg;
  cfg.num_patches = 1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.num_patches = 4;
  cfg.max_length = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
