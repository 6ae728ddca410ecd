#pragma once

#include <cstdint>
#include <vector>

#include "autocas/cascade.hpp"

namespace autocas {

/// Desk-scale stand-in for a retweet/citation corpus.
///
/// The context graph is a preferential-attachment graph whose nodes are split
/// into communities; each new node links `edges_per_node` times, inside its
/// own community with probability 1 - mixing. Each cascade is a
/// Galton-Watson process rooted at a uniformly drawn user: every adopter has
/// Poisson(R_c) offspring, each delayed by an exponential waiting time and
/// placed on a not-yet-adopted graph neighbour. The root's community c fixes
/// R_c = 1 - (1 - R) / u_c and the mean wait, with u_c spread evenly around 1,
/// so the expected total progeny averaged over communities stays 1 / (1 - R).
/// Zero spreads give the homogeneous process.
struct SyntheticConfig {
  std::size_t num_cascades = 2000;
  std::int64_t graph_size = 5000;
  int edges_per_node = 4;
  int communities = 2;
  double mixing = 0.05;
  double branching = 0.7;
  double progeny_spread = 0.95;
  double time_spread = 1.5;
  double mean_wait = 3600.0;
  double time_horizon = 86400.0;
  double observation_time = 3600.0;
  std::uint64_t seed = 42;
  std::string name = "synthetic";

  void validate() const;
  std::vector<double> community_branching() const;
  std::vector<double> community_mean_wait() const;
};

struct SyntheticCorpus {
  Corpus corpus;
  std::vector<int> community;  // per dense node id
};

SyntheticCorpus generate_synthetic_corpus(const SyntheticConfig& cfg);

}  // namespace autocas
