#include "autocas/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <random>
#include <unordered_set>

#include "autocas/error.hpp"

namespace autocas {

namespace {

std::vector<double> spread_evenly(double center, double half_width, int count) {
  std::vector<double> values(static_cast<std::size_t>(count), center);
  if (count < 2) return values;
  for (int c = 0; c < count; ++c) {
    values[static_cast<std::size_t>(c)] = center - half_width + 2.0 * half_width * c / (count - 1);
  }
  return values;
}

struct PendingAdopter {
  double time;
  std::int64_t user;
  bool operator>(const PendingAdopter& other) const {
    return time != other.time ? time > other.time : user > other.user;
  }
};

GlobalGraph community_preferential_attachment(const SyntheticConfig& cfg, std::mt19937_64& rng,
                                              std::vector<int>& community) {
  const int m = cfg.edges_per_node;
  const int groups = cfg.communities;
  const std::int64_t n = cfg.graph_size;
  community.assign(static_cast<std::size_t>(n), 0);
  for (std::int64_t i = 0; i < n; ++i) community[static_cast<std::size_t>(i)] = static_cast<int>(i % groups);

  // Each node appears in its community's list once per incident edge end.
  std::vector<std::vector<std::int64_t>> endpoints(static_cast<std::size_t>(groups));
  std::vector<std::pair<std::int64_t, std::int64_t>> edges;
  const std::int64_t seed_nodes = static_cast<std::int64_t>(m + 1) * groups;
  for (std::int64_t u = 0; u < seed_nodes; ++u) {
    for (std::int64_t v = u + groups; v < seed_nodes; v += groups) {
      edges.emplace_back(u, v);
      endpoints[static_cast<std::size_t>(u % groups)].push_back(u);
      endpoints[static_cast<std::size_t>(v % groups)].push_back(v);
    }
  }

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<std::int64_t> targets;
  for (std::int64_t u = seed_nodes; u < n; ++u) {
    const int own = community[static_cast<std::size_t>(u)];
    targets.clear();
    for (int attempt = 0; static_cast<int>(targets.size()) < m && attempt < 50 * m; ++attempt) {
      int group = own;
      if (groups > 1 && unit(rng) < cfg.mixing) {
        std::uniform_int_distribution<int> other(0, groups - 2);
        group = other(rng);
        if (group >= own) ++group;
      }
      const auto& pool = endpoints[static_cast<std::size_t>(group)];
      std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
      const auto v = pool[pick(rng)];
      if (std::find(targets.begin(), targets.end(), v) == targets.end()) targets.push_back(v);
    }
    for (const auto v : targets) {
      edges.emplace_back(u, v);
      endpoints[static_cast<std::size_t>(own)].push_back(u);
      endpoints[static_cast<std::size_t>(community[static_cast<std::size_t>(v)])].push_back(v);
    }
  }
  return GlobalGraph::from_edges(n, edges);
}

CascadeRecord simulate_cascade(const GlobalGraph& graph, std::int64_t root, double branching, double mean_wait,
                               double horizon, std::mt19937_64& rng) {
  CascadeRecord rec;
  rec.root = root;
  std::unordered_set<std::int64_t> adopted{root};
  std::priority_queue<PendingAdopter, std::vector<PendingAdopter>, std::greater<>> queue;
  queue.push({0.0, root});
  std::exponential_distribution<double> wait(1.0 / mean_wait);
  std::vector<std::int64_t> candidates;
  while (!queue.empty()) {
    const auto [time, user] = queue.top();
    queue.pop();
    int offspring = 0;
    if (branching > 0.0) {
      std::poisson_distribution<int> poisson(branching);
      offspring = poisson(rng);
    }
    for (int k = 0; k < offspring; ++k) {
      const double child_time = time + wait(rng);
      candidates.clear();
      for (auto e = graph.offsets[static_cast<std::size_t>(user)]; e < graph.offsets[static_cast<std::size_t>(user) + 1];
           ++e) {
        const auto v = graph.neighbors[static_cast<std::size_t>(e)];
        if (!adopted.contains(v)) candidates.push_back(v);
      }
      if (candidates.empty()) continue;
      std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
      const auto child = candidates[pick(rng)];
      if (child_time > horizon) continue;
      adopted.insert(child);
      rec.edges.push_back({user, child, child_time});
      queue.push({child_time, child});
    }
  }
  std::stable_sort(rec.edges.begin(), rec.edges.end(),
                   [](const CascadeEdge& a, const CascadeEdge& b) { return a.time < b.time; });
  rec.final_popularity = static_cast<std::int64_t>(rec.edges.size()) + 1;
  return rec;
}

}  // namespace

void SyntheticConfig::validate() const {
  if (!(branching >= 0.0 && branching < 1.0)) {
    throw ConfigError("synthetic corpus: branching ratio R must satisfy 0 <= R < 1 (R >= 1 is supercritical)");
  }
  if (communities < 1) throw ConfigError("synthetic corpus: need at least one community");
  if (edges_per_node < 1) throw ConfigError("synthetic corpus: edges_per_node must be >= 1");
  if (graph_size < static_cast<std::int64_t>(edges_per_node + 1) * communities + 1) {
    throw ConfigError("synthetic corpus: graph too small for the attachment seed");
  }
  if (!(progeny_spread >= 0.0 && progeny_spread <= 1.0)) {
    throw ConfigError("synthetic corpus: progeny_spread must lie in [0, 1]");
  }
  if (!(mixing >= 0.0 && mixing <= 1.0)) throw ConfigError("synthetic corpus: mixing must lie in [0, 1]");
  if (!(mean_wait > 0.0) || !(time_horizon > 0.0) || !(observation_time > 0.0)) {
    throw ConfigError("synthetic corpus: times must be positive");
  }
}

std::vector<double> SyntheticConfig::community_branching() const {
  auto ratios = spread_evenly(1.0, progeny_spread * branching, communities);
  for (auto& u : ratios) u = std::max(0.0, 1.0 - (1.0 - branching) / u);
  return ratios;
}

std::vector<double> SyntheticConfig::community_mean_wait() const {
  auto waits = spread_evenly(0.0, time_spread, communities);
  for (auto& w : waits) w = mean_wait * std::exp(w);
  return waits;
}

SyntheticCorpus generate_synthetic_corpus(const SyntheticConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  SyntheticCorpus out;
  out.corpus.graph = community_preferential_attachment(cfg, rng, out.community);
  for (std::int64_t u = 0; u < cfg.graph_size; ++u) out.corpus.ids.intern(u);

  const auto branching = cfg.community_branching();
  const auto waits = cfg.community_mean_wait();
  std::uniform_int_distribution<std::int64_t> pick_root(0, cfg.graph_size - 1);
  out.corpus.records.reserve(cfg.num_cascades);
  for (std::size_t i = 0; i < cfg.num_cascades; ++i) {
    const auto root = pick_root(rng);
    const auto c = static_cast<std::size_t>(out.community[static_cast<std::size_t>(root)]);
    auto rec = simulate_cascade(out.corpus.graph, root, branching[c], waits[c], cfg.time_horizon, rng);
    rec.id = "s" + std::to_string(i);
    rec.publish_time = 1'600'000'000 + static_cast<std::int64_t>(i) * 60;
    out.corpus.records.push_back(std::move(rec));
  }
  out.corpus.meta = {cfg.name, cfg.time_horizon, cfg.observation_time, cfg.time_horizon};
  return out;
}

}  // namespace autocas
