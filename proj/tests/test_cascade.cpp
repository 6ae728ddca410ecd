#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "autocas/cascade.hpp"
#include "autocas/error.hpp"
#include "autocas/synthetic.hpp"

using namespace autocas;
namespace fs = std::filesystem;

namespace {

std::vector<CascadeRecord> parse(const std::string& text) {
  std::istringstream in(text);
  return parse_cascade_file(in);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("autocas_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("parse a single cascade line") {
  const auto records = parse("c1\t7\t100\t2\t7:0,7/9:30\n");
  REQUIRE(records.size() == 1);
  const auto& r = records[0];
  CHECK(r.id == "c1");
  CHECK(r.root == 7);
  CHECK(r.publish_time == 100);
  CHECK(r.final_popularity == 2);
  REQUIRE(r.edges.size() == 1);
  CHECK(r.edges[0] == CascadeEdge{7, 9, 30.0});
}

TEST_CASE("parse edge cases") {
  CHECK(parse("").empty());
  CHECK(parse("c2\t5\t0\t1\t5:0\n")[0].edges.empty());
  CHECK_THROWS_AS(parse("c3\t7\t0\t2\t7:0,7/9:30,7/9:45\n"), ValidationError);
  try {
    parse("c1\t7\t100\t2\t7:0\nbroken line\n");
    FAIL("accepted a malformed line");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
}

TEST_CASE("edges are sorted by time after parsing") {
  const auto r = parse("c\t1\t0\t4\t1:0,1/3:50,1/2:10,1/2/4:60\n")[0];
  for (std::size_t i = 1; i < r.edges.size(); ++i) CHECK(r.edges[i - 1].time <= r.edges[i].time);
}

TEST_CASE("serialize then parse round-trips") {
  const auto records = parse("a\t1\t5\t4\t1:0,1/2:3,1/2/3:7.5,1/4:9\nb\t9\t0\t1\t9:0\n");
  std::ostringstream out;
  write_cascade_file(out, records);
  CHECK(parse(out.str()) == records);
}

TEST_CASE("cascade graph at an observation time") {
  CascadeRecord r;
  r.root = 7;
  r.edges = {{7, 9, 30}, {9, 4, 90}};
  const auto g = build_cascade_graph(r, 60);
  REQUIRE(g.users.size() == 2);
  CHECK(g.users[0] == Adopter{7, 0.0});
  CHECK(g.users[1] == Adopter{9, 30.0});
  CHECK(g.edges == std::vector<CascadeEdge>{{7, 9, 30}});
  CHECK(build_cascade_graph(r, 1000).users.size() == 3);

  CascadeRecord lone;
  lone.root = 3;
  const auto single = build_cascade_graph(lone, 10);
  REQUIRE(single.users.size() == 1);
  CHECK(single.users[0] == Adopter{3, 0.0});
}

TEST_CASE("observed users grow with the observation time") {
  std::mt19937_64 rng(5);
  CascadeRecord r;
  r.root = 0;
  double t = 0.0;
  for (UserId u = 1; u < 40; ++u) {
    t += std::exponential_distribution<double>(0.1)(rng);
    r.edges.push_back({static_cast<UserId>(rng() % static_cast<std::uint64_t>(u)), u, t});
  }
  std::size_t previous = 0;
  for (double obs = 1.0; obs < t + 10; obs += 7.0) {
    const auto g = build_cascade_graph(r, obs);
    CHECK(g.users.size() >= previous);
    previous = g.users.size();
  }
}

TEST_CASE("global graph compaction") {
  IdMap ids;
  std::istringstream in("1\t2\n2\t1\n3\t3\n");
  const auto g = build_global_graph(in, ids);
  CHECK(g.node_count == 3);
  CHECK(g.edge_count() == 1);
  CHECK(g.has_edge(*ids.find(1), *ids.find(2)));
  CHECK(g.degree(*ids.find(3)) == 0);

  IdMap none;
  std::istringstream empty("");
  CHECK(build_global_graph(empty, none).node_count == 0);

  IdMap star_ids;
  std::istringstream star("0\t1\n0\t2\n0\t3\n0\t4\n");
  const auto s = build_global_graph(star, star_ids);
  CHECK(s.degree(*star_ids.find(0)) == 4);
  for (UserId leaf = 1; leaf <= 4; ++leaf) CHECK(s.degree(*star_ids.find(leaf)) == 1);

  IdMap bad;
  std::istringstream junk("1\tx\n");
  CHECK_THROWS_AS(build_global_graph(junk, bad), ParseError);
}

TEST_CASE("split sizes") {
  auto sizes = [](const CorpusSplit& s) { return std::array{s.train.size(), s.val.size(), s.test.size()}; };
  CHECK(sizes(split_corpus(100, {}, 1)) == std::array<std::size_t, 3>{70, 15, 15});
  CHECK(sizes(split_corpus(10, {}, 1)) == std::array<std::size_t, 3>{8, 1, 1});

  const auto a = split_corpus(57, {}, 9);
  const auto b = split_corpus(57, {}, 9);
  CHECK(a.train == b.train);
  CHECK(a.test == b.test);
  std::vector<int> seen(57, 0);
  for (const auto* part : {&a.train, &a.val, &a.test}) {
    for (const auto i : *part) ++seen[i];
  }
  CHECK(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }));

  CHECK_THROWS_AS(split_corpus(10, {1.2, -0.1, -0.1}, 1), ConfigError);
  CHECK_THROWS_AS(split_corpus(10, {0.5, 0.2, 0.2}, 1), ConfigError);
}

TEST_CASE("Galton-Watson mean progeny") {
  constexpr double kR = 0.5;
  constexpr double kExpected = 1.0 / (1.0 - kR);

  // Independent Monte-Carlo oracle: a bare Poisson branching process.
  std::mt19937_64 rng(2024);
  std::poisson_distribution<int> offspring(kR);
  double total = 0.0;
  for (int c = 0; c < 10000; ++c) {
    long alive = 1, size = 1;
    while (alive > 0) {
      long next = 0;
      for (long i = 0; i < alive; ++i) next += offspring(rng);
      size += next;
      alive = next;
    }
    total += static_cast<double>(size);
  }
  CHECK(total / 10000 == doctest::Approx(kExpected).epsilon(0.03));

  SyntheticConfig cfg;
  cfg.branching = kR;
  cfg.num_cascades = 10000;
  const auto corpus = generate_synthetic_corpus(cfg).corpus;
  double sum = 0.0;
  for (const auto& r : corpus.records) sum += static_cast<double>(*r.final_popularity);
  const double mean = sum / static_cast<double>(corpus.records.size());
  INFO("generator mean popularity " << mean);
  CHECK(std::abs(mean - kExpected) <= 0.1 * kExpected);
}

TEST_CASE("synthetic corpus edge cases") {
  SyntheticConfig cfg;
  cfg.num_cascades = 50;
  cfg.graph_size = 200;
  cfg.branching = 0.0;
  for (const auto& r : generate_synthetic_corpus(cfg).corpus.records) {
    CHECK(r.edges.empty());
    CHECK(r.final_popularity == 1);
  }
  cfg.branching = 1.0;
  CHECK_THROWS_AS(generate_synthetic_corpus(cfg), ConfigError);
}

TEST_CASE("synthetic corpus is byte-identical for a fixed seed") {
  SyntheticConfig cfg;
  cfg.num_cascades = 200;
  cfg.graph_size = 500;
  const auto a = scratch("synth_a"), b = scratch("synth_b");
  write_corpus(a, generate_synthetic_corpus(cfg).corpus);
  write_corpus(b, generate_synthetic_corpus(cfg).corpus);
  for (const char* f : {"cascades.txt", "global.txt", "idmap.csv", "meta.json"}) {
    CHECK(slurp(a / f) == slurp(b / f));
  }
  const auto loaded = load_corpus(a);
  CHECK(loaded.records.size() == 200);
  for (const auto& r : loaded.records) CHECK_NOTHROW(validate_record(r));
}
