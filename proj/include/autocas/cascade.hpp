#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace autocas {

using UserId = std::int64_t;

struct CascadeEdge {
  UserId parent = 0;
  UserId child = 0;
  double time = 0.0;  // seconds since the root post

  bool operator==(const CascadeEdge&) const = default;
};

struct CascadeRecord {
  std::string id;
  UserId root = 0;
  std::int64_t publish_time = 0;
  std::vector<CascadeEdge> edges;  // non-decreasing in time, each child once
  std::optional<std::int64_t> final_popularity;

  bool operator==(const CascadeRecord&) const = default;
};

struct Adopter {
  UserId user = 0;
  double time = 0.0;

  bool operator==(const Adopter&) const = default;
};

/// A cascade truncated at an observation time. `users[0]` is always the root.
struct CascadeGraph {
  std::vector<Adopter> users;
  std::vector<CascadeEdge> edges;
  double observation_time = 0.0;

  std::size_t size() const { return users.size(); }
};

/// Bidirectional map between raw user ids found in files and dense ids.
class IdMap {
 public:
  /// Dense id for `original`, allocating the next one if unseen.
  std::int64_t intern(UserId original);
  std::optional<std::int64_t> find(UserId original) const;
  UserId original(std::int64_t dense) const { return to_original_.at(static_cast<std::size_t>(dense)); }
  std::size_t size() const { return to_original_.size(); }

  void write_csv(std::ostream& out) const;
  static IdMap read_csv(std::istream& in);

 private:
  std::unordered_map<UserId, std::int64_t> to_dense_;
  std::vector<UserId> to_original_;
};

/// Undirected context graph over dense ids [0, node_count) in CSR form.
struct GlobalGraph {
  std::int64_t node_count = 0;
  std::vector<std::int64_t> offsets{0};  // node_count + 1 entries
  std::vector<std::int64_t> neighbors;   // sorted per node, no self loops

  std::int64_t degree(std::int64_t node) const {
    return offsets[static_cast<std::size_t>(node) + 1] - offsets[static_cast<std::size_t>(node)];
  }
  std::int64_t edge_count() const { return static_cast<std::int64_t>(neighbors.size()) / 2; }
  bool has_edge(std::int64_t u, std::int64_t v) const;

  /// Builds from an undirected edge list; drops self loops and duplicates.
  static GlobalGraph from_edges(std::int64_t node_count,
                                const std::vector<std::pair<std::int64_t, std::int64_t>>& edges);
};

struct CorpusMeta {
  std::string name = "synthetic";
  double total_duration = 0.0;    // seconds
  double observation_time = 0.0;  // t_o, seconds
  double prediction_time = 0.0;   // t_p, seconds
};

/// Observation/prediction defaults for the known public datasets.
std::optional<CorpusMeta> known_dataset_meta(const std::string& name);

/// Records and global graph with user ids already mapped to dense ids.
struct Corpus {
  std::vector<CascadeRecord> records;
  GlobalGraph graph;
  IdMap ids;
  CorpusMeta meta;
};

/// Parses `id<TAB>root<TAB>pub_time<TAB>final_count<TAB>path[,path...]`.
/// Paths may also be separated by spaces (as in the public Weibo release).
std::vector<CascadeRecord> parse_cascade_file(std::istream& in);
void write_cascade_file(std::ostream& out, const std::vector<CascadeRecord>& records);

/// Checks the tree and ordering invariants; throws ValidationError.
void validate_record(const CascadeRecord& record);

CascadeGraph build_cascade_graph(const CascadeRecord& record, double t_obs);

/// Reads `u<TAB>v` pairs, interning ids into `ids`.
GlobalGraph build_global_graph(std::istream& in, IdMap& ids);
void write_global_graph(std::ostream& out, const GlobalGraph& graph, const IdMap& ids);

/// Rewrites every user id of `records` through `ids` (allocating new dense
/// ids for users absent from the global graph).
void remap_users(std::vector<CascadeRecord>& records, IdMap& ids);

/// Directory layout: cascades.txt, global.txt, idmap.csv, meta.json.
void write_corpus(const std::filesystem::path& dir, const Corpus& corpus);
Corpus load_corpus(const std::filesystem::path& dir);

struct SplitRatios {
  double train = 0.7;
  double val = 0.15;
  double test = 0.15;
};

struct CorpusSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

/// Seeded shuffle of [0, count); val/test sizes are floored, remainder to train.
CorpusSplit split_corpus(std::size_t count, const SplitRatios& ratios, std::uint64_t seed);

}  // namespace autocas
