#include "autocas/cascade.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <string_view>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "autocas/error.hpp"

namespace autocas {

namespace {

std::vector<std::string_view> split(std::string_view text, std::string_view delims) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t end = text.find_first_of(delims, start);
    const std::size_t stop = end == std::string_view::npos ? text.size() : end;
    parts.push_back(text.substr(start, stop - start));
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  return parts;
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

template <typename Number>
std::optional<Number> parse_number(std::string_view text) {
  text = trim(text);
  if (text.empty()) return std::nullopt;
  if (text.front() == '+') text.remove_prefix(1);
  Number value{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc{} || ptr != end) return std::nullopt;
  return value;
}

std::string format_time(double t) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), t);
  return std::string(buf, ptr);
}

CascadeRecord parse_line(std::string_view line, std::size_t line_no) {
  const auto fields = split(line, "\t");
  if (fields.size() != 5) {
    throw ParseError(detail::concat("expected 5 tab-separated fields, found ", fields.size()), line_no);
  }
  CascadeRecord rec;
  rec.id = std::string(trim(fields[0]));
  if (rec.id.empty()) throw ParseError("empty cascade id", line_no);
  const auto root = parse_number<UserId>(fields[1]);
  if (!root) throw ParseError("root user is not an integer", line_no);
  rec.root = *root;
  const auto pub = parse_number<std::int64_t>(fields[2]);
  if (!pub) throw ParseError("publish time is not an integer", line_no);
  rec.publish_time = *pub;
  const auto count_field = trim(fields[3]);
  if (!count_field.empty() && count_field != "-") {
    const auto count = parse_number<std::int64_t>(count_field);
    if (!count) throw ParseError("final count is not an integer", line_no);
    rec.final_popularity = *count;
  }

  for (const auto raw_path : split(trim(fields[4]), ", ")) {
    const auto path = trim(raw_path);
    if (path.empty()) continue;
    const auto colon = path.rfind(':');
    if (colon == std::string_view::npos) throw ParseError("path without ':time' suffix", line_no);
    const auto time = parse_number<double>(path.substr(colon + 1));
    if (!time || !std::isfinite(*time)) throw ParseError("path time is not a number", line_no);
    const auto nodes = split(path.substr(0, colon), "/");
    std::vector<UserId> users;
    users.reserve(nodes.size());
    for (const auto node : nodes) {
      const auto user = parse_number<UserId>(node);
      if (!user) throw ParseError("path element is not an integer user id", line_no);
      users.push_back(*user);
    }
    if (users.size() == 1) {
      if (users[0] != rec.root) {
        throw ValidationError(detail::concat("cascade ", rec.id, ": single-node path ", users[0],
                                             " is not the root ", rec.root));
      }
      continue;
    }
    rec.edges.push_back({users[users.size() - 2], users.back(), *time});
  }
  std::stable_sort(rec.edges.begin(), rec.edges.end(),
                   [](const CascadeEdge& a, const CascadeEdge& b) { return a.time < b.time; });
  validate_record(rec);
  return rec;
}

}  // namespace

std::int64_t IdMap::intern(UserId original) {
  const auto [it, inserted] = to_dense_.try_emplace(original, static_cast<std::int64_t>(to_original_.size()));
  if (inserted) to_original_.push_back(original);
  return it->second;
}

std::optional<std::int64_t> IdMap::find(UserId original) const {
  const auto it = to_dense_.find(original);
  if (it == to_dense_.end()) return std::nullopt;
  return it->second;
}

void IdMap::write_csv(std::ostream& out) const {
  out << "original_id,dense_id\n";
  for (std::size_t i = 0; i < to_original_.size(); ++i) out << to_original_[i] << ',' << i << '\n';
}

IdMap IdMap::read_csv(std::istream& in) {
  IdMap map;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto text = trim(line);
    if (text.empty() || (line_no == 1 && text.starts_with("original_id"))) continue;
    const auto parts = split(text, ",");
    if (parts.size() != 2) throw ParseError("id map row must have two columns", line_no);
    const auto original = parse_number<UserId>(parts[0]);
    const auto dense = parse_number<std::int64_t>(parts[1]);
    if (!original || !dense) throw ParseError("id map entries must be integers", line_no);
    if (*dense != static_cast<std::int64_t>(map.size())) {
      throw ParseError("dense ids must be listed in order 0,1,2,...", line_no);
    }
    map.intern(*original);
  }
  return map;
}

bool GlobalGraph::has_edge(std::int64_t u, std::int64_t v) const {
  if (u < 0 || u >= node_count) return false;
  const auto first = neighbors.begin() + offsets[static_cast<std::size_t>(u)];
  const auto last = neighbors.begin() + offsets[static_cast<std::size_t>(u) + 1];
  return std::binary_search(first, last, v);
}

GlobalGraph GlobalGraph::from_edges(std::int64_t node_count,
                                    const std::vector<std::pair<std::int64_t, std::int64_t>>& edges) {
  std::vector<std::vector<std::int64_t>> adjacency(static_cast<std::size_t>(node_count));
  for (const auto& [u, v] : edges) {
    if (u == v) continue;
    if (u < 0 || v < 0 || u >= node_count || v >= node_count) {
      throw ValidationError(detail::concat("edge (", u, ",", v, ") outside node range ", node_count));
    }
    adjacency[static_cast<std::size_t>(u)].push_back(v);
    adjacency[static_cast<std::size_t>(v)].push_back(u);
  }
  GlobalGraph g;
  g.node_count = node_count;
  g.offsets.assign(static_cast<std::size_t>(node_count) + 1, 0);
  for (std::size_t i = 0; i < adjacency.size(); ++i) {
    auto& list = adjacency[i];
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());
    g.offsets[i + 1] = g.offsets[i] + static_cast<std::int64_t>(list.size());
  }
  g.neighbors.reserve(static_cast<std::size_t>(g.offsets.back()));
  for (const auto& list : adjacency) g.neighbors.insert(g.neighbors.end(), list.begin(), list.end());
  return g;
}

std::optional<CorpusMeta> known_dataset_meta(const std::string& name) {
  constexpr double hour = 3600.0;
  constexpr double day = 24.0 * hour;
  constexpr double year = 365.0 * day;
  std::string key = name;
  std::transform(key.begin(), key.end(), key.begin(), [](unsigned char c) { return std::tolower(c); });
  if (key == "weibo") return CorpusMeta{"weibo", 24 * hour, 0.5 * hour, 24 * hour};
  if (key == "twitter") return CorpusMeta{"twitter", 32 * day, 1 * day, 32 * day};
  if (key == "aps") return CorpusMeta{"aps", 20 * year, 3 * year, 20 * year};
  return std::nullopt;
}

void validate_record(const CascadeRecord& record) {
  std::unordered_set<UserId> children;
  double previous = 0.0;
  for (const auto& e : record.edges) {
    if (!(e.time >= 0.0)) {
      throw ValidationError(detail::concat("cascade ", record.id, ": negative time for user ", e.child));
    }
    if (e.parent == e.child) {
      throw ValidationError(detail::concat("cascade ", record.id, ": user ", e.child, " is its own parent"));
    }
    if (e.child == record.root) {
      throw ValidationError(detail::concat("cascade ", record.id, ": root user ", e.child, " appears as a child"));
    }
    if (!children.insert(e.child).second) {
      throw ValidationError(detail::concat("cascade ", record.id, ": duplicate child user ", e.child));
    }
    if (e.time < previous) {
      throw ValidationError(detail::concat("cascade ", record.id, ": edges not sorted by time at user ", e.child));
    }
    previous = e.time;
  }
  if (record.final_popularity && *record.final_popularity < 1) {
    throw ValidationError(detail::concat("cascade ", record.id, ": final popularity must be >= 1"));
  }
}

std::vector<CascadeRecord> parse_cascade_file(std::istream& in) {
  std::vector<CascadeRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    records.push_back(parse_line(line, line_no));
  }
  return records;
}

void write_cascade_file(std::ostream& out, const std::vector<CascadeRecord>& records) {
  for (const auto& rec : records) {
    out << rec.id << '\t' << rec.root << '\t' << rec.publish_time << '\t';
    if (rec.final_popularity) {
      out << *rec.final_popularity;
    } else {
      out << '-';
    }
    out << '\t' << rec.root << ":0";
    std::unordered_map<UserId, UserId> parent_of;
    for (const auto& e : rec.edges) parent_of.emplace(e.child, e.parent);
    std::vector<UserId> chain;
    for (const auto& e : rec.edges) {
      chain.clear();
      chain.push_back(e.child);
      UserId cursor = e.parent;
      chain.push_back(cursor);
      // Walk up to the root; a broken chain degrades to parent/child.
      while (cursor != rec.root && chain.size() <= rec.edges.size() + 1) {
        const auto it = parent_of.find(cursor);
        if (it == parent_of.end()) break;
        cursor = it->second;
        chain.push_back(cursor);
      }
      out << ',';
      for (auto it = chain.rbegin(); it != chain.rend(); ++it) {
        if (it != chain.rbegin()) out << '/';
        out << *it;
      }
      out << ':' << format_time(e.time);
    }
    out << '\n';
  }
}

CascadeGraph build_cascade_graph(const CascadeRecord& record, double t_obs) {
  if (!(t_obs > 0.0)) throw ConfigError("observation time must be positive");
  CascadeGraph g;
  g.observation_time = t_obs;
  g.users.push_back({record.root, 0.0});
  for (const auto& e : record.edges) {
    if (e.time > t_obs) break;
    g.users.push_back({e.child, e.time});
    g.edges.push_back(e);
  }
  return g;
}

GlobalGraph build_global_graph(std::istream& in, IdMap& ids) {
  std::vector<std::pair<std::int64_t, std::int64_t>> edges;
  std::int64_t max_id = -1;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto text = trim(line);
    if (text.empty()) continue;
    std::vector<std::string_view> tokens;
    for (const auto t : split(text, " \t")) {
      if (!t.empty()) tokens.push_back(t);
    }
    if (tokens.size() != 2) throw ParseError("expected two user ids per edge line", line_no);
    const auto u = parse_number<UserId>(tokens[0]);
    const auto v = parse_number<UserId>(tokens[1]);
    if (!u || !v) throw ParseError("edge endpoint is not an integer", line_no);
    const auto du = ids.intern(*u);
    const auto dv = ids.intern(*v);
    max_id = std::max({max_id, du, dv});
    edges.emplace_back(du, dv);
  }
  return GlobalGraph::from_edges(max_id + 1, edges);
}

void write_global_graph(std::ostream& out, const GlobalGraph& graph, const IdMap& ids) {
  for (std::int64_t u = 0; u < graph.node_count; ++u) {
    for (auto k = graph.offsets[static_cast<std::size_t>(u)]; k < graph.offsets[static_cast<std::size_t>(u) + 1]; ++k) {
      const auto v = graph.neighbors[static_cast<std::size_t>(k)];
      if (u < v) out << ids.original(u) << '\t' << ids.original(v) << '\n';
    }
  }
}

void remap_users(std::vector<CascadeRecord>& records, IdMap& ids) {
  for (auto& rec : records) {
    rec.root = ids.intern(rec.root);
    for (auto& e : rec.edges) {
      e.parent = ids.intern(e.parent);
      e.child = ids.intern(e.child);
    }
  }
}

void write_corpus(const std::filesystem::path& dir, const Corpus& corpus) {
  std::filesystem::create_directories(dir);
  // Records hold dense ids; files carry the original ids.
  std::vector<CascadeRecord> original = corpus.records;
  for (auto& rec : original) {
    rec.root = corpus.ids.original(rec.root);
    for (auto& e : rec.edges) {
      e.parent = corpus.ids.original(e.parent);
      e.child = corpus.ids.original(e.child);
    }
  }
  {
    std::ofstream out(dir / "cascades.txt", std::ios::binary);
    write_cascade_file(out, original);
  }
  {
    std::ofstream out(dir / "global.txt", std::ios::binary);
    write_global_graph(out, corpus.graph, corpus.ids);
  }
  {
    std::ofstream out(dir / "idmap.csv", std::ios::binary);
    corpus.ids.write_csv(out);
  }
  nlohmann::json meta = {{"name", corpus.meta.name},
                         {"total_duration", corpus.meta.total_duration},
                         {"observation_time", corpus.meta.observation_time},
                         {"prediction_time", corpus.meta.prediction_time},
                         {"cascades", corpus.records.size()}};
  std::ofstream out(dir / "meta.json", std::ios::binary);
  out << meta.dump(2) << '\n';
}

Corpus load_corpus(const std::filesystem::path& dir) {
  Corpus corpus;
  const auto idmap_path = dir / "idmap.csv";
  if (std::filesystem::exists(idmap_path)) {
    std::ifstream in(idmap_path);
    corpus.ids = IdMap::read_csv(in);
  }
  const auto global_path = dir / "global.txt";
  if (std::filesystem::exists(global_path)) {
    std::ifstream in(global_path);
    corpus.graph = build_global_graph(in, corpus.ids);
  }
  std::ifstream cascades(dir / "cascades.txt");
  if (!cascades) throw ParseError("missing " + (dir / "cascades.txt").string());
  corpus.records = parse_cascade_file(cascades);
  remap_users(corpus.records, corpus.ids);

  const auto meta_path = dir / "meta.json";
  if (std::filesystem::exists(meta_path)) {
    std::ifstream in(meta_path);
    const auto meta = nlohmann::json::parse(in);
    corpus.meta.name = meta.value("name", std::string("unknown"));
    if (const auto known = known_dataset_meta(corpus.meta.name)) corpus.meta = *known;
    corpus.meta.total_duration = meta.value("total_duration", corpus.meta.total_duration);
    corpus.meta.observation_time = meta.value("observation_time", corpus.meta.observation_time);
    corpus.meta.prediction_time = meta.value("prediction_time", corpus.meta.prediction_time);
  } else if (const auto known = known_dataset_meta(dir.filename().string())) {
    corpus.meta = *known;
  }
  return corpus;
}

CorpusSplit split_corpus(std::size_t count, const SplitRatios& ratios, std::uint64_t seed) {
  for (const double r : {ratios.train, ratios.val, ratios.test}) {
    if (!(r >= 0.0 && r <= 1.0)) throw ConfigError("split ratios must lie in [0, 1]");
  }
  if (std::abs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9) {
    throw ConfigError("split ratios must sum to 1");
  }
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  const auto floor_share = [count](double r) {
    return static_cast<std::size_t>(std::floor(r * static_cast<double>(count) + 1e-9));
  };
  const std::size_t n_val = floor_share(ratios.val);
  const std::size_t n_test = floor_share(ratios.test);
  const std::size_t n_train = count - n_val - n_test;

  CorpusSplit split;
  split.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  split.val.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
                   order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  split.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), order.end());
  return split;
}

}  // namespace autocas
