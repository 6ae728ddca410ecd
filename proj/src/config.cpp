#include "autocas/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace autocas {

namespace {

namespace pt = boost::property_tree;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& text) {
  const auto t = trim(text);
  double v = 0.0;
  const auto r = std::from_chars(t.data(), t.data() + t.size(), v);
  if (r.ec != std::errc{} || r.ptr != t.data() + t.size()) {
    throw ConfigError("config: " + key + " expects a number, got '" + text + "'");
  }
  return v;
}

long long to_int(const std::string& key, const std::string& text) {
  const auto t = trim(text);
  long long v = 0;
  const auto r = std::from_chars(t.data(), t.data() + t.size(), v);
  if (r.ec != std::errc{} || r.ptr != t.data() + t.size()) {
    throw ConfigError("config: " + key + " expects an integer, got '" + text + "'");
  }
  return v;
}

bool to_bool(const std::string& key, const std::string& text) {
  const auto t = trim(text);
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  throw ConfigError("config: " + key + " expects true/false, got '" + text + "'");
}

std::vector<double> to_list(const std::string& key, const std::string& text) {
  std::vector<double> out;
  std::stringstream s(text);
  std::string item;
  while (std::getline(s, item, ',')) {
    if (!trim(item).empty()) out.push_back(to_double(key, item));
  }
  if (out.empty()) throw ConfigError("config: " + key + " expects a comma-separated list");
  return out;
}

template <typename V>
std::string show(const V& v) {
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

std::string show_list(const std::vector<double>& v) {
  std::string out;
  for (const double x : v) out += (out.empty() ? "" : ", ") + show(x);
  return out;
}

struct Field {
  std::string section;
  std::string key;
  std::function<void(PipelineConfig&, const std::string&)> set;
  std::function<std::string(const PipelineConfig&)> get;
};

#define NUM_FIELD(sec, k, member)                                                                     \
  Field {                                                                                             \
    sec, k, [](PipelineConfig& c, const std::string& v) { c.member = static_cast<decltype(c.member)>( \
                                                             to_double(sec "." k, v)); },             \
        [](const PipelineConfig& c) { return show(c.member); }                                        \
  }
#define INT_FIELD(sec, k, member)                                                                     \
  Field {                                                                                             \
    sec, k, [](PipelineConfig& c, const std::string& v) { c.member = static_cast<decltype(c.member)>( \
                                                             to_int(sec "." k, v)); },                \
        [](const PipelineConfig& c) { return show(c.member); }                                        \
  }
#define BOOL_FIELD(sec, k, member)                                                                   \
  Field {                                                                                            \
    sec, k, [](PipelineConfig& c, const std::string& v) { c.member = to_bool(sec "." k, v); },       \
        [](const PipelineConfig& c) { return std::string(c.member ? "true" : "false"); }             \
  }
#define STR_FIELD(sec, k, member)                                                                    \
  Field {                                                                                            \
    sec, k, [](PipelineConfig& c, const std::string& v) { c.member = trim(v); },                     \
        [](const PipelineConfig& c) { return c.member; }                                             \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table{
      STR_FIELD("data", "dataset", dataset),
      NUM_FIELD("data", "observation_time", observation_time),
      INT_FIELD("data", "split_seed", split_seed),
      NUM_FIELD("data", "train_ratio", split.train),
      NUM_FIELD("data", "val_ratio", split.val),
      NUM_FIELD("data", "test_ratio", split.test),

      INT_FIELD("synthetic", "num_cascades", synthetic.num_cascades),
      INT_FIELD("synthetic", "graph_size", synthetic.graph_size),
      INT_FIELD("synthetic", "edges_per_node", synthetic.edges_per_node),
      INT_FIELD("synthetic", "communities", synthetic.communities),
      NUM_FIELD("synthetic", "mixing", synthetic.mixing),
      NUM_FIELD("synthetic", "branching", synthetic.branching),
      NUM_FIELD("synthetic", "progeny_spread", synthetic.progeny_spread),
      NUM_FIELD("synthetic", "time_spread", synthetic.time_spread),
      NUM_FIELD("synthetic", "mean_wait", synthetic.mean_wait),
      NUM_FIELD("synthetic", "time_horizon", synthetic.time_horizon),
      INT_FIELD("synthetic", "seed", synthetic.seed),

      INT_FIELD("tokenizer", "num_patches", tokenizer.num_patches),
      INT_FIELD("tokenizer", "max_length", tokenizer.max_length),

      Field{"local", "scales", [](PipelineConfig& c, const std::string& v) { c.local.scales = to_list("local.scales", v); },
            [](const PipelineConfig& c) { return show_list(c.local.scales); }},
      Field{"local", "sample_points",
            [](PipelineConfig& c, const std::string& v) { c.local.sample_points = to_list("local.sample_points", v); },
            [](const PipelineConfig& c) { return show_list(c.local.sample_points); }},
      INT_FIELD("local", "cheb_order", local.cheb_order),

      INT_FIELD("global", "dim", global.dim),
      INT_FIELD("global", "oversampling", global.oversampling),
      INT_FIELD("global", "power_iterations", global.power_iterations),
      INT_FIELD("global", "propagation_order", global.propagation_order),
      NUM_FIELD("global", "mu", global.mu),
      NUM_FIELD("global", "theta", global.theta),
      INT_FIELD("global", "seed", global.seed),
      NUM_FIELD("global", "target_rms", global_rms),

      INT_FIELD("backbone", "model_dim", backbone.model_dim),
      INT_FIELD("backbone", "layers", backbone.layers),
      INT_FIELD("backbone", "heads", backbone.heads),
      INT_FIELD("backbone", "ffn_mult", backbone.ffn_mult),
      INT_FIELD("backbone", "max_context", backbone.max_context),
      INT_FIELD("backbone", "seed", backbone.seed),
      BOOL_FIELD("backbone", "pretrain", pretrain),
      INT_FIELD("backbone", "pretrain_steps", pretrain_cfg.steps),
      INT_FIELD("backbone", "pretrain_batch", pretrain_cfg.batch),
      NUM_FIELD("backbone", "pretrain_lr", pretrain_cfg.learning_rate),
      INT_FIELD("backbone", "pretrain_seed", pretrain_cfg.seed),

      INT_FIELD("model", "hidden", model.hidden),
      INT_FIELD("model", "head_hidden", model.head_hidden),
      INT_FIELD("model", "seed", model.seed),
      INT_FIELD("model", "prompt_vocab", prompt_vocab),
      INT_FIELD("model", "prompt_seed", prompt_seed),
      STR_FIELD("model", "prompt_template", prompt_template),

      NUM_FIELD("train", "learning_rate", train.learning_rate),
      INT_FIELD("train", "batch_size", train.batch_size),
      INT_FIELD("train", "max_epochs", train.max_epochs),
      INT_FIELD("train", "patience", train.patience),
      NUM_FIELD("train", "lambda", train.token_loss_weight),
      INT_FIELD("train", "seed", train.seed),
      BOOL_FIELD("train", "staged", train.staged),
      INT_FIELD("train", "stage_one_epochs", train.stage_one_epochs),

      Field{"baseline", "mlp_hidden",
            [](PipelineConfig& c, const std::string& v) {
              c.mlp_baseline.hidden_options.clear();
              for (const double h : to_list("baseline.mlp_hidden", v)) c.mlp_baseline.hidden_options.push_back(int(h));
            },
            [](const PipelineConfig& c) {
              std::string out;
              for (const int h : c.mlp_baseline.hidden_options) out += (out.empty() ? "" : ", ") + std::to_string(h);
              return out;
            }},
      NUM_FIELD("baseline", "mlp_learning_rate", mlp_baseline.learning_rate),
      INT_FIELD("baseline", "mlp_max_epochs", mlp_baseline.max_epochs),
      INT_FIELD("baseline", "mlp_patience", mlp_baseline.patience),
      INT_FIELD("baseline", "mlp_seed", mlp_baseline.seed),
  };
  return table;
}

#undef NUM_FIELD
#undef INT_FIELD
#undef BOOL_FIELD
#undef STR_FIELD

const Field& find_field(const std::string& section, const std::string& key) {
  for (const auto& f : fields()) {
    if (f.section == section && f.key == key) return f;
  }
  throw ConfigError("config: unknown key '" + section + "." + key + "'");
}

void apply_override(PipelineConfig& cfg, const std::string& text) {
  const auto eq = text.find('=');
  const auto dot = text.find('.');
  if (eq == std::string::npos || dot == std::string::npos || dot > eq) {
    throw ConfigError("config: override '" + text + "' is not of the form section.key=value");
  }
  find_field(trim(text.substr(0, dot)), trim(text.substr(dot + 1, eq - dot - 1))).set(cfg, text.substr(eq + 1));
}

PipelineConfig finish(PipelineConfig cfg, const std::vector<std::string>& overrides) {
  for (const auto& o : overrides) apply_override(cfg, o);
  cfg.tokenizer.observation_time = cfg.observation_time;
  cfg.synthetic.observation_time = cfg.observation_time;
  cfg.synthetic.name = cfg.dataset;
  cfg.validate();
  return cfg;
}

}  // namespace

PipelineConfig parse_config(std::istream& in, const std::vector<std::string>& overrides) {
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  auto cfg = desk_defaults();
  for (const auto& [section, keys] : tree) {
    if (keys.empty() && !keys.data().empty()) {
      throw ConfigError("config: key '" + section + "' must be inside a section");
    }
    for (const auto& [key, value] : keys) find_field(section, key).set(cfg, value.data());
  }
  return finish(std::move(cfg), overrides);
}

PipelineConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path.string() + "'");
  return parse_config(in, overrides);
}

PipelineConfig config_from_overrides(const std::vector<std::string>& overrides) {
  return finish(desk_defaults(), overrides);
}

void write_config(std::ostream& out, const PipelineConfig& cfg) {
  std::string section;
  for (const auto& f : fields()) {
    if (f.section != section) {
      out << (section.empty() ? "" : "\n") << '[' << f.section << "]\n";
      section = f.section;
    }
    out << f.key << " = " << f.get(cfg) << '\n';
  }
}

}  // namespace autocas
