// Command-line front end: corpus generation, embedding and token caches,
// training, evaluation, cross-partition inference, ablations and reports.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "autocas/cache_io.hpp"
#include "autocas/config.hpp"
#include "autocas/pipeline.hpp"

namespace fs = std::filesystem;
using namespace autocas;

namespace {

struct Common {
  std::string config;
  std::vector<std::string> overrides;
  std::string workdir = "autocas_work";
  std::string corpus;
  double t_obs = 0.0;
};

void add_common(CLI::App* cmd, Common& c, bool with_t_obs = true) {
  cmd->add_option("-c,--config", c.config, "INI run configuration")->required();
  cmd->add_option("--set", c.overrides, "Override a config value, section.key=value (repeatable)");
  cmd->add_option("-w,--workdir", c.workdir, "Directory for caches, checkpoints and reports")->capture_default_str();
  cmd->add_option("--corpus", c.corpus, "Corpus directory (default: <workdir>/corpus)");
  if (with_t_obs) cmd->add_option("--t-obs", c.t_obs, "Observation time in seconds (default: data.observation_time)");
}

std::string time_tag(double t) {
  std::ostringstream s;
  s << std::setprecision(10) << t;
  return s.str();
}

class Workspace {
 public:
  explicit Workspace(const Common& c) : opts_(c), dir_(c.workdir) {
    cfg_ = load_config(c.config, c.overrides);
    fs::create_directories(dir_);
  }

  const PipelineConfig& config() const { return cfg_; }
  const fs::path& dir() const { return dir_; }
  double t_obs() const { return opts_.t_obs > 0.0 ? opts_.t_obs : cfg_.observation_time; }
  fs::path corpus_dir() const { return opts_.corpus.empty() ? dir_ / "corpus" : fs::path(opts_.corpus); }

  fs::path local_cache(double t) const { return dir_ / ("local_t" + time_tag(t) + ".emb"); }
  fs::path local_index(double t) const { return dir_ / ("local_t" + time_tag(t) + ".csv"); }
  fs::path global_cache() const { return dir_ / "global.emb"; }
  fs::path token_cache(const std::string& split, double t, bool zero_global, const char* ext) const {
    return dir_ / ("tokens_" + split + "_t" + time_tag(t) + (zero_global ? "_noglobal" : "") + ext);
  }
  fs::path backbone_path() const { return dir_ / "backbone.ckpt"; }
  fs::path runs_dir() const { return dir_ / "runs"; }
  fs::path metrics_csv() const { return dir_ / "metrics.csv"; }

  Experiment& experiment() {
    if (!experiment_) {
      const auto dir = corpus_dir();
      if (!fs::exists(dir / "cascades.txt")) {
        throw ConfigError("no corpus at " + dir.string() + "; run `autocas generate` or pass --corpus");
      }
      experiment_.emplace(cfg_, load_corpus(dir));
      preload_caches();
    }
    return *experiment_;
  }

  std::shared_ptr<Backbone<float>> backbone() {
    if (backbone_) return backbone_;
    if (fs::exists(backbone_path())) {
      backbone_ = std::make_shared<Backbone<float>>(cfg_.backbone);
      backbone_->load_state(read_checkpoint(backbone_path()));
      backbone_->lock();
    } else {
      PretrainReport report;
      backbone_ = build_backbone(cfg_, &report);
      if (cfg_.pretrain) {
        std::cerr << "pretrained backbone: loss " << report.initial_loss << " -> " << report.final_loss << " in "
                  << report.steps << " steps\n";
      }
      write_checkpoint(backbone_path(), backbone_->state());
    }
    return backbone_;
  }

  void append_metrics(const RunReport& r) const {
    const bool fresh = !fs::exists(metrics_csv());
    std::ofstream out(metrics_csv(), std::ios::app);
    if (fresh) out << RunReport::csv_header() << '\n';
    out << r.csv_row() << '\n';
  }

 private:
  void preload_caches() {
    auto& ex = *experiment_;
    if (fs::exists(global_cache())) ex.set_global_table(GlobalTable(read_embedding_cache(global_cache())));
    const double t = t_obs();
    if (fs::exists(local_cache(t)) && fs::exists(local_index(t))) ex.set_local_tables(t, read_local(t));
    for (const bool zero_global : {false, true}) {
      bool all = true;
      for (const char* split : {"train", "val", "test"}) {
        all = all && fs::exists(token_cache(split, t, zero_global, ".bin"));
      }
      if (!all) continue;
      auto read = [&](const char* split) {
        return read_token_cache(token_cache(split, t, zero_global, ".bin"), token_cache(split, t, zero_global, ".csv"));
      };
      ex.set_tokens(t, zero_global, {read("train"), read("val"), read("test")});
    }
  }

  std::vector<UserTable> read_local(double t) const {
    const auto rows = read_embedding_cache(local_cache(t));
    std::ifstream idx(local_index(t));
    std::string line;
    std::getline(idx, line);
    std::map<std::size_t, std::vector<std::pair<UserId, Eigen::Index>>> groups;
    while (std::getline(idx, line)) {
      std::istringstream f(line);
      std::string a, id, u, r;
      std::getline(f, a, ',');
      std::getline(f, id, ',');
      std::getline(f, u, ',');
      std::getline(f, r);
      groups[std::stoul(a)].emplace_back(std::stoll(u), std::stoll(r));
    }
    const auto& records = experiment_->corpus().records;
    std::vector<UserTable> tables;
    for (std::size_t i = 0; i < records.size(); ++i) {
      const auto& g = groups[i];
      std::vector<UserId> users;
      DenseMatrix block(static_cast<Eigen::Index>(g.size()), rows.cols());
      for (std::size_t k = 0; k < g.size(); ++k) {
        users.push_back(g[k].first);
        block.row(static_cast<Eigen::Index>(k)) = rows.row(g[k].second);
      }
      tables.emplace_back(std::move(users), std::move(block));
    }
    return tables;
  }

  Common opts_;
  fs::path dir_;
  PipelineConfig cfg_;
  std::optional<Experiment> experiment_;
  std::shared_ptr<Backbone<float>> backbone_;
};

void save_run(Workspace& ws, const Experiment::VariantRun& run) {
  const auto dir = ws.runs_dir() / run.report.run_id;
  fs::create_directories(dir);
  write_checkpoint(dir / "model.ckpt", run.model->state());
  std::ofstream(dir / "report.json") << run.report.to_json().dump(2) << '\n';
  std::ofstream cfg(dir / "config.ini");
  write_config(cfg, ws.config());
  ws.append_metrics(run.report);
}

RunReport load_report(const fs::path& run_dir) {
  std::ifstream in(run_dir / "report.json");
  if (!in) throw ConfigError("no report.json in " + run_dir.string());
  return RunReport::from_json(nlohmann::json::parse(in));
}

std::shared_ptr<AutoCasModel<float>> load_model(Workspace& ws, const fs::path& run_dir, RunReport& report) {
  report = load_report(run_dir);
  auto& ex = ws.experiment();
  ex.set_backbone(ws.backbone());
  auto model = std::make_shared<AutoCasModel<float>>(build_model(ws.config(), parse_variant(report.variant), ex.backbone()));
  model->load_state(read_checkpoint(run_dir / "model.ckpt"));
  return model;
}

void print_metrics(const std::string& label, const EvalResult& r) {
  std::cout << label << " msle=" << std::setprecision(6) << r.msle << " mape=" << r.mape << '\n';
}

RunReport baseline_report(const PipelineConfig& cfg, BaselineKind kind, double t_obs, const EvalResult& r,
                          double seconds) {
  RunReport report;
  report.variant = baseline_name(kind);
  report.dataset = cfg.dataset;
  report.t_obs = t_obs;
  report.run_id = cfg.dataset + "-" + report.variant + "-t" + time_tag(t_obs);
  report.test_msle = r.msle;
  report.test_mape = r.mape;
  report.wall_clock_s = seconds;
  return report;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cascade popularity prediction with a frozen sequence backbone"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);

  Common c;
  std::string variant = "full", run_dir, split = "test", cascade;
  std::vector<std::string> variants, runs;
  bool with_baselines = false, no_global = false;
  std::string report_prefix;

  auto* generate = app.add_subcommand("generate", "Generate a synthetic corpus into <workdir>/corpus");
  add_common(generate, c, false);
  auto* embed_local = app.add_subcommand("embed-local", "Compute per-cascade local embeddings");
  add_common(embed_local, c);
  auto* embed_global = app.add_subcommand("embed-global", "Compute global embeddings of the context graph");
  add_common(embed_global, c, false);
  auto* tokenize = app.add_subcommand("tokenize", "Build token caches for the train/val/test splits");
  add_common(tokenize, c);
  tokenize->add_flag("--no-global", no_global, "Zero the global part of every user embedding");
  auto* train_cmd = app.add_subcommand("train", "Train one model variant");
  add_common(train_cmd, c);
  train_cmd->add_option("--variant", variant, "Model variant")->capture_default_str();
  auto* eval = app.add_subcommand("eval", "Evaluate a trained run on one split");
  add_common(eval, c, false);
  eval->add_option("--run", run_dir, "Run directory under <workdir>/runs")->required();
  eval->add_option("--split", split, "train, val or test")->capture_default_str();
  auto* infer = app.add_subcommand("infer", "Apply a trained run to another observation window without retraining");
  add_common(infer, c);
  infer->add_option("--run", run_dir, "Run directory under <workdir>/runs")->required();
  infer->add_option("--cascade", cascade, "Predict a single cascade id instead of the test split");
  auto* ablate = app.add_subcommand("ablate", "Train and evaluate several variants");
  add_common(ablate, c);
  ablate->add_option("--variants", variants, "Variants to run (default: all)");
  ablate->add_flag("--baselines", with_baselines, "Also run the feature baselines");
  auto* report = app.add_subcommand("report", "Collect run reports into CSV and JSON");
  add_common(report, c, false);
  report->add_option("--runs", runs, "Run directories (default: all under <workdir>/runs)");
  report->add_option("--out", report_prefix, "Output prefix (default: <workdir>/report)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    Workspace ws(c);
    const auto& cfg = ws.config();

    if (generate->parsed()) {
      auto syn = cfg.synthetic;
      const auto corpus = generate_synthetic_corpus(syn).corpus;
      write_corpus(ws.corpus_dir(), corpus);
      std::cout << "wrote " << corpus.records.size() << " cascades to " << ws.corpus_dir() << '\n';
    } else if (embed_local->parsed()) {
      auto& ex = ws.experiment();
      const double t = ws.t_obs();
      const auto& tables = ex.local_tables(t);
      Eigen::Index total = 0;
      for (const auto& tb : tables) total += tb.rows().rows();
      DenseMatrix rows(total, cfg.local.dim());
      std::ofstream idx(ws.local_index(t));
      idx << "cascade_index,cascade_id,user_id,row\n";
      Eigen::Index r = 0;
      for (std::size_t i = 0; i < tables.size(); ++i) {
        for (std::size_t k = 0; k < tables[i].users().size(); ++k, ++r) {
          rows.row(r) = tables[i].rows().row(static_cast<Eigen::Index>(k));
          idx << i << ',' << ex.corpus().records[i].id << ',' << tables[i].users()[k] << ',' << r << '\n';
        }
      }
      write_embedding_cache(ws.local_cache(t), rows);
      std::cout << "wrote " << total << " local rows (d_l=" << rows.cols() << ") to " << ws.local_cache(t) << '\n';
    } else if (embed_global->parsed()) {
      const auto& table = ws.experiment().global_table();
      write_embedding_cache(ws.global_cache(), table.rows());
      std::vector<std::string> keys;
      for (Eigen::Index i = 0; i < table.size(); ++i) keys.push_back(std::to_string(ws.experiment().corpus().ids.original(i)));
      write_embedding_csv(ws.dir() / "global.csv", keys, table.rows());
      std::cout << "wrote " << table.size() << " global rows (d_g=" << table.dim() << ") to " << ws.global_cache() << '\n';
    } else if (tokenize->parsed()) {
      const double t = ws.t_obs();
      const bool zero_global = no_global;
      const auto& s = ws.experiment().tokens(t, zero_global);
      for (const auto& [name, data] : {std::pair{"train", &s.train}, {"val", &s.val}, {"test", &s.test}}) {
        write_token_cache(ws.token_cache(name, t, zero_global, ".bin"), ws.token_cache(name, t, zero_global, ".csv"),
                          *data);
      }
      std::cout << "tokens: N=" << s.train.seq_len << " S=" << s.train.token_dim() << " train/val/test="
                << s.train.size() << '/' << s.val.size() << '/' << s.test.size() << '\n';
    } else if (train_cmd->parsed()) {
      auto& ex = ws.experiment();
      ex.set_backbone(ws.backbone());
      const auto run = ex.run_variant(parse_variant(variant), ws.t_obs());
      save_run(ws, run);
      std::cout << run.report.run_id << ": epochs=" << run.report.epochs.size() << " best=" << run.report.best_epoch
                << " test_msle=" << run.report.test_msle << " test_mape=" << run.report.test_mape << '\n';
    } else if (eval->parsed()) {
      RunReport rep;
      const fs::path dir = fs::exists(run_dir) ? fs::path(run_dir) : ws.runs_dir() / run_dir;
      auto model = load_model(ws, dir, rep);
      const auto& s = ws.experiment().tokens(rep.t_obs, model->variant() == Variant::wo_global);
      const TokenDataset* data = split == "train" ? &s.train : split == "val" ? &s.val : split == "test" ? &s.test : nullptr;
      if (!data) throw ConfigError("--split must be train, val or test");
      print_metrics(rep.run_id + " " + split, evaluate(*model, *data));
    } else if (infer->parsed()) {
      RunReport rep;
      const fs::path dir = fs::exists(run_dir) ? fs::path(run_dir) : ws.runs_dir() / run_dir;
      auto model = load_model(ws, dir, rep);
      auto& ex = ws.experiment();
      const double t_new = ws.t_obs();
      if (!cascade.empty()) {
        const auto& records = ex.corpus().records;
        std::size_t at = records.size();
        for (std::size_t i = 0; i < records.size(); ++i) {
          if (records[i].id == cascade) at = i;
        }
        if (at == records.size()) throw ConfigError("unknown cascade id '" + cascade + "'");
        const auto bounds = cross_partition_boundaries(rep.t_obs, cfg.tokenizer.num_patches, t_new);
        const auto data = build_token_dataset(ex.corpus(), {at}, ex.local_tables(t_new), ex.global_table(), bounds,
                                              cfg.tokenizer.max_length, model->variant() == Variant::wo_global);
        const auto r = evaluate(*model, data);
        std::cout << cascade << ": tokens=" << bounds.size() << " predicted="
                  << popularity_from_log(r.predicted_log[0]) << " (log2 " << r.predicted_log[0]
                  << ") actual=" << data.popularity[0] << '\n';
      } else {
        const auto started = std::chrono::steady_clock::now();
        const auto r = ex.cross_partition(*model, rep.t_obs, t_new);
        print_metrics(rep.run_id + " applied at t_obs=" + time_tag(t_new), r);
        RunReport out = rep;
        out.epochs.clear();
        out.variant = rep.variant + "@t" + time_tag(rep.t_obs);
        out.t_obs = t_new;
        out.run_id = rep.run_id + "-cross-t" + time_tag(t_new);
        out.test_msle = r.msle;
        out.test_mape = r.mape;
        out.wall_clock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        ws.append_metrics(out);
      }
    } else if (ablate->parsed()) {
      auto& ex = ws.experiment();
      ex.set_backbone(ws.backbone());
      if (variants.empty()) variants = variant_names();
      const double t = ws.t_obs();
      for (const auto& v : variants) {
        const auto run = ex.run_variant(parse_variant(v), t);
        save_run(ws, run);
        std::cout << std::left << std::setw(12) << v << " test_msle=" << run.report.test_msle
                  << " test_mape=" << run.report.test_mape << " epochs=" << run.report.epochs.size() << '\n';
      }
      if (with_baselines) {
        for (const auto kind : {BaselineKind::linear, BaselineKind::mlp}) {
          const auto started = std::chrono::steady_clock::now();
          const auto r = ex.run_baseline(kind, t);
          const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
          ws.append_metrics(baseline_report(cfg, kind, t, r, secs));
          std::cout << std::left << std::setw(12) << baseline_name(kind) << " test_msle=" << r.msle
                    << " test_mape=" << r.mape << '\n';
        }
      }
    } else if (report->parsed()) {
      std::vector<fs::path> dirs(runs.begin(), runs.end());
      if (dirs.empty() && fs::exists(ws.runs_dir())) {
        for (const auto& e : fs::directory_iterator(ws.runs_dir())) {
          if (e.is_directory()) dirs.push_back(e.path());
        }
        std::sort(dirs.begin(), dirs.end());
      }
      if (dirs.empty()) throw ConfigError("no runs to report under " + ws.runs_dir().string());
      const fs::path prefix = report_prefix.empty() ? ws.dir() / "report" : fs::path(report_prefix);
      std::ofstream csv(prefix.string() + ".csv");
      csv << RunReport::csv_header() << '\n';
      nlohmann::json all = {{"schema_version", RunReport::kSchemaVersion}, {"runs", nlohmann::json::array()}};
      for (const auto& d : dirs) {
        const auto r = load_report(d);
        csv << r.csv_row() << '\n';
        all["runs"].push_back(r.to_json());
      }
      std::ofstream(prefix.string() + ".json") << all.dump(2) << '\n';
      std::cout << "wrote " << dirs.size() << " runs to " << prefix.string() << ".{csv,json}\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
