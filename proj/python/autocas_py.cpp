#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "autocas/adapter.hpp"
#include "autocas/config.hpp"
#include "autocas/pipeline.hpp"

namespace py = pybind11;
using namespace autocas;

namespace {

py::object to_python(const nlohmann::json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

py::dict eval_dict(const EvalResult& r) {
  py::dict d;
  d["msle"] = r.msle;
  d["mape"] = r.mape;
  d["predicted_log"] = r.predicted_log;
  return d;
}

}  // namespace

PYBIND11_MODULE(_autocas, m) {
  m.doc() = "Cascade popularity prediction core";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);

  m.def("log_popularity", &log_popularity, py::arg("count"));
  m.def("msle", &msle, py::arg("predicted_log"), py::arg("truth_counts"));
  m.def("mape", &mape, py::arg("predicted_log"), py::arg("truth_counts"));
  m.def("patch_boundaries", &patch_boundaries, py::arg("t_obs"), py::arg("num_patches"));
  m.def("cross_partition_boundaries", &cross_partition_boundaries, py::arg("t_obs_train"), py::arg("num_patches"),
        py::arg("t_obs_new"));
  m.def("variant_names", &variant_names);

  py::class_<PipelineConfig>(m, "Config")
      .def_readwrite("dataset", &PipelineConfig::dataset)
      .def_readwrite("observation_time", &PipelineConfig::observation_time)
      .def_property_readonly("num_patches", [](const PipelineConfig& c) { return c.tokenizer.num_patches; })
      .def_property_readonly("max_length", [](const PipelineConfig& c) { return c.tokenizer.max_length; })
      .def_property_readonly("token_dim", [](const PipelineConfig& c) { return c.token_dim(); })
      .def("validate", &PipelineConfig::validate)
      .def("to_ini", [](const PipelineConfig& c) {
        std::ostringstream out;
        write_config(out, c);
        return out.str();
      });

  m.def("load_config", &load_config, py::arg("path"), py::arg("overrides") = std::vector<std::string>{});
  m.def(
      "parse_config",
      [](const std::string& text, const std::vector<std::string>& overrides) {
        std::istringstream in(text);
        return parse_config(in, overrides);
      },
      py::arg("text"), py::arg("overrides") = std::vector<std::string>{});

  py::class_<Corpus>(m, "Corpus")
      .def("__len__", [](const Corpus& c) { return c.records.size(); })
      .def_property_readonly("ids", [](const Corpus& c) {
        std::vector<std::string> out;
        for (const auto& r : c.records) out.push_back(r.id);
        return out;
      })
      .def_property_readonly("final_popularity", [](const Corpus& c) {
        std::vector<std::optional<std::int64_t>> out;
        for (const auto& r : c.records) out.push_back(r.final_popularity);
        return out;
      })
      .def_property_readonly("num_users", [](const Corpus& c) { return c.graph.node_count; });

  m.def("load_corpus", &load_corpus, py::arg("path"));
  m.def(
      "generate_corpus", [](const PipelineConfig& cfg) { return generate_synthetic_corpus(cfg.synthetic).corpus; },
      py::arg("config"));

  py::class_<Experiment>(m, "Experiment")
      .def(py::init<PipelineConfig, Corpus>(), py::arg("config"), py::arg("corpus"))
      .def(
          "run_variant",
          [](Experiment& e, const std::string& variant, double t_obs) {
            const auto run = e.run_variant(parse_variant(variant), t_obs);
            return to_python(run.report.to_json());
          },
          py::arg("variant"), py::arg("t_obs"))
      .def(
          "run_baseline",
          [](Experiment& e, const std::string& kind, double t_obs) {
            return eval_dict(e.run_baseline(parse_baseline(kind), t_obs));
          },
          py::arg("kind"), py::arg("t_obs"))
      .def(
          "cross_partition",
          [](Experiment& e, const std::string& variant, double t_obs_train, double t_obs_new) {
            auto run = e.run_variant(parse_variant(variant), t_obs_train);
            py::dict d;
            d["trained"] = to_python(run.report.to_json());
            d["applied"] = eval_dict(e.cross_partition(*run.model, t_obs_train, t_obs_new));
            return d;
          },
          py::arg("variant"), py::arg("t_obs_train"), py::arg("t_obs_new"));
}
