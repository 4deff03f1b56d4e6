// Python bindings. Structured values cross the boundary as JSON text and are
// decoded on the Python side.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <json.hpp>

#include "demoner/error.hpp"
#include "demoner/eval.hpp"
#include "demoner/model_io.hpp"
#include "demoner/pipeline.hpp"

namespace py = pybind11;
using namespace demoner;

namespace {

nlohmann::json instance_json(const Instance& in) {
  nlohmann::json j = {{"id", in.id}, {"tokens", in.tokens}};
  j["tags"] = in.tags ? nlohmann::json(*in.tags) : nlohmann::json(nullptr);
  return j;
}

std::vector<Instance> instances_from_json(const std::string& text) {
  std::vector<Instance> out;
  for (const auto& j : nlohmann::json::parse(text)) {
    auto id = j.at("id").get<std::string>();
    auto tokens = j.at("tokens").get<std::vector<std::string>>();
    if (j.contains("tags") && !j.at("tags").is_null()) {
      out.push_back(make_instance(std::move(id), std::move(tokens),
                                  j.at("tags").get<std::vector<std::string>>()));
    } else {
      out.push_back(make_unlabeled(std::move(id), std::move(tokens)));
    }
  }
  return out;
}

Corpus corpus_from_instances(std::vector<Instance> instances) {
  Corpus c;
  c.feature_set = collect_features(instances);
  c.instances = std::move(instances);
  return c;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<UsageError>(m, "UsageError", base.ptr());
  py::register_exception<DataError>(m, "DataError", base.ptr());
  py::register_exception<TrainingDivergence>(m, "TrainingDivergence", base.ptr());
  py::register_exception<ProviderError>(m, "ProviderError", base.ptr());

  py::class_<Corpus>(m, "Corpus")
      .def_static(
          "from_conll",
          [](const std::string& text, bool lenient, bool untagged) {
            ParseOptions o;
            o.mode = lenient ? TagMode::kLenient : TagMode::kStrict;
            o.allow_untagged = untagged;
            return parse_conll(text, o);
          },
          py::arg("text"), py::arg("lenient") = false, py::arg("untagged") = false)
      .def_static("_from_json",
                  [](const std::string& text) { return corpus_from_instances(instances_from_json(text)); })
      .def_static(
          "synthetic",
          [](const std::string& preset, std::size_t n, std::uint64_t seed) {
            return generate_synthetic_corpus(synthetic_preset(preset, n), seed);
          },
          py::arg("preset"), py::arg("instances"), py::arg("seed") = 1)
      .def("to_conll", [](const Corpus& c) { return render_conll(c); })
      .def("__len__", [](const Corpus& c) { return c.instances.size(); })
      .def_property_readonly("features",
                             [](const Corpus& c) {
                               return std::vector<std::string>(c.feature_set.begin(), c.feature_set.end());
                             })
      .def("_instances_json",
           [](const Corpus& c) {
             auto j = nlohmann::json::array();
             for (const auto& in : c.instances) j.push_back(instance_json(in));
             return j.dump();
           })
      .def("_summary_json", [](const Corpus& c) { return summarize(c).dump(); });

  py::class_<Pipeline>(m, "Pipeline")
      .def_static(
          "_train",
          [](const Corpus& train, const std::string& config_json) {
            const auto config = run_config_from_json(nlohmann::json::parse(config_json));
            validate(config);
            py::gil_scoped_release release;
            return train_pipeline(config, train);
          },
          py::arg("train"), py::arg("config_json"))
      .def_static("load", [](const std::string& dir) { return load_pipeline(dir); }, py::arg("model_dir"))
      .def("save", [](const Pipeline& p, const std::string& dir) { save_pipeline(p, dir); },
           py::arg("model_dir"))
      .def("_config_json", [](const Pipeline& p) { return to_json(p.config).dump(); })
      .def("_tag_jsonl",
           [](const Pipeline& p, const Corpus& c) {
             std::vector<Prediction> preds;
             {
               py::gil_scoped_release release;
               preds = p.tag(c.instances);
             }
             return render_predictions_jsonl(preds);
           })
      .def("_tag_conll", [](const Pipeline& p, const Corpus& c) {
        return render_predictions_conll(p.tag(c.instances));
      });

  m.def("feature_jaccard",
        [](const std::vector<std::string>& a, const std::vector<std::string>& b) {
          return feature_jaccard(make_instance("a", std::vector<std::string>(a.size(), "_"), a),
                                 make_instance("b", std::vector<std::string>(b.size(), "_"), b));
        },
        py::arg("tags_a"), py::arg("tags_b"));
  m.def("_entity_f1_json", [](const Corpus& gold, const std::string& predictions) {
    return to_json(entity_f1(gold.instances, parse_predictions(predictions)));
  });
  m.def("content_hash", [](const std::string& path) { return content_hash(path); }, py::arg("path"));
  m.def("_default_config_json", [] { return to_json(RunConfig{}).dump(); });
}
