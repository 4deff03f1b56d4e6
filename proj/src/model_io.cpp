#include "demoner/model_io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "demoner/error.hpp"

namespace demoner {

using nlohmann::json;

namespace {

template <typename T>
T field(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) {
    throw DataError(std::string("model JSON is missing '") + key + "'");
  }
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw DataError(std::string("model JSON field '") + key + "': " + e.what());
  }
}

void check_kind(const json& j, const char* kind) {
  if (field<std::string>(j, "kind") != kind) {
    throw DataError(std::string("expected a ") + kind + " model");
  }
  if (field<int>(j, "format_version") != kModelFormatVersion) {
    throw DataError("unsupported model format version");
  }
}

}  // namespace

json to_json(const FeatureSimilarityModel& m) {
  std::vector<std::string> names = base_signal_names();
  for (std::size_t i = 0; i < m.hash_buckets; ++i) names.push_back("pair_bucket_" + std::to_string(i));
  return {{"kind", "featsim"},
          {"format_version", kModelFormatVersion},
          {"dim", m.weights.size()},
          {"weights", m.weights},
          {"bias", m.bias},
          {"feature_names", names},
          {"seed", m.seed},
          {"hash_buckets", m.hash_buckets},
          {"metadata",
           {{"epochs", m.epochs}, {"learning_rate", m.learning_rate}, {"loss_curve", m.loss_curve}}}};
}

FeatureSimilarityModel featsim_from_json(const json& j) {
  check_kind(j, "featsim");
  FeatureSimilarityModel m;
  m.weights = field<std::vector<double>>(j, "weights");
  m.bias = field<double>(j, "bias");
  m.seed = field<std::uint64_t>(j, "seed");
  m.hash_buckets = field<std::size_t>(j, "hash_buckets");
  if (field<std::size_t>(j, "dim") != m.weights.size() ||
      m.weights.size() != PairFeatures::kBaseSignals + m.hash_buckets) {
    throw DataError("featsim model dimension does not match its weights");
  }
  if (j.contains("metadata")) {
    const auto& meta = j.at("metadata");
    m.epochs = field<std::size_t>(meta, "epochs");
    m.learning_rate = field<double>(meta, "learning_rate");
    m.loss_curve = field<std::vector<double>>(meta, "loss_curve");
  }
  return m;
}

json to_json(const TaggerConfig& c) {
  return {{"hash_buckets", c.hash_buckets},
          {"copy_scale", c.copy_scale},
          {"copy_embedding_dim", c.copy_embedding_dim},
          {"max_window", c.max_window}};
}

TaggerConfig tagger_config_from_json(const json& j) {
  TaggerConfig c;
  c.hash_buckets = field<std::size_t>(j, "hash_buckets");
  c.copy_scale = field<double>(j, "copy_scale");
  c.copy_embedding_dim = field<std::size_t>(j, "copy_embedding_dim");
  c.max_window = field<std::size_t>(j, "max_window");
  return c;
}

json to_json(const TransitionMatrix& tm) {
  // -inf (forbidden moves) has no JSON literal; null stands for it.
  json cells = json::array();
  for (double v : tm.log_probs) {
    if (std::isinf(v) && v < 0) {
      cells.push_back(nullptr);
    } else {
      cells.push_back(v);
    }
  }
  return {{"labels", tm.labels}, {"log_probs", cells}};
}

TransitionMatrix transitions_from_json(const json& j) {
  TransitionMatrix tm;
  tm.labels = field<std::vector<std::string>>(j, "labels");
  const auto& cells = j.at("log_probs");
  if (!cells.is_array() || cells.size() != tm.states() * tm.states()) {
    throw DataError("transition matrix has the wrong number of cells");
  }
  for (const auto& c : cells) tm.log_probs.push_back(c.is_null() ? kNegInf : c.get<double>());
  return tm;
}

json to_json(const TrainedTagger& t) {
  const auto& w = t.model.weights();
  json nonzero = json::array();
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (w[i] != 0.0) nonzero.push_back({i, w[i]});
  }
  return {{"kind", "tagger"},
          {"format_version", kModelFormatVersion},
          {"feature_dim", t.model.feature_dim()},
          {"labels", t.model.vocab().labels()},
          {"features", t.model.vocab().features()},
          {"config", to_json(t.model.config())},
          {"weights", nonzero},
          {"transitions", to_json(t.transitions)},
          {"report",
           {{"epoch_loss", t.report.epoch_loss},
            {"validation_f1", t.report.validation_f1},
            {"best_epoch", t.report.best_epoch},
            {"epochs_run", t.report.epochs_run}}}};
}

TrainedTagger tagger_from_json(const json& j) {
  check_kind(j, "tagger");
  const auto features = field<std::vector<std::string>>(j, "features");
  TrainedTagger t;
  t.model = ReferenceTagger(LabelVocab(FeatureSet(features.begin(), features.end())),
                            tagger_config_from_json(j.at("config")));
  if (t.model.vocab().labels() != field<std::vector<std::string>>(j, "labels") ||
      t.model.feature_dim() != field<std::size_t>(j, "feature_dim")) {
    throw DataError("tagger label vocabulary or dimension is inconsistent");
  }
  auto& w = t.model.weights();
  for (const auto& e : j.at("weights")) {
    const auto i = e.at(0).get<std::size_t>();
    if (i >= w.size()) throw DataError("tagger weight index out of range");
    w[i] = e.at(1).get<double>();
  }
  t.transitions = transitions_from_json(j.at("transitions"));
  if (t.transitions.labels != t.model.vocab().labels()) {
    throw DataError("transition labels do not match the tagger's label vocabulary");
  }
  if (j.contains("report")) {
    const auto& r = j.at("report");
    t.report.epoch_loss = field<std::vector<double>>(r, "epoch_loss");
    t.report.validation_f1 = field<std::vector<double>>(r, "validation_f1");
    t.report.best_epoch = field<std::size_t>(r, "best_epoch");
    t.report.epochs_run = field<std::size_t>(r, "epochs_run");
  }
  return t;
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const json& j) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(1) << '\n';
  if (!out) throw DataError("write failed for " + path.string());
}

void save_featsim(const std::filesystem::path& path, const FeatureSimilarityModel& model) {
  write_json_file(path, to_json(model));
}

FeatureSimilarityModel load_featsim(const std::filesystem::path& path) {
  return featsim_from_json(read_json_file(path));
}

void save_tagger(const std::filesystem::path& path, const TrainedTagger& tagger) {
  write_json_file(path, to_json(tagger));
}

TrainedTagger load_tagger(const std::filesystem::path& path) {
  try {
    return tagger_from_json(read_json_file(path));
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace demoner
