#pragma once

// Run configuration and end-to-end orchestration: few-shot sampling,
// predictor and tagger training, persistence, tagging, manifests and grid
// search.

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "demoner/adversarial.hpp"
#include "demoner/corpus.hpp"
#include "demoner/encoding.hpp"
#include "demoner/eval.hpp"
#include "demoner/featsim.hpp"
#include "demoner/inference.hpp"
#include "demoner/tagger.hpp"

namespace demoner {

inline constexpr const char* kCacheEnv = "DEMONER_CACHE";

struct RunConfig {
  std::string train_path;
  std::string validation_path;
  std::string test_path;
  std::string model_dir = "model";
  std::string cache_path;  // empty: no persistent cache

  std::size_t k_shot = 5;
  double gamma = 0.5;
  Normalization normalization = Normalization::kMinMax;
  double alpha = 0.9;
  double beta = 0.4;
  PermutationKind permutation = PermutationKind::kUniform;
  std::size_t ensemble_k = 5;
  VoteGranularity granularity = VoteGranularity::kToken;
  bool use_demonstrations = true;

  std::size_t epochs = 60;
  double learning_rate = 0.1;
  std::size_t patience = 0;
  double transition_smoothing = 0.01;
  TaggerConfig tagger;

  std::size_t featsim_epochs = 300;
  double featsim_learning_rate = 2.0;
  std::size_t featsim_buckets = 2048;

  // "hashed" or an http:// URL of an embedding service.
  std::string encoder = "hashed";
  std::size_t encoder_dim = 256;

  std::uint64_t split_seed = 1;
  std::uint64_t featsim_seed = 2;
  std::uint64_t train_seed = 3;
  std::uint64_t ensemble_seed = 4;

  void set_seed(std::uint64_t seed);
  bool adl_enabled() const { return use_demonstrations && alpha < 1.0; }

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

void validate(const RunConfig& config);
nlohmann::json to_json(const RunConfig& config);
// Missing keys keep their defaults; unknown keys are rejected.
RunConfig run_config_from_json(const nlohmann::json& j);

// The encoder named by the config, behind the persistent cache when one is
// configured ($DEMONER_CACHE wins over the config) and an in-process memo.
std::shared_ptr<const SemanticEncoder> make_encoder(const RunConfig& config);
std::string effective_cache_path(const RunConfig& config);

PoolScorer make_pool_scorer(std::shared_ptr<const DualScorer> scorer);

struct Pipeline {
  RunConfig config;
  std::shared_ptr<const SemanticEncoder> encoder;
  std::shared_ptr<const FeatureSimilarityModel> featsim;
  DemoPool pool;
  TrainedTagger tagger;
  FewShotSplit split;  // not persisted

  PoolScorer scorer() const;
  std::vector<Prediction> tag(const std::vector<Instance>& inputs) const;
};

// validation: separate validation corpus, or null to draw it from `train`.
Pipeline train_pipeline(const RunConfig& config, const Corpus& train,
                        const Corpus* validation = nullptr);

// Model directory layout: config.json, featsim.json, tagger.json, pool.conll.
void save_pipeline(const Pipeline& pipeline, const std::filesystem::path& dir);
// Cache settings come from `runtime` when given (paths are not part of a
// trained model); everything else from the saved config.
Pipeline load_pipeline(const std::filesystem::path& dir, const RunConfig* runtime = nullptr);

Corpus read_corpus(const std::filesystem::path& path,
                   ParseOptions options = {});
void write_text_file(const std::filesystem::path& path, const std::string& text);

std::string render_predictions_conll(const std::vector<Prediction>& predictions);
std::string render_predictions_jsonl(const std::vector<Prediction>& predictions);
// JSON lines as written above, or two-column CoNLL (token, tag).
std::vector<Prediction> parse_predictions(const std::string& text);

nlohmann::json summarize(const Corpus& corpus);

// SHA-256 over "blob <size>\0" + contents, as git hashes blobs.
std::string content_hash(const std::filesystem::path& path);

nlohmann::json make_manifest(const std::string& command, const RunConfig& config,
                             const std::vector<std::filesystem::path>& inputs,
                             const std::vector<std::filesystem::path>& outputs);

struct GridSpec {
  std::vector<double> gammas = {0.5};
  std::vector<double> alphas = {0.9};
  std::vector<double> betas = {0.4};
  // Adds permuted-rule accuracy on the validation set to the objective.
  bool permuted_rule = false;
};

struct GridPoint {
  double gamma = 0.0, alpha = 0.0, beta = 0.0;
  double f1 = 0.0;
  std::optional<double> permuted_accuracy;
  double objective = 0.0;  // f1, or the mean of f1 and permuted accuracy
};

struct GridResult {
  std::vector<GridPoint> points;  // gamma-major grid order
  std::size_t best = 0;           // first maximum in grid order
};

GridResult grid_search(const RunConfig& base, const Corpus& train, const Corpus* validation,
                       const GridSpec& grid);
nlohmann::json to_json(const GridResult& result);
std::string to_table(const GridResult& result);

struct FeatsimEvaluation {
  PredictorReport featsim;
  PredictorReport semantic;  // hashed-semantic baseline
  FeatureSimilarityModel model;
};

// Trains the predictor on the k-shot split of `train` and evaluates it with
// `test` as the queries and the k-shot set as the pool.
FeatsimEvaluation evaluate_featsim(const RunConfig& config, const Corpus& train,
                                   const Corpus& test, std::size_t trials, std::uint64_t seed);

}  // namespace demoner
