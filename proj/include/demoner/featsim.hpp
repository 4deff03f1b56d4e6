#pragma once

// Feature-similarity predictor (S_fe) and the dual similarity combiner.

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "demoner/corpus.hpp"
#include "demoner/encoding.hpp"

namespace demoner {

// Pairwise signals between two texts. The first kBaseSignals entries are
// named; the rest is a hashed bag of unordered pairs of salient
// (capitalized or numeric) tokens, one from each side, and of their
// 3-character suffixes. Stored sparsely.
struct PairFeatures {
  static constexpr std::size_t kBaseSignals = 5;

  std::size_t dim = 0;
  std::vector<std::pair<std::uint32_t, double>> entries;  // sorted by index

  std::vector<double> dense() const;
  double at(std::size_t index) const;
};

const std::vector<std::string>& base_signal_names();

struct PairFeaturizer {
  std::size_t hash_buckets = 2048;

  std::size_t dim() const { return PairFeatures::kBaseSignals + hash_buckets; }
  PairFeatures operator()(std::string_view a, std::string_view b,
                          const SemanticEncoder& encoder) const;
};

PairFeatures featurize_pair(std::string_view a, std::string_view b,
                            const SemanticEncoder& encoder,
                            std::size_t hash_buckets = 2048);

struct FeatureSimilarityModel {
  std::vector<double> weights;
  double bias = 0.0;
  std::size_t hash_buckets = 2048;
  std::uint64_t seed = 0;
  std::size_t epochs = 0;
  double learning_rate = 0.0;
  std::vector<double> loss_curve;  // loss before each epoch's step, then final

  bool trained() const { return !weights.empty(); }
  double final_loss() const { return loss_curve.empty() ? 0.0 : loss_curve.back(); }
  std::size_t dim() const { return weights.size(); }
};

struct FeatsimTrainOptions {
  std::size_t epochs = 300;
  double learning_rate = 2.0;
  std::uint64_t seed = 0;
  std::size_t hash_buckets = 2048;
};

// Mean squared error of sigmoid(w.x + b) against targets, with gradients.
struct FeatsimObjective {
  double loss = 0.0;
  std::vector<double> grad_weights;
  double grad_bias = 0.0;
};

FeatsimObjective featsim_objective(const std::vector<PairFeatures>& inputs,
                                   const std::vector<double>& targets,
                                   const std::vector<double>& weights, double bias);

// Training pairs: all unordered pairs of the pool, target = feature Jaccard.
std::size_t featsim_pair_count(std::size_t pool_size);

FeatureSimilarityModel train_featsim(const std::vector<Instance>& pool,
                                     const SemanticEncoder& encoder,
                                     const FeatsimTrainOptions& options = {});

double predict_feature_similarity(const FeatureSimilarityModel& model,
                                  std::string_view a, std::string_view b,
                                  const SemanticEncoder& encoder);
double predict_feature_similarity(const FeatureSimilarityModel& model,
                                  const PairFeatures& features);

enum class Normalization { kNone, kMinMax };

struct DualSimilarityConfig {
  double gamma = 0.5;
  Normalization normalization = Normalization::kMinMax;
};

void validate(const DualSimilarityConfig& config);

// gamma * s_fe + (1 - gamma) * s_se
double dual_similarity(const DualSimilarityConfig& config, double s_fe, double s_se);

// Maps values onto [0, 1] by the series' min and max; a constant series
// maps to all zeros.
std::vector<double> min_max(std::vector<double> values);

// Pool-wide combination: normalization (if configured) is applied to each
// series over the whole pool before mixing.
std::vector<double> dual_similarity(const DualSimilarityConfig& config,
                                    std::vector<double> s_fe,
                                    std::vector<double> s_se);

// Scores an input text against a candidate pool with S = gamma S_fe +
// (1 - gamma) S_se. With no feature model only S_se is available, which
// requires gamma = 0.
class DualScorer {
 public:
  DualScorer(std::shared_ptr<const FeatureSimilarityModel> model,
             std::shared_ptr<const SemanticEncoder> encoder,
             DualSimilarityConfig config);

  std::vector<double> feature_scores(std::string_view input,
                                     const std::vector<std::string>& candidates) const;
  std::vector<double> semantic_scores(std::string_view input,
                                      const std::vector<std::string>& candidates) const;
  std::vector<double> scores(std::string_view input,
                             const std::vector<std::string>& candidates) const;

  const DualSimilarityConfig& config() const { return config_; }

 private:
  std::shared_ptr<const FeatureSimilarityModel> model_;
  std::shared_ptr<const SemanticEncoder> encoder_;
  DualSimilarityConfig config_;
};

}  // namespace demoner
