#include "demoner/featsim.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>

#include "demoner/error.hpp"
#include "demoner/rng.hpp"

namespace demoner {

namespace {

std::vector<std::string> words(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && text[i] == ' ') ++i;
    std::size_t j = i;
    while (j < text.size() && text[j] != ' ') ++j;
    if (j > i) out.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) {
    if (static_cast<unsigned char>(c) < 0x80) c = static_cast<char>(std::tolower(c));
  }
  return out;
}

bool has_digit(std::string_view s) {
  return std::any_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

bool salient(std::string_view s) {
  return (!s.empty() && s[0] >= 'A' && s[0] <= 'Z') || has_digit(s);
}

template <typename Set>
std::size_t intersection_size(const Set& a, const Set& b) {
  std::size_t n = 0;
  for (const auto& x : a) n += b.count(x);
  return n;
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double dot(const std::vector<double>& w, const PairFeatures& x) {
  double s = 0.0;
  for (const auto& [i, v] : x.entries) s += w[i] * v;
  return s;
}

}  // namespace

const std::vector<std::string>& base_signal_names() {
  static const std::vector<std::string> names = {
      "embedding_cosine", "token_jaccard", "length_ratio", "shared_capitalized",
      "shared_digit"};
  return names;
}

std::vector<double> PairFeatures::dense() const {
  std::vector<double> out(dim, 0.0);
  for (const auto& [i, v] : entries) out[i] = v;
  return out;
}

double PairFeatures::at(std::size_t index) const {
  auto it = std::lower_bound(entries.begin(), entries.end(), index,
                             [](const auto& e, std::size_t i) { return e.first < i; });
  return it != entries.end() && it->first == index ? it->second : 0.0;
}

PairFeatures PairFeaturizer::operator()(std::string_view a, std::string_view b,
                                        const SemanticEncoder& encoder) const {
  const auto wa = words(a);
  const auto wb = words(b);
  std::set<std::string> la, lb, ca, cb;
  bool shared_digit = false;
  for (const auto& w : wa) {
    la.insert(lower(w));
    if (salient(w)) ca.insert(lower(w));
  }
  for (const auto& w : wb) {
    lb.insert(lower(w));
    if (salient(w)) cb.insert(lower(w));
  }
  for (const auto& w : la) {
    if (has_digit(w) && lb.count(w)) shared_digit = true;
  }

  const std::size_t inter = intersection_size(la, lb);
  const std::size_t uni = la.size() + lb.size() - inter;
  const std::size_t shared_caps = intersection_size(ca, cb);
  const double len_a = static_cast<double>(wa.size());
  const double len_b = static_cast<double>(wb.size());

  PairFeatures out;
  out.dim = dim();
  out.entries = {
      {0, cosine(encoder.encode(a), encoder.encode(b))},
      {1, uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni)},
      {2, std::max(len_a, len_b) == 0.0 ? 0.0
                                        : std::min(len_a, len_b) / std::max(len_a, len_b)},
      {3, static_cast<double>(shared_caps) / (1.0 + static_cast<double>(shared_caps))},
      {4, shared_digit ? 1.0 : 0.0},
  };

  if (hash_buckets > 0 && !ca.empty() && !cb.empty()) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(ca.size() * cb.size()));
    std::vector<std::pair<std::uint32_t, double>> hashed;
    auto add = [&](std::string_view tag, std::string_view u, std::string_view v) {
      const auto lo = std::min(u, v);
      const auto hi = std::max(u, v);
      const auto h = fnv1a(hi, fnv1a("\x1f", fnv1a(lo, fnv1a(tag))));
      hashed.emplace_back(
          static_cast<std::uint32_t>(PairFeatures::kBaseSignals + h % hash_buckets), scale);
    };
    auto suffix = [](const std::string& w) {
      return std::string_view(w).substr(w.size() > 3 ? w.size() - 3 : 0);
    };
    // Word pairs, and pairs of their 3-character suffixes so affinities
    // carry over to unseen words of the same morphological class.
    for (const auto& u : ca) {
      for (const auto& v : cb) {
        add("w", u, v);
        add("s", suffix(u), suffix(v));
      }
    }
    std::sort(hashed.begin(), hashed.end(),
              [](const auto& x, const auto& y) { return x.first < y.first; });
    for (const auto& [i, v] : hashed) {
      if (out.entries.back().first == i) {
        out.entries.back().second += v;
      } else {
        out.entries.emplace_back(i, v);
      }
    }
  }
  return out;
}

PairFeatures featurize_pair(std::string_view a, std::string_view b,
                            const SemanticEncoder& encoder, std::size_t hash_buckets) {
  return PairFeaturizer{hash_buckets}(a, b, encoder);
}

FeatsimObjective featsim_objective(const std::vector<PairFeatures>& inputs,
                                   const std::vector<double>& targets,
                                   const std::vector<double>& weights, double bias) {
  if (inputs.size() != targets.size() || inputs.empty()) {
    throw DataError("featsim objective needs matching, non-empty inputs and targets");
  }
  FeatsimObjective obj;
  obj.grad_weights.assign(weights.size(), 0.0);
  const double inv_n = 1.0 / static_cast<double>(inputs.size());
  for (std::size_t n = 0; n < inputs.size(); ++n) {
    const double p = sigmoid(dot(weights, inputs[n]) + bias);
    const double r = p - targets[n];
    obj.loss += r * r * inv_n;
    const double g = 2.0 * r * p * (1.0 - p) * inv_n;
    for (const auto& [i, v] : inputs[n].entries) obj.grad_weights[i] += g * v;
    obj.grad_bias += g;
  }
  return obj;
}

std::size_t featsim_pair_count(std::size_t pool_size) {
  return pool_size < 2 ? 0 : pool_size * (pool_size - 1) / 2;
}

FeatureSimilarityModel train_featsim(const std::vector<Instance>& pool,
                                     const SemanticEncoder& encoder,
                                     const FeatsimTrainOptions& options) {
  if (pool.size() < 2) throw DataError("feature-similarity training needs >= 2 instances");
  if (options.epochs == 0) throw UsageError("epochs must be positive");
  if (!(options.learning_rate > 0.0)) throw UsageError("learning rate must be positive");

  const PairFeaturizer featurize{options.hash_buckets};
  std::vector<std::string> texts;
  std::vector<FeatureSet> sets;
  for (const auto& inst : pool) {
    if (!inst.labeled()) throw DataError("feature-similarity pool must be labeled");
    texts.push_back(inst.text());
    sets.push_back(feature_set_of(inst));
  }

  std::vector<PairFeatures> inputs;
  std::vector<double> targets;
  inputs.reserve(featsim_pair_count(pool.size()));
  for (std::size_t i = 0; i < pool.size(); ++i) {
    for (std::size_t j = i + 1; j < pool.size(); ++j) {
      inputs.push_back(featurize(texts[i], texts[j], encoder));
      targets.push_back(feature_jaccard(sets[i], sets[j]));
    }
  }

  FeatureSimilarityModel model;
  model.hash_buckets = options.hash_buckets;
  model.seed = options.seed;
  model.epochs = options.epochs;
  model.learning_rate = options.learning_rate;
  model.weights.resize(featurize.dim());
  Rng rng(options.seed);
  for (auto& w : model.weights) w = (rng.uniform_real() - 0.5) * 0.02;

  for (std::size_t epoch = 0; epoch <= options.epochs; ++epoch) {
    auto obj = featsim_objective(inputs, targets, model.weights, model.bias);
    if (!std::isfinite(obj.loss)) {
      throw TrainingDivergence("feature-similarity loss became non-finite at epoch " +
                               std::to_string(epoch));
    }
    model.loss_curve.push_back(obj.loss);
    if (epoch == options.epochs) break;
    for (std::size_t i = 0; i < model.weights.size(); ++i) {
      model.weights[i] -= options.learning_rate * obj.grad_weights[i];
    }
    model.bias -= options.learning_rate * obj.grad_bias;
  }
  return model;
}

double predict_feature_similarity(const FeatureSimilarityModel& model,
                                  const PairFeatures& features) {
  if (!model.trained()) throw UsageError("feature-similarity model is not trained");
  if (features.dim != model.dim()) {
    throw DataError("pair features have dim " + std::to_string(features.dim) +
                    ", model expects " + std::to_string(model.dim()));
  }
  return std::clamp(sigmoid(dot(model.weights, features) + model.bias), 0.0, 1.0);
}

double predict_feature_similarity(const FeatureSimilarityModel& model,
                                  std::string_view a, std::string_view b,
                                  const SemanticEncoder& encoder) {
  if (!model.trained()) throw UsageError("feature-similarity model is not trained");
  return predict_feature_similarity(model,
                                    featurize_pair(a, b, encoder, model.hash_buckets));
}

void validate(const DualSimilarityConfig& config) {
  if (!(config.gamma >= 0.0 && config.gamma <= 1.0)) {
    throw UsageError("gamma must lie in [0, 1]");
  }
}

double dual_similarity(const DualSimilarityConfig& config, double s_fe, double s_se) {
  return config.gamma * s_fe + (1.0 - config.gamma) * s_se;
}

std::vector<double> min_max(std::vector<double> values) {
  if (values.empty()) return values;
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  const double min = *lo, range = *hi - *lo;
  for (auto& v : values) v = range > 0.0 ? (v - min) / range : 0.0;
  return values;
}

std::vector<double> dual_similarity(const DualSimilarityConfig& config,
                                    std::vector<double> s_fe, std::vector<double> s_se) {
  if (s_fe.size() != s_se.size()) throw DataError("score series differ in length");
  if (config.normalization == Normalization::kMinMax) {
    s_fe = min_max(std::move(s_fe));
    s_se = min_max(std::move(s_se));
  }
  std::vector<double> out(s_fe.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = dual_similarity(config, s_fe[i], s_se[i]);
  }
  return out;
}

DualScorer::DualScorer(std::shared_ptr<const FeatureSimilarityModel> model,
                       std::shared_ptr<const SemanticEncoder> encoder,
                       DualSimilarityConfig config)
    : model_(std::move(model)), encoder_(std::move(encoder)), config_(config) {
  validate(config_);
  if (!encoder_) throw UsageError("dual scorer needs an encoder");
  if (!model_ && config_.gamma != 0.0) {
    throw UsageError("dual scorer without a feature model needs gamma = 0");
  }
}

std::vector<double> DualScorer::feature_scores(
    std::string_view input, const std::vector<std::string>& candidates) const {
  std::vector<double> out;
  out.reserve(candidates.size());
  for (const auto& c : candidates) {
    out.push_back(predict_feature_similarity(*model_, input, c, *encoder_));
  }
  return out;
}

std::vector<double> DualScorer::semantic_scores(
    std::string_view input, const std::vector<std::string>& candidates) const {
  const auto u = encoder_->encode(input);
  std::vector<double> out;
  out.reserve(candidates.size());
  for (const auto& c : candidates) out.push_back(cosine(u, encoder_->encode(c)));
  return out;
}

std::vector<double> DualScorer::scores(std::string_view input,
                                       const std::vector<std::string>& candidates) const {
  auto se = semantic_scores(input, candidates);
  std::vector<double> fe = model_ ? feature_scores(input, candidates)
                                  : std::vector<double>(candidates.size(), 0.0);
  return dual_similarity(config_, std::move(fe), std::move(se));
}

}  // namespace demoner
