#pragma once

// Reference tagger: a linear softmax over hashed lexical features of the
// token and its context plus demonstration-copy features, trained with the
// adversarial demonstration objective.

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "demoner/adversarial.hpp"
#include "demoner/corpus.hpp"
#include "demoner/decode.hpp"
#include "demoner/demo.hpp"
#include "demoner/encoding.hpp"

namespace demoner {

struct TaggerConfig {
  std::size_t hash_buckets = 1 << 14;
  // Multiplier on the copy similarities in the feature vector.
  double copy_scale = 2.0;
  // Dimension of the n-gram embedding used inside copy similarity.
  std::size_t copy_embedding_dim = 64;
  // Longest token window compared against demonstration spans.
  std::size_t max_window = 3;

  friend bool operator==(const TaggerConfig&, const TaggerConfig&) = default;
};

// Sparse feature vector of one input token: active lexical buckets (value
// 1) and one copy similarity per feature slot.
struct TokenFeatures {
  std::vector<std::uint32_t> lexical;
  std::vector<double> copy;
};

// max over demonstration clauses annotated `feature` of
// 0.5 * char-trigram Jaccard + 0.5 * embedding cosine, taken over the
// token windows (up to max_window tokens) that contain the token.
std::vector<std::vector<double>> copy_similarities(const DemonstratedInput& d,
                                                   const LabelVocab& vocab,
                                                   const TaggerConfig& config);

double char_trigram_jaccard(std::string_view a, std::string_view b);

class ReferenceTagger {
 public:
  ReferenceTagger() = default;
  ReferenceTagger(LabelVocab vocab, TaggerConfig config);

  const LabelVocab& vocab() const { return vocab_; }
  const TaggerConfig& config() const { return config_; }
  std::size_t feature_dim() const { return config_.hash_buckets + vocab_.features().size(); }
  std::size_t parameter_count() const { return weights_.size(); }

  std::vector<double>& weights() { return weights_; }
  const std::vector<double>& weights() const { return weights_; }

  std::vector<TokenFeatures> extract(const DemonstratedInput& d) const;

  // Softmax rows for the input tokens only.
  EmissionScores token_scores(const DemonstratedInput& d) const;
  EmissionScores token_scores(const std::vector<TokenFeatures>& features) const;

  // Mean per-token cross-entropy against `gold`, with its gradient with
  // respect to the weights (dense, same layout as weights()).
  double loss(const std::vector<TokenFeatures>& features,
              const std::vector<std::string>& gold) const;
  double loss_and_gradient(const std::vector<TokenFeatures>& features,
                           const std::vector<std::string>& gold,
                           std::vector<double>& gradient) const;

  // weights -= step * gradient of the mean cross-entropy, touching only the
  // active parameters. `probs` are the softmax rows at the current weights.
  void apply_step(const std::vector<TokenFeatures>& features,
                  const std::vector<std::size_t>& gold, const EmissionScores& probs,
                  double step);

  friend bool operator==(const ReferenceTagger&, const ReferenceTagger&) = default;

 private:
  double logit(const TokenFeatures& x, std::size_t label) const;

  LabelVocab vocab_;
  TaggerConfig config_;
  std::vector<double> weights_;  // labels x feature_dim, row-major
};

struct TaggerTrainOptions {
  std::size_t epochs = 60;
  double learning_rate = 0.1;
  std::uint64_t seed = 0;
  AdlConfig adl;
  // False trains the no-demonstration baseline (empty demonstrations).
  bool use_demonstrations = true;
  // Early stopping on validation entity F1; 0 disables it.
  std::size_t patience = 0;
  double transition_smoothing = 0.01;
};

struct TrainReport {
  std::vector<double> epoch_loss;  // mean combined loss per epoch
  std::vector<double> validation_f1;
  std::size_t best_epoch = 0;
  std::size_t epochs_run = 0;
};

struct TrainedTagger {
  ReferenceTagger model;
  TransitionMatrix transitions;
  TrainReport report;
};

// Demonstration for one input (empty when pool is null).
DemonstratedInput make_demonstrated(const Instance& input, const DemoPool* pool,
                                    const PoolScores* scores, Rng& rng);

TrainedTagger train_tagger(const FewShotSplit& split, const DemoPool* pool,
                           const PoolScorer& scorer, const TaggerTrainOptions& options,
                           const TaggerConfig& config = {});

// Tags estimated from the few-shot training tags, with BIO constraints.
TransitionMatrix training_transitions(const std::vector<Instance>& train,
                                      const LabelVocab& vocab, double smoothing);

}  // namespace demoner
