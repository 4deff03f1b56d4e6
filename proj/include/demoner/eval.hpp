#pragma once

// Entity-level F1, similarity-predictor protocols, and synthetic corpora.

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "demoner/corpus.hpp"
#include "demoner/inference.hpp"
#include "demoner/rng.hpp"

namespace demoner {

struct Counts {
  std::size_t tp = 0, fp = 0, fn = 0;
};

struct F1Report {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  Counts counts;
  std::map<std::string, F1Report> per_feature;
  std::size_t gold_support = 0;
  std::size_t predicted = 0;
};

F1Report f1_from_counts(const Counts& c);

// Exact-span micro P/R/F1; a prediction is a true positive iff start, end
// and feature all match a gold markup.
F1Report span_f1(const std::vector<std::vector<Markup>>& gold,
                 const std::vector<std::vector<Markup>>& pred);

F1Report entity_f1(const std::vector<Instance>& gold,
                   const std::vector<Prediction>& pred);

std::string to_json(const F1Report& report);
std::string to_table(const F1Report& report);

using PairScoreFn = std::function<double(const Instance& d, const Instance& candidate)>;

struct PredictorReport {
  double binary_accuracy = 0.0;
  double ranking_accuracy = 0.0;
  double pearson = 0.0;
  std::size_t trials = 0;
};

// P(score(d, d_i) > score(d, d_j)) with FJ(d, d_i) > 0 = FJ(d, d_j);
// ties count as failures. d is drawn from `test`, d_i and d_j from `pool`,
// with replacement.
double binary_accuracy(const PairScoreFn& score, const std::vector<Instance>& test,
                       const std::vector<Instance>& pool, std::size_t trials, Rng& rng);

// Same, for pairs with FJ(d, d_i) > FJ(d, d_j) > 0.
double ranking_accuracy(const PairScoreFn& score, const std::vector<Instance>& test,
                        const std::vector<Instance>& pool, std::size_t trials, Rng& rng);

// Sample Pearson correlation of FJ(d, d_i) and score(d, d_i) over random
// (d, d_i) pairs.
double pearson(const PairScoreFn& score, const std::vector<Instance>& test,
               const std::vector<Instance>& pool, std::size_t trials, Rng& rng);

double pearson_correlation(const std::vector<double>& x, const std::vector<double>& y);

// All three metrics, each from its own seeded stream.
PredictorReport evaluate_predictor(const PairScoreFn& score,
                                   const std::vector<Instance>& test,
                                   const std::vector<Instance>& pool, std::size_t trials,
                                   std::uint64_t seed);

std::string to_json(const PredictorReport& report);

// Behaviour under a demonstration label permutation, measured on gold
// entity tokens. Each instance draws its demonstration and a non-identity
// permutation pi from its own seeded stream; the permuted gold relabels
// every entity token f -> pi(f).
struct PermutationProbe {
  std::size_t tokens = 0;
  // Decoded tag equals the permuted gold tag.
  double accuracy = 0.0;
  // Decoded tag differs from the decode under the unpermuted demonstration.
  double flip_rate = 0.0;
  // Mean softmax mass (B + I) on the gold feature f and on pi(f), without
  // and with the permutation.
  double original_score = 0.0;
  double original_score_permuted = 0.0;
  double target_score = 0.0;
  double target_score_permuted = 0.0;
};

PermutationProbe permutation_probe(const ReferenceTagger& model,
                                   const TransitionMatrix& transitions,
                                   const std::vector<Instance>& instances,
                                   const DemoPool& pool, const PoolScorer& scorer,
                                   std::uint64_t seed,
                                   PermutationKind kind = PermutationKind::kUniform);

std::string to_json(const PermutationProbe& probe);
std::string to_table(const std::vector<std::pair<std::string, PredictorReport>>& rows);

struct SyntheticFeature {
  std::string name;
  std::vector<std::string> vocabulary;  // entries may be multi-word
};

struct SyntheticSpec {
  std::vector<SyntheticFeature> features;
  std::vector<std::string> filler;
  std::size_t instances = 100;
  std::size_t min_length = 6;
  std::size_t max_length = 12;
  // Probability that a sentence slot holds an entity rather than a filler word.
  double entity_rate = 0.2;
};

void validate(const SyntheticSpec& spec);

// Sentences whose entity spans come from per-feature vocabularies, so an
// instance's feature set is a function of its surface words.
Corpus generate_synthetic_corpus(const SyntheticSpec& spec, std::uint64_t seed);

enum class MarkerPosition { kInfix, kSuffix };

// Word lists where each feature's words share a feature-specific marker, so
// same-feature words are similar at the character level.
std::vector<std::string> morphological_vocabulary(std::string_view marker, std::size_t count,
                                                  std::uint64_t seed,
                                                  MarkerPosition position = MarkerPosition::kInfix);

// Named generator settings: "vocab" (4 features, small vocabularies),
// "permuted" (2 features, copy-dominated entities), "e2e" (3 features,
// open vocabularies).
SyntheticSpec synthetic_preset(std::string_view name, std::size_t instances);

}  // namespace demoner
