#pragma once

// Label vocabulary, emission scores, transition estimation and Viterbi.

#include <cstddef>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "demoner/corpus.hpp"

namespace demoner {

// "O" followed by B-f, I-f for every feature in sorted order.
class LabelVocab {
 public:
  LabelVocab() = default;
  explicit LabelVocab(const FeatureSet& features);

  std::size_t size() const { return labels_.size(); }
  const std::vector<std::string>& labels() const { return labels_; }
  const std::vector<std::string>& features() const { return features_; }
  const std::string& label(std::size_t i) const { return labels_.at(i); }
  // Throws DataError for labels outside the vocabulary.
  std::size_t index(const std::string& label) const;
  bool contains(const std::string& label) const { return index_.count(label) > 0; }
  // Feature slot of a label index, or npos for O.
  std::size_t feature_slot(std::size_t label_index) const;
  std::size_t begin_index(std::size_t feature_slot) const { return 1 + 2 * feature_slot; }
  std::size_t inside_index(std::size_t feature_slot) const { return 2 + 2 * feature_slot; }

  friend bool operator==(const LabelVocab& a, const LabelVocab& b) {
    return a.labels_ == b.labels_;
  }

 private:
  std::vector<std::string> labels_;
  std::vector<std::string> features_;
  std::map<std::string, std::size_t> index_;
};

// Per-token probability rows over a label vocabulary (row-major n x L).
struct EmissionScores {
  std::vector<std::string> labels;
  std::size_t rows = 0;
  std::vector<double> probs;

  std::size_t cols() const { return labels.size(); }
  double at(std::size_t t, std::size_t y) const { return probs[t * cols() + y]; }
  std::span<const double> row(std::size_t t) const {
    return std::span<const double>(probs).subspan(t * cols(), cols());
  }
};

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Log transition probabilities over labels plus START and END states.
// State index: labels 0..L-1, START = L, END = L+1.
struct TransitionMatrix {
  std::vector<std::string> labels;
  std::vector<double> log_probs;  // (L+2) x (L+2), row = source

  std::size_t states() const { return labels.size() + 2; }
  std::size_t start() const { return labels.size(); }
  std::size_t end() const { return labels.size() + 1; }
  double at(std::size_t from, std::size_t to) const {
    return log_probs[from * states() + to];
  }
  double& at(std::size_t from, std::size_t to) { return log_probs[from * states() + to]; }
};

// Bigram MLE over (START, labels..., END) with additive smoothing on every
// cell, rows normalized.
TransitionMatrix estimate_transitions(const std::vector<std::vector<std::string>>& sequences,
                                      const LabelVocab& vocab, double smoothing = 0.01);

// Sets BIO-invalid moves (START/O/B-Y/I-Y -> I-X for Y != X) to -inf.
void constrain_bio(TransitionMatrix& transitions);

// Path over label indices maximizing sum of log-emissions and transitions,
// including START and END. Ties go to the lexicographically smallest index
// sequence. `log_emissions` is row-major n x L.
std::vector<std::size_t> viterbi_path(std::span<const double> log_emissions,
                                      std::size_t n, const TransitionMatrix& transitions);

// Sum of log-emissions and transitions along `path`, left to right.
double path_score(std::span<const double> log_emissions, std::size_t n,
                  const TransitionMatrix& transitions, std::span<const std::size_t> path);

std::vector<std::string> viterbi_decode(const EmissionScores& emissions,
                                        const TransitionMatrix& transitions);

// Rewrites I-X that does not continue an X span as B-X.
std::vector<std::string> repair_bio(std::vector<std::string> tags);

}  // namespace demoner
