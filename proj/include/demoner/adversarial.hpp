#pragma once

// Adversarial demonstrations: example order and label-rule permutations,
// and the combined training loss.

#include <array>
#include <map>
#include <string>
#include <vector>

#include "demoner/corpus.hpp"
#include "demoner/demo.hpp"
#include "demoner/rng.hpp"

namespace demoner {

// Bijection over a feature set. NIL is implicitly fixed.
class LabelPermutation {
 public:
  LabelPermutation() = default;
  explicit LabelPermutation(std::map<std::string, std::string> mapping);

  static LabelPermutation identity(const FeatureSet& features);

  const std::string& operator()(const std::string& feature) const;
  // Maps a BIO tag, keeping its prefix.
  std::string map_tag(const std::string& tag) const;

  LabelPermutation inverse() const;
  bool is_identity() const;
  FeatureSet domain() const;
  const std::map<std::string, std::string>& mapping() const { return mapping_; }

  friend bool operator==(const LabelPermutation&, const LabelPermutation&) = default;

 private:
  std::map<std::string, std::string> mapping_;
};

// outer ∘ inner: apply `inner` first.
LabelPermutation compose(const LabelPermutation& outer, const LabelPermutation& inner);

enum class PermutationKind {
  kUniform,  // uniform over non-identity permutations
  kSwap,     // a single transposition of two labels
};

LabelPermutation sample_label_permutation(const FeatureSet& features, Rng& rng,
                                          PermutationKind kind = PermutationKind::kUniform);

// Uniform reordering of the entries that differs from the input order when
// more than one entry exists.
Demonstration permute_examples(const Demonstration& demonstration, Rng& rng);

// Relabels the demonstration's annotations (before rendering), the input's
// own gold annotations, and `gold_tags`.
std::pair<DemonstratedInput, std::vector<std::string>> apply_label_permutation(
    const DemonstratedInput& d, const std::vector<std::string>& gold_tags,
    const LabelPermutation& pi);

Demonstration relabel(const Demonstration& demonstration, const LabelPermutation& pi);
Instance relabel(const Instance& instance, const LabelPermutation& pi);

struct AdlConfig {
  double alpha = 0.9;
  double beta = 0.4;
  PermutationKind permutation = PermutationKind::kUniform;
};

void validate(const AdlConfig& config);

// alpha l_m + (1 - alpha)((1 - beta) l_e + beta l_l)
double adl_loss(double l_m, double l_e, double l_l, const AdlConfig& config);

// Weights of the three branches in adl_loss, in (main, example, label) order.
std::array<double, 3> adl_weights(const AdlConfig& config);

}  // namespace demoner
