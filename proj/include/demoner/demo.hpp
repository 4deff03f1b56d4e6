#pragma once

// Demonstration incorporator: per-feature candidate subsets, ranking,
// bottom-half filtering, sampling and template rendering.

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "demoner/corpus.hpp"
#include "demoner/rng.hpp"

namespace demoner {

inline constexpr std::string_view kSep = "[SEP]";

struct DemoPool {
  std::vector<Instance> examples;
  // C_f: indices into `examples` of every example carrying feature f.
  std::map<std::string, std::vector<std::size_t>> per_feature;
  // Features with a single carrier; filtering is skipped for them.
  std::vector<std::string> warnings;

  FeatureSet features() const;
};

DemoPool build_pool(std::vector<Instance> examples, const FeatureSet& feature_set);

// Scores every candidate against the input; one score per candidate, in
// candidate order. Implementations may normalize across the candidates.
using PoolScorer = std::function<std::vector<double>(
    const Instance& input, const std::vector<const Instance*>& candidates)>;

// Lifts a pairwise scorer into a PoolScorer (no normalization).
PoolScorer pairwise_scorer(std::function<double(const Instance&, const Instance&)> fn);

// True when `candidate` is the input itself (same id and tokens).
bool same_instance(const Instance& a, const Instance& b);

struct RankedCandidate {
  std::size_t index = 0;  // into pool.examples
  double score = 0.0;

  friend bool operator==(const RankedCandidate&, const RankedCandidate&) = default;
};

// Pool-wide scores for one input, with the input excluded from the pool.
// excluded[i] marks examples that are the input itself.
struct PoolScores {
  std::vector<double> scores;
  std::vector<bool> excluded;
};

PoolScores score_pool(const DemoPool& pool, const Instance& input,
                      const PoolScorer& scorer);

// C_f ordered by descending score; ties by ascending pool index.
std::vector<RankedCandidate> rank_candidates(const DemoPool& pool,
                                             const std::string& feature,
                                             const PoolScores& scores);
std::vector<RankedCandidate> rank_candidates(const DemoPool& pool,
                                             const std::string& feature,
                                             const Instance& input,
                                             const PoolScorer& scorer);

struct DemoEntry {
  std::string feature;  // the C_f this example was drawn from
  std::size_t index = 0;
  double score = 0.0;
  Instance example;

  friend bool operator==(const DemoEntry&, const DemoEntry&) = default;
};

struct Demonstration {
  std::vector<DemoEntry> entries;

  bool empty() const { return entries.empty(); }
  friend bool operator==(const Demonstration&, const Demonstration&) = default;
};

// Survivors of bottom-half filtering: the floor(|C_f| / 2) lowest-ranked
// candidates are removed (none for a single-carrier feature).
std::vector<RankedCandidate> filter_bottom_half(std::vector<RankedCandidate> ranked);

Demonstration select_demonstration(const DemoPool& pool, const Instance& input,
                                   const PoolScorer& scorer, Rng& rng);
Demonstration select_demonstration(const DemoPool& pool, const Instance& input,
                                   const PoolScores& scores, Rng& rng);

// One rendered annotation clause: "<text> is [<label>]."
struct Clause {
  std::string text;
  std::string label;

  friend bool operator==(const Clause&, const Clause&) = default;
};

std::string render_entry(const Instance& example);
std::string render_template(const Demonstration& demonstration);

struct DemonstratedInput {
  Instance input;
  Demonstration demonstration;
  std::string rendered;
  // Byte offset of each input token inside `rendered`.
  std::vector<std::size_t> token_offsets;
  // Annotation clauses as rendered, in order.
  std::vector<Clause> clauses;

  friend bool operator==(const DemonstratedInput&, const DemonstratedInput&) = default;
};

DemonstratedInput demonstrated_input(Instance input, Demonstration demonstration);

}  // namespace demoner
