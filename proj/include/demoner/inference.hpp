#pragma once

// k-ensemble tagging with per-token majority voting.

#include <cstdint>
#include <string>
#include <vector>

#include "demoner/corpus.hpp"
#include "demoner/decode.hpp"
#include "demoner/demo.hpp"
#include "demoner/tagger.hpp"

namespace demoner {

enum class VoteGranularity { kToken, kSpan };

struct EnsembleConfig {
  std::size_t k = 5;
  std::uint64_t seed = 0;
  VoteGranularity granularity = VoteGranularity::kToken;
};

struct MemberOutput {
  std::vector<std::string> tags;
  EmissionScores scores;
};

struct Prediction {
  std::string id;
  std::vector<std::string> tokens;
  std::vector<std::string> tags;
  std::vector<Markup> markups;
  std::vector<std::vector<std::string>> member_tags;
};

// Per-token majority; ties go to the label with the larger summed softmax
// score across members, then to the smaller label index. The result is
// repaired to valid BIO.
std::vector<std::string> vote_tokens(const std::vector<MemberOutput>& members,
                                     const LabelVocab& vocab);

// Keeps spans proposed by a strict majority of members.
std::vector<std::string> vote_spans(const std::vector<MemberOutput>& members,
                                    std::size_t length);

// One member: demonstration drawn with `rng`, scored and Viterbi-decoded.
MemberOutput tag_once(const ReferenceTagger& model, const TransitionMatrix& transitions,
                      const Instance& input, const DemoPool* pool,
                      const PoolScores* scores, Rng& rng);

// Member m draws its demonstration from an rng seeded by (seed, input id, m).
Prediction ensemble_tag(const ReferenceTagger& model, const TransitionMatrix& transitions,
                        const Instance& input, const DemoPool* pool,
                        const PoolScorer& scorer, const EnsembleConfig& config);

std::vector<Prediction> ensemble_tag_all(const ReferenceTagger& model,
                                         const TransitionMatrix& transitions,
                                         const std::vector<Instance>& inputs,
                                         const DemoPool* pool, const PoolScorer& scorer,
                                         const EnsembleConfig& config);

}  // namespace demoner
