#include "demoner/inference.hpp"

#include <algorithm>
#include <map>
#include <tuple>

#include "demoner/error.hpp"
#include "demoner/rng.hpp"

namespace demoner {

std::vector<std::string> vote_tokens(const std::vector<MemberOutput>& members,
                                     const LabelVocab& vocab) {
  if (members.empty()) throw UsageError("voting needs at least one member");
  const std::size_t n = members.front().tags.size();
  const std::size_t L = vocab.size();
  for (const auto& m : members) {
    if (m.tags.size() != n || m.scores.rows != n || m.scores.labels != vocab.labels()) {
      throw DataError("ensemble members disagree on shape or label set");
    }
  }
  std::vector<std::string> out(n);
  std::vector<std::size_t> votes(L);
  std::vector<double> column(members.size());
  for (std::size_t t = 0; t < n; ++t) {
    std::fill(votes.begin(), votes.end(), 0);
    for (const auto& m : members) ++votes[vocab.index(m.tags[t])];
    std::size_t best = 0;
    double best_mass = -1.0;
    for (std::size_t y = 0; y < L; ++y) {
      if (votes[y] < votes[best]) continue;
      // Summed in sorted order so the total does not depend on member order.
      for (std::size_t m = 0; m < members.size(); ++m) column[m] = members[m].scores.at(t, y);
      std::sort(column.begin(), column.end());
      double mass = 0.0;
      for (double p : column) mass += p;
      if (votes[y] > votes[best] || mass > best_mass) {
        best = y;
        best_mass = mass;
      }
    }
    out[t] = vocab.label(best);
  }
  return repair_bio(std::move(out));
}

std::vector<std::string> vote_spans(const std::vector<MemberOutput>& members,
                                    std::size_t length) {
  if (members.empty()) throw UsageError("voting needs at least one member");
  std::map<std::tuple<std::size_t, std::size_t, std::string>, std::size_t> counts;
  std::vector<std::string> dummy(length);
  for (const auto& m : members) {
    if (m.tags.size() != length) throw DataError("ensemble members disagree on length");
    for (const auto& mk : markups_from_tags(dummy, m.tags, TagMode::kLenient)) {
      ++counts[{mk.start, mk.end, mk.feature}];
    }
  }
  std::vector<Markup> kept;
  for (const auto& [key, c] : counts) {
    if (2 * c > members.size()) {
      kept.push_back({std::get<0>(key), std::get<1>(key), "", std::get<2>(key)});
    }
  }
  return tags_from_markups(length, kept);
}

MemberOutput tag_once(const ReferenceTagger& model, const TransitionMatrix& transitions,
                      const Instance& input, const DemoPool* pool,
                      const PoolScores* scores, Rng& rng) {
  const auto d = make_demonstrated(input, pool, scores, rng);
  MemberOutput out;
  out.scores = model.token_scores(d);
  out.tags = viterbi_decode(out.scores, transitions);
  return out;
}

Prediction ensemble_tag(const ReferenceTagger& model, const TransitionMatrix& transitions,
                        const Instance& input, const DemoPool* pool,
                        const PoolScorer& scorer, const EnsembleConfig& config) {
  if (config.k < 1) throw UsageError("ensemble size k must be >= 1");
  if (pool && pool->examples.empty()) throw DataError("demonstration pool is empty");

  PoolScores scores;
  if (pool) scores = score_pool(*pool, input, scorer);

  std::vector<MemberOutput> members;
  members.reserve(config.k);
  const std::uint64_t input_key = fnv1a(input.id);
  for (std::size_t m = 0; m < config.k; ++m) {
    Rng rng(derive_seed(config.seed, input_key, m));
    members.push_back(tag_once(model, transitions, input, pool, pool ? &scores : nullptr, rng));
  }

  Prediction p;
  p.id = input.id;
  p.tokens = input.tokens;
  p.tags = config.granularity == VoteGranularity::kToken
               ? vote_tokens(members, model.vocab())
               : vote_spans(members, input.tokens.size());
  p.markups = markups_from_tags(p.tokens, p.tags);
  for (auto& m : members) p.member_tags.push_back(std::move(m.tags));
  return p;
}

std::vector<Prediction> ensemble_tag_all(const ReferenceTagger& model,
                                         const TransitionMatrix& transitions,
                                         const std::vector<Instance>& inputs,
                                         const DemoPool* pool, const PoolScorer& scorer,
                                         const EnsembleConfig& config) {
  std::vector<Prediction> out;
  out.reserve(inputs.size());
  for (const auto& in : inputs) {
    out.push_back(ensemble_tag(model, transitions, in, pool, scorer, config));
  }
  return out;
}

}  // namespace demoner
