#include "demoner/demo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "demoner/error.hpp"

namespace demoner {

FeatureSet DemoPool::features() const {
  FeatureSet out;
  for (const auto& [f, idx] : per_feature) out.insert(f);
  return out;
}

DemoPool build_pool(std::vector<Instance> examples, const FeatureSet& feature_set) {
  if (examples.empty()) throw DataError("demonstration pool is empty");
  DemoPool pool;
  for (const auto& f : feature_set) pool.per_feature[f];
  for (std::size_t j = 0; j < examples.size(); ++j) {
    if (!examples[j].labeled()) {
      throw DataError("demonstration pool example " + examples[j].id + " is unlabeled");
    }
    for (const auto& f : feature_set_of(examples[j])) {
      if (auto it = pool.per_feature.find(f); it != pool.per_feature.end()) {
        it->second.push_back(j);
      }
    }
  }
  for (const auto& [f, idx] : pool.per_feature) {
    if (idx.empty()) throw DataError("no demonstration candidate carries feature " + f);
    if (idx.size() == 1) {
      pool.warnings.push_back("feature " + f +
                              " has a single carrier; filtering disabled for it");
    }
  }
  pool.examples = std::move(examples);
  return pool;
}

PoolScorer pairwise_scorer(std::function<double(const Instance&, const Instance&)> fn) {
  return [fn = std::move(fn)](const Instance& input,
                              const std::vector<const Instance*>& candidates) {
    std::vector<double> out;
    out.reserve(candidates.size());
    for (const auto* c : candidates) out.push_back(fn(input, *c));
    return out;
  };
}

bool same_instance(const Instance& a, const Instance& b) {
  return a.id == b.id && a.tokens == b.tokens;
}

PoolScores score_pool(const DemoPool& pool, const Instance& input,
                      const PoolScorer& scorer) {
  PoolScores out;
  out.excluded.resize(pool.examples.size());
  std::vector<const Instance*> candidates;
  std::vector<std::size_t> slots;
  for (std::size_t j = 0; j < pool.examples.size(); ++j) {
    out.excluded[j] = same_instance(pool.examples[j], input);
    if (!out.excluded[j]) {
      candidates.push_back(&pool.examples[j]);
      slots.push_back(j);
    }
  }
  out.scores.assign(pool.examples.size(), std::numeric_limits<double>::quiet_NaN());
  if (candidates.empty()) return out;
  const auto scores = scorer(input, candidates);
  if (scores.size() != candidates.size()) {
    throw DataError("scorer returned " + std::to_string(scores.size()) +
                    " scores for " + std::to_string(candidates.size()) + " candidates");
  }
  for (std::size_t n = 0; n < slots.size(); ++n) {
    if (!std::isfinite(scores[n])) throw DataError("scorer returned a non-finite score");
    out.scores[slots[n]] = scores[n];
  }
  return out;
}

std::vector<RankedCandidate> rank_candidates(const DemoPool& pool,
                                             const std::string& feature,
                                             const PoolScores& scores) {
  auto it = pool.per_feature.find(feature);
  if (it == pool.per_feature.end()) {
    throw DataError("unknown feature " + feature + " for this pool");
  }
  std::vector<RankedCandidate> ranked;
  for (auto j : it->second) {
    if (!scores.excluded[j]) ranked.push_back({j, scores.scores[j]});
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.index < b.index;
  });
  return ranked;
}

std::vector<RankedCandidate> rank_candidates(const DemoPool& pool,
                                             const std::string& feature,
                                             const Instance& input,
                                             const PoolScorer& scorer) {
  if (!pool.per_feature.count(feature)) {
    throw DataError("unknown feature " + feature + " for this pool");
  }
  return rank_candidates(pool, feature, score_pool(pool, input, scorer));
}

std::vector<RankedCandidate> filter_bottom_half(std::vector<RankedCandidate> ranked) {
  ranked.resize(ranked.size() - ranked.size() / 2);
  return ranked;
}

Demonstration select_demonstration(const DemoPool& pool, const Instance& /*input*/,
                                   const PoolScores& scores, Rng& rng) {
  Demonstration demo;
  for (const auto& [feature, carriers] : pool.per_feature) {
    auto survivors = filter_bottom_half(rank_candidates(pool, feature, scores));
    // Only empty when the input is the feature's sole carrier.
    if (survivors.empty()) continue;
    const auto& pick = survivors[rng.uniform_index(survivors.size())];
    demo.entries.push_back({feature, pick.index, pick.score, pool.examples[pick.index]});
  }
  std::stable_sort(demo.entries.begin(), demo.entries.end(),
                   [](const auto& a, const auto& b) { return a.score > b.score; });
  return demo;
}

Demonstration select_demonstration(const DemoPool& pool, const Instance& input,
                                   const PoolScorer& scorer, Rng& rng) {
  return select_demonstration(pool, input, score_pool(pool, input, scorer), rng);
}

std::string render_entry(const Instance& example) {
  std::string out = example.text();
  for (const auto& m : example.markups) {
    out += ' ';
    out += m.text;
    out += " is [";
    out += m.feature;
    out += "].";
  }
  return out;
}

namespace {

void check_entry(const DemoEntry& e) {
  if (!e.example.labeled()) {
    throw DataError("demonstration example " + e.example.id + " is unlabeled");
  }
  const bool carries = std::any_of(e.example.markups.begin(), e.example.markups.end(),
                                   [&](const Markup& m) { return m.feature == e.feature; });
  if (!carries) {
    throw DataError("demonstration example " + e.example.id + " has no markup for " +
                    e.feature);
  }
}

}  // namespace

std::string render_template(const Demonstration& demonstration) {
  std::string out;
  for (std::size_t n = 0; n < demonstration.entries.size(); ++n) {
    check_entry(demonstration.entries[n]);
    if (n > 0) {
      out += ' ';
      out += kSep;
      out += ' ';
    }
    out += render_entry(demonstration.entries[n].example);
  }
  return out;
}

DemonstratedInput demonstrated_input(Instance input, Demonstration demonstration) {
  DemonstratedInput d;
  std::size_t offset = 0;
  for (std::size_t i = 0; i < input.tokens.size(); ++i) {
    if (i > 0) {
      d.rendered += ' ';
      ++offset;
    }
    d.token_offsets.push_back(offset);
    d.rendered += input.tokens[i];
    offset += input.tokens[i].size();
  }
  if (!demonstration.empty()) {
    d.rendered += ' ';
    d.rendered += kSep;
    d.rendered += ' ';
    d.rendered += render_template(demonstration);
    for (const auto& e : demonstration.entries) {
      for (const auto& m : e.example.markups) d.clauses.push_back({m.text, m.feature});
    }
  }
  d.input = std::move(input);
  d.demonstration = std::move(demonstration);
  return d;
}

}  // namespace demoner
