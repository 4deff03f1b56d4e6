#include "demoner/adversarial.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "demoner/error.hpp"

namespace demoner {

LabelPermutation::LabelPermutation(std::map<std::string, std::string> mapping)
    : mapping_(std::move(mapping)) {
  std::set<std::string> image;
  for (const auto& [from, to] : mapping_) {
    if (!valid_feature_name(from) || !valid_feature_name(to)) {
      throw DataError("label permutation over invalid feature names");
    }
    image.insert(to);
  }
  if (image.size() != mapping_.size() ||
      !std::all_of(image.begin(), image.end(),
                   [&](const std::string& f) { return mapping_.count(f) == 1; })) {
    throw DataError("label mapping is not a bijection on its domain");
  }
}

LabelPermutation LabelPermutation::identity(const FeatureSet& features) {
  std::map<std::string, std::string> m;
  for (const auto& f : features) m[f] = f;
  return LabelPermutation(std::move(m));
}

const std::string& LabelPermutation::operator()(const std::string& feature) const {
  auto it = mapping_.find(feature);
  if (it == mapping_.end()) {
    throw DataError("label " + feature + " is outside the permutation's domain");
  }
  return it->second;
}

std::string LabelPermutation::map_tag(const std::string& tag) const {
  const auto t = parse_tag(tag);
  if (t.prefix == 'O') return tag;
  return format_tag(t.prefix, (*this)(t.feature));
}

LabelPermutation LabelPermutation::inverse() const {
  std::map<std::string, std::string> inv;
  for (const auto& [from, to] : mapping_) inv[to] = from;
  return LabelPermutation(std::move(inv));
}

bool LabelPermutation::is_identity() const {
  return std::all_of(mapping_.begin(), mapping_.end(),
                     [](const auto& kv) { return kv.first == kv.second; });
}

FeatureSet LabelPermutation::domain() const {
  FeatureSet out;
  for (const auto& [from, to] : mapping_) out.insert(from);
  return out;
}

LabelPermutation compose(const LabelPermutation& outer, const LabelPermutation& inner) {
  if (outer.domain() != inner.domain()) {
    throw DataError("cannot compose permutations over different label sets");
  }
  std::map<std::string, std::string> m;
  for (const auto& [from, mid] : inner.mapping()) m[from] = outer(mid);
  return LabelPermutation(std::move(m));
}

LabelPermutation sample_label_permutation(const FeatureSet& features, Rng& rng,
                                          PermutationKind kind) {
  if (features.size() < 2) {
    throw DataError("label permutation needs at least 2 features");
  }
  std::vector<std::string> from(features.begin(), features.end());
  std::vector<std::string> to = from;
  if (kind == PermutationKind::kSwap) {
    const auto i = rng.uniform_index(to.size());
    auto j = rng.uniform_index(to.size() - 1);
    if (j >= i) ++j;
    std::swap(to[i], to[j]);
  } else {
    // Rejection: a uniform shuffle conditioned on not being the identity.
    do {
      rng.shuffle(std::span(to));
    } while (to == from);
  }
  std::map<std::string, std::string> m;
  for (std::size_t i = 0; i < from.size(); ++i) m[from[i]] = to[i];
  return LabelPermutation(std::move(m));
}

Demonstration permute_examples(const Demonstration& demonstration, Rng& rng) {
  const std::size_t n = demonstration.entries.size();
  if (n < 2) return demonstration;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  const auto identity = order;
  do {
    rng.shuffle(std::span(order));
  } while (order == identity);
  Demonstration out;
  out.entries.reserve(n);
  for (auto i : order) out.entries.push_back(demonstration.entries[i]);
  return out;
}

Instance relabel(const Instance& instance, const LabelPermutation& pi) {
  Instance out = instance;
  for (auto& m : out.markups) m.feature = pi(m.feature);
  if (out.tags) {
    for (auto& t : *out.tags) t = pi.map_tag(t);
  }
  return out;
}

Demonstration relabel(const Demonstration& demonstration, const LabelPermutation& pi) {
  Demonstration out = demonstration;
  for (auto& e : out.entries) {
    e.feature = pi(e.feature);
    e.example = relabel(e.example, pi);
  }
  return out;
}

std::pair<DemonstratedInput, std::vector<std::string>> apply_label_permutation(
    const DemonstratedInput& d, const std::vector<std::string>& gold_tags,
    const LabelPermutation& pi) {
  if (gold_tags.size() != d.input.tokens.size()) {
    throw DataError("gold tags are not aligned with the input tokens");
  }
  std::vector<std::string> tags;
  tags.reserve(gold_tags.size());
  for (const auto& t : gold_tags) tags.push_back(pi.map_tag(t));
  auto input = d.input.labeled() ? relabel(d.input, pi) : d.input;
  return {demonstrated_input(std::move(input), relabel(d.demonstration, pi)),
          std::move(tags)};
}

void validate(const AdlConfig& config) {
  if (!(config.alpha >= 0.0 && config.alpha <= 1.0)) {
    throw UsageError("alpha must lie in [0, 1]");
  }
  if (!(config.beta >= 0.0 && config.beta <= 1.0)) {
    throw UsageError("beta must lie in [0, 1]");
  }
}

double adl_loss(double l_m, double l_e, double l_l, const AdlConfig& config) {
  for (double l : {l_m, l_e, l_l}) {
    if (!std::isfinite(l)) throw TrainingDivergence("non-finite loss component");
  }
  return config.alpha * l_m +
         (1.0 - config.alpha) * ((1.0 - config.beta) * l_e + config.beta * l_l);
}

std::array<double, 3> adl_weights(const AdlConfig& config) {
  return {config.alpha, (1.0 - config.alpha) * (1.0 - config.beta),
          (1.0 - config.alpha) * config.beta};
}

}  // namespace demoner
