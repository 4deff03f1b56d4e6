#include "demoner/decode.hpp"

#include <cmath>

#include "demoner/error.hpp"

namespace demoner {

LabelVocab::LabelVocab(const FeatureSet& features)
    : features_(features.begin(), features.end()) {
  labels_.emplace_back(kNil);
  for (const auto& f : features_) {
    if (!valid_feature_name(f)) throw DataError("invalid feature name '" + f + "'");
    labels_.push_back(format_tag('B', f));
    labels_.push_back(format_tag('I', f));
  }
  for (std::size_t i = 0; i < labels_.size(); ++i) index_[labels_[i]] = i;
}

std::size_t LabelVocab::index(const std::string& label) const {
  auto it = index_.find(label);
  if (it == index_.end()) throw DataError("unknown label '" + label + "'");
  return it->second;
}

std::size_t LabelVocab::feature_slot(std::size_t label_index) const {
  return label_index == 0 ? std::string::npos : (label_index - 1) / 2;
}

TransitionMatrix estimate_transitions(const std::vector<std::vector<std::string>>& sequences,
                                      const LabelVocab& vocab, double smoothing) {
  if (sequences.empty()) throw DataError("transition estimation needs >= 1 sequence");
  if (!(smoothing > 0.0) || !std::isfinite(smoothing)) {
    throw UsageError("transition smoothing must be a positive real");
  }
  TransitionMatrix tm;
  tm.labels = vocab.labels();
  const std::size_t s = tm.states();
  std::vector<double> counts(s * s, smoothing);
  for (const auto& seq : sequences) {
    std::size_t prev = tm.start();
    for (const auto& tag : seq) {
      const auto cur = vocab.index(tag);
      counts[prev * s + cur] += 1.0;
      prev = cur;
    }
    counts[prev * s + tm.end()] += 1.0;
  }
  tm.log_probs.resize(s * s);
  for (std::size_t from = 0; from < s; ++from) {
    double total = 0.0;
    for (std::size_t to = 0; to < s; ++to) total += counts[from * s + to];
    for (std::size_t to = 0; to < s; ++to) {
      tm.log_probs[from * s + to] = std::log(counts[from * s + to] / total);
    }
  }
  return tm;
}

void constrain_bio(TransitionMatrix& tm) {
  const std::size_t L = tm.labels.size();
  std::vector<BioTag> tags;
  for (const auto& l : tm.labels) tags.push_back(parse_tag(l));
  for (std::size_t to = 0; to < L; ++to) {
    if (tags[to].prefix != 'I') continue;
    tm.at(tm.start(), to) = kNegInf;
    for (std::size_t from = 0; from < L; ++from) {
      if (tags[from].prefix == 'O' || tags[from].feature != tags[to].feature) {
        tm.at(from, to) = kNegInf;
      }
    }
  }
}

std::vector<std::size_t> viterbi_path(std::span<const double> log_emissions,
                                      std::size_t n, const TransitionMatrix& tm) {
  const std::size_t L = tm.labels.size();
  if (n == 0) throw DataError("viterbi needs at least one token");
  if (log_emissions.size() != n * L) {
    throw DataError("emission matrix does not match the transition label set");
  }
  // Runs right to left so that following the stored successors from the
  // front picks the smallest label at each position among optimal paths.
  std::vector<double> best(n * L);
  std::vector<std::size_t> next(n * L, 0);
  for (std::size_t s = 0; s < L; ++s) {
    best[(n - 1) * L + s] = log_emissions[(n - 1) * L + s] + tm.at(s, tm.end());
  }
  for (std::size_t t = n - 1; t-- > 0;) {
    for (std::size_t s = 0; s < L; ++s) {
      double top = kNegInf;
      std::size_t arg = 0;
      for (std::size_t r = 0; r < L; ++r) {
        const double v = tm.at(s, r) + best[(t + 1) * L + r];
        if (v > top) {
          top = v;
          arg = r;
        }
      }
      best[t * L + s] = log_emissions[t * L + s] + top;
      next[t * L + s] = arg;
    }
  }
  double top = kNegInf;
  std::size_t state = 0;
  for (std::size_t s = 0; s < L; ++s) {
    const double v = tm.at(tm.start(), s) + best[s];
    if (v > top) {
      top = v;
      state = s;
    }
  }
  std::vector<std::size_t> path(n);
  for (std::size_t t = 0; t < n; ++t) {
    path[t] = state;
    state = next[t * L + state];
  }
  return path;
}

double path_score(std::span<const double> log_emissions, std::size_t n,
                  const TransitionMatrix& tm, std::span<const std::size_t> path) {
  const std::size_t L = tm.labels.size();
  double score = 0.0;
  std::size_t prev = tm.start();
  for (std::size_t t = 0; t < n; ++t) {
    score += tm.at(prev, path[t]);
    score += log_emissions[t * L + path[t]];
    prev = path[t];
  }
  return score + tm.at(prev, tm.end());
}

std::vector<std::string> viterbi_decode(const EmissionScores& emissions,
                                        const TransitionMatrix& transitions) {
  if (emissions.labels != transitions.labels) {
    throw DataError("emission and transition label sets differ");
  }
  std::vector<double> logs(emissions.probs.size());
  for (std::size_t i = 0; i < logs.size(); ++i) logs[i] = std::log(emissions.probs[i]);
  const auto path = viterbi_path(logs, emissions.rows, transitions);
  std::vector<std::string> out;
  out.reserve(path.size());
  for (auto y : path) out.push_back(transitions.labels[y]);
  return out;
}

std::vector<std::string> repair_bio(std::vector<std::string> tags) {
  std::string prev_feature;
  char prev_prefix = 'O';
  for (auto& tag : tags) {
    auto t = parse_tag(tag);
    if (t.prefix == 'I' && (prev_prefix == 'O' || prev_feature != t.feature)) {
      t.prefix = 'B';
      tag = format_tag('B', t.feature);
    }
    prev_prefix = t.prefix;
    prev_feature = t.feature;
  }
  return tags;
}

}  // namespace demoner
