#include "demoner/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <set>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "demoner/error.hpp"

namespace demoner {

F1Report f1_from_counts(const Counts& c) {
  F1Report r;
  r.counts = c;
  r.gold_support = c.tp + c.fn;
  r.predicted = c.tp + c.fp;
  r.precision = r.predicted == 0 ? 0.0 : double(c.tp) / double(r.predicted);
  r.recall = r.gold_support == 0 ? 0.0 : double(c.tp) / double(r.gold_support);
  const double pr = r.precision + r.recall;
  r.f1 = pr == 0.0 ? 0.0 : 2.0 * r.precision * r.recall / pr;
  return r;
}

F1Report span_f1(const std::vector<std::vector<Markup>>& gold,
                 const std::vector<std::vector<Markup>>& pred) {
  if (gold.size() != pred.size()) throw DataError("gold and prediction counts differ");
  using Key = std::tuple<std::size_t, std::size_t, std::string>;
  Counts total;
  std::map<std::string, Counts> by_feature;
  for (std::size_t n = 0; n < gold.size(); ++n) {
    std::set<Key> g, p;
    for (const auto& m : gold[n]) g.insert({m.start, m.end, m.feature});
    for (const auto& m : pred[n]) p.insert({m.start, m.end, m.feature});
    for (const auto& k : p) {
      auto& c = by_feature[std::get<2>(k)];
      if (g.count(k)) {
        ++total.tp;
        ++c.tp;
      } else {
        ++total.fp;
        ++c.fp;
      }
    }
    for (const auto& k : g) {
      if (!p.count(k)) {
        ++total.fn;
        ++by_feature[std::get<2>(k)].fn;
      }
    }
  }
  F1Report r = f1_from_counts(total);
  for (const auto& [f, c] : by_feature) r.per_feature[f] = f1_from_counts(c);
  return r;
}

F1Report entity_f1(const std::vector<Instance>& gold, const std::vector<Prediction>& pred) {
  if (gold.size() != pred.size()) {
    throw DataError("gold has " + std::to_string(gold.size()) + " instances, predictions " +
                    std::to_string(pred.size()));
  }
  std::vector<std::vector<Markup>> g, p;
  for (std::size_t n = 0; n < gold.size(); ++n) {
    if (gold[n].id != pred[n].id) {
      throw DataError("id mismatch: gold " + gold[n].id + " vs prediction " + pred[n].id);
    }
    if (gold[n].tokens.size() != pred[n].tags.size()) {
      throw DataError("length mismatch for instance " + gold[n].id);
    }
    if (!gold[n].labeled()) throw DataError("gold instance " + gold[n].id + " is unlabeled");
    g.push_back(gold[n].markups);
    p.push_back(pred[n].markups);
  }
  return span_f1(g, p);
}

namespace {

nlohmann::json report_json(const F1Report& r) {
  nlohmann::json j = {{"precision", r.precision},
                      {"recall", r.recall},
                      {"f1", r.f1},
                      {"tp", r.counts.tp},
                      {"fp", r.counts.fp},
                      {"fn", r.counts.fn},
                      {"support", r.gold_support}};
  if (!r.per_feature.empty()) {
    auto& pf = j["per_feature"] = nlohmann::json::object();
    for (const auto& [f, sub] : r.per_feature) pf[f] = report_json(sub);
  }
  return j;
}

void table_row(std::ostringstream& out, const std::string& name, const F1Report& r) {
  out << std::left << std::setw(12) << name << std::right << std::fixed
      << std::setprecision(4) << std::setw(10) << r.precision << std::setw(10) << r.recall
      << std::setw(10) << r.f1 << std::setw(10) << r.gold_support << '\n';
}

}  // namespace

std::string to_json(const F1Report& report) { return report_json(report).dump(2); }

std::string to_table(const F1Report& report) {
  std::ostringstream out;
  out << std::left << std::setw(12) << "feature" << std::right << std::setw(10) << "precision"
      << std::setw(10) << "recall" << std::setw(10) << "f1" << std::setw(10) << "support"
      << '\n';
  for (const auto& [f, sub] : report.per_feature) table_row(out, f, sub);
  table_row(out, "micro", report);
  return out.str();
}

namespace {

std::vector<std::vector<double>> jaccard_matrix(const std::vector<Instance>& test,
                                                const std::vector<Instance>& pool) {
  std::vector<FeatureSet> ps;
  for (const auto& p : pool) {
    if (!p.labeled()) throw DataError("predictor evaluation pool must be labeled");
    ps.push_back(feature_set_of(p));
  }
  std::vector<std::vector<double>> fj;
  for (const auto& d : test) {
    if (!d.labeled()) throw DataError("predictor evaluation test set must be labeled");
    const auto ds = feature_set_of(d);
    std::vector<double> row;
    row.reserve(ps.size());
    for (const auto& s : ps) row.push_back(feature_jaccard(ds, s));
    fj.push_back(std::move(row));
  }
  return fj;
}

}  // namespace

double binary_accuracy(const PairScoreFn& score, const std::vector<Instance>& test,
                       const std::vector<Instance>& pool, std::size_t trials, Rng& rng) {
  if (trials == 0) throw UsageError("trial count must be positive");
  const auto fj = jaccard_matrix(test, pool);
  struct Candidate {
    std::size_t d;
    std::vector<std::size_t> pos, neg;
  };
  std::vector<Candidate> eligible;
  for (std::size_t d = 0; d < test.size(); ++d) {
    Candidate c{d, {}, {}};
    for (std::size_t j = 0; j < pool.size(); ++j) (fj[d][j] > 0.0 ? c.pos : c.neg).push_back(j);
    if (!c.pos.empty() && !c.neg.empty()) eligible.push_back(std::move(c));
  }
  if (eligible.empty()) throw DataError("no (positive, negative) pair exists for binary accuracy");

  std::size_t wins = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    const auto& c = eligible[rng.uniform_index(eligible.size())];
    const auto i = c.pos[rng.uniform_index(c.pos.size())];
    const auto j = c.neg[rng.uniform_index(c.neg.size())];
    if (score(test[c.d], pool[i]) > score(test[c.d], pool[j])) ++wins;
  }
  return double(wins) / double(trials);
}

double ranking_accuracy(const PairScoreFn& score, const std::vector<Instance>& test,
                        const std::vector<Instance>& pool, std::size_t trials, Rng& rng) {
  if (trials == 0) throw UsageError("trial count must be positive");
  const auto fj = jaccard_matrix(test, pool);
  struct Candidate {
    std::size_t d;
    std::vector<std::size_t> pos;
  };
  std::vector<Candidate> eligible;
  for (std::size_t d = 0; d < test.size(); ++d) {
    Candidate c{d, {}};
    std::set<double> values;
    for (std::size_t j = 0; j < pool.size(); ++j) {
      if (fj[d][j] > 0.0) {
        c.pos.push_back(j);
        values.insert(fj[d][j]);
      }
    }
    if (values.size() >= 2) eligible.push_back(std::move(c));
  }
  if (eligible.empty()) throw DataError("no strictly ordered positive pair exists for ranking accuracy");

  std::size_t wins = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    const auto& c = eligible[rng.uniform_index(eligible.size())];
    std::size_t a, b;
    do {
      a = c.pos[rng.uniform_index(c.pos.size())];
      b = c.pos[rng.uniform_index(c.pos.size())];
    } while (fj[c.d][a] == fj[c.d][b]);
    if (fj[c.d][a] < fj[c.d][b]) std::swap(a, b);
    if (score(test[c.d], pool[a]) > score(test[c.d], pool[b])) ++wins;
  }
  return double(wins) / double(trials);
}

double pearson_correlation(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw DataError("pearson correlation needs >= 2 paired samples");
  }
  const double n = double(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw DataError("pearson correlation: zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double pearson(const PairScoreFn& score, const std::vector<Instance>& test,
               const std::vector<Instance>& pool, std::size_t trials, Rng& rng) {
  if (trials < 2) throw UsageError("pearson needs >= 2 trials");
  if (test.empty() || pool.empty()) throw DataError("pearson needs test and pool instances");
  const auto fj = jaccard_matrix(test, pool);
  std::vector<double> xs, ys;
  xs.reserve(trials);
  ys.reserve(trials);
  for (std::size_t t = 0; t < trials; ++t) {
    const auto d = rng.uniform_index(test.size());
    const auto i = rng.uniform_index(pool.size());
    xs.push_back(fj[d][i]);
    ys.push_back(score(test[d], pool[i]));
  }
  return pearson_correlation(xs, ys);
}

PredictorReport evaluate_predictor(const PairScoreFn& score, const std::vector<Instance>& test,
                                   const std::vector<Instance>& pool, std::size_t trials,
                                   std::uint64_t seed) {
  PredictorReport r;
  r.trials = trials;
  Rng b(derive_seed(seed, 1)), k(derive_seed(seed, 2)), p(derive_seed(seed, 3));
  r.binary_accuracy = binary_accuracy(score, test, pool, trials, b);
  r.ranking_accuracy = ranking_accuracy(score, test, pool, trials, k);
  r.pearson = pearson(score, test, pool, trials, p);
  return r;
}

std::string to_json(const PredictorReport& r) {
  return nlohmann::json{{"binary_accuracy", r.binary_accuracy},
                        {"ranking_accuracy", r.ranking_accuracy},
                        {"pearson", r.pearson},
                        {"trials", r.trials}}
      .dump(2);
}

std::string to_table(const std::vector<std::pair<std::string, PredictorReport>>& rows) {
  std::ostringstream out;
  out << std::left << std::setw(16) << "predictor" << std::right << std::setw(10) << "binary"
      << std::setw(10) << "ranking" << std::setw(10) << "pearson" << std::setw(10) << "trials"
      << '\n';
  for (const auto& [name, r] : rows) {
    out << std::left << std::setw(16) << name << std::right << std::fixed
        << std::setprecision(4) << std::setw(10) << r.binary_accuracy << std::setw(10)
        << r.ranking_accuracy << std::setw(10) << r.pearson << std::setw(10) << r.trials
        << '\n';
  }
  return out.str();
}

PermutationProbe permutation_probe(const ReferenceTagger& model,
                                   const TransitionMatrix& transitions,
                                   const std::vector<Instance>& instances,
                                   const DemoPool& pool, const PoolScorer& scorer,
                                   std::uint64_t seed, PermutationKind kind) {
  const auto& vocab = model.vocab();
  const auto features = pool.features();
  PermutationProbe r;
  std::size_t correct = 0, flipped = 0;
  auto mass = [&](const EmissionScores& s, std::size_t t, const std::string& f) {
    return s.at(t, vocab.index(format_tag('B', f))) + s.at(t, vocab.index(format_tag('I', f)));
  };
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const auto& inst = instances[i];
    if (!inst.tags) throw DataError("probe instance " + inst.id + " is unlabeled");
    Rng rng(derive_seed(seed, fnv1a(inst.id), i));
    const auto scores = score_pool(pool, inst, scorer);
    const auto d = make_demonstrated(inst, &pool, &scores, rng);
    const auto pi = sample_label_permutation(features, rng, kind);
    const auto [d_l, gold_l] = apply_label_permutation(d, *inst.tags, pi);

    const auto s = model.token_scores(d);
    const auto s_l = model.token_scores(d_l);
    const auto pred = viterbi_decode(s, transitions);
    const auto pred_l = viterbi_decode(s_l, transitions);
    for (std::size_t t = 0; t < inst.tokens.size(); ++t) {
      const auto tag = parse_tag((*inst.tags)[t]);
      if (tag.prefix == 'O') continue;
      ++r.tokens;
      if (pred_l[t] == gold_l[t]) ++correct;
      if (pred_l[t] != pred[t]) ++flipped;
      const std::string target = pi(tag.feature);
      r.original_score += mass(s, t, tag.feature);
      r.original_score_permuted += mass(s_l, t, tag.feature);
      r.target_score += mass(s, t, target);
      r.target_score_permuted += mass(s_l, t, target);
    }
  }
  if (r.tokens == 0) throw DataError("probe instances contain no entity tokens");
  const double n = double(r.tokens);
  r.accuracy = double(correct) / n;
  r.flip_rate = double(flipped) / n;
  r.original_score /= n;
  r.original_score_permuted /= n;
  r.target_score /= n;
  r.target_score_permuted /= n;
  return r;
}

std::string to_json(const PermutationProbe& p) {
  return nlohmann::json{{"entity_tokens", p.tokens},
                        {"permuted_accuracy", p.accuracy},
                        {"flip_rate", p.flip_rate},
                        {"original_score", p.original_score},
                        {"original_score_permuted", p.original_score_permuted},
                        {"target_score", p.target_score},
                        {"target_score_permuted", p.target_score_permuted}}
      .dump(2);
}

// ---------------------------------------------------------------------------
// Synthetic corpora

void validate(const SyntheticSpec& spec) {
  if (spec.features.size() < 2) throw UsageError("synthetic spec needs >= 2 features");
  if (spec.filler.empty()) throw DataError("synthetic spec has an empty filler vocabulary");
  if (spec.min_length == 0 || spec.min_length > spec.max_length) {
    throw UsageError("synthetic spec needs 1 <= min_length <= max_length");
  }
  if (!(spec.entity_rate >= 0.0 && spec.entity_rate <= 1.0)) {
    throw UsageError("entity rate must lie in [0, 1]");
  }
  std::set<std::string> seen(spec.filler.begin(), spec.filler.end());
  std::set<std::string> names;
  for (const auto& f : spec.features) {
    if (!valid_feature_name(f.name) || !names.insert(f.name).second) {
      throw UsageError("synthetic feature names must be valid and unique");
    }
    if (f.vocabulary.empty()) throw DataError("feature " + f.name + " has an empty vocabulary");
    for (const auto& entry : f.vocabulary) {
      std::istringstream words(entry);
      std::string w;
      bool any = false;
      while (words >> w) {
        any = true;
        if (!seen.insert(w).second) {
          throw DataError("word '" + w + "' appears in more than one vocabulary");
        }
      }
      if (!any) throw DataError("feature " + f.name + " has an empty vocabulary entry");
    }
  }
}

Corpus generate_synthetic_corpus(const SyntheticSpec& spec, std::uint64_t seed) {
  validate(spec);
  Rng rng(seed);
  Corpus corpus;
  for (std::size_t n = 0; n < spec.instances; ++n) {
    const std::size_t len =
        spec.min_length + rng.uniform_index(spec.max_length - spec.min_length + 1);
    std::vector<std::string> tokens, tags;
    for (std::size_t slot = 0; slot < len; ++slot) {
      if (rng.uniform_real() < spec.entity_rate) {
        const auto& f = spec.features[rng.uniform_index(spec.features.size())];
        std::istringstream words(f.vocabulary[rng.uniform_index(f.vocabulary.size())]);
        std::string w;
        bool first = true;
        while (words >> w) {
          tokens.push_back(w);
          tags.push_back(format_tag(first ? 'B' : 'I', f.name));
          first = false;
        }
      } else {
        tokens.push_back(spec.filler[rng.uniform_index(spec.filler.size())]);
        tags.emplace_back(kNil);
      }
    }
    auto inst = make_instance(std::to_string(n), std::move(tokens), std::move(tags));
    for (const auto& m : inst.markups) corpus.feature_set.insert(m.feature);
    corpus.instances.push_back(std::move(inst));
  }
  return corpus;
}

std::vector<std::string> morphological_vocabulary(std::string_view marker, std::size_t count,
                                                  std::uint64_t seed, MarkerPosition position) {
  static constexpr std::string_view kOnsets = "bdfgklmnprstvz";
  static constexpr std::string_view kVowels = "aeiou";
  Rng rng(derive_seed(seed, fnv1a(marker)));
  auto syllable = [&] {
    std::string s;
    s += kOnsets[rng.uniform_index(kOnsets.size())];
    s += kVowels[rng.uniform_index(kVowels.size())];
    return s;
  };
  std::set<std::string> seen;
  std::vector<std::string> out;
  std::size_t guard = 0;
  while (out.size() < count) {
    if (++guard > count * 1000) throw UsageError("cannot build that many distinct words");
    std::string w = syllable();
    if (rng.uniform_index(2)) w += syllable();
    w += marker;
    if (position == MarkerPosition::kInfix) w += syllable();
    w[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(w[0])));
    if (seen.insert(w).second) out.push_back(std::move(w));
  }
  return out;
}

namespace {

std::vector<std::string> default_filler() {
  return {"the",   "a",      "of",     "to",     "and",   "in",    "was",    "with",
          "for",   "on",     "said",   "after",  "before", "from", "by",     "at",
          "visited", "met",  "left",   "joined", "near",  "over",  "under",  "about",
          "today", "later",  "then",   "also",   "new",   "old",   "big",    "small",
          "report", "meeting", "trip", "season", "week",  "year",  "during", "while"};
}

}  // namespace

SyntheticSpec synthetic_preset(std::string_view name, std::size_t instances) {
  SyntheticSpec spec;
  spec.instances = instances;
  spec.filler = default_filler();
  struct Def {
    const char* feature;
    const char* marker;
  };
  auto build = [&](std::initializer_list<Def> defs, std::size_t words,
                   MarkerPosition pos = MarkerPosition::kInfix) {
    for (const auto& d : defs) {
      spec.features.push_back({d.feature, morphological_vocabulary(d.marker, words, 7, pos)});
    }
  };
  if (name == "vocab") {
    build({{"PER", "son"}, {"LOC", "vil"}, {"ORG", "cor"}, {"MISC", "ish"}}, 12,
          MarkerPosition::kSuffix);
    spec.min_length = 6;
    spec.max_length = 12;
    spec.entity_rate = 0.2;
  } else if (name == "permuted") {
    // Suffix markers make the class readable from lexical suffix features as
    // well as from the demonstration, so only a model trained to follow the
    // demonstration tracks a relabelled one.
    build({{"PER", "aldor"}, {"LOC", "enmik"}}, 40, MarkerPosition::kSuffix);
    spec.min_length = 5;
    spec.max_length = 10;
    spec.entity_rate = 0.25;
  } else if (name == "e2e") {
    build({{"PER", "aldor"}, {"LOC", "enmik"}, {"ORG", "ustav"}}, 150);
    spec.min_length = 6;
    spec.max_length = 12;
    spec.entity_rate = 0.2;
  } else {
    throw UsageError("unknown synthetic preset '" + std::string(name) +
                     "' (expected vocab, permuted or e2e)");
  }
  return spec;
}

}  // namespace demoner
