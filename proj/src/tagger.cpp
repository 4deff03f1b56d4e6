#include "demoner/tagger.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "demoner/error.hpp"
#include "demoner/eval.hpp"
#include "demoner/rng.hpp"

namespace demoner {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) {
    if (static_cast<unsigned char>(c) < 0x80) c = static_cast<char>(std::tolower(c));
  }
  return out;
}

std::string shape(std::string_view w) {
  std::string out;
  for (unsigned char c : w) {
    char k = c;
    if (c >= 'A' && c <= 'Z') k = 'X';
    else if (c >= 'a' && c <= 'z') k = 'x';
    else if (c >= '0' && c <= '9') k = 'd';
    if (out.empty() || out.back() != k) out += k;
  }
  return out;
}

std::vector<std::uint64_t> trigrams(std::string_view s) {
  std::string padded = "\x02" + lower(s) + "\x03";
  std::vector<std::uint64_t> out;
  for (std::size_t i = 0; i + 3 <= padded.size(); ++i) {
    out.push_back(fnv1a(std::string_view(padded).substr(i, 3)));
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

double jaccard_sorted(const std::vector<std::uint64_t>& a,
                      const std::vector<std::uint64_t>& b) {
  std::size_t i = 0, j = 0, inter = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] == b[j]) {
      ++inter;
      ++i;
      ++j;
    } else if (a[i] < b[j]) {
      ++i;
    } else {
      ++j;
    }
  }
  const std::size_t uni = a.size() + b.size() - inter;
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

std::uint32_t bucket(std::string_view feature, std::size_t buckets) {
  return static_cast<std::uint32_t>(fnv1a(feature) % buckets);
}

}  // namespace

double char_trigram_jaccard(std::string_view a, std::string_view b) {
  return jaccard_sorted(trigrams(a), trigrams(b));
}

std::vector<std::vector<double>> copy_similarities(const DemonstratedInput& d,
                                                   const LabelVocab& vocab,
                                                   const TaggerConfig& config) {
  const auto& features = vocab.features();
  const auto& tokens = d.input.tokens;
  std::vector<std::vector<double>> out(tokens.size(),
                                       std::vector<double>(features.size(), 0.0));
  if (d.clauses.empty()) return out;

  struct Span {
    std::size_t slot;
    std::vector<std::uint64_t> grams;
    EmbeddingVector emb;
  };
  std::vector<Span> spans;
  for (const auto& c : d.clauses) {
    auto it = std::find(features.begin(), features.end(), c.label);
    if (it == features.end()) continue;
    spans.push_back({static_cast<std::size_t>(it - features.begin()), trigrams(c.text),
                     encode_hashed_ngram(c.text, config.copy_embedding_dim)});
  }
  if (spans.empty()) return out;

  const std::size_t n = tokens.size();
  const std::size_t width = std::max<std::size_t>(config.max_window, 1);
  // Similarity of every window [a, b) to every span, computed once.
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b <= std::min(n, a + width); ++b) {
      const std::string text = join_tokens(tokens, a, b);
      const auto grams = trigrams(text);
      const auto emb = encode_hashed_ngram(text, config.copy_embedding_dim);
      std::vector<double> best(features.size(), 0.0);
      for (const auto& s : spans) {
        const double sim = 0.5 * jaccard_sorted(grams, s.grams) + 0.5 * cosine(emb, s.emb);
        best[s.slot] = std::max(best[s.slot], sim);
      }
      for (std::size_t t = a; t < b; ++t) {
        for (std::size_t f = 0; f < features.size(); ++f) {
          out[t][f] = std::max(out[t][f], best[f]);
        }
      }
    }
  }
  return out;
}

ReferenceTagger::ReferenceTagger(LabelVocab vocab, TaggerConfig config)
    : vocab_(std::move(vocab)), config_(config) {
  if (config_.hash_buckets == 0) throw UsageError("tagger needs hash_buckets > 0");
  weights_.assign(vocab_.size() * feature_dim(), 0.0);
}

std::vector<TokenFeatures> ReferenceTagger::extract(const DemonstratedInput& d) const {
  const auto& tokens = d.input.tokens;
  const std::size_t n = tokens.size();
  const std::size_t H = config_.hash_buckets;
  auto context = [&](std::ptrdiff_t i) -> std::string {
    if (i < 0) return "<s>";
    if (i >= static_cast<std::ptrdiff_t>(n)) return "</s>";
    return lower(tokens[static_cast<std::size_t>(i)]);
  };

  const auto copy = copy_similarities(d, vocab_, config_);
  std::vector<TokenFeatures> out(n);
  for (std::size_t t = 0; t < n; ++t) {
    const std::string& w = tokens[t];
    const std::string lw = lower(w);
    auto& lex = out[t].lexical;
    lex.push_back(bucket("bias", H));
    lex.push_back(bucket("w:" + lw, H));
    lex.push_back(bucket("W:" + w, H));
    lex.push_back(bucket("sh:" + shape(w), H));
    for (std::size_t k = 1; k <= 3 && k <= lw.size(); ++k) {
      lex.push_back(bucket("p" + std::to_string(k) + ":" + lw.substr(0, k), H));
      lex.push_back(bucket("s" + std::to_string(k) + ":" + lw.substr(lw.size() - k), H));
    }
    if (!w.empty() && w[0] >= 'A' && w[0] <= 'Z') lex.push_back(bucket("cap", H));
    const auto ti = static_cast<std::ptrdiff_t>(t);
    lex.push_back(bucket("w-1:" + context(ti - 1), H));
    lex.push_back(bucket("w+1:" + context(ti + 1), H));
    lex.push_back(bucket("w-2:" + context(ti - 2), H));
    lex.push_back(bucket("w+2:" + context(ti + 2), H));
    std::sort(lex.begin(), lex.end());
    lex.erase(std::unique(lex.begin(), lex.end()), lex.end());

    out[t].copy = copy[t];
    for (auto& c : out[t].copy) c *= config_.copy_scale;
  }
  return out;
}

double ReferenceTagger::logit(const TokenFeatures& x, std::size_t label) const {
  const std::size_t D = feature_dim();
  const double* row = weights_.data() + label * D;
  double z = 0.0;
  for (auto i : x.lexical) z += row[i];
  for (std::size_t f = 0; f < x.copy.size(); ++f) z += row[config_.hash_buckets + f] * x.copy[f];
  return z;
}

EmissionScores ReferenceTagger::token_scores(const std::vector<TokenFeatures>& features) const {
  EmissionScores out;
  out.labels = vocab_.labels();
  out.rows = features.size();
  const std::size_t L = vocab_.size();
  out.probs.resize(out.rows * L);
  std::vector<double> z(L);
  for (std::size_t t = 0; t < features.size(); ++t) {
    for (std::size_t y = 0; y < L; ++y) z[y] = logit(features[t], y);
    const double top = *std::max_element(z.begin(), z.end());
    double total = 0.0;
    for (std::size_t y = 0; y < L; ++y) {
      z[y] = std::exp(z[y] - top);
      total += z[y];
    }
    for (std::size_t y = 0; y < L; ++y) out.probs[t * L + y] = z[y] / total;
  }
  return out;
}

EmissionScores ReferenceTagger::token_scores(const DemonstratedInput& d) const {
  return token_scores(extract(d));
}

double ReferenceTagger::loss(const std::vector<TokenFeatures>& features,
                             const std::vector<std::string>& gold) const {
  if (features.size() != gold.size() || features.empty()) {
    throw DataError("gold tags are not aligned with the input tokens");
  }
  const auto probs = token_scores(features);
  double total = 0.0;
  for (std::size_t t = 0; t < features.size(); ++t) {
    total -= std::log(probs.at(t, vocab_.index(gold[t])));
  }
  return total / static_cast<double>(features.size());
}

double ReferenceTagger::loss_and_gradient(const std::vector<TokenFeatures>& features,
                                          const std::vector<std::string>& gold,
                                          std::vector<double>& gradient) const {
  if (features.size() != gold.size() || features.empty()) {
    throw DataError("gold tags are not aligned with the input tokens");
  }
  gradient.assign(weights_.size(), 0.0);
  const auto probs = token_scores(features);
  const std::size_t L = vocab_.size(), D = feature_dim(), H = config_.hash_buckets;
  const double inv_n = 1.0 / static_cast<double>(features.size());
  double total = 0.0;
  for (std::size_t t = 0; t < features.size(); ++t) {
    const auto g = vocab_.index(gold[t]);
    total -= std::log(probs.at(t, g));
    for (std::size_t y = 0; y < L; ++y) {
      const double r = (probs.at(t, y) - (y == g ? 1.0 : 0.0)) * inv_n;
      double* row = gradient.data() + y * D;
      for (auto i : features[t].lexical) row[i] += r;
      for (std::size_t f = 0; f < features[t].copy.size(); ++f) {
        row[H + f] += r * features[t].copy[f];
      }
    }
  }
  return total * inv_n;
}

void ReferenceTagger::apply_step(const std::vector<TokenFeatures>& features,
                                 const std::vector<std::size_t>& gold,
                                 const EmissionScores& probs, double step) {
  const std::size_t L = vocab_.size(), D = feature_dim(), H = config_.hash_buckets;
  const double scale = step / static_cast<double>(features.size());
  for (std::size_t t = 0; t < features.size(); ++t) {
    for (std::size_t y = 0; y < L; ++y) {
      const double r = (probs.at(t, y) - (y == gold[t] ? 1.0 : 0.0)) * scale;
      double* row = weights_.data() + y * D;
      for (auto i : features[t].lexical) row[i] -= r;
      for (std::size_t f = 0; f < features[t].copy.size(); ++f) {
        row[H + f] -= r * features[t].copy[f];
      }
    }
  }
}

DemonstratedInput make_demonstrated(const Instance& input, const DemoPool* pool,
                                    const PoolScores* scores, Rng& rng) {
  if (!pool) return demonstrated_input(input, {});
  return demonstrated_input(input, select_demonstration(*pool, input, *scores, rng));
}

TransitionMatrix training_transitions(const std::vector<Instance>& train,
                                      const LabelVocab& vocab, double smoothing) {
  std::vector<std::vector<std::string>> seqs;
  for (const auto& inst : train) {
    if (inst.tags) seqs.push_back(*inst.tags);
  }
  auto tm = estimate_transitions(seqs, vocab, smoothing);
  constrain_bio(tm);
  return tm;
}

namespace {

constexpr std::uint64_t kOrderStream = 0x6f72646572ULL;
constexpr std::uint64_t kValidationStream = 0x76616c6964ULL;

struct Branch {
  std::vector<TokenFeatures> features;
  std::vector<std::size_t> gold;
  EmissionScores probs;
  double loss = 0.0;
};

Branch forward(const ReferenceTagger& model, const DemonstratedInput& d,
               const std::vector<std::string>& tags) {
  Branch b;
  b.features = model.extract(d);
  for (const auto& t : tags) b.gold.push_back(model.vocab().index(t));
  b.probs = model.token_scores(b.features);
  for (std::size_t t = 0; t < b.gold.size(); ++t) b.loss -= std::log(b.probs.at(t, b.gold[t]));
  b.loss /= static_cast<double>(b.gold.size());
  return b;
}

double validation_f1(const ReferenceTagger& model, const TransitionMatrix& tm,
                     const std::vector<Instance>& validation, const DemoPool* pool,
                     const std::vector<PoolScores>& scores, std::uint64_t seed) {
  std::vector<std::vector<Markup>> gold, pred;
  for (std::size_t i = 0; i < validation.size(); ++i) {
    Rng rng(derive_seed(seed, kValidationStream, i));
    const auto d = make_demonstrated(validation[i], pool, pool ? &scores[i] : nullptr, rng);
    const auto tags = repair_bio(viterbi_decode(model.token_scores(d), tm));
    gold.push_back(validation[i].markups);
    pred.push_back(markups_from_tags(validation[i].tokens, tags));
  }
  return span_f1(gold, pred).f1;
}

}  // namespace

TrainedTagger train_tagger(const FewShotSplit& split, const DemoPool* pool,
                           const PoolScorer& scorer, const TaggerTrainOptions& options,
                           const TaggerConfig& config) {
  validate(options.adl);
  if (split.train.empty()) throw DataError("training split is empty");
  if (options.epochs == 0) throw UsageError("epochs must be positive");
  if (!(options.learning_rate > 0.0)) throw UsageError("learning rate must be positive");
  if (options.use_demonstrations && !pool) {
    throw DataError("demonstration training needs a demonstration pool");
  }
  const DemoPool* demo_pool = options.use_demonstrations ? pool : nullptr;
  const auto weights = adl_weights(options.adl);
  const bool adversarial = options.adl.alpha < 1.0;

  FeatureSet features = collect_features(split.train);
  if (demo_pool) {
    for (const auto& f : demo_pool->features()) features.insert(f);
  }
  if (adversarial && weights[2] > 0.0 && features.size() < 2) {
    throw DataError("label permutation needs at least 2 features");
  }

  TrainedTagger out;
  out.model = ReferenceTagger(LabelVocab(features), config);
  out.transitions = training_transitions(split.train, out.model.vocab(),
                                         options.transition_smoothing);

  // Pool scores depend only on the input, so they are computed once.
  std::vector<PoolScores> train_scores, val_scores;
  if (demo_pool) {
    for (const auto& inst : split.train) train_scores.push_back(score_pool(*demo_pool, inst, scorer));
  }
  const bool early_stop = options.patience > 0 && !split.validation.empty();
  if (early_stop && demo_pool) {
    for (const auto& inst : split.validation) val_scores.push_back(score_pool(*demo_pool, inst, scorer));
  }

  for (const auto& inst : split.train) {
    if (!inst.tags) throw DataError("training instance " + inst.id + " is unlabeled");
  }

  std::vector<double> best_weights;
  double best_f1 = -1.0;
  std::vector<std::size_t> order(split.train.size());
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng order_rng(derive_seed(options.seed, kOrderStream, epoch));
    order_rng.shuffle(std::span(order));

    double epoch_loss = 0.0;
    for (auto i : order) {
      const Instance& inst = split.train[i];
      const std::uint64_t stream = epoch * split.train.size() + i;
      Rng demo_rng(derive_seed(options.seed, stream, 0));
      const auto d = make_demonstrated(inst, demo_pool,
                                       demo_pool ? &train_scores[i] : nullptr, demo_rng);
      auto main = forward(out.model, d, *inst.tags);
      double combined = main.loss;
      if (adversarial) {
        Rng adv_rng(derive_seed(options.seed, stream, 1));
        const auto d_e = demonstrated_input(inst, permute_examples(d.demonstration, adv_rng));
        auto ex = forward(out.model, d_e, *inst.tags);

        Branch lab;
        if (weights[2] > 0.0) {
          const auto pi = sample_label_permutation(features, adv_rng, options.adl.permutation);
          const auto [d_l, gold_l] = apply_label_permutation(d, *inst.tags, pi);
          lab = forward(out.model, d_l, gold_l);
        }
        combined = adl_loss(main.loss, ex.loss, lab.loss, options.adl);
        if (!std::isfinite(combined)) {
          throw TrainingDivergence("tagger loss became non-finite at epoch " +
                                   std::to_string(epoch + 1));
        }
        out.model.apply_step(main.features, main.gold, main.probs,
                             options.learning_rate * weights[0]);
        out.model.apply_step(ex.features, ex.gold, ex.probs, options.learning_rate * weights[1]);
        if (weights[2] > 0.0) {
          out.model.apply_step(lab.features, lab.gold, lab.probs,
                               options.learning_rate * weights[2]);
        }
      } else {
        if (!std::isfinite(combined)) {
          throw TrainingDivergence("tagger loss became non-finite at epoch " +
                                   std::to_string(epoch + 1));
        }
        out.model.apply_step(main.features, main.gold, main.probs, options.learning_rate);
      }
      epoch_loss += combined;
    }
    out.report.epoch_loss.push_back(epoch_loss / static_cast<double>(split.train.size()));
    out.report.epochs_run = epoch + 1;

    if (early_stop) {
      const double f1 = validation_f1(out.model, out.transitions, split.validation, demo_pool,
                                      val_scores, options.seed);
      out.report.validation_f1.push_back(f1);
      if (f1 > best_f1) {
        best_f1 = f1;
        best_weights = out.model.weights();
        out.report.best_epoch = epoch + 1;
      } else if (epoch + 1 - out.report.best_epoch >= options.patience) {
        break;
      }
    }
  }
  if (early_stop) {
    out.model.weights() = std::move(best_weights);
  } else {
    out.report.best_epoch = out.report.epochs_run;
  }
  return out;
}

}  // namespace demoner
