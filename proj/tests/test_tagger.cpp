#include <doctest.h>

#include <cmath>

#include "demoner/error.hpp"
#include "demoner/eval.hpp"
#include "demoner/tagger.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace demoner;

namespace {

TaggerConfig small_config() {
  TaggerConfig c;
  c.hash_buckets = 64;
  return c;
}

Demonstration mary_demo() {
  Demonstration demo;
  demo.entries.push_back({"PER", 0, 1.0, testing::mary()});
  return demo;
}

FewShotSplit tiny_split() {
  FewShotSplit s;
  s.k = 1;
  s.train = {testing::mary(),
             testing::labeled("1", "John works at Acme", {"B-PER", "O", "O", "B-ORG"}),
             testing::labeled("2", "Paris is near Berlin", {"B-LOC", "O", "O", "B-LOC"}),
             testing::labeled("3", "Acme hired Anna", {"B-ORG", "O", "B-PER"})};
  return s;
}

}  // namespace

TEST_SUITE("tagger") {

TEST_CASE("char trigram jaccard") {
  CHECK(char_trigram_jaccard("abc", "abc") == 1.0);
  CHECK(char_trigram_jaccard("abc", "xyz") == 0.0);
  const double j = char_trigram_jaccard("Yorkshire", "York");
  CHECK(j > 0.0);
  CHECK(j < 1.0);
  CHECK(j == char_trigram_jaccard("York", "Yorkshire"));
}

TEST_CASE("copy similarities follow the demonstration labels") {
  const LabelVocab vocab({"LOC", "PER"});
  const auto input = make_unlabeled("in", {"Mary", "visited", "York"});
  const auto d = demonstrated_input(input, mary_demo());
  const auto copy = copy_similarities(d, vocab, small_config());
  REQUIRE(copy.size() == 3);
  CHECK(copy[0][1] == doctest::Approx(1.0));
  CHECK(copy[2][0] > copy[2][1]);
  CHECK(copy[1][1] < copy[0][1]);

  const LabelPermutation swap({{"LOC", "PER"}, {"PER", "LOC"}});
  const auto [pd, unused] = apply_label_permutation(d, {"O", "O", "O"}, swap);
  const auto swapped = copy_similarities(pd, vocab, small_config());
  for (std::size_t t = 0; t < 3; ++t) {
    CHECK(swapped[t][0] == copy[t][1]);
    CHECK(swapped[t][1] == copy[t][0]);
  }

  const auto plain = copy_similarities(demonstrated_input(input, {}), vocab, small_config());
  for (const auto& row : plain) CHECK(row == std::vector<double>{0.0, 0.0});
}

TEST_CASE("features and scores") {
  ReferenceTagger m(LabelVocab({"LOC", "PER"}), small_config());
  CHECK(m.feature_dim() == 66);
  CHECK(m.parameter_count() == 5 * 66);
  const auto d = demonstrated_input(testing::labeled("x", "Bob ran", {"B-PER", "O"}), mary_demo());
  const auto f = m.extract(d);
  REQUIRE(f.size() == 2);
  CHECK(f[0].copy.size() == 2);
  CHECK(std::is_sorted(f[0].lexical.begin(), f[0].lexical.end()));
  const auto s = m.token_scores(f);
  CHECK(s.rows == 2);
  for (std::size_t y = 0; y < 5; ++y) CHECK(s.at(0, y) == doctest::Approx(0.2));
  CHECK(m.loss(f, {"B-PER", "O"}) == doctest::Approx(std::log(5.0)));
  CHECK_THROWS_AS(m.loss(f, {"O"}), DataError);
  CHECK_THROWS_AS(ReferenceTagger(LabelVocab({"X"}), TaggerConfig{0}), UsageError);
}

TEST_CASE("gradient matches central differences") {
  ReferenceTagger m(LabelVocab({"LOC", "PER"}), small_config());
  const auto input = testing::labeled("x", "Mary flew to York today", {"B-PER", "O", "O", "B-LOC", "O"});
  const auto f = m.extract(demonstrated_input(input, mary_demo()));
  const auto& gold = *input.tags;
  Rng rng(17);
  const double h = 1e-6;
  for (int point = 0; point < 20; ++point) {
    for (auto& w : m.weights()) w = rng.uniform_real() - 0.5;
    std::vector<double> grad;
    const double loss = m.loss_and_gradient(f, gold, grad);
    CHECK(loss == doctest::Approx(m.loss(f, gold)));
    auto objective = [&](const std::vector<double>& w) {
      ReferenceTagger probe = m;
      probe.weights() = w;
      return probe.loss(f, gold);
    };
    for (std::size_t i = 0; i < grad.size(); i += 3) {
      const double num = oracle::central_difference(objective, m.weights(), i, h);
      if (std::abs(num) < 1e-9 && std::abs(grad[i]) < 1e-9) continue;
      CHECK(oracle::relative_error(grad[i], num) <= 1e-4);
    }
  }
}

TEST_CASE("apply_step is a gradient step") {
  ReferenceTagger m(LabelVocab({"LOC", "PER"}), small_config());
  Rng rng(4);
  for (auto& w : m.weights()) w = rng.uniform_real() - 0.5;
  const auto input = testing::labeled("x", "Mary flew", {"B-PER", "O"});
  const auto f = m.extract(demonstrated_input(input, mary_demo()));
  std::vector<double> grad;
  m.loss_and_gradient(f, *input.tags, grad);
  auto expected = m.weights();
  for (std::size_t i = 0; i < grad.size(); ++i) expected[i] -= 0.3 * grad[i];
  m.apply_step(f, {m.vocab().index("B-PER"), 0}, m.token_scores(f), 0.3);
  for (std::size_t i = 0; i < grad.size(); ++i) CHECK(m.weights()[i] == doctest::Approx(expected[i]));
}

TEST_CASE("training") {
  const auto split = tiny_split();
  const auto pool = build_pool(split.train, collect_features(split.train));
  const auto scorer = pairwise_scorer([](const Instance& a, const Instance& b) {
    return feature_jaccard(FeatureSet{a.tokens.begin(), a.tokens.end()},
                           FeatureSet{b.tokens.begin(), b.tokens.end()});
  });
  TaggerTrainOptions opts;
  opts.epochs = 8;
  opts.seed = 9;

  const auto a = train_tagger(split, &pool, scorer, opts, small_config());
  const auto b = train_tagger(split, &pool, scorer, opts, small_config());
  CHECK(a.model == b.model);
  CHECK(a.report.epochs_run == 8);
  CHECK(a.report.epoch_loss.back() < a.report.epoch_loss.front());
  CHECK(a.model.vocab().features() == std::vector<std::string>{"LOC", "ORG", "PER"});
  CHECK(std::isinf(a.transitions.at(a.transitions.start(), a.model.vocab().index("I-LOC"))));

  SUBCASE("alpha = 1 ignores beta and the permutation kind") {
    auto o1 = opts, o2 = opts;
    o1.adl = {1.0, 0.0, PermutationKind::kUniform};
    o2.adl = {1.0, 0.9, PermutationKind::kSwap};
    const auto m1 = train_tagger(split, &pool, scorer, o1, small_config());
    const auto m2 = train_tagger(split, &pool, scorer, o2, small_config());
    CHECK(m1.model.weights() == m2.model.weights());
    CHECK(m1.model.weights() != a.model.weights());
  }

  SUBCASE("baseline without demonstrations") {
    auto o = opts;
    o.use_demonstrations = false;
    const auto base = train_tagger(split, nullptr, {}, o, small_config());
    CHECK(base.report.epochs_run == 8);
    const auto& w = base.model.weights();
    const std::size_t D = base.model.feature_dim(), H = small_config().hash_buckets;
    for (std::size_t y = 0; y < base.model.vocab().size(); ++y) {
      for (std::size_t f = H; f < D; ++f) CHECK(w[y * D + f] == 0.0);
    }
  }

  SUBCASE("early stopping keeps the best epoch") {
    auto o = opts;
    o.epochs = 30;
    o.patience = 2;
    FewShotSplit s = split;
    s.validation = {testing::labeled("v", "Anna met John", {"B-PER", "O", "B-PER"})};
    const auto t = train_tagger(s, &pool, scorer, o, small_config());
    CHECK(t.report.validation_f1.size() == t.report.epochs_run);
    CHECK(t.report.best_epoch >= 1);
    CHECK(t.report.best_epoch <= t.report.epochs_run);
  }

  SUBCASE("errors") {
    CHECK_THROWS_AS(train_tagger(FewShotSplit{}, &pool, scorer, opts), DataError);
    CHECK_THROWS_AS(train_tagger(split, nullptr, scorer, opts), DataError);
    auto o = opts;
    o.epochs = 0;
    CHECK_THROWS_AS(train_tagger(split, &pool, scorer, o), UsageError);
    o = opts;
    o.adl.alpha = 2.0;
    CHECK_THROWS_AS(train_tagger(split, &pool, scorer, o), UsageError);
  }
}

TEST_CASE("demonstration labels steer a trained model") {
  const auto corpus = generate_synthetic_corpus(synthetic_preset("permuted", 120), 5);
  const auto split = sample_few_shot(corpus, 20, 1);
  const auto pool = build_pool(split.train, corpus.feature_set);
  const auto scorer = pairwise_scorer([](const Instance&, const Instance&) { return 0.0; });
  TaggerTrainOptions opts;
  opts.epochs = 30;
  opts.adl = {0.5, 0.5};
  const auto t = train_tagger(split, &pool, scorer, opts);
  const auto probe = permutation_probe(t.model, t.transitions, split.validation, pool, scorer, 3,
                                       PermutationKind::kSwap);
  CHECK(probe.tokens > 0);
  CHECK(probe.flip_rate > 0.5);
  CHECK(probe.target_score_permuted > probe.target_score);
}

}  // TEST_SUITE
