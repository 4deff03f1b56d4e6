#include <doctest.h>

#include <cmath>
#include <set>

#include <json.hpp>

#include "demoner/error.hpp"
#include "demoner/eval.hpp"
#include "helpers.hpp"

using namespace demoner;

namespace {

Prediction predict(const Instance& in, std::vector<std::string> tags) {
  Prediction p;
  p.id = in.id;
  p.tokens = in.tokens;
  p.tags = std::move(tags);
  p.markups = markups_from_tags(p.tokens, p.tags);
  return p;
}

}  // namespace

TEST_SUITE("eval") {

TEST_CASE("F1 from counts") {
  const auto r = f1_from_counts({3, 1, 2});
  CHECK(r.precision == doctest::Approx(0.75));
  CHECK(r.recall == doctest::Approx(0.6));
  CHECK(r.f1 == doctest::Approx(2 * 0.75 * 0.6 / 1.35));
  CHECK(f1_from_counts({0, 0, 0}).f1 == 0.0);
  CHECK(f1_from_counts({0, 2, 0}).precision == 0.0);
}

TEST_CASE("entity F1 requires exact spans and labels") {
  const auto gold = testing::mary();
  CHECK(entity_f1({gold}, {predict(gold, *gold.tags)}).f1 == 1.0);

  // Wrong boundary on New York, correct Mary.
  const auto r = entity_f1(
      {gold}, {predict(gold, {"B-PER", "O", "O", "O", "B-LOC", "O", "O", "O"})});
  CHECK(r.counts.tp == 1);
  CHECK(r.counts.fp == 1);
  CHECK(r.counts.fn == 1);
  CHECK(r.f1 == doctest::Approx(0.5));
  CHECK(r.per_feature.at("PER").f1 == 1.0);
  CHECK(r.per_feature.at("LOC").f1 == 0.0);

  // Right span, wrong label.
  const auto w = entity_f1(
      {gold}, {predict(gold, {"B-LOC", "O", "O", "B-LOC", "I-LOC", "O", "O", "O"})});
  CHECK(w.counts.tp == 1);
  CHECK(w.counts.fp == 1);

  auto other = predict(gold, *gold.tags);
  other.id = "zzz";
  CHECK_THROWS_AS(entity_f1({gold}, {other}), DataError);
  CHECK_THROWS_AS(entity_f1({gold}, {}), DataError);
  CHECK_THROWS_AS(entity_f1({gold}, {predict(gold, {"O"})}), DataError);
}

TEST_CASE("report rendering") {
  const auto gold = testing::mary();
  const auto r = entity_f1({gold}, {predict(gold, *gold.tags)});
  const auto j = nlohmann::json::parse(to_json(r));
  CHECK(j.at("f1") == 1.0);
  CHECK(j.at("per_feature").contains("LOC"));
  const auto table = to_table(r);
  CHECK(table.find("micro") != std::string::npos);
  CHECK(table.find("PER") != std::string::npos);
}

TEST_CASE("pearson correlation") {
  CHECK(pearson_correlation({1, 2, 3}, {2, 4, 6}) == doctest::Approx(1.0));
  CHECK(pearson_correlation({1, 2, 3}, {3, 2, 1}) == doctest::Approx(-1.0));
  CHECK(pearson_correlation({1, 2, 3, 4}, {1, 3, 2, 4}) == doctest::Approx(0.8));
  CHECK_THROWS_AS(pearson_correlation({1, 1}, {1, 2}), DataError);
  CHECK_THROWS_AS(pearson_correlation({1}, {1}), DataError);
}

TEST_CASE("predictor protocols with oracle and adversarial scorers") {
  const auto corpus = generate_synthetic_corpus(synthetic_preset("vocab", 200), 3);
  const std::vector<Instance> test(corpus.instances.begin(), corpus.instances.begin() + 100);
  const std::vector<Instance> pool(corpus.instances.begin() + 100, corpus.instances.end());

  const PairScoreFn truth = [](const Instance& a, const Instance& b) { return feature_jaccard(a, b); };
  const auto perfect = evaluate_predictor(truth, test, pool, 2000, 1);
  CHECK(perfect.binary_accuracy == 1.0);
  CHECK(perfect.ranking_accuracy == 1.0);
  CHECK(perfect.pearson == doctest::Approx(1.0));

  const PairScoreFn inverted = [](const Instance& a, const Instance& b) { return -feature_jaccard(a, b); };
  const auto worst = evaluate_predictor(inverted, test, pool, 2000, 1);
  CHECK(worst.binary_accuracy == 0.0);
  CHECK(worst.ranking_accuracy == 0.0);
  CHECK(worst.pearson == doctest::Approx(-1.0));

  const PairScoreFn constant = [](const Instance&, const Instance&) { return 0.5; };
  Rng rng(1);
  CHECK(binary_accuracy(constant, test, pool, 500, rng) == 0.0);
  CHECK(ranking_accuracy(constant, test, pool, 500, rng) == 0.0);
  CHECK_THROWS_AS(pearson(constant, test, pool, 500, rng), DataError);

  const auto again = evaluate_predictor(truth, test, pool, 2000, 1);
  CHECK(again.binary_accuracy == perfect.binary_accuracy);
  CHECK_THROWS_AS(binary_accuracy(truth, test, pool, 0, rng), UsageError);
  const auto j = nlohmann::json::parse(to_json(perfect));
  CHECK(j.at("trials") == 2000);
}

TEST_CASE("protocols fail cleanly without eligible pairs") {
  const std::vector<Instance> test = {testing::labeled("a", "x", {"B-X"})};
  const std::vector<Instance> pool = {testing::labeled("b", "y", {"B-X"})};
  const PairScoreFn s = [](const Instance&, const Instance&) { return 0.0; };
  Rng rng(0);
  CHECK_THROWS_AS(binary_accuracy(s, test, pool, 10, rng), DataError);
  CHECK_THROWS_AS(ranking_accuracy(s, test, pool, 10, rng), DataError);
}

TEST_CASE("synthetic corpora") {
  const auto spec = synthetic_preset("e2e", 50);
  const auto a = generate_synthetic_corpus(spec, 7);
  const auto b = generate_synthetic_corpus(spec, 7);
  CHECK(a.instances == b.instances);
  CHECK(a.instances.size() == 50);
  CHECK(a.feature_set == FeatureSet{"LOC", "ORG", "PER"});
  CHECK(generate_synthetic_corpus(spec, 8).instances != a.instances);

  // An instance's features are a function of its words.
  std::map<std::string, std::string> owner;
  for (const auto& f : spec.features) {
    for (const auto& w : f.vocabulary) owner[w] = f.name;
  }
  for (const auto& inst : a.instances) {
    CHECK(inst.tokens.size() >= spec.min_length);
    CHECK(inst.tokens.size() <= spec.max_length + 2);
    for (const auto& m : inst.markups) CHECK(owner.at(m.text) == m.feature);
  }
  // Rendered output parses back to the same corpus.
  const auto parsed = parse_conll(render_conll(a));
  REQUIRE(parsed.instances.size() == a.instances.size());
  CHECK(parsed.instances[3].markups == a.instances[3].markups);

  for (const char* name : {"vocab", "permuted", "e2e"}) CHECK_NOTHROW(validate(synthetic_preset(name, 10)));
  CHECK_THROWS_AS(synthetic_preset("nope", 10), UsageError);
  auto bad = spec;
  bad.features.pop_back();
  bad.features.pop_back();
  CHECK_THROWS_AS(validate(bad), UsageError);
  bad = spec;
  bad.features[1].vocabulary.push_back(bad.features[0].vocabulary[0]);
  CHECK_THROWS_AS(validate(bad), DataError);
}

TEST_CASE("morphological vocabularies") {
  const auto words = morphological_vocabulary("enmik", 30, 4, MarkerPosition::kSuffix);
  CHECK(words.size() == 30);
  CHECK(std::set<std::string>(words.begin(), words.end()).size() == 30);
  for (const auto& w : words) {
    CHECK(w.size() > 5);
    CHECK(w.substr(w.size() - 5) == "enmik");
    CHECK(std::isupper(static_cast<unsigned char>(w[0])));
  }
  const auto infix = morphological_vocabulary("ustav", 10, 4);
  for (const auto& w : infix) {
    CHECK(w.find("ustav") != std::string::npos);
    CHECK(w.substr(w.size() - 5) != "ustav");
  }
  CHECK(morphological_vocabulary("enmik", 30, 4, MarkerPosition::kSuffix) == words);
}

}  // TEST_SUITE
