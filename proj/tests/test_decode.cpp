#include <doctest.h>

#include <cmath>

#include "demoner/decode.hpp"
#include "demoner/error.hpp"
#include "demoner/rng.hpp"
#include "oracles.hpp"

using namespace demoner;

namespace {

// Labels "O" plus B-/I- of the first (L-1)/2 features; L is odd.
LabelVocab vocab_of_size(std::size_t L) {
  FeatureSet fs;
  for (std::size_t f = 0; f < (L - 1) / 2; ++f) fs.insert(std::string(1, static_cast<char>('A' + f)));
  return LabelVocab(fs);
}

// Integer-valued scores so that ties are exact.
TransitionMatrix random_transitions(Rng& rng, const LabelVocab& vocab, bool constrained) {
  TransitionMatrix tm;
  tm.labels = vocab.labels();
  tm.log_probs.resize(tm.states() * tm.states());
  for (auto& v : tm.log_probs) v = -static_cast<double>(rng.uniform_index(3));
  if (constrained) constrain_bio(tm);
  return tm;
}

}  // namespace

TEST_SUITE("decode") {

TEST_CASE("label vocabulary") {
  const LabelVocab v({"PER", "LOC"});
  CHECK(v.labels() == std::vector<std::string>{"O", "B-LOC", "I-LOC", "B-PER", "I-PER"});
  CHECK(v.index("I-PER") == 4);
  CHECK(v.feature_slot(0) == std::string::npos);
  CHECK(v.feature_slot(3) == 1);
  CHECK(v.begin_index(1) == 3);
  CHECK(v.inside_index(0) == 2);
  CHECK_THROWS_AS(v.index("B-ORG"), DataError);
  CHECK(LabelVocab(FeatureSet{}).size() == 1);
}

TEST_CASE("transition estimation") {
  const LabelVocab v({"X"});
  const auto tm = estimate_transitions({{"B-X", "I-X", "O"}, {"O"}}, v, 0.5);
  CHECK(tm.states() == 5);
  for (std::size_t from = 0; from < tm.states(); ++from) {
    double total = 0.0;
    for (std::size_t to = 0; to < tm.states(); ++to) total += std::exp(tm.at(from, to));
    CHECK(total == doctest::Approx(1.0));
  }
  // START row: counts 1 to B-X and 1 to O, plus 0.5 on each of 5 cells.
  CHECK(std::exp(tm.at(tm.start(), v.index("O"))) == doctest::Approx(1.5 / 4.5));
  CHECK(std::exp(tm.at(v.index("B-X"), v.index("I-X"))) == doctest::Approx(1.5 / 3.5));
  CHECK_THROWS_AS(estimate_transitions({}, v), DataError);
  CHECK_THROWS_AS(estimate_transitions({{"O"}}, v, 0.0), UsageError);
  CHECK_THROWS_AS(estimate_transitions({{"B-Y"}}, v), DataError);
}

TEST_CASE("BIO constraints") {
  const LabelVocab v({"X", "Y"});
  auto tm = estimate_transitions({{"O"}}, v);
  constrain_bio(tm);
  const auto ix = v.index("I-X");
  CHECK(std::isinf(tm.at(tm.start(), ix)));
  CHECK(std::isinf(tm.at(v.index("O"), ix)));
  CHECK(std::isinf(tm.at(v.index("B-Y"), ix)));
  CHECK(std::isinf(tm.at(v.index("I-Y"), ix)));
  CHECK(std::isfinite(tm.at(v.index("B-X"), ix)));
  CHECK(std::isfinite(tm.at(v.index("I-X"), ix)));
  CHECK(std::isfinite(tm.at(v.index("I-X"), v.index("B-Y"))));

  // Emissions that favor an orphan I-X still decode to valid BIO.
  EmissionScores e;
  e.labels = v.labels();
  e.rows = 2;
  e.probs = {0.1, 0.1, 0.6, 0.1, 0.1, 0.1, 0.1, 0.6, 0.1, 0.1};
  const auto tags = viterbi_decode(e, tm);
  CHECK(repair_bio(tags) == tags);
}

TEST_CASE("viterbi matches exhaustive search, ties included") {
  Rng rng(2024);
  for (int c = 0; c < 120; ++c) {
    const std::size_t L = 1 + 2 * rng.uniform_index(4);
    const std::size_t n = 1 + rng.uniform_index(L > 5 ? 4 : 6);
    const auto vocab = vocab_of_size(L);
    const auto tm = random_transitions(rng, vocab, c % 2 == 0);
    std::vector<double> em(n * L);
    for (auto& v : em) v = -static_cast<double>(rng.uniform_index(3));
    const auto fast = viterbi_path(em, n, tm);
    const auto slow = oracle::brute_force_viterbi(em, n, tm);
    CHECK(fast == slow);
    CHECK(path_score(em, n, tm, fast) == path_score(em, n, tm, slow));
  }
}

TEST_CASE("viterbi tie rule on a flat problem") {
  const auto vocab = vocab_of_size(3);
  TransitionMatrix tm;
  tm.labels = vocab.labels();
  tm.log_probs.assign(tm.states() * tm.states(), 0.0);
  const std::vector<double> em(4 * 3, 0.0);
  CHECK(viterbi_path(em, 4, tm) == std::vector<std::size_t>{0, 0, 0, 0});
}

TEST_CASE("viterbi argument checks") {
  const auto vocab = vocab_of_size(3);
  TransitionMatrix tm;
  tm.labels = vocab.labels();
  tm.log_probs.assign(25, 0.0);
  CHECK_THROWS_AS(viterbi_path({}, 0, tm), DataError);
  CHECK_THROWS_AS(viterbi_path(std::vector<double>(5), 2, tm), DataError);
  EmissionScores e;
  e.labels = {"O"};
  e.rows = 1;
  e.probs = {1.0};
  CHECK_THROWS_AS(viterbi_decode(e, tm), DataError);
}

TEST_CASE("repair") {
  CHECK(repair_bio({"I-X", "I-X", "O", "I-Y", "B-X", "I-Y"}) ==
        std::vector<std::string>{"B-X", "I-X", "O", "B-Y", "B-X", "B-Y"});
  CHECK(repair_bio({}).empty());
}

}  // TEST_SUITE
