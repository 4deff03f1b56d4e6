#include <doctest.h>

#include <map>
#include <set>

#include "demoner/adversarial.hpp"
#include "demoner/error.hpp"
#include "helpers.hpp"

using namespace demoner;

namespace {

Demonstration two_entry_demo() {
  Demonstration demo;
  demo.entries.push_back({"PER", 0, 0.9, testing::mary()});
  demo.entries.push_back({"ORG", 1, 0.4, testing::labeled("x", "at Acme", {"O", "B-ORG"})});
  return demo;
}

}  // namespace

TEST_SUITE("adversarial") {

TEST_CASE("permutation basics") {
  const LabelPermutation pi({{"PER", "LOC"}, {"LOC", "ORG"}, {"ORG", "PER"}});
  CHECK(pi("PER") == "LOC");
  CHECK(pi.map_tag("B-PER") == "B-LOC");
  CHECK(pi.map_tag("I-ORG") == "I-PER");
  CHECK(pi.map_tag("O") == "O");
  CHECK_FALSE(pi.is_identity());
  CHECK(compose(pi.inverse(), pi).is_identity());
  CHECK(compose(pi, pi.inverse()).is_identity());
  CHECK(compose(pi, pi)("PER") == "ORG");
  CHECK_THROWS_AS(pi("MISC"), DataError);
  CHECK_THROWS_AS(LabelPermutation({{"A", "B"}, {"B", "B"}}), DataError);
  CHECK_THROWS_AS(LabelPermutation(std::map<std::string, std::string>{{"A", "C"}}), DataError);
  CHECK_THROWS_AS(compose(pi, LabelPermutation::identity({"A", "B"})), DataError);
  CHECK(LabelPermutation::identity({"A", "B"}).is_identity());
}

TEST_CASE("sampled permutations") {
  const FeatureSet fs = {"A", "B", "C", "D"};
  Rng rng(7);
  std::map<std::map<std::string, std::string>, int> seen;
  for (int i = 0; i < 4600; ++i) {
    const auto pi = sample_label_permutation(fs, rng);
    CHECK_FALSE(pi.is_identity());
    CHECK(pi.domain() == fs);
    ++seen[pi.mapping()];
  }
  CHECK(seen.size() == 23);
  for (const auto& [m, count] : seen) {
    CHECK(count > 120);
    CHECK(count < 280);
  }
  for (int i = 0; i < 200; ++i) {
    const auto pi = sample_label_permutation(fs, rng, PermutationKind::kSwap);
    int moved = 0;
    for (const auto& [from, to] : pi.mapping()) moved += from != to;
    CHECK(moved == 2);
  }
  CHECK(sample_label_permutation({"A", "B"}, rng)("A") == "B");
  CHECK_THROWS_AS(sample_label_permutation({"A"}, rng), DataError);
}

TEST_CASE("group composition over random pairs") {
  const FeatureSet fs = {"A", "B", "C", "D", "E"};
  Rng rng(99);
  for (int i = 0; i < 100; ++i) {
    const auto p = sample_label_permutation(fs, rng);
    const auto q = sample_label_permutation(fs, rng);
    const auto pq = compose(p, q);
    for (const auto& f : fs) CHECK(pq(f) == p(q(f)));
    CHECK(compose(pq, compose(q.inverse(), p.inverse())).is_identity());
    CHECK(pq.inverse() == compose(q.inverse(), p.inverse()));
  }
}

TEST_CASE("example order permutation") {
  Rng rng(3);
  const auto demo = two_entry_demo();
  for (int i = 0; i < 20; ++i) {
    const auto p = permute_examples(demo, rng);
    REQUIRE(p.entries.size() == 2);
    CHECK(p.entries[0] == demo.entries[1]);
    CHECK(p.entries[1] == demo.entries[0]);
  }
  Demonstration one;
  one.entries.push_back(demo.entries[0]);
  CHECK(permute_examples(one, rng) == one);
  CHECK(permute_examples(Demonstration{}, rng).empty());
}

TEST_CASE("label permutation on a demonstrated input round trips") {
  const auto input = testing::labeled("in", "Bob met Acme", {"B-PER", "O", "B-ORG"});
  const auto d = demonstrated_input(input, two_entry_demo());
  const LabelPermutation pi({{"PER", "ORG"}, {"ORG", "LOC"}, {"LOC", "PER"}});
  const auto [pd, tags] = apply_label_permutation(d, *input.tags, pi);
  CHECK(tags == std::vector<std::string>{"B-ORG", "O", "B-LOC"});
  CHECK(pd.rendered.find("Mary is [ORG].") != std::string::npos);
  CHECK(pd.rendered.find("New York is [PER].") != std::string::npos);
  CHECK(pd.rendered.find("Acme is [LOC].") != std::string::npos);
  CHECK(pd.demonstration.entries[0].feature == "ORG");
  CHECK(pd.input.markups[0].feature == "ORG");

  const auto [back, back_tags] = apply_label_permutation(pd, tags, pi.inverse());
  CHECK(back == d);
  CHECK(back.rendered == d.rendered);
  CHECK(back_tags == *input.tags);
  CHECK_THROWS_AS(apply_label_permutation(d, {"O"}, pi), DataError);
}

TEST_CASE("loss combination") {
  const AdlConfig c{0.5, 0.25};
  CHECK(adl_loss(1.0, 2.0, 4.0, c) == doctest::Approx(0.5 + 0.5 * (0.75 * 2.0 + 0.25 * 4.0)));
  CHECK(adl_loss(1.0, 2.0, 4.0, AdlConfig{1.0, 0.4}) == 1.0);
  const auto w = adl_weights(c);
  CHECK(w[0] + w[1] + w[2] == doctest::Approx(1.0));
  CHECK(w[1] == doctest::Approx(0.375));
  CHECK_THROWS_AS(adl_loss(1.0, std::numeric_limits<double>::infinity(), 0.0, c), TrainingDivergence);
  CHECK_THROWS_AS(validate(AdlConfig{1.2, 0.4}), UsageError);
  CHECK_THROWS_AS(validate(AdlConfig{0.5, -0.1}), UsageError);
}

}  // TEST_SUITE
