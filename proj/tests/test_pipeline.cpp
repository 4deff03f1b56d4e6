#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "demoner/error.hpp"
#include "demoner/model_io.hpp"
#include "demoner/pipeline.hpp"
#include "helpers.hpp"

using namespace demoner;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / ("demoner_pipeline_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

RunConfig quick_config() {
  RunConfig c;
  c.k_shot = 5;
  c.epochs = 10;
  c.featsim_epochs = 40;
  c.featsim_buckets = 256;
  c.ensemble_k = 3;
  c.tagger.hash_buckets = 1024;
  c.set_seed(7);
  return c;
}

struct Data {
  Corpus train = generate_synthetic_corpus(synthetic_preset("e2e", 120), 1);
  Corpus test = generate_synthetic_corpus(synthetic_preset("e2e", 20), 2);
};

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("run config JSON") {
  RunConfig c = quick_config();
  c.permutation = PermutationKind::kSwap;
  c.granularity = VoteGranularity::kSpan;
  c.normalization = Normalization::kNone;
  c.encoder = "http://127.0.0.1:9/embed";
  CHECK(run_config_from_json(to_json(c)) == c);
  CHECK(run_config_from_json(nlohmann::json::object()) == RunConfig{});

  const auto partial = run_config_from_json({{"k_shot", 3}, {"alpha", 1.0}});
  CHECK(partial.k_shot == 3);
  CHECK(partial.alpha == 1.0);
  CHECK_FALSE(partial.adl_enabled());
  CHECK(RunConfig{}.adl_enabled());

  CHECK_THROWS_AS(run_config_from_json({{"kshot", 3}}), DataError);
  CHECK_THROWS_AS(run_config_from_json({{"k_shot", "many"}}), DataError);
  CHECK_THROWS_AS(run_config_from_json({{"vote", "plurality"}}), UsageError);
  CHECK_THROWS_AS(run_config_from_json(nlohmann::json::array()), DataError);

  RunConfig s;
  s.set_seed(42);
  CHECK(s.split_seed == 42);
  CHECK(s.ensemble_seed == 42);
}

TEST_CASE("run config validation") {
  auto bad = [](auto mutate) {
    RunConfig c;
    mutate(c);
    return c;
  };
  CHECK_NOTHROW(validate(RunConfig{}));
  CHECK_THROWS_AS(validate(bad([](RunConfig& c) { c.k_shot = 0; })), UsageError);
  CHECK_THROWS_AS(validate(bad([](RunConfig& c) { c.gamma = 1.5; })), UsageError);
  CHECK_THROWS_AS(validate(bad([](RunConfig& c) { c.alpha = -0.1; })), UsageError);
  CHECK_THROWS_AS(validate(bad([](RunConfig& c) { c.ensemble_k = 0; })), UsageError);
  CHECK_THROWS_AS(validate(bad([](RunConfig& c) { c.learning_rate = 0; })), UsageError);
  CHECK_THROWS_AS(validate(bad([](RunConfig& c) { c.encoder = "ftp://x"; })), UsageError);
  CHECK_THROWS_AS(validate(bad([](RunConfig& c) { c.encoder_dim = 4; })), UsageError);
}

TEST_CASE("cache path resolution") {
  RunConfig c;
  c.cache_path = "from-config.bin";
  ::unsetenv(kCacheEnv);
  CHECK(effective_cache_path(c) == "from-config.bin");
  ::setenv(kCacheEnv, "from-env.bin", 1);
  CHECK(effective_cache_path(c) == "from-env.bin");
  ::setenv(kCacheEnv, "", 1);
  CHECK(effective_cache_path(c) == "from-config.bin");
  ::unsetenv(kCacheEnv);
}

TEST_CASE("predictions render and parse") {
  const auto gold = testing::mary();
  Prediction p{gold.id, gold.tokens, *gold.tags, gold.markups, {}};
  Prediction q{"2", {"x", "y"}, {"O", "B-ORG"}, markups_from_tags({"x", "y"}, {"O", "B-ORG"}), {}};
  const auto jsonl = render_predictions_jsonl({p, q});
  const auto first = nlohmann::json::parse(jsonl.substr(0, jsonl.find('\n')));
  CHECK(first.at("markups").at(1).at("text") == "New York");
  CHECK(first.at("markups").at(1).at("start") == 3);

  const auto from_jsonl = parse_predictions(jsonl);
  const auto from_conll = parse_predictions(render_predictions_conll({p, q}));
  REQUIRE(from_jsonl.size() == 2);
  REQUIRE(from_conll.size() == 2);
  CHECK(from_jsonl[0].id == "mary");
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(from_jsonl[i].tags == from_conll[i].tags);
    CHECK(from_jsonl[i].markups == from_conll[i].markups);
  }
  CHECK_THROWS_AS(parse_predictions("{\"id\": \"a\"}\n"), DataError);
  CHECK_THROWS_AS(parse_predictions("{\"id\":\"a\",\"tokens\":[\"x\"],\"tags\":[]}\n"), DataError);
}

TEST_CASE("corpus summary and content hash") {
  Corpus c;
  c.instances = {testing::mary(), testing::labeled("b", "Paris", {"B-LOC"})};
  c.feature_set = collect_features(c.instances);
  const auto s = summarize(c);
  CHECK(s.at("instances") == 2);
  CHECK(s.at("tokens") == 9);
  CHECK(s.at("per_feature").at("LOC").at("instances") == 2);

  const auto dir = fresh_dir("hash");
  write_text_file(dir / "h.txt", "hello\n");
  // Same digest as `git hash-object` in a sha256 repository.
  CHECK(content_hash(dir / "h.txt") ==
        "2cf8d83d9ee29543b34a87727421fdecb7e3f3a183d337639025de576db9ebb4");
  CHECK_THROWS_AS(content_hash(dir / "missing"), DataError);

  const auto m = make_manifest("train", quick_config(), {dir / "h.txt"}, {});
  CHECK(m.at("command") == "train");
  CHECK(m.at("seeds").at("split") == 7);
  CHECK(m.at("inputs").at(0).at("sha256") == content_hash(dir / "h.txt"));
  CHECK(run_config_from_json(m.at("config")) == quick_config());
  fs::remove_all(dir);
}

TEST_CASE("train, save, load and tag") {
  Data data;
  const auto config = quick_config();
  const auto p = train_pipeline(config, data.train);
  REQUIRE(p.featsim);
  const auto preds = p.tag(data.test.instances);
  REQUIRE(preds.size() == data.test.instances.size());
  CHECK(preds[0].member_tags.size() == 3);

  const auto dir = fresh_dir("model");
  save_pipeline(p, dir);
  for (const char* f : {"config.json", "featsim.json", "tagger.json", "pool.conll"}) {
    CHECK(fs::exists(dir / f));
  }
  const auto loaded = load_pipeline(dir);
  CHECK(loaded.config == config);
  CHECK(loaded.tagger.model == p.tagger.model);
  CHECK(loaded.featsim->weights == p.featsim->weights);
  const auto again = loaded.tag(data.test.instances);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    CHECK(again[i].tags == preds[i].tags);
    CHECK(again[i].member_tags == preds[i].member_tags);
  }

  // Saving the loaded model reproduces the files byte for byte.
  const auto dir2 = fresh_dir("model2");
  save_pipeline(loaded, dir2);
  for (const char* f : {"config.json", "featsim.json", "tagger.json", "pool.conll"}) {
    CHECK(slurp(dir / f) == slurp(dir2 / f));
  }

  Corpus foreign;
  foreign.instances = {testing::labeled("f", "Bob", {"B-FOOD"})};
  CHECK_THROWS_AS(p.tag(foreign.instances), DataError);

  fs::remove(dir / "tagger.json");
  CHECK_THROWS_AS(load_pipeline(dir), DataError);
  fs::remove_all(dir);
  fs::remove_all(dir2);
}

TEST_CASE("embedding cache does not change outputs") {
  Data data;
  auto config = quick_config();
  const auto plain = train_pipeline(config, data.train).tag(data.test.instances);

  const auto dir = fresh_dir("cache");
  config.cache_path = (dir / "emb.bin").string();
  const auto cold = train_pipeline(config, data.train).tag(data.test.instances);
  CHECK(fs::file_size(dir / "emb.bin") > 5);
  const auto warm = train_pipeline(config, data.train).tag(data.test.instances);
  for (std::size_t i = 0; i < plain.size(); ++i) {
    CHECK(cold[i].tags == plain[i].tags);
    CHECK(warm[i].tags == plain[i].tags);
  }
  fs::remove_all(dir);
}

TEST_CASE("no-demonstration baseline") {
  Data data;
  auto config = quick_config();
  config.use_demonstrations = false;
  const auto p = train_pipeline(config, data.train);
  CHECK_FALSE(p.featsim);
  const auto preds = p.tag(data.test.instances);
  CHECK(preds[0].member_tags.size() == 1);

  const auto dir = fresh_dir("baseline");
  save_pipeline(p, dir);
  CHECK_FALSE(fs::exists(dir / "featsim.json"));
  const auto loaded = load_pipeline(dir);
  CHECK(loaded.tag(data.test.instances)[0].tags == preds[0].tags);
  fs::remove_all(dir);
}

TEST_CASE("model files reject tampering") {
  Data data;
  const auto p = train_pipeline(quick_config(), data.train);
  auto j = to_json(p.tagger);
  j["kind"] = "featsim";
  CHECK_THROWS_AS(tagger_from_json(j), DataError);
  j = to_json(p.tagger);
  j["format_version"] = 99;
  CHECK_THROWS_AS(tagger_from_json(j), DataError);
  auto f = to_json(*p.featsim);
  f["dim"] = 3;
  CHECK_THROWS_AS(featsim_from_json(f), DataError);
  const auto t = tagger_from_json(nlohmann::json::parse(to_json(p.tagger).dump()));
  CHECK(t.model == p.tagger.model);
  CHECK(t.transitions.log_probs == p.tagger.transitions.log_probs);
}

TEST_CASE("grid search prefers the adversarial model under the permuted rule") {
  const auto corpus = generate_synthetic_corpus(synthetic_preset("permuted", 300), 4);
  RunConfig config;
  config.k_shot = 20;
  config.epochs = 40;
  config.featsim_epochs = 30;
  config.featsim_buckets = 256;
  config.ensemble_k = 1;
  config.set_seed(3);
  GridSpec grid;
  grid.gammas = {0.0};
  grid.alphas = {1.0, 0.5};
  grid.betas = {0.5};
  grid.permuted_rule = true;
  const auto r = grid_search(config, corpus, nullptr, grid);
  REQUIRE(r.points.size() == 2);
  CHECK(r.best == 1);
  CHECK(*r.points[1].permuted_accuracy > *r.points[0].permuted_accuracy);
  CHECK(r.points[1].objective == doctest::Approx(0.5 * (r.points[1].f1 + *r.points[1].permuted_accuracy)));
  const auto j = to_json(r);
  CHECK(j.at("best") == 1);
  CHECK(to_table(r).find("*") != std::string::npos);

  grid.alphas.clear();
  CHECK_THROWS_AS(grid_search(config, corpus, nullptr, grid), UsageError);
}

}  // TEST_SUITE
