#include "demoner/pipeline.hpp"

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "demoner/error.hpp"
#include "demoner/model_io.hpp"

namespace demoner {

using nlohmann::json;

void RunConfig::set_seed(std::uint64_t seed) {
  split_seed = featsim_seed = train_seed = ensemble_seed = seed;
}

void validate(const RunConfig& c) {
  if (c.k_shot == 0) throw UsageError("k_shot must be positive");
  validate(DualSimilarityConfig{c.gamma, c.normalization});
  validate(AdlConfig{c.alpha, c.beta, c.permutation});
  if (c.ensemble_k == 0) throw UsageError("ensemble k must be positive");
  if (c.epochs == 0 || c.featsim_epochs == 0) throw UsageError("epochs must be positive");
  if (!(c.learning_rate > 0.0) || !(c.featsim_learning_rate > 0.0)) {
    throw UsageError("learning rates must be positive");
  }
  if (!(c.transition_smoothing > 0.0)) throw UsageError("transition smoothing must be positive");
  if (c.tagger.hash_buckets == 0 || c.tagger.copy_embedding_dim < 16) {
    throw UsageError("tagger needs hash_buckets > 0 and copy_embedding_dim >= 16");
  }
  if (c.encoder != "hashed" && c.encoder.rfind("http://", 0) != 0) {
    throw UsageError("encoder must be 'hashed' or an http:// URL");
  }
  if (c.encoder_dim < 16 && c.encoder == "hashed") throw UsageError("encoder_dim must be >= 16");
}

namespace {

const char* name_of(Normalization n) { return n == Normalization::kMinMax ? "minmax" : "none"; }
const char* name_of(PermutationKind k) { return k == PermutationKind::kSwap ? "swap" : "uniform"; }
const char* name_of(VoteGranularity g) { return g == VoteGranularity::kSpan ? "span" : "token"; }

Normalization normalization_from(const std::string& s) {
  if (s == "minmax") return Normalization::kMinMax;
  if (s == "none") return Normalization::kNone;
  throw UsageError("normalization must be minmax or none, got '" + s + "'");
}

PermutationKind permutation_from(const std::string& s) {
  if (s == "uniform") return PermutationKind::kUniform;
  if (s == "swap") return PermutationKind::kSwap;
  throw UsageError("permutation must be uniform or swap, got '" + s + "'");
}

VoteGranularity granularity_from(const std::string& s) {
  if (s == "token") return VoteGranularity::kToken;
  if (s == "span") return VoteGranularity::kSpan;
  throw UsageError("vote granularity must be token or span, got '" + s + "'");
}

}  // namespace

json to_json(const RunConfig& c) {
  return {{"train", c.train_path},
          {"validation", c.validation_path},
          {"test", c.test_path},
          {"model_dir", c.model_dir},
          {"cache", c.cache_path},
          {"k_shot", c.k_shot},
          {"gamma", c.gamma},
          {"normalization", name_of(c.normalization)},
          {"alpha", c.alpha},
          {"beta", c.beta},
          {"permutation", name_of(c.permutation)},
          {"ensemble_k", c.ensemble_k},
          {"vote", name_of(c.granularity)},
          {"use_demonstrations", c.use_demonstrations},
          {"epochs", c.epochs},
          {"learning_rate", c.learning_rate},
          {"patience", c.patience},
          {"transition_smoothing", c.transition_smoothing},
          {"tagger_hash_buckets", c.tagger.hash_buckets},
          {"copy_scale", c.tagger.copy_scale},
          {"copy_embedding_dim", c.tagger.copy_embedding_dim},
          {"max_window", c.tagger.max_window},
          {"featsim_epochs", c.featsim_epochs},
          {"featsim_learning_rate", c.featsim_learning_rate},
          {"featsim_buckets", c.featsim_buckets},
          {"encoder", c.encoder},
          {"encoder_dim", c.encoder_dim},
          {"split_seed", c.split_seed},
          {"featsim_seed", c.featsim_seed},
          {"train_seed", c.train_seed},
          {"ensemble_seed", c.ensemble_seed}};
}

RunConfig run_config_from_json(const json& j) {
  if (!j.is_object()) throw DataError("config must be a JSON object");
  RunConfig c;
  const std::set<std::string> known = [] {
    std::set<std::string> s;
    const json defaults = to_json(RunConfig{});
    for (const auto& [k, v] : defaults.items()) s.insert(k);
    return s;
  }();
  for (const auto& [k, v] : j.items()) {
    if (!known.count(k)) throw DataError("unknown config key '" + k + "'");
  }
  auto get = [&](const char* key, auto& dst) {
    if (!j.contains(key)) return;
    try {
      j.at(key).get_to(dst);
    } catch (const json::exception& e) {
      throw DataError(std::string("config key '") + key + "': " + e.what());
    }
  };
  std::string norm = name_of(c.normalization), perm = name_of(c.permutation),
              vote = name_of(c.granularity);
  get("train", c.train_path);
  get("validation", c.validation_path);
  get("test", c.test_path);
  get("model_dir", c.model_dir);
  get("cache", c.cache_path);
  get("k_shot", c.k_shot);
  get("gamma", c.gamma);
  get("normalization", norm);
  get("alpha", c.alpha);
  get("beta", c.beta);
  get("permutation", perm);
  get("ensemble_k", c.ensemble_k);
  get("vote", vote);
  get("use_demonstrations", c.use_demonstrations);
  get("epochs", c.epochs);
  get("learning_rate", c.learning_rate);
  get("patience", c.patience);
  get("transition_smoothing", c.transition_smoothing);
  get("tagger_hash_buckets", c.tagger.hash_buckets);
  get("copy_scale", c.tagger.copy_scale);
  get("copy_embedding_dim", c.tagger.copy_embedding_dim);
  get("max_window", c.tagger.max_window);
  get("featsim_epochs", c.featsim_epochs);
  get("featsim_learning_rate", c.featsim_learning_rate);
  get("featsim_buckets", c.featsim_buckets);
  get("encoder", c.encoder);
  get("encoder_dim", c.encoder_dim);
  get("split_seed", c.split_seed);
  get("featsim_seed", c.featsim_seed);
  get("train_seed", c.train_seed);
  get("ensemble_seed", c.ensemble_seed);
  c.normalization = normalization_from(norm);
  c.permutation = permutation_from(perm);
  c.granularity = granularity_from(vote);
  return c;
}

std::string effective_cache_path(const RunConfig& config) {
  if (const char* env = std::getenv(kCacheEnv); env && *env) return env;
  return config.cache_path;
}

std::shared_ptr<const SemanticEncoder> make_encoder(const RunConfig& config) {
  std::shared_ptr<const SemanticEncoder> base;
  if (config.encoder == "hashed") {
    base = std::make_shared<HashedNgramEncoder>(config.encoder_dim);
  } else {
    RemoteEncoderOptions opts;
    opts.url = config.encoder;
    opts.dim = config.encoder_dim;
    base = std::make_shared<RemoteEncoder>(opts);
  }
  if (const auto path = effective_cache_path(config); !path.empty()) {
    base = std::make_shared<CachedEncoder>(base, std::make_shared<EmbeddingCache>(path));
  }
  return std::make_shared<MemoEncoder>(base);
}

PoolScorer make_pool_scorer(std::shared_ptr<const DualScorer> scorer) {
  return [scorer](const Instance& input, const std::vector<const Instance*>& candidates) {
    std::vector<std::string> texts;
    texts.reserve(candidates.size());
    for (const auto* c : candidates) texts.push_back(c->text());
    return scorer->scores(input.text(), texts);
  };
}

PoolScorer Pipeline::scorer() const {
  if (!config.use_demonstrations) return {};
  return make_pool_scorer(std::make_shared<DualScorer>(
      config.gamma == 0.0 ? nullptr : featsim, encoder,
      DualSimilarityConfig{config.gamma, config.normalization}));
}

std::vector<Prediction> Pipeline::tag(const std::vector<Instance>& inputs) const {
  for (const auto& in : inputs) {
    for (const auto& m : in.markups) {
      if (!tagger.model.vocab().contains(format_tag('B', m.feature))) {
        throw DataError("instance " + in.id + " uses label " + m.feature +
                        " unknown to the model");
      }
    }
  }
  EnsembleConfig ec{config.ensemble_k, config.ensemble_seed, config.granularity};
  if (!config.use_demonstrations) ec.k = 1;
  return ensemble_tag_all(tagger.model, tagger.transitions, inputs,
                          config.use_demonstrations ? &pool : nullptr, scorer(), ec);
}

namespace {

TaggerTrainOptions train_options(const RunConfig& c) {
  TaggerTrainOptions o;
  o.epochs = c.epochs;
  o.learning_rate = c.learning_rate;
  o.seed = c.train_seed;
  o.adl = AdlConfig{c.alpha, c.beta, c.permutation};
  o.use_demonstrations = c.use_demonstrations;
  o.patience = c.patience;
  o.transition_smoothing = c.transition_smoothing;
  return o;
}

FeatsimTrainOptions featsim_options(const RunConfig& c) {
  return {c.featsim_epochs, c.featsim_learning_rate, c.featsim_seed, c.featsim_buckets};
}

Pipeline prepare(const RunConfig& config, const Corpus& train, const Corpus* validation) {
  validate(config);
  Pipeline p;
  p.config = config;
  p.encoder = make_encoder(config);
  p.split = validation ? sample_few_shot(train, *validation, config.k_shot, config.split_seed)
                       : sample_few_shot(train, config.k_shot, config.split_seed);
  p.pool = build_pool(p.split.train, train.feature_set);
  if (config.use_demonstrations) {
    p.featsim = std::make_shared<FeatureSimilarityModel>(
        train_featsim(p.split.train, *p.encoder, featsim_options(config)));
  }
  return p;
}

void fit(Pipeline& p) {
  p.tagger = train_tagger(p.split, &p.pool, p.scorer(), train_options(p.config), p.config.tagger);
}

}  // namespace

Pipeline train_pipeline(const RunConfig& config, const Corpus& train, const Corpus* validation) {
  auto p = prepare(config, train, validation);
  fit(p);
  return p;
}

void save_pipeline(const Pipeline& p, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_json_file(dir / "config.json", to_json(p.config));
  if (p.featsim) save_featsim(dir / "featsim.json", *p.featsim);
  save_tagger(dir / "tagger.json", p.tagger);
  Corpus pool_corpus;
  pool_corpus.instances = p.pool.examples;
  write_text_file(dir / "pool.conll", render_conll(pool_corpus) + "\n");
}

Pipeline load_pipeline(const std::filesystem::path& dir, const RunConfig* runtime) {
  Pipeline p;
  p.config = run_config_from_json(read_json_file(dir / "config.json"));
  if (runtime) p.config.cache_path = runtime->cache_path;
  p.encoder = make_encoder(p.config);
  if (std::filesystem::exists(dir / "featsim.json")) {
    p.featsim = std::make_shared<FeatureSimilarityModel>(load_featsim(dir / "featsim.json"));
  } else if (p.config.use_demonstrations) {
    throw DataError("model directory " + dir.string() + " has no featsim.json");
  }
  p.tagger = load_tagger(dir / "tagger.json");
  const auto pool_corpus = read_corpus(dir / "pool.conll");
  p.pool = build_pool(pool_corpus.instances, pool_corpus.feature_set);
  return p;
}

Corpus read_corpus(const std::filesystem::path& path, ParseOptions options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_conll(buf.str(), options);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("write failed for " + path.string());
}

std::string render_predictions_conll(const std::vector<Prediction>& predictions) {
  std::vector<Instance> inputs;
  std::vector<std::vector<std::string>> tags;
  for (const auto& p : predictions) {
    inputs.push_back(make_unlabeled(p.id, p.tokens));
    tags.push_back(p.tags);
  }
  return render_conll_tags(inputs, tags);
}

std::string render_predictions_jsonl(const std::vector<Prediction>& predictions) {
  std::string out;
  for (const auto& p : predictions) {
    json markups = json::array();
    for (const auto& m : p.markups) {
      markups.push_back(
          {{"start", m.start}, {"end", m.end}, {"text", m.text}, {"feature", m.feature}});
    }
    out += json{{"id", p.id}, {"tokens", p.tokens}, {"tags", p.tags}, {"markups", markups}}.dump();
    out += '\n';
  }
  return out;
}

std::vector<Prediction> parse_predictions(const std::string& text) {
  std::vector<Prediction> out;
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      try {
        const auto j = json::parse(line);
        Prediction p;
        p.id = j.at("id").get<std::string>();
        p.tokens = j.at("tokens").get<std::vector<std::string>>();
        p.tags = j.at("tags").get<std::vector<std::string>>();
        if (p.tags.size() != p.tokens.size()) throw DataError("tags and tokens differ in length");
        p.markups = markups_from_tags(p.tokens, p.tags);
        out.push_back(std::move(p));
      } catch (const json::exception& e) {
        throw DataError("predictions line " + std::to_string(lineno) + ": " + e.what());
      } catch (const DataError& e) {
        throw DataError("predictions line " + std::to_string(lineno) + ": " + e.what());
      }
    }
    return out;
  }
  const auto corpus = parse_conll(text);
  for (const auto& inst : corpus.instances) {
    out.push_back({inst.id, inst.tokens, *inst.tags, inst.markups, {}});
  }
  return out;
}

json summarize(const Corpus& corpus) {
  std::map<std::string, std::size_t> markups, carriers;
  std::size_t tokens = 0, labeled = 0;
  for (const auto& inst : corpus.instances) {
    tokens += inst.tokens.size();
    if (inst.labeled()) ++labeled;
    for (const auto& m : inst.markups) ++markups[m.feature];
    for (const auto& f : feature_set_of(inst)) ++carriers[f];
  }
  json per = json::object();
  for (const auto& f : corpus.feature_set) {
    per[f] = {{"markups", markups[f]}, {"instances", carriers[f]}};
  }
  return {{"instances", corpus.instances.size()},
          {"labeled", labeled},
          {"tokens", tokens},
          {"features", corpus.feature_set.size()},
          {"per_feature", per}};
}

std::string content_hash(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string body = buf.str();
  std::string blob = "blob " + std::to_string(body.size());
  blob.push_back('\0');
  blob += body;
  const auto d = sha256(blob);
  return to_hex(d);
}

json make_manifest(const std::string& command, const RunConfig& config,
                   const std::vector<std::filesystem::path>& inputs,
                   const std::vector<std::filesystem::path>& outputs) {
  auto files = [](const std::vector<std::filesystem::path>& paths) {
    json arr = json::array();
    for (const auto& p : paths) {
      arr.push_back({{"path", p.string()}, {"sha256", content_hash(p)}});
    }
    return arr;
  };
  return {{"command", command},
          {"config", to_json(config)},
          {"seeds",
           {{"split", config.split_seed},
            {"featsim", config.featsim_seed},
            {"train", config.train_seed},
            {"ensemble", config.ensemble_seed}}},
          {"adl_enabled", config.adl_enabled()},
          {"inputs", files(inputs)},
          {"outputs", files(outputs)}};
}

GridResult grid_search(const RunConfig& base, const Corpus& train, const Corpus* validation,
                       const GridSpec& grid) {
  if (grid.gammas.empty() || grid.alphas.empty() || grid.betas.empty()) {
    throw UsageError("grid must have at least one value per axis");
  }
  // The split, pool and predictor do not depend on the grid axes.
  auto shared = prepare(base, train, validation);
  const auto& val = shared.split.validation;
  if (val.empty()) throw DataError("grid search needs a non-empty validation set");

  GridResult result;
  double best = -1.0;
  for (double gamma : grid.gammas) {
    for (double alpha : grid.alphas) {
      for (double beta : grid.betas) {
        Pipeline p = shared;
        p.config.gamma = gamma;
        p.config.alpha = alpha;
        p.config.beta = beta;
        validate(p.config);
        fit(p);
        GridPoint point;
        point.gamma = gamma;
        point.alpha = alpha;
        point.beta = beta;
        point.f1 = entity_f1(val, p.tag(val)).f1;
        point.objective = point.f1;
        if (grid.permuted_rule) {
          point.permuted_accuracy =
              permutation_probe(p.tagger.model, p.tagger.transitions, val, p.pool, p.scorer(),
                                p.config.ensemble_seed, p.config.permutation)
                  .accuracy;
          point.objective = 0.5 * (point.f1 + *point.permuted_accuracy);
        }
        if (point.objective > best) {
          best = point.objective;
          result.best = result.points.size();
        }
        result.points.push_back(point);
      }
    }
  }
  return result;
}

json to_json(const GridResult& r) {
  json points = json::array();
  for (const auto& p : r.points) {
    json row = {{"gamma", p.gamma}, {"alpha", p.alpha}, {"beta", p.beta},
                {"f1", p.f1},       {"objective", p.objective}};
    if (p.permuted_accuracy) row["permuted_accuracy"] = *p.permuted_accuracy;
    points.push_back(row);
  }
  return {{"points", points}, {"best", r.best}, {"best_point", points.at(r.best)}};
}

std::string to_table(const GridResult& r) {
  std::ostringstream out;
  out << std::right << std::setw(8) << "gamma" << std::setw(8) << "alpha" << std::setw(8)
      << "beta" << std::setw(10) << "f1" << std::setw(10) << "permuted" << std::setw(11)
      << "objective" << '\n';
  for (std::size_t i = 0; i < r.points.size(); ++i) {
    const auto& p = r.points[i];
    out << std::fixed << std::setprecision(2) << std::setw(8) << p.gamma << std::setw(8)
        << p.alpha << std::setw(8) << p.beta << std::setprecision(4) << std::setw(10) << p.f1;
    if (p.permuted_accuracy) {
      out << std::setw(10) << *p.permuted_accuracy;
    } else {
      out << std::setw(10) << "-";
    }
    out << std::setw(11) << p.objective << (i == r.best ? "  *" : "") << '\n';
  }
  return out.str();
}

FeatsimEvaluation evaluate_featsim(const RunConfig& config, const Corpus& train,
                                   const Corpus& test, std::size_t trials, std::uint64_t seed) {
  validate(config);
  const auto encoder = make_encoder(config);
  const auto split = sample_few_shot(train, config.k_shot, config.split_seed);
  FeatsimEvaluation out;
  out.model = train_featsim(split.train, *encoder, featsim_options(config));

  // Scores are deterministic per pair, so each pair is computed once.
  std::map<std::pair<const Instance*, const Instance*>, double> memo;
  PairScoreFn featsim = [&](const Instance& a, const Instance& b) {
    auto [it, fresh] = memo.try_emplace({&a, &b}, 0.0);
    if (fresh) it->second = predict_feature_similarity(out.model, a.text(), b.text(), *encoder);
    return it->second;
  };
  PairScoreFn semantic = [&](const Instance& a, const Instance& b) {
    return semantic_similarity(*encoder, a.text(), b.text());
  };
  out.featsim = evaluate_predictor(featsim, test.instances, split.train, trials, seed);
  out.semantic = evaluate_predictor(semantic, test.instances, split.train, trials, seed);
  return out;
}

}  // namespace demoner
