// demoner command-line interface.

#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "demoner/error.hpp"
#include "demoner/model_io.hpp"
#include "demoner/pipeline.hpp"

namespace fs = std::filesystem;
using namespace demoner;

namespace {

enum ExitCode { kOk = 0, kInternal = 1, kUsage = 2, kData = 3, kDivergence = 4 };

// Options shared by the commands that train or run a pipeline. Bound
// straight to the config, so anything not given keeps its earlier value
// (manifest, then default).
void add_run_options(CLI::App* sub, RunConfig& c) {
  sub->add_option("--train", c.train_path, "Training corpus (CoNLL)");
  sub->add_option("--validation", c.validation_path, "Validation corpus (CoNLL)");
  sub->add_option("--model-dir", c.model_dir, "Model directory");
  sub->add_option("--cache", c.cache_path, "Embedding cache file ($DEMONER_CACHE overrides)");
  sub->add_option("--k-shot", c.k_shot, "Shots per feature");
  sub->add_option("--gamma", c.gamma, "Weight of the feature similarity in the dual score");
  sub->add_option("--normalization", c.normalization, "Score normalization")
      ->transform(CLI::CheckedTransformer(
          std::map<std::string, Normalization>{{"minmax", Normalization::kMinMax},
                                               {"none", Normalization::kNone}}));
  sub->add_option("--alpha", c.alpha, "Weight of the main loss (1 disables adversarial training)");
  sub->add_option("--beta", c.beta, "Label-permutation share of the adversarial loss");
  sub->add_option("--permutation", c.permutation, "Label permutation sampler")
      ->transform(CLI::CheckedTransformer(
          std::map<std::string, PermutationKind>{{"uniform", PermutationKind::kUniform},
                                                 {"swap", PermutationKind::kSwap}}));
  sub->add_option("-k,--ensemble-k", c.ensemble_k, "Ensemble size");
  sub->add_option("--vote", c.granularity, "Ensemble voting granularity")
      ->transform(CLI::CheckedTransformer(
          std::map<std::string, VoteGranularity>{{"token", VoteGranularity::kToken},
                                                 {"span", VoteGranularity::kSpan}}));
  sub->add_flag("!--no-demonstrations", c.use_demonstrations,
                "Train and tag without demonstrations");
  sub->add_option("--epochs", c.epochs, "Tagger epochs");
  sub->add_option("--lr", c.learning_rate, "Tagger learning rate");
  sub->add_option("--patience", c.patience, "Early-stopping patience (0: off)");
  sub->add_option("--smoothing", c.transition_smoothing, "Transition smoothing");
  sub->add_option("--tagger-buckets", c.tagger.hash_buckets, "Tagger hash buckets");
  sub->add_option("--copy-scale", c.tagger.copy_scale, "Copy feature scale");
  sub->add_option("--copy-dim", c.tagger.copy_embedding_dim, "Copy embedding dimension");
  sub->add_option("--max-window", c.tagger.max_window, "Longest copy window in tokens");
  sub->add_option("--featsim-epochs", c.featsim_epochs, "Predictor epochs");
  sub->add_option("--featsim-lr", c.featsim_learning_rate, "Predictor learning rate");
  sub->add_option("--featsim-buckets", c.featsim_buckets, "Predictor pair hash buckets");
  sub->add_option("--encoder", c.encoder, "'hashed' or the URL of an embedding service");
  sub->add_option("--encoder-dim", c.encoder_dim, "Encoder dimension");
  sub->add_option_function<std::uint64_t>(
      "--seed", [&c](const std::uint64_t& s) { c.set_seed(s); }, "Set every stage seed");
  sub->add_option("--split-seed", c.split_seed);
  sub->add_option("--featsim-seed", c.featsim_seed);
  sub->add_option("--train-seed", c.train_seed);
  sub->add_option("--ensemble-seed", c.ensemble_seed);
  sub->add_option("--manifest", "Rerun with the config recorded in a manifest");
}

// --manifest has to be applied before the flags are parsed so that flags
// still override it.
RunConfig initial_config(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    std::string path;
    if (std::strcmp(argv[i], "--manifest") == 0 && i + 1 < argc) {
      path = argv[i + 1];
    } else if (std::strncmp(argv[i], "--manifest=", 11) == 0) {
      path = argv[i] + 11;
    }
    if (!path.empty()) {
      const auto m = read_json_file(path);
      if (!m.contains("config")) throw DataError(path + " is not a run manifest");
      return run_config_from_json(m.at("config"));
    }
  }
  return {};
}

void emit(const std::string& text, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << text;
  } else {
    write_text_file(path, text);
    std::cerr << "wrote " << path << '\n';
  }
}

std::vector<fs::path> existing(std::initializer_list<std::string> paths) {
  std::vector<fs::path> out;
  for (const auto& p : paths) {
    if (!p.empty()) out.emplace_back(p);
  }
  return out;
}

int cmd_ingest(const std::string& input, const std::string& output, bool lenient,
               bool untagged) {
  ParseOptions opts;
  opts.mode = lenient ? TagMode::kLenient : TagMode::kStrict;
  opts.allow_untagged = untagged;
  const auto corpus = read_corpus(input, opts);
  emit(summarize(corpus).dump(2) + "\n", output);
  return kOk;
}

int cmd_train(const RunConfig& c) {
  if (c.train_path.empty()) throw UsageError("train needs --train");
  const auto train = read_corpus(c.train_path);
  std::optional<Corpus> validation;
  if (!c.validation_path.empty()) validation = read_corpus(c.validation_path);
  std::cerr << "training on " << c.train_path << " (" << train.instances.size()
            << " instances, k=" << c.k_shot << ")\n";
  const auto p = train_pipeline(c, train, validation ? &*validation : nullptr);
  const fs::path dir = c.model_dir;
  save_pipeline(p, dir);

  nlohmann::json losses = {{"tagger", p.tagger.report.epoch_loss},
                           {"validation_f1", p.tagger.report.validation_f1}};
  if (p.featsim) losses["featsim"] = p.featsim->loss_curve;
  write_json_file(dir / "losses.json", losses);

  std::vector<fs::path> outputs = {dir / "config.json", dir / "tagger.json", dir / "pool.conll",
                                   dir / "losses.json"};
  if (p.featsim) outputs.push_back(dir / "featsim.json");
  write_json_file(dir / "manifest.json",
                  make_manifest("train", c, existing({c.train_path, c.validation_path}), outputs));
  std::cerr << "support set: " << p.split.train.size() << " instances, "
            << p.pool.features().size() << " features\n";
  for (const auto& w : p.pool.warnings) std::cerr << "warning: " << w << '\n';
  std::cerr << "final tagger loss: " << p.tagger.report.epoch_loss.back()
            << (c.adl_enabled() ? " (adversarial)" : "") << '\n';
  std::cerr << "model written to " << dir.string() << '\n';
  return kOk;
}

int cmd_tag(const RunConfig& runtime, const CLI::App& sub, const std::string& input,
            const std::string& output) {
  auto p = load_pipeline(runtime.model_dir, &runtime);
  // Inference-time knobs may be overridden; everything else is the model's.
  if (sub.count("--ensemble-k")) p.config.ensemble_k = runtime.ensemble_k;
  if (sub.count("--ensemble-seed") || sub.count("--seed")) {
    p.config.ensemble_seed = runtime.ensemble_seed;
  }
  if (sub.count("--vote")) p.config.granularity = runtime.granularity;
  if (sub.count("--gamma")) p.config.gamma = runtime.gamma;
  validate(p.config);

  ParseOptions opts;
  opts.allow_untagged = true;
  const auto corpus = read_corpus(input, opts);
  const auto preds = p.tag(corpus.instances);
  if (output.empty()) {
    std::cout << render_predictions_conll(preds) << '\n';
    return kOk;
  }
  const fs::path conll = output + ".conll", jsonl = output + ".jsonl";
  write_text_file(conll, render_predictions_conll(preds) + "\n");
  write_text_file(jsonl, render_predictions_jsonl(preds));
  auto manifest = make_manifest("tag", p.config, {input, fs::path(runtime.model_dir) / "tagger.json"},
                                {conll, jsonl});
  write_json_file(output + ".manifest.json", manifest);
  std::cerr << "tagged " << preds.size() << " instances -> " << conll.string() << ", "
            << jsonl.string() << '\n';
  return kOk;
}

int cmd_evaluate(const std::string& gold_path, const std::string& pred_path,
                 const std::string& json_out) {
  const auto gold = read_corpus(gold_path);
  std::ifstream in(pred_path, std::ios::binary);
  if (!in) throw DataError("cannot open " + pred_path);
  std::ostringstream buf;
  buf << in.rdbuf();
  const auto report = entity_f1(gold.instances, parse_predictions(buf.str()));
  std::cout << to_table(report);
  if (!json_out.empty()) emit(to_json(report) + "\n", json_out);
  return kOk;
}

int cmd_eval_featsim(const RunConfig& c, const std::string& test_path, std::size_t trials,
                     std::uint64_t seed, const std::string& json_out) {
  if (c.train_path.empty() || test_path.empty()) {
    throw UsageError("eval-featsim needs --train and --test");
  }
  const auto train = read_corpus(c.train_path);
  const auto test = read_corpus(test_path);
  const auto r = evaluate_featsim(c, train, test, trials, seed);
  std::cout << to_table({{"featsim", r.featsim}, {"semantic", r.semantic}});
  if (!json_out.empty()) {
    nlohmann::json j = {{"featsim", nlohmann::json::parse(to_json(r.featsim))},
                        {"semantic", nlohmann::json::parse(to_json(r.semantic))},
                        {"manifest", make_manifest("eval-featsim", c,
                                                   existing({c.train_path, test_path}), {})}};
    emit(j.dump(2) + "\n", json_out);
  }
  return kOk;
}

int cmd_grid(const RunConfig& c, const GridSpec& grid, const std::string& json_out) {
  if (c.train_path.empty()) throw UsageError("grid-search needs --train");
  const auto train = read_corpus(c.train_path);
  std::optional<Corpus> validation;
  if (!c.validation_path.empty()) validation = read_corpus(c.validation_path);
  const auto r = grid_search(c, train, validation ? &*validation : nullptr, grid);
  std::cout << to_table(r);
  if (!json_out.empty()) {
    auto j = to_json(r);
    j["manifest"] =
        make_manifest("grid-search", c, existing({c.train_path, c.validation_path}), {});
    emit(j.dump(2) + "\n", json_out);
  }
  return kOk;
}

int cmd_gen(const std::string& preset, std::size_t instances, std::uint64_t seed,
            const std::string& output) {
  const auto corpus = generate_synthetic_corpus(synthetic_preset(preset, instances), seed);
  emit(render_conll(corpus) + "\n", output);
  return kOk;
}

int run(int argc, char** argv) {
  CLI::App app{"Few-shot NER with demonstrations"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML/INI file; keys go under a section per subcommand");
  app.allow_config_extras(CLI::config_extras_mode::error);

  RunConfig cfg = initial_config(argc, argv);

  auto* ingest = app.add_subcommand("ingest", "Parse a CoNLL file and print statistics");
  std::string ingest_in, ingest_out;
  bool lenient = false, untagged = false;
  ingest->add_option("input", ingest_in, "CoNLL file")->required();
  ingest->add_option("-o,--output", ingest_out, "Write the summary here");
  ingest->add_flag("--lenient", lenient, "Accept I- tags that open a span");
  ingest->add_flag("--untagged", untagged, "Accept token-only files");

  auto* train = app.add_subcommand("train", "Train the predictor and the tagger");
  add_run_options(train, cfg);

  auto* tag = app.add_subcommand("tag", "Tag a CoNLL file with a trained model");
  std::string tag_in, tag_out;
  add_run_options(tag, cfg);
  tag->add_option("input", tag_in, "CoNLL file (tags optional)")->required();
  tag->add_option("-o,--output", tag_out, "Output prefix for .conll/.jsonl");

  auto* evaluate = app.add_subcommand("evaluate", "Entity F1 of predictions against gold");
  std::string gold, pred, eval_json;
  evaluate->add_option("--gold", gold, "Gold CoNLL")->required();
  evaluate->add_option("--pred", pred, "Predictions (.conll or .jsonl)")->required();
  evaluate->add_option("--json", eval_json, "Also write the report as JSON");

  auto* featsim = app.add_subcommand("eval-featsim", "Evaluate the feature-similarity predictor");
  std::string fs_test, fs_json;
  std::size_t trials = 10000;
  std::uint64_t fs_seed = 0;
  add_run_options(featsim, cfg);
  featsim->add_option("--test", fs_test, "Query corpus")->required();
  featsim->add_option("--trials", trials, "Trials per metric")->check(CLI::PositiveNumber);
  featsim->add_option("--eval-seed", fs_seed, "Seed of the trial sampler");
  featsim->add_option("--json", fs_json, "Also write the report as JSON");

  auto* grid = app.add_subcommand("grid-search", "Grid search over gamma, alpha and beta");
  GridSpec spec;
  std::string grid_json;
  add_run_options(grid, cfg);
  grid->add_option("--gammas", spec.gammas, "Comma-separated gamma values")->delimiter(',');
  grid->add_option("--alphas", spec.alphas, "Comma-separated alpha values")->delimiter(',');
  grid->add_option("--betas", spec.betas, "Comma-separated beta values")->delimiter(',');
  grid->add_flag("--permuted-rule", spec.permuted_rule,
                 "Add permuted-label accuracy on validation to the objective");
  grid->add_option("--json", grid_json, "Also write the results as JSON");

  auto* gen = app.add_subcommand("gen-synthetic", "Write a synthetic CoNLL corpus");
  std::string preset = "vocab", gen_out;
  std::size_t instances = 200;
  std::uint64_t gen_seed = 0;
  gen->add_option("--preset", preset, "vocab, permuted or e2e");
  gen->add_option("--instances", instances, "Number of sentences");
  gen->add_option("--seed", gen_seed, "Generator seed");
  gen->add_option("-o,--output", gen_out, "Output file (stdout if absent)");

  for (auto* sub : {ingest, train, tag, evaluate, featsim, grid, gen}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  if (*ingest) return cmd_ingest(ingest_in, ingest_out, lenient, untagged);
  if (*train) return cmd_train(cfg);
  if (*tag) return cmd_tag(cfg, *tag, tag_in, tag_out);
  if (*evaluate) return cmd_evaluate(gold, pred, eval_json);
  if (*featsim) return cmd_eval_featsim(cfg, fs_test, trials, fs_seed, fs_json);
  if (*grid) return cmd_grid(cfg, spec, grid_json);
  if (*gen) return cmd_gen(preset, instances, gen_seed, gen_out);
  return kUsage;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const ProviderError& e) {
    std::cerr << "provider error: " << e.what() << '\n';
    return kData;
  } catch (const TrainingDivergence& e) {
    std::cerr << "training diverged: " << e.what() << '\n';
    return kDivergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInternal;
  }
}
