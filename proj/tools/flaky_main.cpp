// flaky: multi-command driver. Exit codes: 0 ok, 2 input error, 1 internal error.
#include <CLI11.hpp>

#include <iostream>
#include <optional>

#include "flaky/augment.hpp"
#include "flaky/config.hpp"
#include "flaky/corpus.hpp"
#include "flaky/dtm.hpp"
#include "flaky/error.hpp"
#include "flaky/eval.hpp"
#include "flaky/io.hpp"
#include "flaky/pipeline.hpp"
#include "flaky/splitter.hpp"
#include "flaky/symbolic.hpp"
#include "flaky/synth.hpp"
#include "flaky/trainer.hpp"

namespace fs = std::filesystem;
using namespace flaky;

namespace {

struct Overrides {
  std::string config_path;
  std::optional<std::string> preset;
  std::optional<std::uint64_t> seed;
  std::optional<int> folds;
  std::optional<std::uint32_t> top_k;
  std::optional<std::uint32_t> n_min;
  std::optional<double> p_max;
  std::optional<int> epochs;
  std::optional<int> d_neural;
  bool no_symbolic = false;
  bool no_augment = false;
  bool hardcoded = false;
  bool serial = false;

  void add_to(CLI::App* app, bool model_flags) {
    app->add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
    app->add_option("--preset", preset, "finetune or desk");
    app->add_option("--seed", seed, "master seed");
    app->add_option("--top-k", top_k, "tokens kept per category");
    app->add_option("--n-min", n_min, "minimum project support");
    app->add_option("--p-max", p_max, "significance threshold");
    if (!model_flags) return;
    app->add_option("--folds", folds, "cross-validation folds (default 4)");
    app->add_option("--epochs", epochs);
    app->add_option("--d-neural", d_neural);
    app->add_flag("--no-symbolic", no_symbolic, "drop the symbolic channel");
    app->add_flag("--no-augment", no_augment, "train without augmentation");
    app->add_flag("--hardcoded-symbols", hardcoded, "use only the nine fixed groups");
    app->add_flag("--serial", serial, "serial reference kernels");
  }

  RunConfig resolve() const {
    RunConfig c;
    if (!config_path.empty()) {
      c = RunConfig::from_json(read_file(config_path));
      if (preset && *preset != c.preset) {
        // A preset flag re-bases the document.
        auto j = nlohmann::json::parse(read_file(config_path));
        j["preset"] = *preset;
        c = RunConfig::from_json(j.dump());
      }
    } else {
      c = RunConfig::with_preset(preset.value_or("desk"));
    }
    if (seed) c.seed = *seed;
    if (folds) c.folds = *folds;
    if (top_k) c.mining.top_k = *top_k;
    if (n_min) c.mining.n_min = *n_min;
    if (p_max) c.mining.p_max = *p_max;
    if (epochs) c.training.epochs = *epochs;
    if (d_neural) c.model.d_neural = *d_neural;
    if (no_symbolic) c.model.use_symbolic = false;
    if (no_augment) c.augment = false;
    if (hardcoded) c.symbolic.mode = SymbolicMode::hardcoded;
    c.validate();
    return c;
  }

  kernels::Exec exec() const { return serial ? kernels::Exec::serial : kernels::Exec::parallel; }
};

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw InputError("cannot create output directory '" + dir.string() + "'");
}

void write_manifest(const fs::path& dir, std::string_view command, const RunConfig& c, const Corpus& corpus) {
  write_file_atomic(dir / "manifest.json", make_manifest(command, c, corpus_hash(corpus)).dump(2) + "\n");
}

// A corpus or, with --split/--fold, the training part of one fold.
Corpus training_subset(const Corpus& corpus, const std::string& split_path, std::optional<int> fold) {
  if (split_path.empty()) {
    if (fold) throw InputError("--fold requires --split");
    return corpus;
  }
  if (!fold) throw InputError("--split requires --fold");
  const auto plan = split_plan_from_json(read_file(split_path), corpus);
  if (*fold < 0 || *fold >= plan.k) throw InputError("fold index out of range");
  return corpus.subset(plan.folds[static_cast<std::size_t>(*fold)].train_ids);
}

int real_main(int argc, char** argv) {
  CLI::App app{"Neuro-symbolic flaky test classification"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolVersion));

  // synth
  SynthSpec spec;
  std::string synth_out;
  std::optional<double> scale;
  auto* synth = app.add_subcommand("synth", "generate a planted-signal corpus");
  synth->add_option("--out", synth_out, "output JSONL")->required();
  synth->add_option("--projects", spec.projects);
  synth->add_option("--tests", spec.tests);
  synth->add_option("--flaky-fraction", spec.flaky_fraction);
  synth->add_option("--q-signal", spec.q_signal);
  synth->add_option("--q-noise", spec.q_noise);
  synth->add_option("--seed", spec.seed);
  synth->add_option("--benchmark-scale", scale, "benchmark class ratio (280 flaky of 8,574) at this scale factor");

  // mine
  Overrides mine_o;
  std::string corpus_path, out_path, split_path, vocab_path;
  std::optional<int> fold;
  auto* mine_cmd = app.add_subcommand("mine", "mine discriminative tokens");
  mine_cmd->add_option("--corpus", corpus_path)->required()->check(CLI::ExistingFile);
  mine_cmd->add_option("--out", out_path, "output directory")->required();
  mine_cmd->add_option("--split", split_path, "split.json; mine only a fold's training part");
  mine_cmd->add_option("--fold", fold);
  mine_o.add_to(mine_cmd, false);

  // features
  Overrides feat_o;
  std::string tfidf_path;
  auto* features = app.add_subcommand("features", "symbolic feature matrix");
  features->add_option("--corpus", corpus_path)->required()->check(CLI::ExistingFile);
  features->add_option("--vocab", vocab_path, "vocabulary.json")->check(CLI::ExistingFile);
  features->add_option("--out", out_path, "features CSV")->required();
  features->add_option("--tfidf", tfidf_path, "also write the TF-IDF matrix CSV");
  features->add_flag("--hardcoded-symbols", feat_o.hardcoded);

  // split
  std::uint64_t split_seed = 0;
  int split_folds = 4;
  auto* split = app.add_subcommand("split", "project-disjoint stratified folds");
  split->add_option("--corpus", corpus_path)->required()->check(CLI::ExistingFile);
  split->add_option("--out", out_path, "split.json")->required();
  split->add_option("--folds", split_folds, "default 4");
  split->add_option("--seed", split_seed);

  // perturb
  std::string mode_name;
  std::uint64_t perturb_seed = 0;
  auto* perturb = app.add_subcommand("perturb", "apply a stress perturbation");
  perturb->add_option("--corpus", corpus_path)->required()->check(CLI::ExistingFile);
  perturb->add_option("--mode", mode_name, "rename, deadcode or both")->required();
  perturb->add_option("--out", out_path, "perturbed JSONL; rename maps go to <out>.maps.json")->required();
  perturb->add_option("--vocab", vocab_path, "decoy pools from this vocabulary")->check(CLI::ExistingFile);
  perturb->add_option("--seed", perturb_seed);

  // train
  Overrides train_o;
  auto* train = app.add_subcommand("train", "train one model");
  train->add_option("--corpus", corpus_path)->required()->check(CLI::ExistingFile);
  train->add_option("--out", out_path, "output directory")->required();
  train->add_option("--split", split_path, "split.json; train on a fold's training part");
  train->add_option("--fold", fold);
  train_o.add_to(train, true);

  // run
  Overrides run_o;
  auto* run = app.add_subcommand("run", "full cross-validated experiment");
  run->add_option("--corpus", corpus_path)->required()->check(CLI::ExistingFile);
  run->add_option("--out", out_path, "output directory")->required();
  run_o.add_to(run, true);

  // report
  std::string report_in;
  auto* report = app.add_subcommand("report", "render tables from report.json");
  report->add_option("--in", report_in, "report.json")->required()->check(CLI::ExistingFile);
  report->add_option("--out", out_path, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  if (*synth) {
    if (scale) {
      auto s = SynthSpec::benchmark_scaled(*scale, spec.seed);
      if (synth->count("--projects")) s.projects = spec.projects;
      spec = s;
    }
    const auto corpus = generate_corpus(spec);
    save_corpus(corpus, synth_out);
    std::cerr << "wrote " << corpus.size() << " tests over " << corpus.project_index().size() << " projects\n";
  } else if (*mine_cmd) {
    const auto c = mine_o.resolve();
    const auto corpus = load_corpus(corpus_path);
    const auto vocab = mine(training_subset(corpus, split_path, fold), c.mining);
    ensure_dir(out_path);
    save_vocabulary(vocab, fs::path(out_path) / "vocabulary.json");
    write_file_atomic(fs::path(out_path) / "token_rank.csv", ranked_tokens_csv(vocab));
    write_manifest(out_path, "mine", c, corpus);
  } else if (*features) {
    const auto corpus = load_corpus(corpus_path);
    SymbolicVocabulary vocab;
    SymbolicOptions opts;
    if (!vocab_path.empty()) vocab = load_vocabulary(vocab_path);
    if (vocab_path.empty() || feat_o.hardcoded) opts.mode = SymbolicMode::hardcoded;
    const auto rows = batch_extract(corpus, vocab, FeatureGroupSpec::standard(), opts);
    write_file_atomic(out_path, features_csv(corpus, rows));
    if (!tfidf_path.empty()) {
      std::vector<std::string> ids;
      for (const auto& t : corpus.tests()) ids.push_back(t.id);
      write_file_atomic(tfidf_path, tfidf_to_csv(build_tfidf(corpus), ids));
    }
  } else if (*split) {
    const auto corpus = load_corpus(corpus_path);
    write_file_atomic(out_path, split_plan_to_json(plan_splits(corpus, split_folds, split_seed)));
  } else if (*perturb) {
    const auto mode = parse_stress_mode(mode_name);
    const auto corpus = load_corpus(corpus_path);
    auto policy = vocab_path.empty() ? AugmentationPolicy::with_default_pools(perturb_seed)
                                     : AugmentationPolicy::from_vocabulary(load_vocabulary(vocab_path), perturb_seed);
    policy.validate();
    std::vector<PerturbedTest> out;
    std::vector<TestCase> tests;
    for (const auto& t : corpus.tests()) {
      out.push_back(perturb_for_stress(t, mode, policy));
      tests.push_back(out.back().test);
    }
    save_corpus(Corpus(std::move(tests)), out_path);
    write_file_atomic(out_path + ".maps.json", perturbation_sidecar_json(out, mode));
  } else if (*train) {
    const auto c = train_o.resolve();
    const auto corpus = load_corpus(corpus_path);
    const auto subset = training_subset(corpus, split_path, fold);
    const auto settings = c.settings(train_o.exec());
    const auto vocab = mine(subset, c.mining);
    const auto model = train_fold(subset, vocab, settings.model, settings.symbolic, settings.training);
    ensure_dir(out_path);
    save_checkpoint(model.checkpoint, fs::path(out_path) / "checkpoint.bin");
    save_vocabulary(vocab, fs::path(out_path) / "vocabulary.json");
    write_file_atomic(fs::path(out_path) / "trace.json", trace_to_json(model.trace));
    write_manifest(out_path, "train", c, corpus);
  } else if (*run) {
    const auto c = run_o.resolve();
    const auto corpus = load_corpus(corpus_path);
    const fs::path dir(out_path);
    const auto ex = run_experiment(corpus, c, &dir, run_o.exec());
    std::cerr << "macro F1 " << ex.report["pooled"]["clean"]["macro_f1"].get<double>() << '\n';
  } else if (*report) {
    nlohmann::ordered_json j;
    try {
      j = nlohmann::ordered_json::parse(read_file(report_in));
    } catch (const nlohmann::json::exception& e) {
      throw InputError(std::string("report: malformed JSON (") + e.what() + ")");
    }
    if (!j.is_object() || j.value("schema_version", 0) != kReportSchemaVersion)
      throw InputError("report: unsupported or missing schema_version");
    try {
      emit_report(j, out_path);
    } catch (const nlohmann::json::exception& e) {
      throw InputError(std::string("report: schema mismatch (") + e.what() + ")");
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return real_main(argc, argv);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 1;
  }
}
