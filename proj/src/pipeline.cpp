#include "flaky/pipeline.hpp"

#include "flaky/error.hpp"
#include "flaky/eval.hpp"
#include "flaky/io.hpp"
#include "flaky/rng.hpp"

namespace flaky {

namespace {

using ojson = nlohmann::ordered_json;

ojson drops_json(const RobustnessReport& r, StressMode mode) {
  ojson per = ojson::object();
  const auto& d = r.drops.at(mode);
  for (Category c : kAllCategories) per[std::string(render(c))] = d[index_of(c)];
  return {{"per_class", std::move(per)}, {"average", r.average_drop.at(mode)}};
}

ojson corpus_stats(const Corpus& corpus) {
  ojson counts = ojson::object();
  for (Category c : kAllCategories) counts[std::string(render(c))] = corpus.count(c);
  return {{"tests", corpus.size()},
          {"projects", corpus.project_index().size()},
          {"category_counts", std::move(counts)},
          {"hash", corpus_hash(corpus)}};
}

ojson token_ranking(const Corpus& corpus, const MiningParams& params) {
  auto out = ojson::array();
  const auto vocab = mine(corpus, params);
  for (Category c : kAllCategories) {
    int rank = 1;
    for (const auto& e : vocab.of(c))
      out.push_back({{"category", std::string(render(c))},
                     {"rank", rank++},
                     {"token", e.token},
                     {"chi2", e.chi2},
                     {"p_value", e.p_value},
                     {"project_support", e.project_support}});
  }
  return out;
}

ojson vocab_tokens(const SymbolicVocabulary& v) {
  ojson out = ojson::object();
  for (Category c : kAllCategories) {
    auto arr = ojson::array();
    for (const auto& e : v.of(c)) arr.push_back(e.token);
    out[std::string(render(c))] = std::move(arr);
  }
  return out;
}

}  // namespace

std::uint64_t checkpoint_checksum(const Checkpoint& ckpt) { return fnv1a(serialize_checkpoint(ckpt)); }

Experiment run_experiment(const Corpus& corpus, const RunConfig& config, const std::filesystem::path* out_dir,
                          kernels::Exec exec) {
  config.validate();
  return run_experiment(corpus, plan_splits(corpus, config.folds, config.seeds().split), config, out_dir, exec);
}

Experiment run_experiment(const Corpus& corpus, const SplitPlan& plan, const RunConfig& config,
                          const std::filesystem::path* out_dir, kernels::Exec exec) {
  const auto settings = config.settings(exec);
  Experiment ex;
  ex.plan = plan;

  if (out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(*out_dir, ec);
    if (ec || !std::filesystem::is_directory(*out_dir))
      throw InputError("cannot create output directory '" + out_dir->string() + "'");
    write_file_atomic(*out_dir / "split.json", split_plan_to_json(plan));
  }
  // Checkpoints are written as each fold finishes.
  FoldCallback on_fold;
  if (out_dir) {
    on_fold = [&](const FoldOutcome& o) {
      const auto dir = *out_dir / ("fold-" + std::to_string(o.fold));
      std::filesystem::create_directories(dir);
      save_checkpoint(o.model.checkpoint, dir / "checkpoint.bin");
      save_vocabulary(o.vocab, dir / "vocabulary.json");
      write_file_atomic(dir / "trace.json", trace_to_json(o.model.trace));
    };
  }
  ex.folds = cross_validate(corpus, plan, settings, on_fold);

  std::vector<Category> labels, clean;
  std::map<StressMode, std::vector<Category>> stressed;
  auto folds_json = ojson::array();
  for (const auto& o : ex.folds) {
    labels.insert(labels.end(), o.labels.begin(), o.labels.end());
    clean.insert(clean.end(), o.clean.begin(), o.clean.end());
    for (const auto& [m, p] : o.stressed) stressed[m].insert(stressed[m].end(), p.begin(), p.end());

    const auto fold_clean = f1_scores(o.clean, o.labels);
    ojson f;
    f["fold"] = o.fold;
    const auto& fold = plan.folds[static_cast<std::size_t>(o.fold)];
    f["train_tests"] = fold.train_ids.size();
    f["test_tests"] = fold.test_ids.size();
    f["test_projects"] = fold.test_projects;
    f["init_checksum"] = hex64(o.init_checksum);
    f["checkpoint_checksum"] = hex64(checkpoint_checksum(o.model.checkpoint));
    ojson w = ojson::object();
    for (Category c : kAllCategories) {
      const auto i = index_of(c);
      w[std::string(render(c))] = o.model.trace.weights.present[i] ? ojson(o.model.trace.weights.w[i]) : ojson();
    }
    f["class_weights"] = std::move(w);
    auto losses = ojson::array();
    for (const auto& e : o.model.trace.epochs) losses.push_back(e.total);
    f["epoch_loss"] = std::move(losses);
    f["vocabulary"] = vocab_tokens(o.vocab);
    f["clean"] = metrics_to_json(fold_clean);
    std::map<StressMode, MetricsReport> per;
    ojson st = ojson::object();
    for (auto m : settings.stress_modes) {
      per[m] = f1_scores(o.stressed.at(m), o.labels);
      st[std::string(render(m))] = metrics_to_json(per[m]);
    }
    f["stress"] = std::move(st);
    const auto rob = robustness_drops(fold_clean, per, settings.stress_modes);
    ojson dj = ojson::object();
    for (auto m : settings.stress_modes) dj[std::string(render(m))] = drops_json(rob, m);
    f["drops"] = std::move(dj);
    folds_json.push_back(std::move(f));
  }

  const auto clean_metrics = f1_scores(clean, labels);
  std::map<StressMode, MetricsReport> perturbed;
  for (auto m : settings.stress_modes) perturbed[m] = f1_scores(stressed[m], labels);
  const auto rob = robustness_drops(clean_metrics, perturbed, settings.stress_modes);

  ojson pooled;
  pooled["clean"] = metrics_to_json(clean_metrics);
  ojson st = ojson::object(), dj = ojson::object(), cm = ojson::object();
  cm["clean"] = confusion_to_json(confusion(clean, labels));
  for (auto m : settings.stress_modes) {
    const auto key = std::string(render(m));
    st[key] = metrics_to_json(perturbed[m]);
    dj[key] = drops_json(rob, m);
    cm[key] = confusion_to_json(confusion(stressed[m], labels));
  }
  pooled["stress"] = std::move(st);
  pooled["drops"] = std::move(dj);
  pooled["confusion"] = std::move(cm);

  ojson r;
  r["schema_version"] = kReportSchemaVersion;
  r["tool_version"] = std::string(kToolVersion);
  r["config_hash"] = config.hash();
  r["variant"] = config.variant();
  r["augmentation"] = config.augment;
  r["seeds"] = seeds_to_json(config.seeds());
  r["corpus"] = corpus_stats(corpus);
  auto cats = ojson::array();
  for (Category c : kAllCategories) cats.push_back(std::string(render(c)));
  r["categories"] = std::move(cats);
  r["pooled"] = std::move(pooled);
  r["folds"] = std::move(folds_json);
  r["token_ranking"] = token_ranking(corpus, config.mining);
  r["token_groups"] = token_group_grid(corpus);
  ex.report = std::move(r);

  if (out_dir) {
    emit_report(ex.report, *out_dir);
    write_file_atomic(*out_dir / "manifest.json", make_manifest("run", config, corpus_hash(corpus)).dump(2) + "\n");
  }
  return ex;
}

}  // namespace flaky
