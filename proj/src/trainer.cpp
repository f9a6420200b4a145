#include "flaky/trainer.hpp"

#include <chrono>
#include <cmath>
#include <iostream>
#include <numeric>

#include <json.hpp>

#include "flaky/error.hpp"
#include "flaky/eval.hpp"
#include "flaky/rng.hpp"

namespace flaky {

TrainingConfig TrainingConfig::fine_tuning() { return TrainingConfig{}; }

TrainingConfig TrainingConfig::from_scratch() {
  TrainingConfig c;
  c.learning_rate = 1e-3;
  return c;
}

void TrainingConfig::validate() const {
  if (!(learning_rate > 0.0)) throw InputError("learning_rate must be positive");
  if (!(weight_decay >= 0.0)) throw InputError("weight_decay must be >= 0");
  if (epochs < 1) throw InputError("epochs must be at least 1");
  if (batch_size < 1) throw InputError("batch_size must be at least 1");
  if (!(beta_ens >= 0.0 && beta_ens < 1.0)) throw InputError("beta_ens must be in [0, 1)");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) throw InputError("Adam betas must be in [0, 1)");
  if (!(epsilon > 0.0)) throw InputError("epsilon must be positive");
  focal.validate();
  if (augmentation) augmentation->validate();
}

AdamState AdamState::for_state(const ModelState& state) {
  AdamState a;
  a.m = state.params;
  a.m.for_each([](const char*, Tensor& t) { std::fill(t.v.begin(), t.v.end(), 0.0); });
  a.v = a.m;
  return a;
}

void adamw_update(double* theta, const double* grad, double* m, double* v, std::size_t n, const TrainingConfig& cfg,
                  std::uint64_t step) {
  const double b1 = cfg.beta1, b2 = cfg.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(step));
  for (std::size_t i = 0; i < n; ++i) {
    const double g = grad ? grad[i] : 0.0;
    m[i] = b1 * m[i] + (1.0 - b1) * g;
    v[i] = b2 * v[i] + (1.0 - b2) * g * g;
    const double mhat = m[i] / c1;
    const double vhat = v[i] / c2;
    theta[i] -= cfg.learning_rate * (mhat / (std::sqrt(vhat) + cfg.epsilon) + cfg.weight_decay * theta[i]);
  }
}

void optimizer_step(ModelState& state, const Gradients& grads, const TrainingConfig& cfg, AdamState& adam) {
  grads.dense.for_each([](const char* name, const Tensor& t) {
    for (double x : t.v)
      if (!std::isfinite(x)) throw ContractError(std::string("non-finite gradient in ") + name);
  });
  for (const auto& [row, g] : grads.embedding_rows)
    for (double x : g)
      if (!std::isfinite(x)) throw ContractError("non-finite gradient in embedding row " + std::to_string(row));

  ++adam.step;
  std::vector<Tensor*> ms, vs;
  adam.m.for_each([&](const char*, Tensor& t) { ms.push_back(&t); });
  adam.v.for_each([&](const char*, Tensor& t) { vs.push_back(&t); });
  std::vector<const Tensor*> gs;
  grads.dense.for_each([&](const char*, const Tensor& t) { gs.push_back(&t); });
  std::size_t k = 0;
  state.params.for_each([&](const char* name, Tensor& theta) {
    Tensor& m = *ms[k];
    Tensor& v = *vs[k];
    const Tensor& g = *gs[k];
    ++k;
    if (theta.empty()) return;
    if (std::string_view(name) == "embedding") {
      const std::size_t d = theta.cols;
      for (std::size_t r = 0; r < theta.rows; ++r) {
        auto it = grads.embedding_rows.find(static_cast<std::int32_t>(r));
        const double* gr = it == grads.embedding_rows.end() ? nullptr : it->second.data();
        adamw_update(theta.row(r), gr, m.row(r), v.row(r), d, cfg, adam.step);
      }
      return;
    }
    if (g.size() != theta.size()) throw ContractError(std::string("gradient shape mismatch for ") + name);
    adamw_update(theta.v.data(), g.v.data(), m.v.data(), v.v.data(), theta.size(), cfg, adam.step);
  });
}

std::string trace_to_json(const TrainingTrace& trace) {
  nlohmann::ordered_json j;
  auto epochs = nlohmann::ordered_json::array();
  for (std::size_t e = 0; e < trace.epochs.size(); ++e) {
    const auto& s = trace.epochs[e];
    epochs.push_back({{"epoch", e + 1}, {"total", s.total}, {"binary", s.binary}, {"categorical", s.categorical}});
  }
  j["epochs"] = std::move(epochs);
  j["wall_seconds"] = trace.wall_seconds;
  nlohmann::ordered_json w;
  w["beta"] = trace.weights.beta;
  for (Category c : kAllCategories) {
    const auto i = index_of(c);
    w[std::string(render(c))] = trace.weights.present[i] ? nlohmann::ordered_json(trace.weights.w[i]) : nullptr;
  }
  j["class_weights"] = std::move(w);
  j["warnings"] = trace.warnings;
  return j.dump(2) + "\n";
}

AugmentationPolicy resolve_policy(const AugmentationPolicy& base, const SymbolicVocabulary& vocab) {
  AugmentationPolicy p = base;
  if (p.train_decoys.empty() || p.stress_decoys.empty()) {
    const auto mined = AugmentationPolicy::from_vocabulary(vocab, base.seed);
    if (p.train_decoys.empty()) p.train_decoys = mined.train_decoys;
    if (p.stress_decoys.empty()) p.stress_decoys = mined.stress_decoys;
  }
  p.validate();
  if (p.train_decoys.empty() || p.stress_decoys.empty()) throw InputError("decoy pools must be non-empty");
  return p;
}

FoldModel train_fold(const Corpus& train, const SymbolicVocabulary& vocab, const ModelConfig& model_cfg,
                     const SymbolicOptions& symbolic, const TrainingConfig& cfg) {
  cfg.validate();
  if (train.empty()) throw InputError("empty training set");
  const auto started = std::chrono::steady_clock::now();

  FoldModel out;
  out.checkpoint.state = init_params(model_cfg);
  out.init_checksum = out.checkpoint.state.checksum();
  out.checkpoint.symbolic_vocab = vocab;
  out.checkpoint.symbolic_options = symbolic;

  std::optional<AugmentationPolicy> policy;
  if (cfg.augmentation) policy = resolve_policy(*cfg.augmentation, vocab);

  std::vector<TokenStream> streams;
  streams.reserve(train.size());
  for (const auto& t : train.tests()) streams.push_back(code_tokens(t.source));
  // The vocabulary also covers the first epoch's augmented inputs, which are
  // training data too.
  auto vocab_streams = streams;
  if (policy) {
    for (const auto& t : train.tests()) {
      const auto aug = augment_training(t, *policy, derive_seed(cfg.seed ^ 0xa5a5a5a5ULL, t.id, 0));
      if (!aug.applied.empty()) vocab_streams.push_back(code_tokens(aug.test.source));
    }
  }
  out.checkpoint.neural_vocab = NeuralVocabulary::build(vocab_streams, model_cfg.vocab_cap);
  const auto& nv = out.checkpoint.neural_vocab;

  auto& trace = out.trace;
  trace.weights = ens_weights(train.category_counts(), cfg.beta_ens);
  for (Category c : trace.weights.excluded())
    trace.warnings.push_back("class '" + std::string(render(c)) + "' absent from training data; no ENS weight");
  if (kNumCategories - trace.weights.excluded().size() < 2)
    trace.warnings.push_back("fewer than two classes in training data; ENS weighting is degenerate");
  for (const auto& w : trace.warnings) std::cerr << "warning: " << w << '\n';

  const auto& spec = FeatureGroupSpec::standard();
  std::vector<ExampleInput> clean(train.size());
  for (std::size_t i = 0; i < train.size(); ++i) {
    clean[i].ids = nv.encode(streams[i], model_cfg.max_seq);
    clean[i].symbolic = extract(tokenize(train[i].source), vocab, spec, symbolic);
  }
  auto& state = out.checkpoint.state;
  AdamState adam = AdamState::for_state(state);
  Gradients grads = Gradients::zeros_like(state);
  const auto width = static_cast<std::size_t>(model_cfg.d_fused());
  const auto n = train.size();
  const auto bs = static_cast<std::size_t>(cfg.batch_size);

  std::vector<std::size_t> order(n);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng(derive_seed(cfg.seed, "epoch-order", static_cast<std::uint64_t>(epoch))).shuffle(order);
    EpochStats stats;
    for (std::size_t start = 0; start < n; start += bs) {
      const auto count = std::min(bs, n - start);
      std::vector<ExampleInput> augmented(count);
      std::vector<std::vector<double>> masks(count);
      std::vector<kernels::BatchItem> batch(count);
      for (std::size_t b = 0; b < count; ++b) {
        const auto idx = order[start + b];
        const auto& test = train[idx];
        const ExampleInput* input = &clean[idx];
        const auto ep = static_cast<std::uint64_t>(epoch);
        if (policy) {
          const auto aug = augment_training(test, *policy, derive_seed(cfg.seed ^ 0xa5a5a5a5ULL, test.id, ep));
          if (!aug.applied.empty()) {
            augmented[b] = prepare_input(aug.test.source, nv, vocab, symbolic, model_cfg.max_seq);
            input = &augmented[b];
          }
        }
        batch[b].input = input;
        batch[b].label = test.label;
        if (model_cfg.dropout_rate > 0.0) {
          masks[b] = dropout_mask(width, model_cfg.dropout_rate, derive_seed(cfg.seed, "dropout:" + test.id, ep));
          batch[b].mask = &masks[b];
        }
      }
      const auto loss = kernels::batch_gradients(state, batch, trace.weights, cfg.focal, cfg.mix, grads, cfg.exec);
      optimizer_step(state, grads, cfg, adam);
      stats.total += loss.total;
      stats.binary += loss.binary;
      stats.categorical += loss.categorical;
    }
    const double inv = 1.0 / static_cast<double>(n);
    trace.epochs.push_back({stats.total * inv, stats.binary * inv, stats.categorical * inv});
  }
  trace.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return out;
}

std::vector<FoldOutcome> cross_validate(const Corpus& corpus, const SplitPlan& plan, const CvSettings& settings,
                                        const FoldCallback& on_fold) {
  std::vector<FoldOutcome> out;
  std::uint64_t first_checksum = 0;
  for (int f = 0; f < plan.k; ++f) {
    const auto& fold = plan.folds[static_cast<std::size_t>(f)];
    if (fold.test_ids.empty()) continue;
    const Corpus train = corpus.subset(fold.train_ids);
    const Corpus test = corpus.subset(fold.test_ids);

    FoldOutcome o;
    o.fold = f;
    o.vocab = mine(train, settings.mining);
    o.model = train_fold(train, o.vocab, settings.model, settings.symbolic, settings.training);
    o.init_checksum = o.model.init_checksum;
    if (out.empty()) first_checksum = o.init_checksum;
    if (o.init_checksum != first_checksum)
      throw ContractError("fresh reload violated: fold " + std::to_string(f) + " starts from different weights");

    o.stress_policy = resolve_policy(settings.stress_policy, o.vocab);
    auto stress = stress_evaluate(o.model.checkpoint, test, o.stress_policy, settings.stress_modes,
                                  settings.training.exec);
    for (const auto& t : test.tests()) {
      o.test_ids.push_back(t.id);
      o.labels.push_back(t.label);
    }
    o.clean = std::move(stress.clean);
    o.stressed = std::move(stress.predictions);
    if (on_fold) on_fold(o);
    out.push_back(std::move(o));
  }
  return out;
}

}  // namespace flaky
