#include <gtest/gtest.h>

#include <cmath>
#include <omp.h>

#include "flaky/dtm.hpp"
#include "flaky/error.hpp"
#include "flaky/kernels.hpp"
#include "flaky/splitter.hpp"
#include "flaky/synth.hpp"
#include "flaky/trainer.hpp"

using namespace flaky;

namespace {

ModelConfig tiny_model() {
  ModelConfig m;
  m.d_neural = 16;
  m.vocab_cap = 256;
  m.max_seq = 96;
  m.seed = 3;
  return m;
}

TrainingConfig quick_training(int epochs = 2) {
  auto t = TrainingConfig::from_scratch();
  t.epochs = epochs;
  t.seed = 11;
  return t;
}

Corpus small_corpus(double q_signal = 0.8, double q_noise = 0.05) {
  SynthSpec s;
  s.tests = 160;
  s.projects = 16;
  s.flaky_fraction = 0.25;
  s.q_signal = q_signal;
  s.q_noise = q_noise;
  s.seed = 4;
  return generate_corpus(s);
}

// Scalar AdamW written out from the update equations.
struct RefAdam {
  double m = 0, v = 0;
  int t = 0;
  double step(double theta, double g, double lr, double wd, double b1 = 0.9, double b2 = 0.999, double eps = 1e-8) {
    ++t;
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mh = m / (1 - std::pow(b1, t));
    const double vh = v / (1 - std::pow(b2, t));
    return theta - lr * (mh / (std::sqrt(vh) + eps) + wd * theta);
  }
};

}  // namespace

TEST(AdamW, ZeroGradientNoDecayIsIdentity) {
  TrainingConfig cfg;
  cfg.learning_rate = 0.01;
  cfg.weight_decay = 0.0;
  double theta[3] = {1.0, -2.0, 0.5}, m[3] = {}, v[3] = {};
  const double g[3] = {};
  for (std::uint64_t s = 1; s <= 10; ++s) adamw_update(theta, g, m, v, 3, cfg, s);
  EXPECT_EQ(theta[0], 1.0);
  EXPECT_EQ(theta[1], -2.0);
  EXPECT_EQ(theta[2], 0.5);
}

TEST(AdamW, ZeroGradientDecayFactor) {
  TrainingConfig cfg;
  cfg.learning_rate = 0.01;
  cfg.weight_decay = 0.01;
  double theta = 3.0, m = 0, v = 0;
  for (std::uint64_t s = 1; s <= 5; ++s) {
    const double before = theta;
    adamw_update(&theta, nullptr, &m, &v, 1, cfg, s);
    EXPECT_NEAR(theta, before * (1 - 0.01 * 0.01), 1e-15);
  }
}

TEST(AdamW, MatchesScalarReference) {
  TrainingConfig cfg;
  cfg.learning_rate = 0.05;
  cfg.weight_decay = 0.02;
  double theta = 0.7, m = 0, v = 0, ref = 0.7;
  RefAdam r;
  for (std::uint64_t s = 1; s <= 50; ++s) {
    const double g = std::sin(static_cast<double>(s)) + 0.3 * theta;
    adamw_update(&theta, &g, &m, &v, 1, cfg, s);
    ref = r.step(ref, std::sin(static_cast<double>(s)) + 0.3 * ref, 0.05, 0.02);
    EXPECT_NEAR(theta, ref, 1e-14);
  }
}

TEST(AdamW, QuadraticConverges) {
  TrainingConfig cfg;
  cfg.learning_rate = 0.1;
  cfg.weight_decay = 0.0;
  double theta = 1.0, m = 0, v = 0;
  for (std::uint64_t s = 1; s <= 200; ++s) {
    const double g = 2 * theta;
    adamw_update(&theta, &g, &m, &v, 1, cfg, s);
  }
  EXPECT_LT(std::abs(theta), 1e-3);
}

TEST(OptimizerStep, RejectsNonFiniteGradient) {
  auto state = init_params(tiny_model());
  auto grads = Gradients::zeros_like(state);
  grads.dense.cat_b.v[2] = NAN;
  auto adam = AdamState::for_state(state);
  try {
    optimizer_step(state, grads, quick_training(), adam);
    FAIL();
  } catch (const ContractError& e) {
    EXPECT_NE(std::string(e.what()).find("cat_b"), std::string::npos);
  }
}

TEST(OptimizerStep, UpdatesEveryEmbeddingRow) {
  auto state = init_params(tiny_model());
  const auto before = state.params.embedding;
  auto grads = Gradients::zeros_like(state);
  grads.embedding_rows[5] = std::vector<double>(16, 0.1);
  auto adam = AdamState::for_state(state);
  auto cfg = quick_training();
  optimizer_step(state, grads, cfg, adam);
  // Row without a gradient still decays.
  EXPECT_NEAR(state.params.embedding(7, 0), before(7, 0) * (1 - cfg.learning_rate * cfg.weight_decay), 1e-15);
  EXPECT_LT(state.params.embedding(5, 0), before(5, 0) * (1 - cfg.learning_rate * cfg.weight_decay));
}

TEST(TrainingConfig, Validation) {
  auto t = quick_training();
  t.epochs = 0;
  EXPECT_THROW(t.validate(), InputError);
  t = quick_training();
  t.batch_size = 0;
  EXPECT_THROW(t.validate(), InputError);
  t = quick_training();
  t.learning_rate = 0;
  EXPECT_THROW(t.validate(), InputError);
  EXPECT_EQ(TrainingConfig::fine_tuning().learning_rate, 2e-5);
  EXPECT_EQ(TrainingConfig::fine_tuning().epochs, 8);
  EXPECT_EQ(TrainingConfig::fine_tuning().batch_size, 16);
  EXPECT_EQ(TrainingConfig::from_scratch().learning_rate, 1e-3);
  const auto c = small_corpus();
  EXPECT_THROW(train_fold(c, mine(c, {}), tiny_model(), {}, t), InputError);
}

TEST(TrainFold, DeterministicAndTraced) {
  const auto c = small_corpus();
  const auto v = mine(c, {});
  const auto a = train_fold(c, v, tiny_model(), {}, quick_training());
  const auto b = train_fold(c, v, tiny_model(), {}, quick_training());
  EXPECT_EQ(serialize_checkpoint(a.checkpoint), serialize_checkpoint(b.checkpoint));
  EXPECT_EQ(a.trace.epochs.size(), 2u);
  EXPECT_EQ(a.init_checksum, init_params(tiny_model()).checksum());
  const auto json = trace_to_json(a.trace);
  EXPECT_NE(json.find("\"class_weights\""), std::string::npos);
}

TEST(TrainFold, LossHalvesOnSeparableData) {
  const auto c = small_corpus(1.0, 0.0);
  const auto t = train_fold(c, mine(c, {}), tiny_model(), {}, quick_training(10));
  EXPECT_LT(t.trace.epochs.back().total, 0.5 * t.trace.epochs.front().total);
}

TEST(TrainFold, WarnsOnMissingClasses) {
  std::vector<TestCase> v;
  for (int i = 0; i < 6; ++i)
    v.push_back({"t" + std::to_string(i), "p" + std::to_string(i), "void a() { x(); }",
                 i < 3 ? Category::time : Category::non_flaky});
  const Corpus c(v);
  const auto t = train_fold(c, SymbolicVocabulary{}, tiny_model(), {}, quick_training(1));
  EXPECT_EQ(t.trace.warnings.size(), 4u);  // four absent classes
}

TEST(TrainFold, SerialAndParallelBitIdentical) {
  const auto c = small_corpus();
  const auto v = mine(c, {});
  auto cfg = quick_training();
  cfg.augmentation = AugmentationPolicy{};
  cfg.exec = kernels::Exec::serial;
  const auto s = train_fold(c, v, tiny_model(), {}, cfg);
  const int saved = omp_get_max_threads();
  omp_set_num_threads(4);
  cfg.exec = kernels::Exec::parallel;
  const auto p = train_fold(c, v, tiny_model(), {}, cfg);
  omp_set_num_threads(saved);
  EXPECT_EQ(s.checkpoint.state.checksum(), p.checkpoint.state.checksum());
  EXPECT_EQ(serialize_checkpoint(s.checkpoint), serialize_checkpoint(p.checkpoint));
}

TEST(Kernels, SerialAndParallelAgree) {
  const auto c = small_corpus();
  const int saved = omp_get_max_threads();
  omp_set_num_threads(4);
  const auto in = prepare_mining_input(c);
  EXPECT_EQ(kernels::score_tokens(in, kernels::Exec::serial), kernels::score_tokens(in, kernels::Exec::parallel));
  const auto v = mine(c, {});
  const auto& spec = FeatureGroupSpec::standard();
  EXPECT_EQ(kernels::extract_features(c, v, spec, {}, kernels::Exec::serial),
            kernels::extract_features(c, v, spec, {}, kernels::Exec::parallel));
  omp_set_num_threads(saved);
}

TEST(CrossValidate, FreshReloadAndFoldLocalMining) {
  const auto c = small_corpus();
  const auto plan = plan_splits(c, 4, 2);
  CvSettings st;
  st.model = tiny_model();
  st.training = quick_training(1);
  st.stress_modes = {StressMode::both};
  const auto folds = cross_validate(c, plan, st);
  ASSERT_EQ(folds.size(), 4u);
  std::size_t tested = 0;
  bool vocab_differs = false;
  for (const auto& f : folds) {
    EXPECT_EQ(f.init_checksum, folds[0].init_checksum);
    EXPECT_EQ(f.clean.size(), f.test_ids.size());
    EXPECT_EQ(f.stressed.at(StressMode::both).size(), f.test_ids.size());
    EXPECT_EQ(f.vocab, mine(c.subset(plan.folds[static_cast<std::size_t>(f.fold)].train_ids), st.mining));
    vocab_differs |= !(f.vocab == folds[0].vocab);
    tested += f.test_ids.size();
  }
  EXPECT_TRUE(vocab_differs);
  EXPECT_EQ(tested, c.size());
}
