#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "flaky/augment.hpp"
#include "flaky/corpus.hpp"
#include "flaky/dtm.hpp"
#include "flaky/imbalance.hpp"
#include "flaky/kernels.hpp"
#include "flaky/model.hpp"
#include "flaky/splitter.hpp"
#include "flaky/symbolic.hpp"

namespace flaky {

struct TrainingConfig {
  double learning_rate = 2e-5;
  double weight_decay = 0.01;
  int epochs = 8;
  int batch_size = 16;
  double beta_ens = 0.9999;
  FocalParams focal;
  LossMix mix;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;
  // Empty decoy pools are filled from the fold's mined vocabulary.
  std::optional<AugmentationPolicy> augmentation;
  kernels::Exec exec = kernels::Exec::parallel;

  // Fine-tuning value kept for parity with a pre-trained backbone.
  static TrainingConfig fine_tuning();
  // A randomly initialized encoder needs a much larger step.
  static TrainingConfig from_scratch();
  void validate() const;  // throws InputError
};

// First and second moments for every parameter tensor.
struct AdamState {
  Parameters m;
  Parameters v;
  std::uint64_t step = 0;

  static AdamState for_state(const ModelState& state);
};

// One decoupled-weight-decay Adam update on a flat array; `step` is 1-based.
void adamw_update(double* theta, const double* grad, double* m, double* v, std::size_t n, const TrainingConfig& cfg,
                  std::uint64_t step);

// Throws ContractError naming the tensor when a gradient is not finite.
void optimizer_step(ModelState& state, const Gradients& grads, const TrainingConfig& cfg, AdamState& adam);

struct EpochStats {
  double total = 0.0;  // means over the epoch's examples
  double binary = 0.0;
  double categorical = 0.0;
};

struct TrainingTrace {
  std::vector<EpochStats> epochs;
  double wall_seconds = 0.0;
  ClassWeights weights;
  std::vector<std::string> warnings;
};

std::string trace_to_json(const TrainingTrace& trace);

struct FoldModel {
  Checkpoint checkpoint;
  TrainingTrace trace;
  std::uint64_t init_checksum = 0;
};

// Builds the neural vocabulary and ENS weights from `train` only.
FoldModel train_fold(const Corpus& train, const SymbolicVocabulary& vocab, const ModelConfig& model_cfg,
                     const SymbolicOptions& symbolic, const TrainingConfig& cfg);

// Fills empty decoy pools from `vocab`, keeping everything else.
AugmentationPolicy resolve_policy(const AugmentationPolicy& base, const SymbolicVocabulary& vocab);

struct CvSettings {
  MiningParams mining;
  ModelConfig model;
  SymbolicOptions symbolic;
  TrainingConfig training;
  AugmentationPolicy stress_policy;  // pools filled per fold when empty
  std::vector<StressMode> stress_modes = {StressMode::rename, StressMode::deadcode, StressMode::both};
};

struct FoldOutcome {
  int fold = 0;
  std::uint64_t init_checksum = 0;
  SymbolicVocabulary vocab;
  FoldModel model;
  AugmentationPolicy stress_policy;
  std::vector<std::string> test_ids;
  std::vector<Category> labels;
  std::vector<Category> clean;
  std::map<StressMode, std::vector<Category>> stressed;
};

using FoldCallback = std::function<void(const FoldOutcome&)>;

// Fresh init per fold, fold-local mining and vocabulary, training, then clean
// and stress predictions on the held-out projects.
std::vector<FoldOutcome> cross_validate(const Corpus& corpus, const SplitPlan& plan, const CvSettings& settings,
                                        const FoldCallback& on_fold = {});

}  // namespace flaky
