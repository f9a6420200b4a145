#pragma once

// Hot loops with two execution paths. The serial path is the reference;
// the parallel path must produce bit-identical results.

#include <array>
#include <cstdint>
#include <vector>

#include "flaky/corpus.hpp"
#include "flaky/dtm.hpp"
#include "flaky/imbalance.hpp"
#include "flaky/model.hpp"
#include "flaky/symbolic.hpp"

namespace flaky::kernels {

enum class Exec { serial, parallel };

int max_threads();

struct TokenScore {
  double chi2 = 0.0;
  double p_value = 1.0;
  bool over_represented = false;
  std::uint32_t project_support = 0;
  bool operator==(const TokenScore&) const = default;
};

// scores[t][c] for every candidate token and category.
std::vector<std::array<TokenScore, kNumCategories>> score_tokens(const MiningInput& in, Exec exec);

std::vector<SymbolicFeatureVector> extract_features(const Corpus& corpus, const SymbolicVocabulary& vocab,
                                                    const FeatureGroupSpec& spec, const SymbolicOptions& opts,
                                                    Exec exec);

struct BatchItem {
  const ExampleInput* input = nullptr;
  Category label = Category::non_flaky;
  const std::vector<double>* mask = nullptr;  // null: no dropout
};

struct BatchLoss {
  double total = 0.0;  // sums over the batch
  double binary = 0.0;
  double categorical = 0.0;
};

// grads <- mean gradient of total_loss over the batch. Per-example gradients
// are reduced in batch order whatever the thread count.
BatchLoss batch_gradients(const ModelState& state, const std::vector<BatchItem>& batch, const ClassWeights& weights,
                          const FocalParams& focal, const LossMix& mix, Gradients& grads, Exec exec);

std::vector<Logits> batch_forward(const ModelState& state, const std::vector<ExampleInput>& inputs, Exec exec);

}  // namespace flaky::kernels
