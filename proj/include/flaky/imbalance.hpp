#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "flaky/category.hpp"
#include "flaky/model.hpp"

namespace flaky {

struct ClassWeights {
  double beta = 0.9999;
  std::array<double, kNumCategories> w{};
  std::array<bool, kNumCategories> present{};

  // Throws InputError for a class that had no samples.
  double of(Category c) const;
  // Classes left out because their count was zero.
  std::vector<Category> excluded() const;
};

// w_c = (1 - beta) / (1 - beta^n_c), no renormalization.
ClassWeights ens_weights(const std::array<std::size_t, kNumCategories>& counts, double beta);

struct FocalParams {
  double alpha = 0.25;
  double gamma = 2.0;

  void validate() const;  // throws InputError
};

inline constexpr double kProbClamp = 1e-12;

// -alpha (1 - p_t)^gamma ln(p_t), p_t clamped to [1e-12, 1] first.
double focal_loss(double p_t, const FocalParams& params);

struct HeadLoss2 {
  double value = 0.0;
  std::array<double, 2> grad{};  // d value / d logits
};

struct HeadLoss6 {
  double value = 0.0;
  std::array<double, kNumCategories> grad{};
};

HeadLoss2 binary_focal_from_logits(const std::array<double, 2>& logits, bool is_flaky, const FocalParams& params);
HeadLoss6 weighted_categorical_ce(const std::array<double, kNumCategories>& logits, Category label,
                                  const ClassWeights& weights);

struct LossMix {
  double lambda_bin = 1.0;
  double lambda_cat = 1.0;
};

struct TotalLoss {
  double total = 0.0;
  double binary = 0.0;       // unscaled focal term
  double categorical = 0.0;  // unscaled weighted CE term
  std::array<double, 2> d_binary{};
  std::array<double, kNumCategories> d_categorical{};
};

TotalLoss total_loss(const Logits& logits, Category label, const ClassWeights& weights, const FocalParams& focal,
                     const LossMix& mix = {});

}  // namespace flaky
