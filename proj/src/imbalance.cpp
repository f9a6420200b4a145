#include "flaky/imbalance.hpp"

#include <cmath>
#include <string>

#include "flaky/error.hpp"

namespace flaky {
namespace {

void require_finite(const double* z, std::size_t n, const char* what) {
  for (std::size_t i = 0; i < n; ++i)
    if (!std::isfinite(z[i])) throw ContractError(std::string("non-finite ") + what + " logit");
}

}  // namespace

double ClassWeights::of(Category c) const {
  if (!present[index_of(c)])
    throw InputError("no class weight for '" + std::string(render(c)) + "' (class absent from training data)");
  return w[index_of(c)];
}

std::vector<Category> ClassWeights::excluded() const {
  std::vector<Category> out;
  for (Category c : kAllCategories)
    if (!present[index_of(c)]) out.push_back(c);
  return out;
}

ClassWeights ens_weights(const std::array<std::size_t, kNumCategories>& counts, double beta) {
  if (!(beta >= 0.0)) throw InputError("ENS beta must be >= 0");
  if (!(beta < 1.0)) throw InputError("ENS beta must be < 1");
  ClassWeights cw;
  cw.beta = beta;
  for (std::size_t i = 0; i < kNumCategories; ++i) {
    if (counts[i] == 0) continue;
    cw.present[i] = true;
    const double n = static_cast<double>(counts[i]);
    cw.w[i] = (1.0 - beta) / (1.0 - std::pow(beta, n));
  }
  return cw;
}

void FocalParams::validate() const {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw InputError("focal alpha must be in (0, 1]");
  if (!(gamma >= 0.0)) throw InputError("focal gamma must be >= 0");
}

double focal_loss(double p_t, const FocalParams& params) {
  if (!(p_t >= 0.0 && p_t <= 1.0)) throw ContractError("focal loss: probability outside [0, 1]");
  const double p = std::max(p_t, kProbClamp);
  return -params.alpha * std::pow(1.0 - p, params.gamma) * std::log(p);
}

HeadLoss2 binary_focal_from_logits(const std::array<double, 2>& logits, bool is_flaky, const FocalParams& params) {
  require_finite(logits.data(), 2, "binary");
  const auto prob = softmax(logits);
  const std::size_t y = is_flaky ? 1 : 0;
  const double pt = prob[y];
  HeadLoss2 out;
  out.value = focal_loss(pt, params);
  if (pt <= kProbClamp) return out;  // clamped region is flat
  // dFL/dp_t, then dp_t/dz_j = p_t (1[j = y] - p_j)
  const double a = params.alpha, g = params.gamma;
  const double q = 1.0 - pt;
  const double dpow = g == 0.0 ? 0.0 : g * std::pow(q, g - 1.0);
  const double dfl = a * (dpow * std::log(pt) - std::pow(q, g) / pt);
  for (std::size_t j = 0; j < 2; ++j) out.grad[j] = dfl * pt * ((j == y ? 1.0 : 0.0) - prob[j]);
  return out;
}

HeadLoss6 weighted_categorical_ce(const std::array<double, kNumCategories>& logits, Category label,
                                  const ClassWeights& weights) {
  require_finite(logits.data(), kNumCategories, "categorical");
  const double w = weights.of(label);
  const auto prob = softmax(logits);
  const std::size_t y = index_of(label);
  HeadLoss6 out;
  out.value = -w * std::log(std::max(prob[y], kProbClamp));
  if (prob[y] <= kProbClamp) return out;
  for (std::size_t j = 0; j < kNumCategories; ++j) out.grad[j] = w * (prob[j] - (j == y ? 1.0 : 0.0));
  return out;
}

TotalLoss total_loss(const Logits& logits, Category label, const ClassWeights& weights, const FocalParams& focal,
                     const LossMix& mix) {
  const auto b = binary_focal_from_logits(logits.binary, is_flaky(label), focal);
  const auto c = weighted_categorical_ce(logits.categorical, label, weights);
  TotalLoss t;
  t.binary = b.value;
  t.categorical = c.value;
  t.total = mix.lambda_bin * b.value + mix.lambda_cat * c.value;
  for (std::size_t j = 0; j < 2; ++j) t.d_binary[j] = mix.lambda_bin * b.grad[j];
  for (std::size_t j = 0; j < kNumCategories; ++j) t.d_categorical[j] = mix.lambda_cat * c.grad[j];
  return t;
}

}  // namespace flaky
