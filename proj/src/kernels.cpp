#include "flaky/kernels.hpp"

#include <algorithm>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace flaky::kernels {

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

namespace {

std::array<TokenScore, kNumCategories> score_one(const MiningInput& in, std::size_t t,
                                                 const std::array<std::uint64_t, kNumCategories>& class_size) {
  const auto& docs = in.docs_with_token[t];
  const std::uint64_t n = in.labels.size();
  std::array<std::uint64_t, kNumCategories> present{};
  std::array<std::vector<std::uint32_t>, kNumCategories> projects;
  for (auto d : docs) {
    const auto c = index_of(in.labels[d]);
    ++present[c];
    projects[c].push_back(in.doc_project[d]);
  }
  std::array<TokenScore, kNumCategories> out;
  for (std::size_t c = 0; c < kNumCategories; ++c) {
    ContingencyTable tab;
    tab.o11 = present[c];
    tab.o12 = docs.size() - present[c];
    tab.o21 = class_size[c] - present[c];
    tab.o22 = n - class_size[c] - tab.o12;
    auto& s = out[c];
    s.chi2 = chi_square(tab).chi2;
    s.p_value = p_value_chi2_1dof(s.chi2);
    // o11 > row1 * col1 / N, in integers
    s.over_represented = tab.o11 * n > tab.row1() * tab.col1();
    auto& p = projects[c];
    std::sort(p.begin(), p.end());
    s.project_support = static_cast<std::uint32_t>(std::unique(p.begin(), p.end()) - p.begin());
  }
  return out;
}

}  // namespace

std::vector<std::array<TokenScore, kNumCategories>> score_tokens(const MiningInput& in, Exec exec) {
  std::array<std::uint64_t, kNumCategories> class_size{};
  for (auto c : in.labels) ++class_size[index_of(c)];
  const auto n = static_cast<std::int64_t>(in.tokens.size());
  std::vector<std::array<TokenScore, kNumCategories>> out(in.tokens.size());
  if (exec == Exec::serial) {
    for (std::int64_t t = 0; t < n; ++t) out[t] = score_one(in, static_cast<std::size_t>(t), class_size);
  } else {
#pragma omp parallel for schedule(static)
    for (std::int64_t t = 0; t < n; ++t) out[t] = score_one(in, static_cast<std::size_t>(t), class_size);
  }
  return out;
}

std::vector<SymbolicFeatureVector> extract_features(const Corpus& corpus, const SymbolicVocabulary& vocab,
                                                    const FeatureGroupSpec& spec, const SymbolicOptions& opts,
                                                    Exec exec) {
  const auto n = static_cast<std::int64_t>(corpus.size());
  std::vector<SymbolicFeatureVector> out(corpus.size());
  if (exec == Exec::serial) {
    for (std::int64_t i = 0; i < n; ++i) out[i] = extract(corpus[static_cast<std::size_t>(i)], vocab, spec, opts);
  } else {
#pragma omp parallel for schedule(dynamic, 8)
    for (std::int64_t i = 0; i < n; ++i) out[i] = extract(corpus[static_cast<std::size_t>(i)], vocab, spec, opts);
  }
  return out;
}

namespace {

TotalLoss example_gradient(const ModelState& state, const BatchItem& item, const ClassWeights& weights,
                           const FocalParams& focal, const LossMix& mix, ForwardCache& cache, Gradients& g) {
  g.zero();
  const auto logits = forward(state, *item.input, item.mask, &cache);
  const auto loss = total_loss(logits, item.label, weights, focal, mix);
  backward(state, *item.input, cache, loss.d_binary, loss.d_categorical, g);
  return loss;
}

}  // namespace

BatchLoss batch_gradients(const ModelState& state, const std::vector<BatchItem>& batch, const ClassWeights& weights,
                          const FocalParams& focal, const LossMix& mix, Gradients& grads, Exec exec) {
  grads.zero();
  BatchLoss sum;
  if (batch.empty()) return sum;
  const std::size_t width = exec == Exec::serial ? 1 : static_cast<std::size_t>(std::max(1, max_threads()));
  const std::size_t slots = std::min(width, batch.size());
  std::vector<Gradients> scratch(slots, Gradients::zeros_like(state));
  std::vector<ForwardCache> caches(slots);
  std::vector<TotalLoss> losses(slots);
  for (std::size_t start = 0; start < batch.size(); start += slots) {
    const auto count = static_cast<std::int64_t>(std::min(slots, batch.size() - start));
    if (exec == Exec::serial || count == 1) {
      for (std::int64_t s = 0; s < count; ++s)
        losses[s] = example_gradient(state, batch[start + s], weights, focal, mix, caches[s], scratch[s]);
    } else {
#pragma omp parallel for schedule(static, 1)
      for (std::int64_t s = 0; s < count; ++s)
        losses[s] = example_gradient(state, batch[start + s], weights, focal, mix, caches[s], scratch[s]);
    }
    for (std::int64_t s = 0; s < count; ++s) {
      grads.add(scratch[s]);
      sum.total += losses[s].total;
      sum.binary += losses[s].binary;
      sum.categorical += losses[s].categorical;
    }
  }
  grads.scale(1.0 / static_cast<double>(batch.size()));
  return sum;
}

std::vector<Logits> batch_forward(const ModelState& state, const std::vector<ExampleInput>& inputs, Exec exec) {
  const auto n = static_cast<std::int64_t>(inputs.size());
  std::vector<Logits> out(inputs.size());
  if (exec == Exec::serial) {
    for (std::int64_t i = 0; i < n; ++i) out[i] = forward(state, inputs[i]);
  } else {
#pragma omp parallel for schedule(dynamic, 4)
    for (std::int64_t i = 0; i < n; ++i) out[i] = forward(state, inputs[i]);
  }
  return out;
}

}  // namespace flaky::kernels
