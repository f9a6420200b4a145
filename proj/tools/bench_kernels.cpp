// Serial reference vs OpenMP kernels on a synthetic corpus.
#include <benchmark/benchmark.h>

#include "flaky/dtm.hpp"
#include "flaky/kernels.hpp"
#include "flaky/model.hpp"
#include "flaky/symbolic.hpp"
#include "flaky/synth.hpp"

using namespace flaky;

namespace {

const Corpus& bench_corpus() {
  static const Corpus c = [] {
    SynthSpec s;
    s.tests = 2000;
    s.projects = 80;
    return generate_corpus(s);
  }();
  return c;
}

kernels::Exec exec_of(const benchmark::State& st) {
  return st.range(0) ? kernels::Exec::parallel : kernels::Exec::serial;
}

void BM_ScoreTokens(benchmark::State& st) {
  const auto in = prepare_mining_input(bench_corpus());
  for (auto _ : st) benchmark::DoNotOptimize(kernels::score_tokens(in, exec_of(st)));
}

void BM_ExtractFeatures(benchmark::State& st) {
  const auto vocab = mine(bench_corpus(), MiningParams{});
  for (auto _ : st)
    benchmark::DoNotOptimize(
        kernels::extract_features(bench_corpus(), vocab, FeatureGroupSpec::standard(), {}, exec_of(st)));
}

struct ModelFixture {
  ModelState state;
  std::vector<ExampleInput> inputs;
  ModelFixture() {
    ModelConfig cfg;
    cfg.d_neural = 64;
    cfg.vocab_cap = 2048;
    cfg.max_seq = 256;
    state = init_params(cfg);
    const auto& corpus = bench_corpus();
    std::vector<TokenStream> streams;
    for (const auto& t : corpus.tests()) streams.push_back(code_tokens(t.source));
    const auto nv = NeuralVocabulary::build(streams, cfg.vocab_cap);
    const auto vocab = mine(corpus, MiningParams{});
    for (std::size_t i = 0; i < 256; ++i)
      inputs.push_back(prepare_input(corpus[i].source, nv, vocab, {}, cfg.max_seq));
  }
};

const ModelFixture& fixture() {
  static const ModelFixture f;
  return f;
}

void BM_BatchForward(benchmark::State& st) {
  const auto& f = fixture();
  for (auto _ : st) benchmark::DoNotOptimize(kernels::batch_forward(f.state, f.inputs, exec_of(st)));
}

void BM_BatchGradients(benchmark::State& st) {
  const auto& f = fixture();
  std::vector<kernels::BatchItem> batch;
  for (std::size_t i = 0; i < 64; ++i) batch.push_back({&f.inputs[i], kAllCategories[i % kNumCategories], nullptr});
  const auto w = ens_weights({10, 10, 10, 10, 10, 100}, 0.9999);
  auto grads = Gradients::zeros_like(f.state);
  for (auto _ : st)
    benchmark::DoNotOptimize(kernels::batch_gradients(f.state, batch, w, {}, {}, grads, exec_of(st)));
}

}  // namespace

BENCHMARK(BM_ScoreTokens)->Arg(0)->Arg(1)->ArgName("parallel")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ExtractFeatures)->Arg(0)->Arg(1)->ArgName("parallel")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BatchForward)->Arg(0)->Arg(1)->ArgName("parallel")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BatchGradients)->Arg(0)->Arg(1)->ArgName("parallel")->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
