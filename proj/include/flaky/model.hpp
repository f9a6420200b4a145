#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "flaky/corpus.hpp"
#include "flaky/dtm.hpp"
#include "flaky/symbolic.hpp"

namespace flaky {

inline constexpr int kProjectionWidth = 128;

struct ModelConfig {
  int d_neural = 768;
  int vocab_cap = 20000;
  int max_seq = 512;
  int n_attention_blocks = 1;  // 0 or 1
  bool positional = false;     // sinusoidal positions on attention queries and keys
  double dropout_rate = 0.3;
  std::uint64_t seed = 0;
  bool use_symbolic = true;  // false: neural-only ablation, fused width = d_neural

  int d_fused() const { return d_neural + (use_symbolic ? kProjectionWidth : 0); }
  void validate() const;  // throws InputError
  bool operator==(const ModelConfig&) const = default;
};

// Row-major dense matrix; vectors are rows x 1.
struct Tensor {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> v;

  Tensor() = default;
  Tensor(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), v(r * c, fill) {}
  double& operator()(std::size_t r, std::size_t c) { return v[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return v[r * cols + c]; }
  double* row(std::size_t r) { return v.data() + r * cols; }
  const double* row(std::size_t r) const { return v.data() + r * cols; }
  std::size_t size() const { return v.size(); }
  bool empty() const { return v.empty(); }
  bool operator==(const Tensor&) const = default;
};

struct Parameters {
  Tensor embedding;                       // vocab_cap x d_neural
  Tensor attn_q, attn_k, attn_v, attn_o;  // d x d each, empty without attention
  Tensor pool_w, pool_b;                  // d x d, d
  Tensor proj_w1, proj_b1;                // 128 x 16, 128
  Tensor proj_w2, proj_b2;                // 128 x 128, 128
  Tensor ln_gain, ln_bias;                // 128, 128
  Tensor bin_w, bin_b;                    // 2 x d_fused, 2
  Tensor cat_w, cat_b;                    // 6 x d_fused, 6

  template <typename F>
  void for_each(F&& f) {
    f("embedding", embedding);
    f("attn_q", attn_q);
    f("attn_k", attn_k);
    f("attn_v", attn_v);
    f("attn_o", attn_o);
    f("pool_w", pool_w);
    f("pool_b", pool_b);
    f("proj_w1", proj_w1);
    f("proj_b1", proj_b1);
    f("proj_w2", proj_w2);
    f("proj_b2", proj_b2);
    f("ln_gain", ln_gain);
    f("ln_bias", ln_bias);
    f("bin_w", bin_w);
    f("bin_b", bin_b);
    f("cat_w", cat_w);
    f("cat_b", cat_b);
  }
  template <typename F>
  void for_each(F&& f) const {
    const_cast<Parameters*>(this)->for_each(
        [&](const char* name, Tensor& t) { f(name, static_cast<const Tensor&>(t)); });
  }
  bool operator==(const Parameters&) const = default;
};

struct ModelState {
  ModelConfig config;
  Parameters params;

  std::uint64_t checksum() const;
  bool all_finite() const;
  bool operator==(const ModelState&) const = default;
};

// Deterministic in config.seed; every affine map uses a uniform bound of
// sqrt(6 / (fan_in + fan_out)), layer-norm gain 1 and bias 0.
ModelState init_params(const ModelConfig& config);

// Token -> embedding row. Row 0 is the shared UNK row.
class NeuralVocabulary {
 public:
  NeuralVocabulary() = default;
  explicit NeuralVocabulary(std::vector<std::string> tokens);
  // Most frequent tokens first (ties lexicographic), capped at vocab_cap - 1.
  static NeuralVocabulary build(const std::vector<TokenStream>& streams, int vocab_cap);

  std::int32_t id(const std::string& token) const;
  std::vector<std::int32_t> encode(const TokenStream& tokens, int max_seq) const;
  const std::vector<std::string>& tokens() const { return tokens_; }
  std::size_t size() const { return tokens_.size() + 1; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::int32_t> index_;
};

struct ExampleInput {
  std::vector<std::int32_t> ids;
  SymbolicFeatureVector symbolic{};
};

struct Logits {
  std::array<double, 2> binary{};  // index 1 = flaky
  std::array<double, kNumCategories> categorical{};
};

// Intermediates kept for the backward pass.
struct ForwardCache {
  std::size_t len = 0;
  Tensor x, xp, q, k, vv, attn, ctx, h;  // L x d (attn: L x L); xp = x + positions
  std::vector<double> pooled, neural;
  std::vector<double> z1, r1, z2, xhat, y;
  double inv_std = 0.0;
  std::vector<double> fused, dropped, mask;
};

// `mask` (length d_fused, entries 0 or 1/(1-rate)) selects train mode; pass
// nullptr for deterministic eval mode.
Logits forward(const ModelState& state, const ExampleInput& in, const std::vector<double>* mask = nullptr,
               ForwardCache* cache = nullptr);

std::vector<double> encode_neural(const ModelState& state, const std::vector<std::int32_t>& ids);
std::vector<double> project_symbolic(const ModelState& state, const SymbolicFeatureVector& v);
std::vector<double> project_symbolic(const ModelState& state, const std::vector<double>& v);
std::vector<double> fuse(const std::vector<double>& neural, const std::vector<double>& symbolic,
                         const ModelConfig& config);

std::vector<double> dropout_mask(std::size_t width, double rate, std::uint64_t seed);

// Argmax of the categorical head, ties to the earliest category.
Category predict(const Logits& logits);

template <std::size_t N>
std::array<double, N> softmax(const std::array<double, N>& z) {
  double mx = z[0];
  for (double x : z) mx = x > mx ? x : mx;
  std::array<double, N> p{};
  double sum = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    p[i] = std::exp(z[i] - mx);
    sum += p[i];
  }
  for (auto& x : p) x /= sum;
  return p;
}

// Dense gradients for every tensor except the embedding, which is kept as
// sparse rows keyed by token id.
struct Gradients {
  Parameters dense;
  std::map<std::int32_t, std::vector<double>> embedding_rows;

  static Gradients zeros_like(const ModelState& state);
  void zero();
  // this += other, tensor by tensor in a fixed order.
  void add(const Gradients& other);
  void scale(double s);
  bool all_finite() const;
};

void backward(const ModelState& state, const ExampleInput& in, const ForwardCache& cache,
              const std::array<double, 2>& d_binary, const std::array<double, kNumCategories>& d_categorical,
              Gradients& grads);

// A trained classifier with everything inference needs.
struct Checkpoint {
  ModelState state;
  NeuralVocabulary neural_vocab;
  SymbolicVocabulary symbolic_vocab;
  SymbolicOptions symbolic_options;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(std::string_view bytes);
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Neural ids from code_tokens(source), symbolic features from tokenize(source).
ExampleInput prepare_input(const TestCase& test, const Checkpoint& ckpt);
ExampleInput prepare_input(std::string_view source, const NeuralVocabulary& nv, const SymbolicVocabulary& sv,
                           const SymbolicOptions& so, int max_seq);

}  // namespace flaky
