#include "flaky/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include <json.hpp>

#include "flaky/error.hpp"
#include "flaky/io.hpp"
#include "flaky/rng.hpp"

namespace flaky {
namespace {

constexpr double kLayerNormEps = 1e-5;

void fill_uniform(Tensor& t, double bound, std::uint64_t seed) {
  Rng rng(seed);
  for (auto& x : t.v) x = rng.uniform(-bound, bound);
}

Tensor xavier(std::size_t out, std::size_t in, std::uint64_t seed, std::string_view name) {
  Tensor t(out, in);
  fill_uniform(t, std::sqrt(6.0 / static_cast<double>(in + out)), derive_seed(seed, name));
  return t;
}

// y = W x + b
void affine(const Tensor& w, const Tensor& b, const double* x, double* y) {
  for (std::size_t r = 0; r < w.rows; ++r) {
    const double* wr = w.row(r);
    double acc = b.v[r];
    for (std::size_t c = 0; c < w.cols; ++c) acc += wr[c] * x[c];
    y[r] = acc;
  }
}

// dW += dy x^T, db += dy, dx = W^T dy (dx may be null)
void affine_backward(const Tensor& w, const double* x, const double* dy, Tensor& dw, Tensor& db, double* dx) {
  for (std::size_t r = 0; r < w.rows; ++r) {
    const double g = dy[r];
    db.v[r] += g;
    if (g == 0.0) continue;
    double* dwr = dw.row(r);
    for (std::size_t c = 0; c < w.cols; ++c) dwr[c] += g * x[c];
  }
  if (dx) {
    std::fill(dx, dx + w.cols, 0.0);
    for (std::size_t r = 0; r < w.rows; ++r) {
      const double g = dy[r];
      if (g == 0.0) continue;
      const double* wr = w.row(r);
      for (std::size_t c = 0; c < w.cols; ++c) dx[c] += wr[c] * g;
    }
  }
}

// Y = X W^T  (X: L x in, W: out x in, Y: L x out)
void matmul_wt(const Tensor& x, const Tensor& w, Tensor& y) {
  y = Tensor(x.rows, w.rows);
  for (std::size_t i = 0; i < x.rows; ++i) {
    const double* xi = x.row(i);
    double* yi = y.row(i);
    for (std::size_t o = 0; o < w.rows; ++o) {
      const double* wo = w.row(o);
      double acc = 0.0;
      for (std::size_t c = 0; c < w.cols; ++c) acc += xi[c] * wo[c];
      yi[o] = acc;
    }
  }
}

// For Y = X W^T: dW += dY^T X, dX += dY W
void matmul_wt_backward(const Tensor& x, const Tensor& w, const Tensor& dy, Tensor& dw, Tensor& dx) {
  for (std::size_t i = 0; i < x.rows; ++i) {
    const double* xi = x.row(i);
    const double* gi = dy.row(i);
    double* dxi = dx.row(i);
    for (std::size_t o = 0; o < w.rows; ++o) {
      const double g = gi[o];
      if (g == 0.0) continue;
      double* dwo = dw.row(o);
      const double* wo = w.row(o);
      for (std::size_t c = 0; c < w.cols; ++c) {
        dwo[c] += g * xi[c];
        dxi[c] += g * wo[c];
      }
    }
  }
}

void check_finite(const Logits& l) {
  for (double x : l.binary)
    if (!std::isfinite(x)) throw ContractError("non-finite binary logit");
  for (double x : l.categorical)
    if (!std::isfinite(x)) throw ContractError("non-finite categorical logit");
}

}  // namespace

void ModelConfig::validate() const {
  if (d_neural < 1) throw InputError("d_neural must be positive");
  if (vocab_cap < 1) throw InputError("vocab_cap must be positive");
  if (max_seq < 1) throw InputError("max_seq must be positive");
  if (n_attention_blocks != 0 && n_attention_blocks != 1) throw InputError("n_attention_blocks must be 0 or 1");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw InputError("dropout_rate must be in [0, 1)");
}

ModelState init_params(const ModelConfig& config) {
  config.validate();
  const auto d = static_cast<std::size_t>(config.d_neural);
  const auto fused = static_cast<std::size_t>(config.d_fused());
  const auto s = config.seed;
  ModelState st;
  st.config = config;
  auto& p = st.params;
  // An embedding lookup is an affine map from a one-hot input: fan_in 1.
  p.embedding = Tensor(static_cast<std::size_t>(config.vocab_cap), d);
  fill_uniform(p.embedding, std::sqrt(6.0 / static_cast<double>(1 + d)), derive_seed(s, "embedding"));
  if (config.n_attention_blocks == 1) {
    p.attn_q = xavier(d, d, s, "attn_q");
    p.attn_k = xavier(d, d, s, "attn_k");
    p.attn_v = xavier(d, d, s, "attn_v");
    p.attn_o = xavier(d, d, s, "attn_o");
  }
  p.pool_w = xavier(d, d, s, "pool_w");
  p.pool_b = Tensor(d, 1);
  if (config.use_symbolic) {
    p.proj_w1 = xavier(kProjectionWidth, kSymbolicWidth, s, "proj_w1");
    p.proj_b1 = Tensor(kProjectionWidth, 1);
    p.proj_w2 = xavier(kProjectionWidth, kProjectionWidth, s, "proj_w2");
    p.proj_b2 = Tensor(kProjectionWidth, 1);
    p.ln_gain = Tensor(kProjectionWidth, 1, 1.0);
    p.ln_bias = Tensor(kProjectionWidth, 1);
  }
  p.bin_w = xavier(2, fused, s, "bin_w");
  p.bin_b = Tensor(2, 1);
  p.cat_w = xavier(kNumCategories, fused, s, "cat_w");
  p.cat_b = Tensor(kNumCategories, 1);
  return st;
}

std::uint64_t ModelState::checksum() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  params.for_each([&](const char* name, const Tensor& t) {
    h = fnv1a(name, h);
    const std::uint64_t shape[2] = {t.rows, t.cols};
    h = fnv1a(std::string_view(reinterpret_cast<const char*>(shape), sizeof shape), h);
    h = fnv1a(std::string_view(reinterpret_cast<const char*>(t.v.data()), t.v.size() * sizeof(double)), h);
  });
  return h;
}

bool ModelState::all_finite() const {
  bool ok = true;
  params.for_each([&](const char*, const Tensor& t) {
    for (double x : t.v) ok = ok && std::isfinite(x);
  });
  return ok;
}

NeuralVocabulary::NeuralVocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  for (std::size_t i = 0; i < tokens_.size(); ++i) index_.emplace(tokens_[i], static_cast<std::int32_t>(i + 1));
}

NeuralVocabulary NeuralVocabulary::build(const std::vector<TokenStream>& streams, int vocab_cap) {
  std::map<std::string, std::size_t> freq;
  for (const auto& s : streams)
    for (const auto& t : s) ++freq[t];
  std::vector<std::pair<std::string, std::size_t>> items(freq.begin(), freq.end());
  std::stable_sort(items.begin(), items.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  const auto cap = static_cast<std::size_t>(std::max(vocab_cap - 1, 0));
  if (items.size() > cap) items.resize(cap);
  std::vector<std::string> tokens;
  tokens.reserve(items.size());
  for (auto& [t, _] : items) tokens.push_back(t);
  return NeuralVocabulary(std::move(tokens));
}

std::int32_t NeuralVocabulary::id(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? 0 : it->second;
}

std::vector<std::int32_t> NeuralVocabulary::encode(const TokenStream& tokens, int max_seq) const {
  const auto n = std::min(tokens.size(), static_cast<std::size_t>(std::max(max_seq, 0)));
  std::vector<std::int32_t> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = id(tokens[i]);
  return ids;
}

std::vector<double> dropout_mask(std::size_t width, double rate, std::uint64_t seed) {
  Rng rng(seed);
  const double keep = 1.0 - rate;
  std::vector<double> m(width);
  for (auto& x : m) x = rng.uniform() < keep ? 1.0 / keep : 0.0;
  return m;
}

namespace {

void neural_forward(const ModelState& state, const std::vector<std::int32_t>& ids, ForwardCache& c) {
  const auto& cfg = state.config;
  const auto& p = state.params;
  const auto d = static_cast<std::size_t>(cfg.d_neural);
  c.len = std::min(ids.size(), static_cast<std::size_t>(cfg.max_seq));
  const std::size_t len = c.len;
  c.x = Tensor(len, d);
  for (std::size_t i = 0; i < len; ++i) {
    const auto id = ids[i];
    if (id < 0 || static_cast<std::size_t>(id) >= p.embedding.rows) throw ContractError("token id out of range");
    std::copy_n(p.embedding.row(static_cast<std::size_t>(id)), d, c.x.row(i));
  }
  const Tensor* hidden = &c.x;
  if (cfg.n_attention_blocks == 1 && len > 0) {
    // Queries and keys see sinusoidal positions; values carry content only.
    c.xp = c.x;
    for (std::size_t i = 0; cfg.positional && i < len; ++i) {
      double* r = c.xp.row(i);
      for (std::size_t t = 0; t < d; t += 2) {
        const double angle = static_cast<double>(i) / std::pow(10000.0, static_cast<double>(t) / static_cast<double>(d));
        r[t] += std::sin(angle);
        if (t + 1 < d) r[t + 1] += std::cos(angle);
      }
    }
    matmul_wt(c.xp, p.attn_q, c.q);
    matmul_wt(c.xp, p.attn_k, c.k);
    matmul_wt(c.x, p.attn_v, c.vv);
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));
    c.attn = Tensor(len, len);
    for (std::size_t i = 0; i < len; ++i) {
      double* a = c.attn.row(i);
      const double* qi = c.q.row(i);
      double mx = -INFINITY;
      for (std::size_t j = 0; j < len; ++j) {
        const double* kj = c.k.row(j);
        double s = 0.0;
        for (std::size_t t = 0; t < d; ++t) s += qi[t] * kj[t];
        a[j] = s * scale;
        mx = std::max(mx, a[j]);
      }
      double sum = 0.0;
      for (std::size_t j = 0; j < len; ++j) {
        a[j] = std::exp(a[j] - mx);
        sum += a[j];
      }
      for (std::size_t j = 0; j < len; ++j) a[j] /= sum;
    }
    c.ctx = Tensor(len, d);
    for (std::size_t i = 0; i < len; ++i) {
      double* ci = c.ctx.row(i);
      const double* a = c.attn.row(i);
      for (std::size_t j = 0; j < len; ++j) {
        const double w = a[j];
        const double* vj = c.vv.row(j);
        for (std::size_t t = 0; t < d; ++t) ci[t] += w * vj[t];
      }
    }
    matmul_wt(c.ctx, p.attn_o, c.h);
    for (std::size_t i = 0; i < c.h.v.size(); ++i) c.h.v[i] += c.x.v[i];
    hidden = &c.h;
  }
  c.pooled.assign(d, 0.0);
  if (len > 0) {
    for (std::size_t i = 0; i < len; ++i) {
      const double* hi = hidden->row(i);
      for (std::size_t t = 0; t < d; ++t) c.pooled[t] += hi[t];
    }
    const double inv = 1.0 / static_cast<double>(len);
    for (auto& x : c.pooled) x *= inv;
  }
  c.neural.assign(d, 0.0);
  affine(p.pool_w, p.pool_b, c.pooled.data(), c.neural.data());
}

// Appends the 128 projected values to `out`.
void symbolic_forward(const ModelState& state, const double* sym, ForwardCache& c, std::vector<double>& out) {
  const auto& p = state.params;
  constexpr std::size_t w = kProjectionWidth;
  c.z1.assign(w, 0.0);
  c.r1.assign(w, 0.0);
  c.z2.assign(w, 0.0);
  c.xhat.assign(w, 0.0);
  c.y.assign(w, 0.0);
  affine(p.proj_w1, p.proj_b1, sym, c.z1.data());
  for (std::size_t i = 0; i < w; ++i) c.r1[i] = c.z1[i] > 0.0 ? c.z1[i] : 0.0;
  affine(p.proj_w2, p.proj_b2, c.r1.data(), c.z2.data());
  double mean = 0.0;
  for (double x : c.z2) mean += x;
  mean /= static_cast<double>(w);
  double var = 0.0;
  for (double x : c.z2) var += (x - mean) * (x - mean);
  var /= static_cast<double>(w);
  c.inv_std = 1.0 / std::sqrt(var + kLayerNormEps);
  for (std::size_t i = 0; i < w; ++i) {
    c.xhat[i] = (c.z2[i] - mean) * c.inv_std;
    c.y[i] = p.ln_gain.v[i] * c.xhat[i] + p.ln_bias.v[i];
    out.push_back(c.y[i] > 0.0 ? c.y[i] : 0.0);
  }
}

}  // namespace

Logits forward(const ModelState& state, const ExampleInput& in, const std::vector<double>* mask,
               ForwardCache* cache) {
  const auto& cfg = state.config;
  const auto& p = state.params;
  ForwardCache local;
  ForwardCache& c = cache ? *cache : local;

  neural_forward(state, in.ids, c);
  c.fused = c.neural;
  // The symbolic input is not read at all in the neural-only ablation.
  if (cfg.use_symbolic) symbolic_forward(state, in.symbolic.data(), c, c.fused);

  c.dropped = c.fused;
  if (mask) {
    if (mask->size() != c.fused.size()) throw ContractError("dropout mask width mismatch");
    c.mask = *mask;
    for (std::size_t i = 0; i < c.dropped.size(); ++i) c.dropped[i] *= (*mask)[i];
  } else {
    c.mask.clear();
  }

  Logits out;
  affine(p.bin_w, p.bin_b, c.dropped.data(), out.binary.data());
  affine(p.cat_w, p.cat_b, c.dropped.data(), out.categorical.data());
  return out;
}

std::vector<double> encode_neural(const ModelState& state, const std::vector<std::int32_t>& ids) {
  ForwardCache c;
  neural_forward(state, ids, c);
  return c.neural;
}

std::vector<double> project_symbolic(const ModelState& state, const SymbolicFeatureVector& v) {
  if (!state.config.use_symbolic) throw ContractError("symbolic channel is disabled");
  ForwardCache c;
  std::vector<double> out;
  symbolic_forward(state, v.data(), c, out);
  return out;
}

std::vector<double> project_symbolic(const ModelState& state, const std::vector<double>& v) {
  if (v.size() != kSymbolicWidth)
    throw ContractError("symbolic vector must have " + std::to_string(kSymbolicWidth) + " entries");
  SymbolicFeatureVector a{};
  std::copy(v.begin(), v.end(), a.begin());
  return project_symbolic(state, a);
}

std::vector<double> fuse(const std::vector<double>& neural, const std::vector<double>& symbolic,
                         const ModelConfig& config) {
  if (neural.size() != static_cast<std::size_t>(config.d_neural))
    throw ContractError("neural width does not match config");
  const std::size_t want_sym = config.use_symbolic ? kProjectionWidth : 0;
  if (symbolic.size() != want_sym) throw ContractError("symbolic width does not match config");
  std::vector<double> out = neural;
  out.insert(out.end(), symbolic.begin(), symbolic.end());
  return out;
}

Category predict(const Logits& logits) {
  check_finite(logits);
  std::size_t best = 0;
  for (std::size_t i = 1; i < kNumCategories; ++i) {
    if (logits.categorical[i] > logits.categorical[best]) best = i;
  }
  return kAllCategories[best];
}

Gradients Gradients::zeros_like(const ModelState& state) {
  Gradients g;
  auto& dst = g.dense;
  const auto& src = state.params;
  // Embedding gradients live in embedding_rows.
  dst.attn_q = Tensor(src.attn_q.rows, src.attn_q.cols);
  dst.attn_k = Tensor(src.attn_k.rows, src.attn_k.cols);
  dst.attn_v = Tensor(src.attn_v.rows, src.attn_v.cols);
  dst.attn_o = Tensor(src.attn_o.rows, src.attn_o.cols);
  dst.pool_w = Tensor(src.pool_w.rows, src.pool_w.cols);
  dst.pool_b = Tensor(src.pool_b.rows, src.pool_b.cols);
  dst.proj_w1 = Tensor(src.proj_w1.rows, src.proj_w1.cols);
  dst.proj_b1 = Tensor(src.proj_b1.rows, src.proj_b1.cols);
  dst.proj_w2 = Tensor(src.proj_w2.rows, src.proj_w2.cols);
  dst.proj_b2 = Tensor(src.proj_b2.rows, src.proj_b2.cols);
  dst.ln_gain = Tensor(src.ln_gain.rows, src.ln_gain.cols);
  dst.ln_bias = Tensor(src.ln_bias.rows, src.ln_bias.cols);
  dst.bin_w = Tensor(src.bin_w.rows, src.bin_w.cols);
  dst.bin_b = Tensor(src.bin_b.rows, src.bin_b.cols);
  dst.cat_w = Tensor(src.cat_w.rows, src.cat_w.cols);
  dst.cat_b = Tensor(src.cat_b.rows, src.cat_b.cols);
  return g;
}

void Gradients::zero() {
  dense.for_each([](const char*, Tensor& t) { std::fill(t.v.begin(), t.v.end(), 0.0); });
  embedding_rows.clear();
}

void Gradients::add(const Gradients& other) {
  std::vector<const Tensor*> theirs;
  other.dense.for_each([&](const char*, const Tensor& t) { theirs.push_back(&t); });
  std::size_t k = 0;
  dense.for_each([&](const char*, Tensor& t) {
    const Tensor& o = *theirs[k++];
    for (std::size_t i = 0; i < t.v.size(); ++i) t.v[i] += o.v[i];
  });
  for (const auto& [row, g] : other.embedding_rows) {
    auto [it, inserted] = embedding_rows.try_emplace(row, g);
    if (!inserted) {
      for (std::size_t i = 0; i < g.size(); ++i) it->second[i] += g[i];
    }
  }
}

void Gradients::scale(double s) {
  dense.for_each([&](const char*, Tensor& t) {
    for (auto& x : t.v) x *= s;
  });
  for (auto& [_, g] : embedding_rows)
    for (auto& x : g) x *= s;
}

bool Gradients::all_finite() const {
  bool ok = true;
  dense.for_each([&](const char*, const Tensor& t) {
    for (double x : t.v) ok = ok && std::isfinite(x);
  });
  for (const auto& [_, g] : embedding_rows)
    for (double x : g) ok = ok && std::isfinite(x);
  return ok;
}

void backward(const ModelState& state, const ExampleInput& in, const ForwardCache& c,
              const std::array<double, 2>& d_binary, const std::array<double, kNumCategories>& d_categorical,
              Gradients& g) {
  const auto& cfg = state.config;
  const auto& p = state.params;
  const auto d = static_cast<std::size_t>(cfg.d_neural);
  const std::size_t fused_w = c.fused.size();

  std::vector<double> d_dropped(fused_w, 0.0), tmp(fused_w, 0.0);
  affine_backward(p.bin_w, c.dropped.data(), d_binary.data(), g.dense.bin_w, g.dense.bin_b, d_dropped.data());
  affine_backward(p.cat_w, c.dropped.data(), d_categorical.data(), g.dense.cat_w, g.dense.cat_b, tmp.data());
  for (std::size_t i = 0; i < fused_w; ++i) d_dropped[i] += tmp[i];
  std::vector<double> d_fused = d_dropped;
  if (!c.mask.empty()) {
    for (std::size_t i = 0; i < fused_w; ++i) d_fused[i] *= c.mask[i];
  }

  if (cfg.use_symbolic) {
    constexpr std::size_t w = kProjectionWidth;
    std::vector<double> dy(w), dxhat(w), dz2(w), dr1(w), dz1(w);
    for (std::size_t i = 0; i < w; ++i) {
      dy[i] = c.y[i] > 0.0 ? d_fused[d + i] : 0.0;
      g.dense.ln_gain.v[i] += dy[i] * c.xhat[i];
      g.dense.ln_bias.v[i] += dy[i];
      dxhat[i] = dy[i] * p.ln_gain.v[i];
    }
    double mean_dx = 0.0, mean_dx_xhat = 0.0;
    for (std::size_t i = 0; i < w; ++i) {
      mean_dx += dxhat[i];
      mean_dx_xhat += dxhat[i] * c.xhat[i];
    }
    mean_dx /= static_cast<double>(w);
    mean_dx_xhat /= static_cast<double>(w);
    for (std::size_t i = 0; i < w; ++i) dz2[i] = c.inv_std * (dxhat[i] - mean_dx - c.xhat[i] * mean_dx_xhat);
    affine_backward(p.proj_w2, c.r1.data(), dz2.data(), g.dense.proj_w2, g.dense.proj_b2, dr1.data());
    for (std::size_t i = 0; i < w; ++i) dz1[i] = c.z1[i] > 0.0 ? dr1[i] : 0.0;
    affine_backward(p.proj_w1, in.symbolic.data(), dz1.data(), g.dense.proj_w1, g.dense.proj_b1, nullptr);
  }

  std::vector<double> d_pooled(d, 0.0);
  affine_backward(p.pool_w, c.pooled.data(), d_fused.data(), g.dense.pool_w, g.dense.pool_b, d_pooled.data());
  const std::size_t len = c.len;
  if (len == 0) return;

  const double inv = 1.0 / static_cast<double>(len);
  Tensor dh(len, d);
  for (std::size_t i = 0; i < len; ++i)
    for (std::size_t t = 0; t < d; ++t) dh(i, t) = d_pooled[t] * inv;

  Tensor dx = dh;  // residual path (or identity when there is no attention)
  if (cfg.n_attention_blocks == 1) {
    Tensor dctx(len, d);
    matmul_wt_backward(c.ctx, p.attn_o, dh, g.dense.attn_o, dctx);
    // ctx = A V
    Tensor da(len, len), dv(len, d);
    for (std::size_t i = 0; i < len; ++i) {
      const double* gi = dctx.row(i);
      const double* ai = c.attn.row(i);
      double* dai = da.row(i);
      for (std::size_t j = 0; j < len; ++j) {
        const double* vj = c.vv.row(j);
        double s = 0.0;
        for (std::size_t t = 0; t < d; ++t) s += gi[t] * vj[t];
        dai[j] = s;
        double* dvj = dv.row(j);
        const double a = ai[j];
        for (std::size_t t = 0; t < d; ++t) dvj[t] += a * gi[t];
      }
    }
    // softmax rows, then the 1/sqrt(d) scale
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));
    Tensor ds(len, len);
    for (std::size_t i = 0; i < len; ++i) {
      const double* ai = c.attn.row(i);
      const double* dai = da.row(i);
      double dot = 0.0;
      for (std::size_t j = 0; j < len; ++j) dot += ai[j] * dai[j];
      for (std::size_t j = 0; j < len; ++j) ds(i, j) = ai[j] * (dai[j] - dot) * scale;
    }
    Tensor dq(len, d), dk(len, d);
    for (std::size_t i = 0; i < len; ++i) {
      double* dqi = dq.row(i);
      const double* qi = c.q.row(i);
      for (std::size_t j = 0; j < len; ++j) {
        const double s = ds(i, j);
        if (s == 0.0) continue;
        const double* kj = c.k.row(j);
        double* dkj = dk.row(j);
        for (std::size_t t = 0; t < d; ++t) {
          dqi[t] += s * kj[t];
          dkj[t] += s * qi[t];
        }
      }
    }
    matmul_wt_backward(c.xp, p.attn_q, dq, g.dense.attn_q, dx);
    matmul_wt_backward(c.xp, p.attn_k, dk, g.dense.attn_k, dx);
    matmul_wt_backward(c.x, p.attn_v, dv, g.dense.attn_v, dx);
  }

  for (std::size_t i = 0; i < len; ++i) {
    auto [it, inserted] = g.embedding_rows.try_emplace(in.ids[i], std::vector<double>(d, 0.0));
    double* row = it->second.data();
    const double* src = dx.row(i);
    for (std::size_t t = 0; t < d; ++t) row[t] += src[t];
  }
}

// Binary container: magic, version, header length, JSON header, raw tensors.
namespace {
constexpr char kMagic[8] = {'F', 'L', 'K', 'Y', 'C', 'K', 'P', 'T'};

nlohmann::ordered_json config_json(const ModelConfig& c) {
  return {{"d_neural", c.d_neural},         {"d_proj", kProjectionWidth},
          {"vocab_cap", c.vocab_cap},       {"max_seq", c.max_seq},
          {"n_attention_blocks", c.n_attention_blocks}, {"dropout_rate", c.dropout_rate},
          {"seed", c.seed},                 {"use_symbolic", c.use_symbolic},
          {"positional", c.positional}};
}

template <typename T>
void put(std::string& out, T v) {
  out.append(reinterpret_cast<const char*>(&v), sizeof v);
}
}  // namespace

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  nlohmann::ordered_json header;
  header["config"] = config_json(ckpt.state.config);
  header["neural_vocab"] = ckpt.neural_vocab.tokens();
  header["symbolic_vocab"] = nlohmann::ordered_json::parse(vocabulary_to_json(ckpt.symbolic_vocab));
  header["symbolic_mode"] = ckpt.symbolic_options.mode == SymbolicMode::adaptive ? "adaptive" : "hardcoded";
  header["non_flaky_slot"] = ckpt.symbolic_options.non_flaky_slot;
  auto manifest = nlohmann::ordered_json::array();
  ckpt.state.params.for_each([&](const char* name, const Tensor& t) {
    manifest.push_back({{"name", name}, {"rows", t.rows}, {"cols", t.cols}});
  });
  header["tensors"] = std::move(manifest);
  const auto text = header.dump();

  std::string out(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, text.size());
  out += text;
  ckpt.state.params.for_each([&](const char*, const Tensor& t) {
    out.append(reinterpret_cast<const char*>(t.v.data()), t.v.size() * sizeof(double));
  });
  return out;
}

Checkpoint deserialize_checkpoint(std::string_view bytes) {
  const std::size_t fixed = sizeof kMagic + sizeof(std::uint32_t) + sizeof(std::uint64_t);
  if (bytes.size() < fixed || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0)
    throw InputError("checkpoint: bad magic");
  std::uint32_t version = 0;
  std::uint64_t hlen = 0;
  std::memcpy(&version, bytes.data() + sizeof kMagic, sizeof version);
  std::memcpy(&hlen, bytes.data() + sizeof kMagic + sizeof version, sizeof hlen);
  if (version != kCheckpointVersion) throw InputError("checkpoint: unsupported version " + std::to_string(version));
  if (bytes.size() < fixed + hlen) throw InputError("checkpoint: truncated header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(fixed, hlen));
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("checkpoint: malformed header (") + e.what() + ")");
  }

  Checkpoint ckpt;
  try {
    const auto& c = header.at("config");
    ModelConfig cfg;
    cfg.d_neural = c.at("d_neural").get<int>();
    cfg.vocab_cap = c.at("vocab_cap").get<int>();
    cfg.max_seq = c.at("max_seq").get<int>();
    cfg.n_attention_blocks = c.at("n_attention_blocks").get<int>();
    cfg.dropout_rate = c.at("dropout_rate").get<double>();
    cfg.seed = c.at("seed").get<std::uint64_t>();
    cfg.use_symbolic = c.at("use_symbolic").get<bool>();
    cfg.positional = c.at("positional").get<bool>();
    if (c.at("d_proj").get<int>() != kProjectionWidth) throw InputError("checkpoint: d_proj must be 128");
    cfg.validate();
    ckpt.state = init_params(cfg);  // shapes only; values overwritten below
    ckpt.neural_vocab = NeuralVocabulary(header.at("neural_vocab").get<std::vector<std::string>>());
    ckpt.symbolic_vocab = vocabulary_from_json(header.at("symbolic_vocab").dump());
    ckpt.symbolic_options.mode =
        header.at("symbolic_mode").get<std::string>() == "hardcoded" ? SymbolicMode::hardcoded : SymbolicMode::adaptive;
    ckpt.symbolic_options.non_flaky_slot = header.value("non_flaky_slot", true);

    const auto& manifest = header.at("tensors");
    std::size_t k = 0;
    std::size_t offset = fixed + hlen;
    ckpt.state.params.for_each([&](const char* name, Tensor& t) {
      if (k >= manifest.size()) throw InputError("checkpoint: tensor manifest too short");
      const auto& m = manifest[k++];
      if (m.at("name").get<std::string>() != name || m.at("rows").get<std::size_t>() != t.rows ||
          m.at("cols").get<std::size_t>() != t.cols)
        throw InputError(std::string("checkpoint: shape mismatch for tensor '") + name + "'");
      const std::size_t nbytes = t.v.size() * sizeof(double);
      if (bytes.size() < offset + nbytes) throw InputError("checkpoint: truncated tensor data");
      std::memcpy(t.v.data(), bytes.data() + offset, nbytes);
      offset += nbytes;
    });
    if (k != manifest.size()) throw InputError("checkpoint: unexpected extra tensors");
    if (offset != bytes.size()) throw InputError("checkpoint: trailing bytes");
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("checkpoint: schema mismatch (") + e.what() + ")");
  }
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return deserialize_checkpoint(read_file(path)); }

ExampleInput prepare_input(std::string_view source, const NeuralVocabulary& nv, const SymbolicVocabulary& sv,
                           const SymbolicOptions& so, int max_seq) {
  ExampleInput in;
  in.ids = nv.encode(code_tokens(source), max_seq);
  in.symbolic = extract(tokenize(source), sv, FeatureGroupSpec::standard(), so);
  return in;
}

ExampleInput prepare_input(const TestCase& test, const Checkpoint& ckpt) {
  return prepare_input(test.source, ckpt.neural_vocab, ckpt.symbolic_vocab, ckpt.symbolic_options,
                       ckpt.state.config.max_seq);
}

}  // namespace flaky
