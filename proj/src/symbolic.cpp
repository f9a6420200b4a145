#include "flaky/symbolic.hpp"

#include <cmath>
#include <set>
#include <sstream>
#include <unordered_map>

#include "flaky/kernels.hpp"

namespace flaky {

const FeatureGroupSpec& FeatureGroupSpec::standard() {
  static const FeatureGroupSpec spec{{
      {"sleep_await", {"sleep", "thread.sleep", "await", "timeunit.*"}},
      {"has_network", {"socket", "http", "url", "connect", "netty"}},
      {"has_future_async", {"future", "completablefuture", "promise", "countdownlatch"}},
      {"threading", {"thread", "executorservice", "runnable"}},
      {"has_atomic", {"atomicinteger", "atomicboolean", "atomic*"}},
      // "synchronized" is a reserved word and never survives tokenization.
      {"has_sync_lock", {"countdownlatch", "cyclicbarrier", "semaphore", "lock", "synchronized"}},
      {"has_time_ops", {"currenttimemillis", "nanotime", "stopwatch", "clock", "duration"}},
      {"has_json_unordered", {"json", "map", "set", "iterator"}},
      {"has_persistence", {"save", "delete", "repository", "database", "filesystem"}},
  }};
  return spec;
}

bool FeatureGroupSpec::matches(std::size_t group, std::string_view token) const {
  for (const auto& trig : groups[group].triggers) {
    if (!trig.empty() && trig.back() == '*') {
      const auto prefix = std::string_view(trig).substr(0, trig.size() - 1);
      if (token.substr(0, prefix.size()) == prefix) return true;
    } else if (token == trig) {
      return true;
    }
  }
  return false;
}

SymbolicFeatureVector extract(const TokenStream& tokens, const SymbolicVocabulary& vocab,
                              const FeatureGroupSpec& spec, const SymbolicOptions& opts) {
  std::array<double, kSymbolicWidth> counts{};
  const std::size_t ngroups = std::min(spec.groups.size(), kNumGroups);
  for (const auto& tok : tokens) {
    for (std::size_t g = 0; g < ngroups; ++g) {
      if (spec.matches(g, tok)) counts[g] += 1.0;
    }
  }
  if (opts.mode == SymbolicMode::adaptive) {
    std::set<std::string_view> distinct;
    for (Category c : kAllCategories) {
      if (c == Category::non_flaky && !opts.non_flaky_slot) continue;
      const auto& entries = vocab.of(c);
      if (entries.empty()) continue;
      std::set<std::string_view> mined;
      for (const auto& e : entries) mined.insert(e.token);
      for (const auto& tok : tokens) {
        if (mined.count(tok)) {
          counts[kNumGroups + index_of(c)] += 1.0;
          distinct.insert(*mined.find(tok));
        }
      }
    }
    counts[kSymbolicWidth - 1] = static_cast<double>(distinct.size());
  }
  SymbolicFeatureVector v{};
  for (std::size_t i = 0; i < kSymbolicWidth; ++i) v[i] = std::log1p(counts[i]);
  return v;
}

SymbolicFeatureVector extract(const TestCase& test, const SymbolicVocabulary& vocab,
                              const FeatureGroupSpec& spec, const SymbolicOptions& opts) {
  return extract(tokenize(test.source), vocab, spec, opts);
}

std::vector<SymbolicFeatureVector> batch_extract(const Corpus& corpus, const SymbolicVocabulary& vocab,
                                                 const FeatureGroupSpec& spec,
                                                 const SymbolicOptions& opts) {
  return kernels::extract_features(corpus, vocab, spec, opts, kernels::Exec::parallel);
}

std::string features_csv(const Corpus& corpus, const std::vector<SymbolicFeatureVector>& rows) {
  std::ostringstream out;
  out.precision(17);
  out << "test_id";
  for (std::size_t i = 1; i <= kSymbolicWidth; ++i) out << ",f" << i;
  out << '\n';
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out << corpus[r].id;
    for (double x : rows[r]) out << ',' << x;
    out << '\n';
  }
  return out.str();
}

}  // namespace flaky
