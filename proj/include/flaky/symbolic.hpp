#pragma once

#include <array>
#include <string>
#include <vector>

#include "flaky/corpus.hpp"
#include "flaky/dtm.hpp"

namespace flaky {

inline constexpr std::size_t kNumGroups = 9;
inline constexpr std::size_t kSymbolicWidth = 16;

struct FeatureGroup {
  std::string name;
  // Lowercase tokens or dotted chains; a trailing '*' matches by prefix.
  std::vector<std::string> triggers;
};

struct FeatureGroupSpec {
  std::vector<FeatureGroup> groups;

  // The nine latent-indicator groups in their fixed order.
  static const FeatureGroupSpec& standard();
  bool matches(std::size_t group, std::string_view token) const;
};

// Slots 0-8: log1p(group hits). Slots 9-14: log1p(occurrences of each
// category's mined tokens), enum order. Slot 15: log1p(distinct mined tokens).
using SymbolicFeatureVector = std::array<double, kSymbolicWidth>;

enum class SymbolicMode {
  adaptive,   // groups + mined vocabulary
  hardcoded,  // groups only, mined slots zeroed
};

struct SymbolicOptions {
  SymbolicMode mode = SymbolicMode::adaptive;
  bool non_flaky_slot = true;
};

SymbolicFeatureVector extract(const TokenStream& tokens, const SymbolicVocabulary& vocab,
                              const FeatureGroupSpec& spec, const SymbolicOptions& opts = {});
SymbolicFeatureVector extract(const TestCase& test, const SymbolicVocabulary& vocab,
                              const FeatureGroupSpec& spec, const SymbolicOptions& opts = {});

std::vector<SymbolicFeatureVector> batch_extract(const Corpus& corpus, const SymbolicVocabulary& vocab,
                                                 const FeatureGroupSpec& spec,
                                                 const SymbolicOptions& opts = {});

// test_id,f1..f16
std::string features_csv(const Corpus& corpus, const std::vector<SymbolicFeatureVector>& rows);

}  // namespace flaky
