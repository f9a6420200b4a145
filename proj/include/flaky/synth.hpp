#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "flaky/corpus.hpp"

namespace flaky {

struct SynthSpec {
  int projects = 40;
  int tests = 400;
  double flaky_fraction = 0.1;
  double q_signal = 0.8;  // chance a flaky test carries its category's statements
  double q_noise = 0.05;  // chance a non-flaky test carries every category's triggers
  std::uint64_t seed = 0;

  void validate() const;  // throws InputError
  // 280 flaky out of 8,574, scaled; 40 projects.
  static SynthSpec benchmark_scaled(double scale, std::uint64_t seed = 0);
  bool operator==(const SynthSpec&) const = default;
};

// Exact counts: round(tests * flaky_fraction) flaky tests split evenly over the
// five flaky categories, remainder in enum order.
std::array<std::size_t, kNumCategories> synth_category_counts(const SynthSpec& spec);

Corpus generate_corpus(const SynthSpec& spec);

// The trigger statements planted for a flaky category, e.g. "Thread.sleep(200);".
const std::vector<std::string>& planted_statements(Category c);
// Tokens those statements produce that no filler statement produces.
std::set<std::string> planted_tokens(Category c);

}  // namespace flaky
