#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "flaky/corpus.hpp"
#include "flaky/dtm.hpp"

namespace flaky {

enum class Transform { rename, deadcode, decoy };
std::string_view render(Transform t);

enum class GuardStyle {
  if_false,     // if (false) { ... }
  catch_never,  // try { } catch (RuntimeException e) { ... }
  while_false,  // while (false) { ... }
};
std::string_view render(GuardStyle g);
GuardStyle parse_guard_style(std::string_view s);

enum class RenameScheme {
  training,  // VAR_0, VAR_1, ...
  stress,    // _t1, _s1, _valA, ...
};

// original -> replacement, in declaration order.
using RenameMap = std::vector<std::pair<std::string, std::string>>;

struct RenameResult {
  std::string source;
  RenameMap map;
};

// Local declarations are found lexically (`Type name =|;|,|:|)`, lambda
// parameters). Occurrences after '.' or '::', before '(', in type position,
// and inside literals or comments are left alone.
RenameResult rename_variables(std::string_view source, std::uint64_t seed,
                              RenameScheme scheme = RenameScheme::training);
std::vector<std::string> declared_variables(std::string_view source);
// Occurrences of `name` that the renamer would rewrite.
std::size_t count_standalone(std::string_view source, std::string_view name);

inline constexpr std::string_view kAugBegin = "/*AUG-BEGIN*/";
inline constexpr std::string_view kAugEnd = "/*AUG-END*/";

// One guarded block with 2-5 decoy statements, right after the method body's
// opening brace. Throws InputError when there is no body.
std::string inject_dead_code(std::string_view source, GuardStyle guard, const std::vector<std::string>& decoys,
                             std::uint64_t seed);
// 1-3 decoy line comments and sometimes a guarded print statement.
std::string inject_decoy_comments(std::string_view source, const std::vector<std::string>& decoys,
                                  GuardStyle print_guard, std::uint64_t seed);
std::string strip_augmentation(std::string_view source);
// True when every statement inside every sentinel region sits in a guard.
bool injected_code_is_guarded(std::string_view source);
// "thread.sleep" -> "Thread.sleep(100);", "countdownlatch" -> "countdownlatch();"
std::string decoy_statement(std::string_view token);

struct AugmentationPolicy {
  double p_base = 0.5;
  double p_rare = 0.95;
  std::vector<GuardStyle> train_guards = {GuardStyle::if_false, GuardStyle::catch_never};
  std::vector<GuardStyle> stress_guards = {GuardStyle::while_false};
  std::vector<std::string> train_decoys;
  std::vector<std::string> stress_decoys;
  std::uint64_t seed = 0;

  // Throws InputError on overlapping guard sets or decoy pools, or
  // probabilities outside [0, 1]. Empty pools are allowed here.
  void validate() const;

  // Built-in pools of flakiness keywords.
  static AugmentationPolicy with_default_pools(std::uint64_t seed = 0);
  // Splits each flaky category's mined tokens by rank parity between the two
  // pools; falls back to the built-in pools when mining kept too little.
  static AugmentationPolicy from_vocabulary(const SymbolicVocabulary& vocab, std::uint64_t seed = 0);
};

struct AugmentedTest {
  TestCase test;
  std::vector<Transform> applied;  // empty: left untouched
  RenameMap rename_map;
  std::string renamed_source;  // strip_augmentation(test.source) == renamed_source
};

AugmentedTest augment_training(const TestCase& test, const AugmentationPolicy& policy, std::uint64_t seed);

enum class StressMode { rename, deadcode, both };
inline constexpr StressMode kAllStressModes[] = {StressMode::rename, StressMode::deadcode, StressMode::both};
std::string_view render(StressMode m);
StressMode parse_stress_mode(std::string_view s);

struct PerturbedTest {
  std::string original_id;
  TestCase test;
  std::vector<Transform> applied;
  RenameMap rename_map;
};

// Stress-only templates and decoys; seed derived from (policy.seed, test id, mode).
PerturbedTest perturb_for_stress(const TestCase& test, StressMode mode, const AugmentationPolicy& policy);

std::string perturbation_sidecar_json(const std::vector<PerturbedTest>& tests, StressMode mode);

}  // namespace flaky
