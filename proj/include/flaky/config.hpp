#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "flaky/augment.hpp"
#include "flaky/dtm.hpp"
#include "flaky/model.hpp"
#include "flaky/symbolic.hpp"
#include "flaky/trainer.hpp"

namespace flaky {

inline constexpr std::string_view kToolVersion = "0.1.0";

struct Seeds {
  std::uint64_t split = 0;
  std::uint64_t init = 0;
  std::uint64_t training = 0;
  std::uint64_t augment = 0;
  std::uint64_t stress = 0;
};

// Every knob of an experiment in one document.
struct RunConfig {
  // "finetune": fine-tuning scale (d 768, lr 2e-5). "desk": from-scratch scale.
  std::string preset = "desk";
  std::uint64_t seed = 0;
  int folds = 4;
  MiningParams mining;
  ModelConfig model;
  SymbolicOptions symbolic;
  TrainingConfig training;  // augmentation, seed and exec are filled by settings()
  bool augment = true;
  double augment_p_base = 0.5;
  double augment_p_rare = 0.95;
  std::vector<StressMode> stress_modes = {StressMode::rename, StressMode::deadcode, StressMode::both};

  static RunConfig with_preset(std::string_view preset);  // throws InputError
  // Preset first, then every field present in the document. Unknown keys are errors.
  static RunConfig from_json(std::string_view text);
  nlohmann::ordered_json to_json() const;
  std::string hash() const;  // hex fnv1a of the canonical dump
  void validate() const;

  Seeds seeds() const;
  // "full", "no-symbolic" or "hardcoded-symbols"
  std::string variant() const;
  CvSettings settings(kernels::Exec exec = kernels::Exec::parallel) const;
};

nlohmann::ordered_json seeds_to_json(const Seeds& s);

// Written next to every output.
nlohmann::ordered_json make_manifest(std::string_view command, const RunConfig& config, std::string_view corpus_hash);

std::string corpus_hash(const Corpus& corpus);

}  // namespace flaky
