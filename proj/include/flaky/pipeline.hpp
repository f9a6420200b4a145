#pragma once

#include <filesystem>
#include <vector>

#include <json.hpp>

#include "flaky/config.hpp"
#include "flaky/corpus.hpp"
#include "flaky/splitter.hpp"
#include "flaky/trainer.hpp"

namespace flaky {

struct Experiment {
  SplitPlan plan;
  std::vector<FoldOutcome> folds;
  nlohmann::ordered_json report;
};

// Split, cross-validate and assemble report.json. With `out_dir`, also writes
// split.json, per-fold checkpoint/vocabulary/trace, the report files and a
// manifest.
Experiment run_experiment(const Corpus& corpus, const RunConfig& config, const std::filesystem::path* out_dir = nullptr,
                          kernels::Exec exec = kernels::Exec::parallel);

// Same, over a given split plan.
Experiment run_experiment(const Corpus& corpus, const SplitPlan& plan, const RunConfig& config,
                          const std::filesystem::path* out_dir = nullptr,
                          kernels::Exec exec = kernels::Exec::parallel);

std::uint64_t checkpoint_checksum(const Checkpoint& ckpt);

}  // namespace flaky
