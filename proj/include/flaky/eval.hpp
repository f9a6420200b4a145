#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "flaky/augment.hpp"
#include "flaky/category.hpp"
#include "flaky/corpus.hpp"
#include "flaky/kernels.hpp"
#include "flaky/model.hpp"

namespace flaky {

struct ConfusionMatrix {
  // rows: actual, columns: predicted, enum order
  std::array<std::array<std::uint64_t, kNumCategories>, kNumCategories> m{};

  std::uint64_t total() const;
  std::uint64_t row_sum(Category actual) const;
  std::uint64_t col_sum(Category predicted) const;
  std::uint64_t at(Category actual, Category predicted) const { return m[index_of(actual)][index_of(predicted)]; }
  bool operator==(const ConfusionMatrix&) const = default;
};

ConfusionMatrix confusion(const std::vector<Category>& predictions, const std::vector<Category>& labels);

struct ClassMetrics {
  double precision = 0.0;  // percent
  double recall = 0.0;
  double f1 = 0.0;
  std::uint64_t support = 0;
};

struct MetricsReport {
  std::array<ClassMetrics, kNumCategories> per_class{};
  double macro_f1 = 0.0;  // mean over all six classes
  std::uint64_t n = 0;

  const ClassMetrics& of(Category c) const { return per_class[index_of(c)]; }
};

// zero_division = 0: an undefined precision or recall counts as 0.
MetricsReport f1_scores(const std::vector<Category>& predictions, const std::vector<Category>& labels);
MetricsReport metrics_from_confusion(const ConfusionMatrix& cm);

struct RobustnessReport {
  MetricsReport clean;
  std::map<StressMode, MetricsReport> perturbed;
  std::map<StressMode, std::array<double, kNumCategories>> drops;  // clean - perturbed, pp
  std::map<StressMode, double> average_drop;                       // mean of the six drops
};

// Throws InputError when a requested mode has no perturbed report.
RobustnessReport robustness_drops(const MetricsReport& clean, const std::map<StressMode, MetricsReport>& perturbed,
                                  const std::vector<StressMode>& modes);

std::vector<Category> predict_corpus(const Checkpoint& ckpt, const Corpus& corpus,
                                     kernels::Exec exec = kernels::Exec::parallel);

struct StressOutcome {
  RobustnessReport report;
  std::vector<Category> clean;
  std::map<StressMode, std::vector<Category>> predictions;
};

// Features are re-extracted from each perturbed source.
StressOutcome stress_evaluate(const Checkpoint& ckpt, const Corpus& tests, const AugmentationPolicy& policy,
                              const std::vector<StressMode>& modes, kernels::Exec exec = kernels::Exec::parallel);

inline constexpr int kReportSchemaVersion = 1;

nlohmann::ordered_json metrics_to_json(const MetricsReport& m);
nlohmann::ordered_json confusion_to_json(const ConfusionMatrix& cm);

// Table-shaped renderings of a report.json document.
std::string render_metrics_markdown(const nlohmann::ordered_json& report);
std::string render_f1_csv(const nlohmann::ordered_json& report);
std::string render_drops_csv(const nlohmann::ordered_json& report);
std::string render_token_rank_csv(const nlohmann::ordered_json& report);
std::string render_token_groups_csv(const nlohmann::ordered_json& report);

// Per group and category: tests whose token stream hits the group.
nlohmann::ordered_json token_group_grid(const Corpus& corpus);

// report.json, metrics.md, f1_table.csv, drops.csv, token_rank.csv, token_groups.csv
void emit_report(const nlohmann::ordered_json& report, const std::filesystem::path& out_dir);

}  // namespace flaky
