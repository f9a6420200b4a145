#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "flaky/category.hpp"
#include "flaky/corpus.hpp"

namespace flaky {

// Most critical first.
inline constexpr std::array<Category, kNumCategories> kPriorityOrder = {
    Category::concurrency, Category::async_wait,           Category::order_dependency,
    Category::time,        Category::unordered_collections, Category::non_flaky,
};

struct ProjectPriorityLabel {
  std::string project;
  Category priority = Category::non_flaky;
};

// Throws InputError on an empty set or mixed projects.
Category priority_label(const std::vector<TestCase>& project_tests);
// One label per project, sorted by project name.
std::vector<ProjectPriorityLabel> project_labels(const Corpus& corpus);

// Round-robin within each priority category after a lexicographic sort and a
// seeded shuffle, so the result depends only on (labels as a set, K, seed).
std::map<std::string, int> assign_folds(const std::vector<ProjectPriorityLabel>& labels, int k, std::uint64_t seed);

struct Fold {
  std::set<std::string> train_ids;
  std::set<std::string> test_ids;
  std::set<std::string> train_projects;
  std::set<std::string> test_projects;
};

struct SplitPlan {
  int k = 4;
  std::uint64_t seed = 0;
  std::map<std::string, int> assignment;
  std::vector<Fold> folds;
};

SplitPlan make_splits(const Corpus& corpus, const std::map<std::string, int>& assignment, int k,
                      std::uint64_t seed = 0);
// priority_label -> assign_folds -> make_splits
SplitPlan plan_splits(const Corpus& corpus, int k, std::uint64_t seed);

std::string split_plan_to_json(const SplitPlan& plan);
SplitPlan split_plan_from_json(std::string_view text, const Corpus& corpus);

}  // namespace flaky
