#include <gtest/gtest.h>

#include <algorithm>

#include "flaky/error.hpp"
#include "flaky/rng.hpp"
#include "flaky/splitter.hpp"

using namespace flaky;

namespace {

std::vector<TestCase> project_tests(const std::string& project, const std::vector<std::pair<Category, int>>& mix) {
  std::vector<TestCase> v;
  int i = 0;
  for (const auto& [c, n] : mix)
    for (int k = 0; k < n; ++k) v.push_back({project + "::" + std::to_string(i++), project, "void t(){}", c});
  return v;
}

Corpus random_corpus(Rng& rng) {
  std::vector<TestCase> all;
  const int projects = rng.between(4, 30);
  for (int p = 0; p < projects; ++p) {
    std::vector<std::pair<Category, int>> mix = {{Category::non_flaky, rng.between(1, 15)}};
    for (Category c : kFlakyCategories)
      if (rng.bernoulli(0.2)) mix.emplace_back(c, rng.between(1, 3));
    auto v = project_tests("proj" + std::to_string(p), mix);
    all.insert(all.end(), v.begin(), v.end());
  }
  return Corpus(all);
}

}  // namespace

TEST(PriorityLabel, WorkedExamples) {
  EXPECT_EQ(priority_label(project_tests("p", {{Category::non_flaky, 120}, {Category::concurrency, 5}})),
            Category::concurrency);
  EXPECT_EQ(priority_label(project_tests("p", {{Category::non_flaky, 3}})), Category::non_flaky);
  EXPECT_EQ(priority_label(project_tests("p", {{Category::time, 1}, {Category::async_wait, 1}})), Category::async_wait);
  EXPECT_EQ(priority_label(project_tests("p", {{Category::time, 1}, {Category::order_dependency, 1}})),
            Category::order_dependency);
  EXPECT_EQ(priority_label(project_tests("p", {{Category::unordered_collections, 1}, {Category::time, 1}})),
            Category::time);
  EXPECT_THROW(priority_label({}), InputError);
  auto mixed = project_tests("p", {{Category::time, 1}});
  mixed.push_back({"q::0", "q", "x", Category::time});
  EXPECT_THROW(priority_label(mixed), InputError);
}

TEST(AssignFolds, FiveProjectsOverFourFolds) {
  std::vector<ProjectPriorityLabel> labels;
  for (int i = 0; i < 5; ++i) labels.push_back({"c" + std::to_string(i), Category::concurrency});
  const auto a = assign_folds(labels, 4, 7);
  std::vector<int> sizes(4, 0);
  for (const auto& [p, f] : a) ++sizes[static_cast<std::size_t>(f)];
  std::sort(sizes.begin(), sizes.end());
  EXPECT_EQ(sizes, (std::vector<int>{1, 1, 1, 2}));
}

TEST(AssignFolds, PerfectDivisibilityAndDeterminism) {
  std::vector<ProjectPriorityLabel> labels;
  for (int i = 0; i < 4; ++i) labels.push_back({"t" + std::to_string(i), Category::time});
  const auto a = assign_folds(labels, 4, 3);
  std::set<int> folds;
  for (const auto& [p, f] : a) folds.insert(f);
  EXPECT_EQ(folds.size(), 4u);
  EXPECT_EQ(assign_folds(labels, 4, 3), a);
  EXPECT_THROW(assign_folds(labels, 1, 3), InputError);
}

TEST(AssignFolds, InputOrderIrrelevant) {
  Rng rng(2);
  std::vector<ProjectPriorityLabel> labels;
  for (int i = 0; i < 40; ++i) labels.push_back({"p" + std::to_string(i), kAllCategories[rng.below(6)]});
  const auto a = assign_folds(labels, 4, 11);
  for (int t = 0; t < 10; ++t) {
    rng.shuffle(labels);
    EXPECT_EQ(assign_folds(labels, 4, 11), a);
  }
}

TEST(MakeSplits, UncoveredProjectIsAnError) {
  const Corpus c(project_tests("a", {{Category::time, 2}}));
  EXPECT_THROW(make_splits(c, {}, 4), InputError);
}

TEST(Splits, RandomizedSafetyProperties) {
  Rng rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const auto corpus = random_corpus(rng);
    const int k = rng.between(2, 4);
    const auto plan = plan_splits(corpus, k, rng.next());
    ASSERT_EQ(plan.folds.size(), static_cast<std::size_t>(k));
    std::set<std::string> seen;
    for (const auto& f : plan.folds) {
      for (const auto& p : f.test_projects) ASSERT_EQ(f.train_projects.count(p), 0u);
      for (const auto& id : f.test_ids) {
        ASSERT_EQ(f.train_ids.count(id), 0u);
        ASSERT_TRUE(seen.insert(id).second) << id << " in two test folds";
      }
      EXPECT_EQ(f.train_ids.size() + f.test_ids.size(), corpus.size());
    }
    EXPECT_EQ(seen.size(), corpus.size());

    std::map<Category, std::vector<int>> per_cat;
    for (const auto& l : project_labels(corpus)) {
      auto& v = per_cat[l.priority];
      v.resize(static_cast<std::size_t>(k), 0);
      ++v[static_cast<std::size_t>(plan.assignment.at(l.project))];
    }
    for (const auto& [c, v] : per_cat) EXPECT_LE(*std::max_element(v.begin(), v.end()) - *std::min_element(v.begin(), v.end()), 1);
  }
}

TEST(Splits, JsonRoundTrip) {
  Rng rng(18);
  const auto corpus = random_corpus(rng);
  const auto plan = plan_splits(corpus, 4, 5);
  const auto back = split_plan_from_json(split_plan_to_json(plan), corpus);
  EXPECT_EQ(back.assignment, plan.assignment);
  EXPECT_EQ(back.k, plan.k);
  for (std::size_t i = 0; i < plan.folds.size(); ++i) EXPECT_EQ(back.folds[i].test_ids, plan.folds[i].test_ids);
  EXPECT_EQ(split_plan_to_json(back), split_plan_to_json(plan));
}
