#include "flaky/splitter.hpp"

#include <algorithm>

#include <json.hpp>

#include "flaky/error.hpp"
#include "flaky/rng.hpp"

namespace flaky {

Category priority_label(const std::vector<TestCase>& project_tests) {
  if (project_tests.empty()) throw InputError("priority_label: empty project");
  std::array<bool, kNumCategories> seen{};
  for (const auto& t : project_tests) {
    if (t.project != project_tests.front().project) throw InputError("priority_label: tests from several projects");
    seen[index_of(t.label)] = true;
  }
  for (Category c : kPriorityOrder)
    if (seen[index_of(c)]) return c;
  return Category::non_flaky;
}

std::vector<ProjectPriorityLabel> project_labels(const Corpus& corpus) {
  std::map<std::string, std::vector<TestCase>> by_project;
  for (const auto& t : corpus.tests()) by_project[t.project].push_back(t);
  std::vector<ProjectPriorityLabel> out;
  out.reserve(by_project.size());
  for (const auto& [p, tests] : by_project) out.push_back({p, priority_label(tests)});
  return out;
}

std::map<std::string, int> assign_folds(const std::vector<ProjectPriorityLabel>& labels, int k, std::uint64_t seed) {
  if (k < 2) throw InputError("fold count must be at least 2");
  std::array<std::vector<std::string>, kNumCategories> groups;
  std::set<std::string> seen;
  for (const auto& l : labels) {
    if (!seen.insert(l.project).second) throw InputError("project '" + l.project + "' labeled twice");
    groups[index_of(l.priority)].push_back(l.project);
  }
  if (seen.size() < static_cast<std::size_t>(k))
    throw InputError("need at least " + std::to_string(k) + " projects for " + std::to_string(k) + " folds, got " +
                     std::to_string(seen.size()));
  std::map<std::string, int> assignment;
  for (Category c : kPriorityOrder) {
    auto& g = groups[index_of(c)];
    std::sort(g.begin(), g.end());
    Rng rng(derive_seed(seed, render(c)));
    rng.shuffle(g);
    for (std::size_t i = 0; i < g.size(); ++i) assignment[g[i]] = static_cast<int>(i % static_cast<std::size_t>(k));
  }
  return assignment;
}

SplitPlan make_splits(const Corpus& corpus, const std::map<std::string, int>& assignment, int k,
                      std::uint64_t seed) {
  if (k < 2) throw InputError("fold count must be at least 2");
  SplitPlan plan;
  plan.k = k;
  plan.seed = seed;
  plan.folds.resize(static_cast<std::size_t>(k));
  for (const auto& [project, ids] : corpus.project_index()) {
    auto it = assignment.find(project);
    if (it == assignment.end()) throw InputError("project '" + project + "' has no fold assignment");
    if (it->second < 0 || it->second >= k) throw InputError("project '" + project + "' assigned to invalid fold");
    plan.assignment[project] = it->second;
    for (int f = 0; f < k; ++f) {
      auto& fold = plan.folds[static_cast<std::size_t>(f)];
      if (f == it->second) {
        fold.test_ids.insert(ids.begin(), ids.end());
        fold.test_projects.insert(project);
      } else {
        fold.train_ids.insert(ids.begin(), ids.end());
        fold.train_projects.insert(project);
      }
    }
  }
  return plan;
}

SplitPlan plan_splits(const Corpus& corpus, int k, std::uint64_t seed) {
  return make_splits(corpus, assign_folds(project_labels(corpus), k, seed), k, seed);
}

std::string split_plan_to_json(const SplitPlan& plan) {
  nlohmann::ordered_json j;
  j["version"] = 1;
  j["seed"] = plan.seed;
  j["k"] = plan.k;
  j["assignment"] = plan.assignment;
  auto folds = nlohmann::ordered_json::array();
  for (const auto& f : plan.folds) {
    folds.push_back({{"test_projects", f.test_projects}, {"test_ids", f.test_ids}});
  }
  j["folds"] = std::move(folds);
  return j.dump(2) + "\n";
}

SplitPlan split_plan_from_json(std::string_view text, const Corpus& corpus) {
  try {
    const auto j = nlohmann::json::parse(text);
    if (!j.contains("version")) throw InputError("split plan: version field absent");
    const auto assignment = j.at("assignment").get<std::map<std::string, int>>();
    return make_splits(corpus, assignment, j.at("k").get<int>(), j.at("seed").get<std::uint64_t>());
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("split plan: ") + e.what());
  }
}

}  // namespace flaky
