#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "common/robustness_reference.hpp"
#include "flaky/error.hpp"
#include "flaky/eval.hpp"
#include "flaky/rng.hpp"

using namespace flaky;

namespace {

// Per-class F1 computed straight from the label/prediction lists.
std::array<double, kNumCategories> brute_f1(const std::vector<Category>& pred, const std::vector<Category>& gold) {
  std::array<double, kNumCategories> out{};
  for (std::size_t c = 0; c < kNumCategories; ++c) {
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      const bool p = index_of(pred[i]) == c, g = index_of(gold[i]) == c;
      tp += p && g;
      fp += p && !g;
      fn += !p && g;
    }
    const double precision = tp + fp > 0 ? tp / (tp + fp) : 0.0;
    const double recall = tp + fn > 0 ? tp / (tp + fn) : 0.0;
    out[c] = precision + recall > 0 ? 100.0 * 2 * precision * recall / (precision + recall) : 0.0;
  }
  return out;
}

MetricsReport report_with_f1(const std::array<double, kNumCategories>& f1) {
  MetricsReport m;
  double s = 0;
  for (std::size_t i = 0; i < kNumCategories; ++i) {
    m.per_class[i].f1 = f1[i];
    s += f1[i];
  }
  m.macro_f1 = s / kNumCategories;
  return m;
}

std::vector<Category> random_labels(Rng& rng, std::size_t n) {
  std::vector<Category> v(n);
  for (auto& c : v) c = kAllCategories[rng.below(6)];
  return v;
}

}  // namespace

TEST(Confusion, Basics) {
  const std::vector<Category> gold = {Category::order_dependency, Category::time};
  const std::vector<Category> pred = {Category::concurrency, Category::time};
  const auto cm = confusion(pred, gold);
  EXPECT_EQ(cm.at(Category::order_dependency, Category::concurrency), 1u);
  EXPECT_EQ(cm.at(Category::time, Category::time), 1u);
  EXPECT_EQ(cm.total(), 2u);
  EXPECT_THROW(confusion(pred, {Category::time}), InputError);
  const auto diag = confusion(gold, gold);
  for (Category a : kAllCategories)
    for (Category b : kAllCategories)
      if (a != b) EXPECT_EQ(diag.at(a, b), 0u);
}

TEST(F1, PerfectPredictions) {
  const std::vector<Category> all(kAllCategories.begin(), kAllCategories.end());
  const auto r = f1_scores(all, all);
  for (Category c : kAllCategories) EXPECT_EQ(r.of(c).f1, 100.0);
  EXPECT_EQ(r.macro_f1, 100.0);
}

TEST(F1, AbsentClassScoresZero) {
  const std::vector<Category> v = {Category::time, Category::non_flaky};
  const auto r = f1_scores(v, v);
  EXPECT_EQ(r.of(Category::async_wait).f1, 0.0);
  EXPECT_NEAR(r.macro_f1, 200.0 / 6.0, 1e-12);
}

TEST(F1, TwoOfThreeFixture) {
  // Gold (A, A, B), predicted (A, B, B).
  const std::vector<Category> gold = {Category::async_wait, Category::async_wait, Category::concurrency};
  const std::vector<Category> pred = {Category::async_wait, Category::concurrency, Category::concurrency};
  const auto r = f1_scores(pred, gold);
  EXPECT_NEAR(r.of(Category::async_wait).f1, 100.0 * 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(r.of(Category::concurrency).f1, 100.0 * 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(r.of(Category::async_wait).precision, 100.0, 1e-12);
  EXPECT_NEAR(r.of(Category::async_wait).recall, 50.0, 1e-12);
  EXPECT_EQ(r.of(Category::async_wait).support, 2u);
}

TEST(F1, MatchesBruteForceExactly) {
  Rng rng(31);
  for (int i = 0; i < 1000; ++i) {
    const auto n = 1 + rng.below(60);
    const auto gold = random_labels(rng, n), pred = random_labels(rng, n);
    const auto r = f1_scores(pred, gold);
    const auto b = brute_f1(pred, gold);
    double macro = 0;
    for (std::size_t c = 0; c < kNumCategories; ++c) {
      EXPECT_NEAR(r.per_class[c].f1, b[c], 1e-12);
      macro += b[c];
    }
    EXPECT_NEAR(r.macro_f1, macro / 6.0, 1e-12);
  }
}

TEST(F1, PermutationInvariant) {
  Rng rng(32);
  for (int i = 0; i < 100; ++i) {
    const auto n = 2 + rng.below(40);
    auto gold = random_labels(rng, n), pred = random_labels(rng, n);
    const double before = f1_scores(pred, gold).macro_f1;
    std::vector<std::size_t> order(n);
    for (std::size_t k = 0; k < n; ++k) order[k] = k;
    rng.shuffle(order);
    std::vector<Category> g2, p2;
    for (auto k : order) {
      g2.push_back(gold[k]);
      p2.push_back(pred[k]);
    }
    EXPECT_EQ(f1_scores(p2, g2).macro_f1, before);
  }
}

TEST(Drops, ArithmeticOnReferenceRows) {
  std::array<double, kNumCategories> clean{};
  for (std::size_t i = 0; i < kNumCategories; ++i) clean[i] = robustness_ref::kRows[i].clean;
  std::map<StressMode, MetricsReport> perturbed;
  for (StressMode m : kAllStressModes) {
    std::array<double, kNumCategories> f{};
    for (std::size_t i = 0; i < kNumCategories; ++i) f[i] = robustness_ref::reference_f1(robustness_ref::kRows[i], m);
    perturbed[m] = report_with_f1(f);
  }
  const auto r = robustness_drops(report_with_f1(clean), perturbed, {kAllStressModes[0], kAllStressModes[1], kAllStressModes[2]});
  for (StressMode m : kAllStressModes)
    for (std::size_t i = 0; i < kNumCategories; ++i)
      EXPECT_NEAR(r.drops.at(m)[i], clean[i] - robustness_ref::reference_f1(robustness_ref::kRows[i], m), 1e-12);
  EXPECT_NEAR(r.drops.at(StressMode::rename)[index_of(Category::time)], 5.37, 1e-9);
  EXPECT_NEAR(r.drops.at(StressMode::rename)[index_of(Category::concurrency)], -2.49, 1e-9);
  EXPECT_NEAR(r.drops.at(StressMode::both)[index_of(Category::async_wait)], 4.24, 1e-9);
  EXPECT_NEAR(report_with_f1(clean).macro_f1, 64.84, 0.005);
  EXPECT_THROW(robustness_drops(report_with_f1(clean), {}, {StressMode::both}), InputError);
}

TEST(Drops, AverageIsMacroDifference) {
  Rng rng(33);
  for (int i = 0; i < 100; ++i) {
    const auto gold = random_labels(rng, 50);
    const auto a = f1_scores(random_labels(rng, 50), gold), b = f1_scores(random_labels(rng, 50), gold);
    const auto r = robustness_drops(a, {{StressMode::both, b}}, {StressMode::both});
    EXPECT_NEAR(r.average_drop.at(StressMode::both), a.macro_f1 - b.macro_f1, 1e-9);
  }
}

namespace {

nlohmann::ordered_json sample_report() {
  const std::vector<Category> gold = {Category::async_wait, Category::time, Category::non_flaky, Category::non_flaky};
  const std::vector<Category> pred = {Category::async_wait, Category::non_flaky, Category::non_flaky, Category::time};
  const auto clean = f1_scores(pred, gold);
  const auto both = f1_scores(gold, gold);
  const auto r = robustness_drops(clean, {{StressMode::both, both}}, {StressMode::both});
  nlohmann::ordered_json j;
  j["schema_version"] = kReportSchemaVersion;
  j["config_hash"] = "abc";
  j["variant"] = "full";
  j["augmentation"] = true;
  j["corpus"] = {{"tests", 4}};
  nlohmann::ordered_json pooled;
  pooled["clean"] = metrics_to_json(clean);
  pooled["stress"]["both"] = metrics_to_json(both);
  nlohmann::ordered_json drops;
  nlohmann::ordered_json per;
  for (Category c : kAllCategories) per[std::string(render(c))] = r.drops.at(StressMode::both)[index_of(c)];
  drops["both"] = {{"per_class", per}, {"average", r.average_drop.at(StressMode::both)}};
  pooled["drops"] = drops;
  pooled["confusion"]["clean"] = confusion_to_json(confusion(pred, gold));
  pooled["confusion"]["both"] = confusion_to_json(confusion(gold, gold));
  j["pooled"] = pooled;
  j["folds"] = nlohmann::ordered_json::array();
  j["token_ranking"] = nlohmann::ordered_json::array(
      {{{"category", "async_wait"}, {"rank", 1}, {"token", "sleep"}, {"chi2", 12.5}, {"p_value", 1e-4}, {"project_support", 3}}});
  j["token_groups"] = nlohmann::ordered_json::array(
      {{{"group", "sleep_await"}, {"category", "async_wait"}, {"tests_with_group", 1}, {"category_tests", 1}, {"fraction", 1.0}}});
  return j;
}

}  // namespace

TEST(Render, F1CsvShape) {
  const auto csv = render_f1_csv(sample_report());
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "setting,Async.,Conc.,Time,UC,OD,Non-flaky,Macro Avg.");
  EXPECT_NE(csv.find("\nclean,100.00,0.00,0.00,0.00,0.00,50.00,25.00\n"), std::string::npos) << csv;
  EXPECT_NE(csv.find("\nboth,100.00,0.00,100.00,0.00,0.00,100.00,50.00\n"), std::string::npos) << csv;
}

TEST(Render, DropsCsvAndMarkdown) {
  const auto j = sample_report();
  const auto csv = render_drops_csv(j);
  EXPECT_EQ(csv.rfind("mode,category,clean_f1,perturbed_f1,drop\n", 0), 0u);
  EXPECT_NE(csv.find("both,time,0.00,100.00,-100.00"), std::string::npos) << csv;
  EXPECT_EQ(csv.find("-0.00"), std::string::npos);
  const auto md = render_metrics_markdown(j);
  EXPECT_NE(md.find("| Clean |"), std::string::npos);
  EXPECT_NE(md.find("Confusion"), std::string::npos);
  EXPECT_EQ(render_token_rank_csv(j), "category,rank,token,chi2\nasync_wait,1,sleep,12.5\n");
  EXPECT_EQ(render_token_groups_csv(j).rfind("group,category,tests_with_group,category_tests,fraction\n", 0), 0u);
}

TEST(Render, EmitWritesAllFiles) {
  const auto dir = std::filesystem::temp_directory_path() / "flaky_emit_test";
  std::filesystem::remove_all(dir);
  emit_report(sample_report(), dir);
  for (const char* f : {"report.json", "metrics.md", "f1_table.csv", "drops.csv", "token_rank.csv", "token_groups.csv"})
    EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  std::ifstream in(dir / "report.json");
  const auto back = nlohmann::ordered_json::parse(in);
  EXPECT_EQ(back, sample_report());
  std::filesystem::remove_all(dir);
}
