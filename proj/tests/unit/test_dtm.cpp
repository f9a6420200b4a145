#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "flaky/dtm.hpp"
#include "flaky/error.hpp"
#include "flaky/rng.hpp"

using namespace flaky;

namespace {

// Cell-by-cell sum of (O - E)^2 / E.
double chi2_by_cells(double a, double b, double c, double d) {
  const double n = a + b + c + d;
  const double obs[2][2] = {{a, b}, {c, d}};
  const double row[2] = {a + b, c + d};
  const double col[2] = {a + c, b + d};
  double s = 0.0;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      const double e = row[i] * col[j] / n;
      s += (obs[i][j] - e) * (obs[i][j] - e) / e;
    }
  return s;
}

double chi2_closed_form(double a, double b, double c, double d) {
  const double n = a + b + c + d;
  return n * (a * d - b * c) * (a * d - b * c) / ((a + b) * (c + d) * (a + c) * (b + d));
}

// Upper tail of chi-square(1) by Simpson integration of the standard normal
// density after substituting x = u^2: p = 2 * int_{sqrt(x)}^inf phi(u) du.
double tail_by_integration(double x) {
  const double lo = std::sqrt(x);
  const double hi = lo + 40.0;
  const int n = 200000;
  const double h = (hi - lo) / n;
  auto phi = [](double u) { return std::exp(-0.5 * u * u) / std::sqrt(2.0 * M_PI); };
  double s = phi(lo) + phi(hi);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * phi(lo + i * h);
  return 2.0 * s * h / 3.0;
}

TestCase make(const std::string& id, const std::string& project, const std::string& code, Category label) {
  return TestCase{id, project, code, label};
}

// 10 concurrency tests over `conc_projects` projects, 9 of which use
// countdownlatch; 90 non-flaky tests, one of which does.
Corpus latch_corpus(int conc_projects) {
  std::vector<TestCase> v;
  for (int i = 0; i < 10; ++i) {
    const std::string code = i < 9 ? "void t() { CountDownLatch done = make(); helper(done); }" : "void t() { helper(x); }";
    v.push_back(make("c" + std::to_string(i), "cp" + std::to_string(i % conc_projects), code, Category::concurrency));
  }
  for (int i = 0; i < 90; ++i) {
    const std::string code = i == 0 ? "void t() { CountDownLatch done = make(); }" : "void t() { helper(value); check(value); }";
    v.push_back(make("n" + std::to_string(i), "np" + std::to_string(i % 9), code, Category::non_flaky));
  }
  return Corpus(v);
}

}  // namespace

TEST(ChiSquare, Fixture) {
  const auto r = chi_square({15, 5, 5, 75});
  EXPECT_FALSE(r.degenerate);
  EXPECT_NEAR(r.chi2, 47.265625, 1e-12);
  EXPECT_NEAR(chi2_by_cells(15, 5, 5, 75), 47.265625, 1e-12);
}

TEST(ChiSquare, IndependenceIsZero) { EXPECT_NEAR(chi_square({10, 40, 10, 40}).chi2, 0.0, 1e-12); }

TEST(ChiSquare, ZeroMarginalIsDegenerate) {
  const auto r = chi_square({0, 7, 0, 9});
  EXPECT_TRUE(r.degenerate);
  EXPECT_EQ(r.chi2, 0.0);
}

TEST(ChiSquare, MatchesClosedFormAndCellSum) {
  Rng rng(3);
  int checked = 0;
  while (checked < 2000) {
    const ContingencyTable t{rng.below(60), rng.below(60), rng.below(60), rng.below(60)};
    if (t.row1() == 0 || t.row2() == 0 || t.col1() == 0 || t.col2() == 0) continue;
    const double a = t.o11, b = t.o12, c = t.o21, d = t.o22;
    const double got = chi_square(t).chi2;
    EXPECT_NEAR(got, chi2_closed_form(a, b, c, d), 1e-9 * std::max(1.0, got));
    EXPECT_NEAR(got, chi2_by_cells(a, b, c, d), 1e-9 * std::max(1.0, got));
    ++checked;
  }
}

TEST(ChiSquare, RelabelingSymmetry) {
  Rng rng(4);
  for (int i = 0; i < 500; ++i) {
    const ContingencyTable t{1 + rng.below(50), 1 + rng.below(50), 1 + rng.below(50), 1 + rng.below(50)};
    const double x = chi_square(t).chi2;
    EXPECT_NEAR(chi_square({t.o22, t.o21, t.o12, t.o11}).chi2, x, 1e-9 * std::max(1.0, x));
    EXPECT_NEAR(chi_square({t.o12, t.o11, t.o22, t.o21}).chi2, x, 1e-9 * std::max(1.0, x));
  }
}

TEST(ChiSquare, ScalingIsLinear) {
  Rng rng(5);
  for (int i = 0; i < 300; ++i) {
    const ContingencyTable t{1 + rng.below(30), 1 + rng.below(30), 1 + rng.below(30), 1 + rng.below(30)};
    const std::uint64_t m = 1 + rng.below(20);
    const double x = chi_square(t).chi2;
    EXPECT_NEAR(chi_square({t.o11 * m, t.o12 * m, t.o21 * m, t.o22 * m}).chi2, m * x, 1e-9 * std::max(1.0, m * x));
  }
}

TEST(PValue, KnownPoints) {
  EXPECT_EQ(p_value_chi2_1dof(0.0), 1.0);
  EXPECT_NEAR(p_value_chi2_1dof(3.841459), 0.05, 1e-3);
  EXPECT_NEAR(p_value_chi2_1dof(3.841459), tail_by_integration(3.841459), 1e-7);
  const double p = p_value_chi2_1dof(47.265625);
  EXPECT_NEAR(p / tail_by_integration(47.265625), 1.0, 1e-6);
  EXPECT_NEAR(p, 6.2e-12, 0.05e-12);
  EXPECT_THROW(p_value_chi2_1dof(-1.0), ContractError);
}

TEST(PValue, MatchesIntegrationOnGrid) {
  for (double x = 0.05; x < 30.0; x *= 1.5)
    EXPECT_NEAR(p_value_chi2_1dof(x), tail_by_integration(x), 1e-7) << x;
}

TEST(PValue, MonotoneDecreasing) {
  double prev = 2.0;
  for (int i = 0; i < 100; ++i) {
    const double p = p_value_chi2_1dof(i * 0.5);
    EXPECT_LT(p, prev);
    EXPECT_GE(p, 0.0);
    prev = p;
  }
}

TEST(Mine, PlantedTokenRanked) {
  const auto corpus = latch_corpus(4);
  const auto v = mine(corpus, MiningParams{});
  const auto& conc = v.of(Category::concurrency);
  ASSERT_FALSE(conc.empty());
  EXPECT_EQ(conc.front().token, "countdownlatch");
  EXPECT_EQ(conc.front().project_support, 4u);
  EXPECT_NEAR(conc.front().chi2, chi2_by_cells(9, 1, 1, 89), 1e-9);
}

TEST(Mine, ProjectSupportFilter) {
  const auto v = mine(latch_corpus(2), MiningParams{});
  for (const auto& e : v.of(Category::concurrency)) EXPECT_NE(e.token, "countdownlatch");
  MiningParams loose;
  loose.n_min = 2;
  const auto w = mine(latch_corpus(2), loose);
  ASSERT_FALSE(w.of(Category::concurrency).empty());
  EXPECT_EQ(w.of(Category::concurrency).front().token, "countdownlatch");
}

TEST(Mine, UniformTokenExcluded) {
  const auto v = mine(latch_corpus(4), MiningParams{});
  for (Category c : kAllCategories)
    for (const auto& e : v.of(c)) EXPECT_NE(e.token, "t");  // in every test
}

TEST(Mine, SingleCategoryIsAnError) {
  std::vector<TestCase> v = {make("a", "p", "void t(){x();}", Category::time), make("b", "q", "void t(){y();}", Category::time)};
  EXPECT_THROW(mine(Corpus(v), MiningParams{}), InputError);
}

TEST(Mine, InvariantsHoldAndOrderIndependent) {
  Rng rng(9);
  const std::vector<std::string> words = {"alpha", "beta", "gamma", "delta", "sleep", "latch", "clock", "json", "save"};
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<TestCase> tests;
    for (int i = 0; i < 120; ++i) {
      const auto label = kAllCategories[rng.below(6)];
      std::string code = "void t() {";
      for (int k = rng.between(1, 6); k > 0; --k) code += " " + rng.pick(words) + "();";
      if (label != Category::non_flaky && rng.bernoulli(0.7)) code += " " + words[4 + index_of(label)] + "();";
      tests.push_back(make("t" + std::to_string(i), "p" + std::to_string(rng.below(12)), code + " }", label));
    }
    MiningParams params;
    params.top_k = 3;
    const auto v = mine(Corpus(tests), params);
    for (Category c : kAllCategories) {
      const auto& es = v.of(c);
      EXPECT_LE(es.size(), 3u);
      for (std::size_t i = 0; i < es.size(); ++i) {
        EXPECT_LT(es[i].p_value, params.p_max);
        EXPECT_GE(es[i].project_support, params.n_min);
        if (i > 0) EXPECT_TRUE(es[i - 1].chi2 > es[i].chi2 || (es[i - 1].chi2 == es[i].chi2 && es[i - 1].token < es[i].token));
      }
    }
    rng.shuffle(tests);
    EXPECT_EQ(mine(Corpus(tests), params), v);
  }
}

TEST(Vocabulary, JsonRoundTrip) {
  const auto v = mine(latch_corpus(4), MiningParams{});
  EXPECT_EQ(vocabulary_from_json(vocabulary_to_json(v)), v);
  const SymbolicVocabulary empty;
  EXPECT_EQ(vocabulary_from_json(vocabulary_to_json(empty)), empty);
  EXPECT_THROW(vocabulary_from_json(R"({"params":{}})"), InputError);
  EXPECT_THROW(vocabulary_from_json("not json"), InputError);
}

TEST(Vocabulary, RankedCsv) {
  const auto csv = ranked_tokens_csv(mine(latch_corpus(4), MiningParams{}));
  EXPECT_EQ(csv.rfind("category,rank,token,chi2\n", 0), 0u);
  EXPECT_NE(csv.find("concurrency,1,countdownlatch,"), std::string::npos);
}
