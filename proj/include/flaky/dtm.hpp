#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "flaky/category.hpp"
#include "flaky/corpus.hpp"

namespace flaky {

// Document-presence counts for one (token, category) pair:
//             class c   not c
//   present    o11       o12
//   absent     o21       o22
struct ContingencyTable {
  std::uint64_t o11 = 0, o12 = 0, o21 = 0, o22 = 0;

  std::uint64_t total() const { return o11 + o12 + o21 + o22; }
  std::uint64_t row1() const { return o11 + o12; }
  std::uint64_t row2() const { return o21 + o22; }
  std::uint64_t col1() const { return o11 + o21; }
  std::uint64_t col2() const { return o12 + o22; }
  double expected(int row, int col) const;
};

struct ChiSquareResult {
  double chi2 = 0.0;
  bool degenerate = false;  // a zero marginal; chi2 is reported as 0
};

// Four-cell Pearson statistic, no continuity correction.
ChiSquareResult chi_square(const ContingencyTable& t);

// Upper tail of chi-square with one degree of freedom: erfc(sqrt(x/2)).
double p_value_chi2_1dof(double chi2);

struct ChiSquareScore {
  std::string token;
  Category category = Category::non_flaky;
  double chi2 = 0.0;
  double p_value = 1.0;
  std::uint32_t project_support = 0;

  bool operator==(const ChiSquareScore&) const = default;
};

struct MiningParams {
  std::uint32_t top_k = 10;
  std::uint32_t n_min = 3;
  double p_max = 0.05;
  // Keep only tokens over-represented in the category (o11 > E11).
  bool positive_only = true;

  bool operator==(const MiningParams&) const = default;
};

struct SymbolicVocabulary {
  MiningParams params;
  // Indexed by category; descending chi2, ties broken lexicographically.
  std::array<std::vector<ChiSquareScore>, kNumCategories> entries;

  const std::vector<ChiSquareScore>& of(Category c) const { return entries[index_of(c)]; }
  bool operator==(const SymbolicVocabulary&) const = default;
};

// Presence information shared by mining and its kernels.
struct MiningInput {
  std::vector<std::string> tokens;                          // candidate vocabulary, sorted
  std::vector<std::vector<std::uint32_t>> docs_with_token;  // ascending doc indices per token
  std::vector<Category> labels;                             // per doc
  std::vector<std::uint32_t> doc_project;                   // per doc, dense project id
};

MiningInput prepare_mining_input(const Corpus& corpus);

// Throws InputError("no contrast class") when fewer than two categories are present.
SymbolicVocabulary mine(const Corpus& corpus, const MiningParams& params);
SymbolicVocabulary mine(const MiningInput& input, const MiningParams& params);

inline constexpr int kVocabularySchemaVersion = 1;

std::string vocabulary_to_json(const SymbolicVocabulary& v);
SymbolicVocabulary vocabulary_from_json(std::string_view text);
void save_vocabulary(const SymbolicVocabulary& v, const std::filesystem::path& path);
SymbolicVocabulary load_vocabulary(const std::filesystem::path& path);

// category,rank,token,chi2
std::string ranked_tokens_csv(const SymbolicVocabulary& v);

}  // namespace flaky
