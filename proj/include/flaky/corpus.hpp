#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "flaky/category.hpp"

namespace flaky {

struct TestCase {
  std::string id;
  std::string project;
  std::string source;
  Category label = Category::non_flaky;

  bool operator==(const TestCase&) const = default;
};

// Ordered tests plus the derived project index and per-category counts.
class Corpus {
 public:
  Corpus() = default;
  // Throws InputError on duplicate ids or empty id/project/source.
  explicit Corpus(std::vector<TestCase> tests);

  const std::vector<TestCase>& tests() const { return tests_; }
  std::size_t size() const { return tests_.size(); }
  bool empty() const { return tests_.empty(); }
  const TestCase& operator[](std::size_t i) const { return tests_[i]; }

  const std::map<std::string, std::set<std::string>>& project_index() const { return projects_; }
  const std::array<std::size_t, kNumCategories>& category_counts() const { return counts_; }
  std::size_t count(Category c) const { return counts_[index_of(c)]; }
  std::vector<std::string> projects() const;

  // Tests whose id is in `ids`, preserving corpus order.
  Corpus subset(const std::set<std::string>& ids) const;
  Corpus subset_by_project(const std::set<std::string>& projects) const;

 private:
  std::vector<TestCase> tests_;
  std::map<std::string, std::set<std::string>> projects_;
  std::array<std::size_t, kNumCategories> counts_{};
};

// JSON Lines, one {"id","project","code","label"} object per line. Blank
// lines are skipped. Errors name the 1-based line number.
Corpus load_corpus(const std::filesystem::path& path);
Corpus parse_corpus(std::string_view jsonl);
std::string serialize_corpus(const Corpus& corpus);
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);

// Lowercased identifiers plus two-segment member chains ("thread.sleep"),
// with comments, literals and stopwords removed.
using TokenStream = std::vector<std::string>;

TokenStream tokenize(std::string_view source);
// Same chains, but reserved words and true/false/null are kept; this is what
// the neural channel reads.
TokenStream code_tokens(std::string_view source);

// Sparse TF-IDF: weight = raw count * (ln(N / (1 + df)) + 1).
struct TfIdfMatrix {
  std::vector<std::string> vocabulary;  // sorted, unique
  std::vector<std::size_t> doc_freq;    // parallel to vocabulary
  // Per document: (vocabulary index, weight), ascending index.
  std::vector<std::vector<std::pair<std::size_t, double>>> rows;

  double idf(std::size_t term) const;
  std::size_t num_docs() const { return rows.size(); }
};

TfIdfMatrix build_tfidf(const std::vector<TokenStream>& docs);
TfIdfMatrix build_tfidf(const Corpus& corpus);

// doc_id,token,weight
std::string tfidf_to_csv(const TfIdfMatrix& m, const std::vector<std::string>& doc_ids);

}  // namespace flaky
