#include "flaky/dtm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include <json.hpp>

#include "flaky/error.hpp"
#include "flaky/io.hpp"
#include "flaky/kernels.hpp"

namespace flaky {

double ContingencyTable::expected(int row, int col) const {
  const double r = static_cast<double>(row == 0 ? row1() : row2());
  const double c = static_cast<double>(col == 0 ? col1() : col2());
  return r * c / static_cast<double>(total());
}

ChiSquareResult chi_square(const ContingencyTable& t) {
  if (t.total() == 0 || t.row1() == 0 || t.row2() == 0 || t.col1() == 0 || t.col2() == 0) {
    return {0.0, true};
  }
  const std::array<std::array<double, 2>, 2> observed = {{
      {static_cast<double>(t.o11), static_cast<double>(t.o12)},
      {static_cast<double>(t.o21), static_cast<double>(t.o22)},
  }};
  double sum = 0.0;
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      const double e = t.expected(i, j);
      const double d = observed[i][j] - e;
      sum += d * d / e;
    }
  }
  return {sum, false};
}

double p_value_chi2_1dof(double chi2) {
  if (!(chi2 >= 0.0)) throw ContractError("chi-square statistic must be non-negative");
  if (std::isinf(chi2)) return 0.0;
  return std::erfc(std::sqrt(chi2 / 2.0));
}

MiningInput prepare_mining_input(const Corpus& corpus) {
  if (corpus.empty()) throw InputError("cannot mine an empty corpus");
  std::vector<TokenStream> streams;
  streams.reserve(corpus.size());
  for (const auto& t : corpus.tests()) streams.push_back(tokenize(t.source));
  // Candidate tokens come from the stopword-filtered TF-IDF vocabulary.
  const auto tfidf = build_tfidf(streams);

  MiningInput in;
  in.tokens = tfidf.vocabulary;
  in.docs_with_token.resize(in.tokens.size());
  for (std::uint32_t d = 0; d < tfidf.rows.size(); ++d) {
    for (const auto& [term, _] : tfidf.rows[d]) in.docs_with_token[term].push_back(d);
  }
  std::map<std::string, std::uint32_t> project_ids;
  for (const auto& t : corpus.tests()) {
    in.labels.push_back(t.label);
    auto [it, _] = project_ids.emplace(t.project, static_cast<std::uint32_t>(project_ids.size()));
    in.doc_project.push_back(it->second);
  }
  return in;
}

SymbolicVocabulary mine(const MiningInput& input, const MiningParams& params) {
  if (params.top_k < 1) throw InputError("top-k must be at least 1");
  if (!(params.p_max > 0.0 && params.p_max <= 1.0)) throw InputError("p_max must be in (0, 1]");
  std::array<std::size_t, kNumCategories> class_size{};
  for (auto c : input.labels) ++class_size[index_of(c)];
  const auto present =
      std::count_if(class_size.begin(), class_size.end(), [](std::size_t n) { return n > 0; });
  if (present < 2) throw InputError("no contrast class: corpus contains a single category");

  const auto scores = kernels::score_tokens(input, kernels::Exec::parallel);

  SymbolicVocabulary vocab;
  vocab.params = params;
  for (Category c : kAllCategories) {
    std::vector<ChiSquareScore> kept;
    for (std::size_t t = 0; t < input.tokens.size(); ++t) {
      const auto& s = scores[t][index_of(c)];
      if (!(s.p_value < params.p_max)) continue;
      if (params.positive_only && !s.over_represented) continue;
      if (s.project_support < params.n_min) continue;
      kept.push_back({input.tokens[t], c, s.chi2, s.p_value, s.project_support});
    }
    std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
      if (a.chi2 != b.chi2) return a.chi2 > b.chi2;
      return a.token < b.token;
    });
    if (kept.size() > params.top_k) kept.resize(params.top_k);
    vocab.entries[index_of(c)] = std::move(kept);
  }
  return vocab;
}

SymbolicVocabulary mine(const Corpus& corpus, const MiningParams& params) {
  return mine(prepare_mining_input(corpus), params);
}

std::string vocabulary_to_json(const SymbolicVocabulary& v) {
  nlohmann::ordered_json j;
  j["version"] = kVocabularySchemaVersion;
  j["params"] = {{"top_k", v.params.top_k},
                 {"n_min", v.params.n_min},
                 {"p_max", v.params.p_max},
                 {"positive_only", v.params.positive_only}};
  nlohmann::ordered_json cats = nlohmann::ordered_json::object();
  for (Category c : kAllCategories) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& e : v.of(c)) {
      arr.push_back({{"token", e.token},
                     {"chi2", e.chi2},
                     {"p_value", e.p_value},
                     {"project_support", e.project_support}});
    }
    cats[std::string(render(c))] = std::move(arr);
  }
  j["categories"] = std::move(cats);
  return j.dump(2) + "\n";
}

SymbolicVocabulary vocabulary_from_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("vocabulary: malformed JSON (") + e.what() + ")");
  }
  if (!j.is_object() || !j.contains("version")) throw InputError("vocabulary: version field absent");
  if (j["version"] != kVocabularySchemaVersion) throw InputError("vocabulary: unsupported version");
  try {
    SymbolicVocabulary v;
    const auto& p = j.at("params");
    v.params.top_k = p.at("top_k").get<std::uint32_t>();
    v.params.n_min = p.at("n_min").get<std::uint32_t>();
    v.params.p_max = p.at("p_max").get<double>();
    v.params.positive_only = p.value("positive_only", true);
    const auto& cats = j.at("categories");
    for (Category c : kAllCategories) {
      const auto& arr = cats.at(std::string(render(c)));
      if (!arr.is_array()) throw InputError("vocabulary: category list is not an array");
      for (const auto& e : arr) {
        ChiSquareScore s;
        s.token = e.at("token").get<std::string>();
        s.category = c;
        s.chi2 = e.at("chi2").get<double>();
        s.p_value = e.at("p_value").get<double>();
        s.project_support = e.at("project_support").get<std::uint32_t>();
        v.entries[index_of(c)].push_back(std::move(s));
      }
    }
    return v;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("vocabulary: schema mismatch (") + e.what() + ")");
  }
}

void save_vocabulary(const SymbolicVocabulary& v, const std::filesystem::path& path) {
  write_file_atomic(path, vocabulary_to_json(v));
}

SymbolicVocabulary load_vocabulary(const std::filesystem::path& path) {
  return vocabulary_from_json(read_file(path));
}

std::string ranked_tokens_csv(const SymbolicVocabulary& v) {
  std::ostringstream out;
  out.precision(17);
  out << "category,rank,token,chi2\n";
  for (Category c : kAllCategories) {
    std::size_t rank = 1;
    for (const auto& e : v.of(c)) out << render(c) << ',' << rank++ << ',' << e.token << ',' << e.chi2 << '\n';
  }
  return out.str();
}

}  // namespace flaky
