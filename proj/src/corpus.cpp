#include "flaky/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "flaky/error.hpp"
#include "flaky/io.hpp"
#include "flaky/lexer.hpp"

namespace flaky {

Corpus::Corpus(std::vector<TestCase> tests) : tests_(std::move(tests)) {
  std::set<std::string> seen;
  for (const auto& t : tests_) {
    if (t.id.empty()) throw InputError("test with empty id");
    if (t.project.empty()) throw InputError("test '" + t.id + "' has an empty project");
    if (t.source.empty()) throw InputError("test '" + t.id + "' has empty source");
    if (!seen.insert(t.id).second) throw InputError("duplicate test id '" + t.id + "'");
    projects_[t.project].insert(t.id);
    ++counts_[index_of(t.label)];
  }
}

std::vector<std::string> Corpus::projects() const {
  std::vector<std::string> out;
  out.reserve(projects_.size());
  for (const auto& [p, _] : projects_) out.push_back(p);
  return out;
}

Corpus Corpus::subset(const std::set<std::string>& ids) const {
  std::vector<TestCase> out;
  for (const auto& t : tests_) {
    if (ids.count(t.id)) out.push_back(t);
  }
  return Corpus(std::move(out));
}

Corpus Corpus::subset_by_project(const std::set<std::string>& projects) const {
  std::vector<TestCase> out;
  for (const auto& t : tests_) {
    if (projects.count(t.project)) out.push_back(t);
  }
  return Corpus(std::move(out));
}

Corpus parse_corpus(std::string_view jsonl) {
  std::vector<TestCase> tests;
  std::set<std::string> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= jsonl.size()) {
    auto nl = jsonl.find('\n', pos);
    if (nl == std::string_view::npos) nl = jsonl.size();
    auto line = jsonl.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) {
      if (nl == jsonl.size()) break;
      continue;
    }
    const auto where = "line " + std::to_string(line_no) + ": ";
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw InputError(where + "malformed JSON (" + e.what() + ")");
    }
    if (!obj.is_object()) throw InputError(where + "expected a JSON object");
    TestCase t;
    for (const char* key : {"id", "project", "code", "label"}) {
      if (!obj.contains(key) || !obj[key].is_string())
        throw InputError(where + "missing or non-string field '" + key + "'");
    }
    t.id = obj["id"].get<std::string>();
    t.project = obj["project"].get<std::string>();
    t.source = obj["code"].get<std::string>();
    try {
      t.label = parse_category(obj["label"].get<std::string>());
    } catch (const InputError& e) {
      throw InputError(where + e.what());
    }
    if (!seen.insert(t.id).second) throw InputError(where + "duplicate test id '" + t.id + "'");
    tests.push_back(std::move(t));
    if (nl == jsonl.size()) break;
  }
  return Corpus(std::move(tests));
}

Corpus load_corpus(const std::filesystem::path& path) { return parse_corpus(read_file(path)); }

std::string serialize_corpus(const Corpus& corpus) {
  std::string out;
  for (const auto& t : corpus.tests()) {
    nlohmann::ordered_json obj;
    obj["id"] = t.id;
    obj["project"] = t.project;
    obj["code"] = t.source;
    obj["label"] = std::string(render(t.label));
    out += obj.dump();
    out += '\n';
  }
  return out;
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_corpus(corpus));
}

namespace {

TokenStream chain_tokens(std::string_view source, bool drop_stopwords) {
  const auto lexemes = lex_java(source);
  // Indices of non-trivia lexemes, so chains may span whitespace and newlines.
  std::vector<std::size_t> sig;
  sig.reserve(lexemes.size());
  for (std::size_t i = 0; i < lexemes.size(); ++i) {
    if (lexemes[i].kind != LexKind::whitespace) sig.push_back(i);
  }
  auto lower = [&](const Lexeme& lx) {
    std::string s(lx.text(source));
    for (auto& ch : s) {
      if (ch >= 'A' && ch <= 'Z') ch = static_cast<char>(ch - 'A' + 'a');
    }
    return s;
  };

  TokenStream out;
  for (std::size_t k = 0; k < sig.size(); ++k) {
    const auto& lx = lexemes[sig[k]];
    if (!drop_stopwords && lx.kind == LexKind::keyword) {
      out.push_back(std::string(lx.text(source)));
      continue;
    }
    if (lx.kind != LexKind::identifier) continue;
    const auto word = lower(lx);
    if (drop_stopwords && is_stopword(word)) continue;
    if (k + 2 < sig.size()) {
      const auto& dot = lexemes[sig[k + 1]];
      const auto& next = lexemes[sig[k + 2]];
      if (dot.kind == LexKind::punct && dot.text(source) == "." && next.kind == LexKind::identifier) {
        const auto second = lower(next);
        if (!drop_stopwords || !is_stopword(second)) out.push_back(word + "." + second);
      }
    }
    out.push_back(word);
  }
  return out;
}

}  // namespace

TokenStream tokenize(std::string_view source) { return chain_tokens(source, true); }

TokenStream code_tokens(std::string_view source) { return chain_tokens(source, false); }

double TfIdfMatrix::idf(std::size_t term) const {
  return std::log(static_cast<double>(num_docs()) / (1.0 + static_cast<double>(doc_freq[term]))) + 1.0;
}

TfIdfMatrix build_tfidf(const std::vector<TokenStream>& docs) {
  if (docs.empty()) throw InputError("cannot vectorize an empty corpus");
  std::set<std::string> vocab;
  for (const auto& d : docs) vocab.insert(d.begin(), d.end());

  TfIdfMatrix m;
  m.vocabulary.assign(vocab.begin(), vocab.end());
  std::unordered_map<std::string, std::size_t> index;
  index.reserve(m.vocabulary.size());
  for (std::size_t i = 0; i < m.vocabulary.size(); ++i) index.emplace(m.vocabulary[i], i);

  m.doc_freq.assign(m.vocabulary.size(), 0);
  std::vector<std::map<std::size_t, std::size_t>> counts(docs.size());
  for (std::size_t d = 0; d < docs.size(); ++d) {
    for (const auto& tok : docs[d]) ++counts[d][index.at(tok)];
    for (const auto& [term, _] : counts[d]) ++m.doc_freq[term];
  }
  m.rows.resize(docs.size());
  for (std::size_t d = 0; d < docs.size(); ++d) {
    m.rows[d].reserve(counts[d].size());
    for (const auto& [term, tf] : counts[d]) {
      m.rows[d].emplace_back(term, static_cast<double>(tf) * m.idf(term));
    }
  }
  return m;
}

TfIdfMatrix build_tfidf(const Corpus& corpus) {
  std::vector<TokenStream> docs;
  docs.reserve(corpus.size());
  for (const auto& t : corpus.tests()) docs.push_back(tokenize(t.source));
  return build_tfidf(docs);
}

std::string tfidf_to_csv(const TfIdfMatrix& m, const std::vector<std::string>& doc_ids) {
  std::ostringstream out;
  out.precision(17);
  out << "doc_id,token,weight\n";
  for (std::size_t d = 0; d < m.rows.size(); ++d) {
    for (const auto& [term, w] : m.rows[d]) {
      out << (d < doc_ids.size() ? doc_ids[d] : std::to_string(d)) << ',' << m.vocabulary[term]
          << ',' << w << '\n';
    }
  }
  return out.str();
}

}  // namespace flaky
