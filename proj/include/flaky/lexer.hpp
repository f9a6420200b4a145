#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

namespace flaky {

enum class LexKind {
  identifier,
  keyword,  // one of the reserved words (case-sensitive, as Java defines them)
  number,
  string,   // "..." and """text blocks"""
  char_lit,
  line_comment,
  block_comment,
  punct,
  whitespace,
  other,  // stray bytes, including non-ASCII
};

struct Lexeme {
  LexKind kind;
  std::size_t begin;
  std::size_t end;

  std::string_view text(std::string_view src) const { return src.substr(begin, end - begin); }
  bool is_trivia() const {
    return kind == LexKind::whitespace || kind == LexKind::line_comment ||
           kind == LexKind::block_comment;
  }
};

// Never fails: unterminated literals and comments extend to end of line/input.
// The lexemes tile the input exactly.
std::vector<Lexeme> lex_java(std::string_view src);

// The 50 Java reserved words.
const std::vector<std::string_view>& java_reserved_words();
bool is_java_reserved(std::string_view word);
// Reserved words plus the literals true/false/null.
bool is_stopword(std::string_view lowercase_word);
bool is_primitive_type(std::string_view word);

}  // namespace flaky
