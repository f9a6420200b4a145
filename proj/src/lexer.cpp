#include "flaky/lexer.hpp"

#include <algorithm>
#include <array>

namespace flaky {
namespace {

constexpr std::array<std::string_view, 50> kReserved = {
    "abstract", "assert",     "boolean",  "break",      "byte",      "case",
    "catch",    "char",       "class",    "const",      "continue",  "default",
    "do",       "double",     "else",     "enum",       "extends",   "final",
    "finally",  "float",      "for",      "goto",       "if",        "implements",
    "import",   "instanceof", "int",      "interface",  "long",      "native",
    "new",      "package",    "private",  "protected",  "public",    "return",
    "short",    "static",     "strictfp", "super",      "switch",    "synchronized",
    "this",     "throw",      "throws",   "transient",  "try",       "void",
    "volatile", "while",
};

constexpr std::array<std::string_view, 22> kOperators = {
    ">>>=", "<<=", ">>=", "->", "::", "==", "!=", "<=", ">=", "&&", "||",
    "++",   "--",  "+=",  "-=", "*=", "/=", "%=", "&=", "|=", "^=", "<<",
};

bool ident_start(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_' || c == '$';
}
bool ident_char(char c) { return ident_start(c) || (c >= '0' && c <= '9'); }
bool digit(char c) { return c >= '0' && c <= '9'; }
bool space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

std::size_t scan_quoted(std::string_view s, std::size_t i, char quote) {
  // i points at the opening quote
  ++i;
  while (i < s.size()) {
    const char c = s[i];
    if (c == '\\') {
      i += 2;
      continue;
    }
    if (c == '\n') return i;
    ++i;
    if (c == quote) return i;
  }
  return s.size();
}

}  // namespace

const std::vector<std::string_view>& java_reserved_words() {
  static const std::vector<std::string_view> words(kReserved.begin(), kReserved.end());
  return words;
}

bool is_java_reserved(std::string_view word) {
  return std::find(kReserved.begin(), kReserved.end(), word) != kReserved.end();
}

bool is_stopword(std::string_view w) {
  return w == "true" || w == "false" || w == "null" || is_java_reserved(w);
}

bool is_primitive_type(std::string_view w) {
  return w == "int" || w == "long" || w == "short" || w == "byte" || w == "char" ||
         w == "float" || w == "double" || w == "boolean";
}

std::vector<Lexeme> lex_java(std::string_view s) {
  std::vector<Lexeme> out;
  out.reserve(s.size() / 3 + 1);
  std::size_t i = 0;
  const std::size_t n = s.size();
  while (i < n) {
    const char c = s[i];
    const std::size_t start = i;
    LexKind kind = LexKind::other;
    if (space(c)) {
      while (i < n && space(s[i])) ++i;
      kind = LexKind::whitespace;
    } else if (c == '/' && i + 1 < n && s[i + 1] == '/') {
      while (i < n && s[i] != '\n') ++i;
      kind = LexKind::line_comment;
    } else if (c == '/' && i + 1 < n && s[i + 1] == '*') {
      const auto close = s.find("*/", i + 2);
      i = close == std::string_view::npos ? n : close + 2;
      kind = LexKind::block_comment;
    } else if (c == '"' && s.substr(i, 3) == "\"\"\"") {
      const auto close = s.find("\"\"\"", i + 3);
      i = close == std::string_view::npos ? n : close + 3;
      kind = LexKind::string;
    } else if (c == '"') {
      i = scan_quoted(s, i, '"');
      kind = LexKind::string;
    } else if (c == '\'') {
      i = scan_quoted(s, i, '\'');
      kind = LexKind::char_lit;
    } else if (ident_start(c)) {
      while (i < n && ident_char(s[i])) ++i;
      kind = is_java_reserved(s.substr(start, i - start)) ? LexKind::keyword : LexKind::identifier;
    } else if (digit(c) || (c == '.' && i + 1 < n && digit(s[i + 1]))) {
      ++i;
      while (i < n) {
        const char d = s[i];
        if (ident_char(d) || d == '.') {
          ++i;
        } else if ((d == '+' || d == '-') &&
                   (s[i - 1] == 'e' || s[i - 1] == 'E' || s[i - 1] == 'p' || s[i - 1] == 'P')) {
          ++i;
        } else {
          break;
        }
      }
      kind = LexKind::number;
    } else if (static_cast<unsigned char>(c) < 0x80) {
      kind = LexKind::punct;
      std::size_t len = 1;
      for (auto op : kOperators) {
        if (s.substr(i, op.size()) == op) {
          len = op.size();
          break;
        }
      }
      i += len;
    } else {
      while (i < n && static_cast<unsigned char>(s[i]) >= 0x80) ++i;
      kind = LexKind::other;
    }
    out.push_back({kind, start, i});
  }
  return out;
}

}  // namespace flaky
