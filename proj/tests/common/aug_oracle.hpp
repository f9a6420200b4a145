#pragma once

#include <cctype>
#include <map>
#include <regex>
#include <string>

#include "flaky/augment.hpp"
#include "flaky/corpus.hpp"

// Checkers for augmented sources that share no code with the augmenter.
namespace augoracle {

using flaky::RenameMap;
using flaky::TokenStream;

// Removes comments and blanks string contents, by a plain character scan.
inline std::string code_only(const std::string& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size();) {
    if (s.compare(i, 2, "//") == 0) {
      while (i < s.size() && s[i] != '\n') ++i;
    } else if (s.compare(i, 2, "/*") == 0) {
      const auto e = s.find("*/", i + 2);
      i = e == std::string::npos ? s.size() : e + 2;
    } else if (s[i] == '"') {
      out += "\"\"";
      ++i;
      while (i < s.size() && s[i] != '"') i += s[i] == '\\' ? 2 : 1;
      ++i;
    } else {
      out += s[i++];
    }
  }
  return out;
}

// Every sentinel region must consist only of comments and blocks opened by a
// never-taken guard.
inline bool regions_are_guarded(const std::string& src) {
  static const std::regex guard(
      R"(^\s*(if\s*\(\s*false\s*\)|while\s*\(\s*false\s*\)|try\s*\{\s*\}\s*catch\s*\(\s*\w+\s+\w+\s*\))\s*\{)");
  const std::string begin = "/*AUG-BEGIN*/", end = "/*AUG-END*/";
  std::size_t pos = 0;
  while ((pos = src.find(begin, pos)) != std::string::npos) {
    const auto stop = src.find(end, pos + begin.size());
    if (stop == std::string::npos) return false;
    // Only the region between the sentinels is inspected, not the sentinels themselves.
    std::string rest = code_only(src.substr(pos + begin.size(), stop - pos - begin.size()));
    while (true) {
      std::smatch m;
      if (!std::regex_search(rest, m, guard)) break;
      std::size_t i = static_cast<std::size_t>(m.length(0));
      int depth = 1;
      while (i < rest.size() && depth > 0) {
        if (rest[i] == '{') ++depth;
        if (rest[i] == '}') --depth;
        ++i;
      }
      if (depth != 0) return false;
      rest = rest.substr(i);
    }
    if (rest.find_first_not_of(" \t\r\n") != std::string::npos) return false;
    pos = stop + end.size();
  }
  return true;
}

inline TokenStream unrename(TokenStream tokens, const RenameMap& map) {
  std::map<std::string, std::string> back;
  for (const auto& [from, to] : map) {
    std::string lf = from, lt = to;
    for (auto& c : lf) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    for (auto& c : lt) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    back[lt] = lf;
  }
  for (auto& t : tokens) {
    const auto dot = t.find('.');
    if (dot == std::string::npos) {
      if (back.count(t)) t = back[t];
    } else {
      auto head = t.substr(0, dot);
      if (back.count(head)) t = back[head] + t.substr(dot);
    }
  }
  return tokens;
}

}  // namespace augoracle
