#include "flaky/augment.hpp"

#include <algorithm>
#include <map>
#include <set>

#include <json.hpp>

#include "flaky/error.hpp"
#include "flaky/lexer.hpp"
#include "flaky/rng.hpp"

namespace flaky {

std::string_view render(Transform t) {
  switch (t) {
    case Transform::rename: return "rename";
    case Transform::deadcode: return "deadcode";
    case Transform::decoy: return "decoy";
  }
  return "?";
}

std::string_view render(GuardStyle g) {
  switch (g) {
    case GuardStyle::if_false: return "if_false";
    case GuardStyle::catch_never: return "catch_never";
    case GuardStyle::while_false: return "while_false";
  }
  return "?";
}

GuardStyle parse_guard_style(std::string_view s) {
  for (GuardStyle g : {GuardStyle::if_false, GuardStyle::catch_never, GuardStyle::while_false})
    if (render(g) == s) return g;
  throw InputError("unknown guard style '" + std::string(s) + "'");
}

std::string_view render(StressMode m) {
  switch (m) {
    case StressMode::rename: return "rename";
    case StressMode::deadcode: return "deadcode";
    case StressMode::both: return "both";
  }
  return "?";
}

StressMode parse_stress_mode(std::string_view s) {
  for (StressMode m : kAllStressModes)
    if (render(m) == s) return m;
  throw InputError("unknown perturbation mode '" + std::string(s) + "' (expected rename, deadcode or both)");
}

namespace {

// Non-trivia view over the lexemes of one source.
struct Sig {
  std::string_view src;
  std::vector<Lexeme> lex;
  std::vector<std::size_t> idx;

  explicit Sig(std::string_view s) : src(s), lex(lex_java(s)) {
    for (std::size_t i = 0; i < lex.size(); ++i)
      if (!lex[i].is_trivia()) idx.push_back(i);
  }
  std::size_t size() const { return idx.size(); }
  std::string_view text(std::size_t i) const { return i < idx.size() ? lex[idx[i]].text(src) : std::string_view{}; }
  LexKind kind(std::size_t i) const { return lex[idx[i]].kind; }
  bool is_name(std::size_t i) const {
    if (i >= idx.size() || kind(i) != LexKind::identifier) return false;
    const auto t = text(i);
    return t != "true" && t != "false" && t != "null";
  }
};

bool is_type_start(const Sig& s, std::size_t i) {
  if (s.is_name(i)) return true;
  return i < s.size() && s.kind(i) == LexKind::keyword && is_primitive_type(s.text(i));
}

// Index one past a type starting at i, or npos.
std::size_t parse_type(const Sig& s, std::size_t i) {
  constexpr auto npos = std::string_view::npos;
  if (!is_type_start(s, i)) return npos;
  std::size_t j = i + 1;
  while (s.text(j) == "." && s.is_name(j + 1)) j += 2;
  if (s.text(j) == "<") {
    int depth = 0;
    for (; j < s.size(); ++j) {
      const auto t = s.text(j);
      if (t == "<") {
        ++depth;
      } else if (t == ">") {
        if (--depth == 0) break;
      } else if (!(s.is_name(j) || t == "," || t == "." || t == "?" || t == "&" || t == "[" || t == "]" ||
                   t == "extends" || t == "super" || (s.kind(j) == LexKind::keyword && is_primitive_type(t)))) {
        return npos;
      }
    }
    if (j >= s.size()) return npos;
    ++j;
  }
  while (s.text(j) == "[" && s.text(j + 1) == "]") j += 2;
  return j;
}

std::vector<std::string> find_declarations(const Sig& s) {
  std::vector<std::string> names;
  std::set<std::string, std::less<>> seen;
  auto add = [&](std::string_view n) {
    if (seen.insert(std::string(n)).second) names.emplace_back(n);
  };
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto t = s.text(i);
    if (t == "->") {
      if (i > 0 && s.is_name(i - 1)) {
        add(s.text(i - 1));
      } else if (i > 0 && s.text(i - 1) == ")") {
        // (a, b) -> ...
        std::size_t k = i - 1;
        std::vector<std::string_view> params;
        bool ok = true;
        bool want_name = true;
        while (k > 0) {
          --k;
          const auto u = s.text(k);
          if (u == "(") break;
          const bool fits = want_name ? s.is_name(k) : u == ",";
          if (!fits) {
            ok = false;  // typed parameters are handled as declarations
            break;
          }
          if (want_name) params.push_back(u);
          want_name = !want_name;
        }
        if (ok && s.text(k) == "(") {
          for (auto it = params.rbegin(); it != params.rend(); ++it) add(*it);
        }
      }
      continue;
    }
    if (i > 0 && (s.text(i - 1) == "." || s.text(i - 1) == "::" || s.text(i - 1) == "@")) continue;
    const auto end = parse_type(s, i);
    if (end == std::string_view::npos || !s.is_name(end)) continue;
    const auto follow = s.text(end + 1);
    if (follow == "=" || follow == ";" || follow == "," || follow == ":" || follow == ")") add(s.text(end));
  }
  return names;
}

bool standalone(const Sig& s, std::size_t i) {
  if (!s.is_name(i)) return false;
  if (i > 0) {
    const auto prev = s.text(i - 1);
    if (prev == "." || prev == "::" || prev == "@") return false;
  }
  if (s.text(i + 1) == "(") return false;
  if (s.is_name(i + 1)) return false;  // type position: `Name other`
  return true;
}

std::string letters(std::size_t n) {
  std::string out;
  do {
    out.insert(out.begin(), static_cast<char>('A' + n % 26));
    n = n / 26;
  } while (n-- > 0);
  return out;
}

// Index of the lexeme for the method body's opening brace, or npos.
std::size_t body_brace(const Sig& s) {
  std::size_t first = std::string_view::npos;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s.text(i) != "{") continue;
    if (first == std::string_view::npos) first = i;
    if (i == 0) continue;
    std::size_t j = i - 1;
    if (s.text(j) == ")") return i;
    // ") throws A, b.C {"
    while (j > 0 && (s.is_name(j) || s.text(j) == "," || s.text(j) == ".")) --j;
    if (s.text(j) == "throws" && j > 0 && s.text(j - 1) == ")") return i;
  }
  return first;
}

std::string insert_after_body_brace(std::string_view source, std::string_view block) {
  const Sig s(source);
  const auto b = body_brace(s);
  if (b == std::string_view::npos) throw InputError("no method body found");
  const std::size_t at = s.lex[s.idx[b]].end;
  std::string out(source.substr(0, at));
  out += block;
  out += source.substr(at);
  return out;
}

std::string capitalize(std::string_view w) {
  std::string s(w);
  if (!s.empty() && s[0] >= 'a' && s[0] <= 'z') s[0] = static_cast<char>(s[0] - 'a' + 'A');
  return s;
}

// Mined tokens are lowercase; restore the usual Java spelling for display.
std::string spell(std::string_view token) {
  static const std::map<std::string_view, std::string_view> known = {
      {"thread.sleep", "Thread.sleep"},
      {"timeunit.seconds", "TimeUnit.SECONDS"},
      {"system.currenttimemillis", "System.currentTimeMillis"},
      {"system.nanotime", "System.nanoTime"},
      {"countdownlatch", "CountDownLatch"},
      {"cyclicbarrier", "CyclicBarrier"},
      {"executorservice", "ExecutorService"},
      {"completablefuture", "CompletableFuture"},
      {"atomicinteger", "AtomicInteger"},
      {"hashmap", "HashMap"},
      {"hashset", "HashSet"},
  };
  if (auto it = known.find(token); it != known.end()) return std::string(it->second);
  const auto dot = token.find('.');
  if (dot == std::string_view::npos) return std::string(token);
  return capitalize(token.substr(0, dot)) + std::string(token.substr(dot));
}

std::string guard_open(GuardStyle g) {
  switch (g) {
    case GuardStyle::if_false: return "if (false) {";
    case GuardStyle::catch_never: return "try { } catch (RuntimeException neverThrown) {";
    case GuardStyle::while_false: return "while (false) {";
  }
  return "";
}

std::vector<std::string> draw_decoys(const std::vector<std::string>& pool, std::size_t n, Rng& rng) {
  if (pool.empty()) throw ContractError("empty decoy pool");
  std::vector<std::string> shuffled = pool;
  rng.shuffle(shuffled);
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(shuffled[i % shuffled.size()]);
  return out;
}

const std::vector<std::string> kDefaultTrainDecoys = {
    "thread.sleep", "countdownlatch", "executorservice", "system.currenttimemillis", "hashmap", "repository.save",
    "await"};
const std::vector<std::string> kDefaultStressDecoys = {
    "timeunit.seconds", "cyclicbarrier", "semaphore", "system.nanotime", "hashset", "database.delete", "future"};

}  // namespace

std::vector<std::string> declared_variables(std::string_view source) { return find_declarations(Sig(source)); }

std::size_t count_standalone(std::string_view source, std::string_view name) {
  const Sig s(source);
  std::size_t n = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (s.text(i) == name && standalone(s, i)) ++n;
  return n;
}

RenameResult rename_variables(std::string_view source, std::uint64_t seed, RenameScheme scheme) {
  const Sig s(source);
  const auto decls = find_declarations(s);
  std::set<std::string, std::less<>> taken;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (s.kind(i) == LexKind::identifier) taken.emplace(s.text(i));

  Rng rng(seed);
  std::size_t var_k = 0, t_k = 1, s_k = 1, val_k = 0;
  RenameResult r;
  std::map<std::string, std::string, std::less<>> map;
  for (const auto& name : decls) {
    std::string fresh;
    do {
      if (scheme == RenameScheme::training) {
        fresh = "VAR_" + std::to_string(var_k++);
      } else {
        switch (rng.below(3)) {
          case 0: fresh = "_t" + std::to_string(t_k++); break;
          case 1: fresh = "_s" + std::to_string(s_k++); break;
          default: fresh = "_val" + letters(val_k++); break;
        }
      }
    } while (taken.count(fresh));
    taken.insert(fresh);
    map.emplace(name, fresh);
    r.map.emplace_back(name, fresh);
  }

  std::string out;
  out.reserve(source.size() + 8 * decls.size());
  std::size_t k = 0;  // position in s.idx
  for (std::size_t i = 0; i < s.lex.size(); ++i) {
    const auto text = s.lex[i].text(source);
    if (k < s.size() && s.idx[k] == i) {
      if (auto it = map.find(text); it != map.end() && standalone(s, k)) {
        out += it->second;
      } else {
        out += text;
      }
      ++k;
    } else {
      out += text;
    }
  }
  r.source = std::move(out);
  return r;
}

std::string decoy_statement(std::string_view token) {
  if (token.find('.') != std::string_view::npos) return spell(token) + "(100);";
  return spell(token) + "();";
}

std::string inject_dead_code(std::string_view source, GuardStyle guard, const std::vector<std::string>& decoys,
                             std::uint64_t seed) {
  Rng rng(seed);
  const auto n = static_cast<std::size_t>(rng.between(2, 5));
  std::string block(kAugBegin);
  block += "\n    ";
  block += guard_open(guard);
  for (const auto& d : draw_decoys(decoys, n, rng)) {
    block += "\n      ";
    block += decoy_statement(d);
  }
  block += "\n    }\n    ";
  block += kAugEnd;
  return insert_after_body_brace(source, block);
}

std::string inject_decoy_comments(std::string_view source, const std::vector<std::string>& decoys,
                                  GuardStyle print_guard, std::uint64_t seed) {
  static const std::vector<std::string> topics = {"timing", "ordering", "race", "wait", "shared state"};
  Rng rng(seed);
  const auto n = static_cast<std::size_t>(rng.between(1, 3));
  const auto picked = draw_decoys(decoys, n, rng);
  std::string block(kAugBegin);
  for (const auto& d : picked) {
    block += "\n    // decoy: ";
    block += spell(d);
    block += ' ';
    block += rng.pick(topics);
  }
  if (rng.bernoulli(0.5)) {
    block += "\n    ";
    block += guard_open(print_guard);
    block += " System.out.println(\"";
    block += spell(picked.front());
    block += "\"); }";
  }
  block += "\n    ";
  block += kAugEnd;
  // Comments only need a place to live; without a body they go at the end.
  const Sig s(source);
  if (body_brace(s) == std::string_view::npos) return std::string(source) + "\n" + block;
  return insert_after_body_brace(source, block);
}

std::string strip_augmentation(std::string_view source) {
  std::string out(source);
  std::size_t pos = 0;
  while ((pos = out.find(kAugBegin, pos)) != std::string::npos) {
    const auto end = out.find(kAugEnd, pos + kAugBegin.size());
    if (end == std::string::npos) break;
    out.erase(pos, end + kAugEnd.size() - pos);
  }
  return out;
}

bool injected_code_is_guarded(std::string_view source) {
  std::size_t pos = 0;
  while ((pos = source.find(kAugBegin, pos)) != std::string_view::npos) {
    const auto begin = pos + kAugBegin.size();
    const auto end = source.find(kAugEnd, begin);
    if (end == std::string_view::npos) return false;
    const Sig s(source.substr(begin, end - begin));
    auto seq = [&](std::size_t i, std::initializer_list<std::string_view> want) {
      for (auto w : want) {
        if (s.text(i++) != w) return false;
      }
      return true;
    };
    std::size_t i = 0;
    while (i < s.size()) {
      std::size_t body = 0;
      if (seq(i, {"if", "(", "false", ")", "{"}) || seq(i, {"while", "(", "false", ")", "{"})) {
        body = i + 5;
      } else if (seq(i, {"try", "{", "}", "catch", "("}) && s.is_name(i + 5) && s.is_name(i + 6) &&
                 seq(i + 7, {")", "{"})) {
        body = i + 9;
      } else {
        return false;
      }
      int depth = 1;
      for (i = body; i < s.size() && depth > 0; ++i) {
        if (s.text(i) == "{") ++depth;
        if (s.text(i) == "}") --depth;
      }
      if (depth != 0) return false;
    }
    pos = end + kAugEnd.size();
  }
  return true;
}

void AugmentationPolicy::validate() const {
  if (!(p_base >= 0.0 && p_base <= 1.0)) throw InputError("p_base must be in [0, 1]");
  if (!(p_rare >= 0.0 && p_rare <= 1.0)) throw InputError("p_rare must be in [0, 1]");
  if (train_guards.empty() || stress_guards.empty()) throw InputError("guard style sets must be non-empty");
  for (auto g : train_guards)
    if (std::find(stress_guards.begin(), stress_guards.end(), g) != stress_guards.end())
      throw InputError("guard style '" + std::string(render(g)) + "' is in both training and stress sets");
  const std::set<std::string> train(train_decoys.begin(), train_decoys.end());
  for (const auto& d : stress_decoys)
    if (train.count(d)) throw InputError("decoy '" + d + "' is in both training and stress pools");
}

AugmentationPolicy AugmentationPolicy::with_default_pools(std::uint64_t seed) {
  AugmentationPolicy p;
  p.train_decoys = kDefaultTrainDecoys;
  p.stress_decoys = kDefaultStressDecoys;
  p.seed = seed;
  return p;
}

AugmentationPolicy AugmentationPolicy::from_vocabulary(const SymbolicVocabulary& vocab, std::uint64_t seed) {
  AugmentationPolicy p;
  p.seed = seed;
  std::set<std::string> used;
  for (Category c : kFlakyCategories) {
    const auto& entries = vocab.of(c);
    for (std::size_t r = 0; r < entries.size(); ++r) {
      if (!used.insert(entries[r].token).second) continue;
      (r % 2 == 0 ? p.train_decoys : p.stress_decoys).push_back(entries[r].token);
    }
  }
  auto fill = [](std::vector<std::string>& pool, const std::vector<std::string>& defaults,
                 const std::vector<std::string>& other) {
    if (pool.size() >= 2) return;
    for (const auto& d : defaults)
      if (std::find(other.begin(), other.end(), d) == other.end() &&
          std::find(pool.begin(), pool.end(), d) == pool.end())
        pool.push_back(d);
  };
  fill(p.train_decoys, kDefaultTrainDecoys, p.stress_decoys);
  fill(p.stress_decoys, kDefaultStressDecoys, p.train_decoys);
  return p;
}

AugmentedTest augment_training(const TestCase& test, const AugmentationPolicy& policy, std::uint64_t seed) {
  AugmentedTest out;
  out.test = test;
  out.renamed_source = test.source;
  Rng rng(seed);
  const double p = is_flaky(test.label) ? policy.p_rare : policy.p_base;
  if (!rng.bernoulli(p)) return out;
  const auto subset = static_cast<unsigned>(rng.between(1, 7));
  std::string src = test.source;
  if (subset & 1u) {
    auto r = rename_variables(src, rng.next(), RenameScheme::training);
    src = std::move(r.source);
    out.rename_map = std::move(r.map);
    out.applied.push_back(Transform::rename);
  }
  out.renamed_source = src;
  if (subset & 2u) {
    const auto guard = rng.pick(policy.train_guards);
    const auto s = rng.next();
    try {
      src = inject_dead_code(src, guard, policy.train_decoys, s);
      out.applied.push_back(Transform::deadcode);
    } catch (const InputError&) {
      // no method body: nothing to guard
    }
  }
  if (subset & 4u) {
    const auto guard = rng.pick(policy.train_guards);
    src = inject_decoy_comments(src, policy.train_decoys, guard, rng.next());
    out.applied.push_back(Transform::decoy);
  }
  out.test.source = std::move(src);
  return out;
}

PerturbedTest perturb_for_stress(const TestCase& test, StressMode mode, const AugmentationPolicy& policy) {
  Rng rng(derive_seed(policy.seed, test.id, static_cast<std::uint64_t>(mode)));
  PerturbedTest out;
  out.original_id = test.id;
  out.test = test;
  if (mode == StressMode::rename || mode == StressMode::both) {
    auto r = rename_variables(out.test.source, rng.next(), RenameScheme::stress);
    out.test.source = std::move(r.source);
    out.rename_map = std::move(r.map);
    out.applied.push_back(Transform::rename);
  }
  if (mode == StressMode::deadcode || mode == StressMode::both) {
    const auto guard = rng.pick(policy.stress_guards);
    const auto s = rng.next();
    try {
      out.test.source = inject_dead_code(out.test.source, guard, policy.stress_decoys, s);
      out.applied.push_back(Transform::deadcode);
    } catch (const InputError&) {
    }
  }
  return out;
}

std::string perturbation_sidecar_json(const std::vector<PerturbedTest>& tests, StressMode mode) {
  nlohmann::ordered_json j;
  j["version"] = 1;
  j["mode"] = std::string(render(mode));
  auto arr = nlohmann::ordered_json::array();
  for (const auto& t : tests) {
    nlohmann::ordered_json e;
    e["id"] = t.original_id;
    auto applied = nlohmann::ordered_json::array();
    for (auto a : t.applied) applied.push_back(std::string(render(a)));
    e["applied"] = std::move(applied);
    nlohmann::ordered_json m = nlohmann::ordered_json::object();
    for (const auto& [from, to] : t.rename_map) m[from] = to;
    e["rename_map"] = std::move(m);
    arr.push_back(std::move(e));
  }
  j["tests"] = std::move(arr);
  return j.dump(2) + "\n";
}

}  // namespace flaky
