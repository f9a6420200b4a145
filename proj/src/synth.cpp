#include "flaky/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "flaky/error.hpp"
#include "flaky/rng.hpp"

namespace flaky {

namespace {

const std::vector<std::string>& filler_pool() {
  static const std::vector<std::string> pool = {
      "List<String> items = new ArrayList<>();",
      "items.add(input);",
      "int total = items.size();",
      "assertEquals(1, total);",
      "Object result = service.process(input);",
      "assertNotNull(result);",
      "config.setName(input);",
      "String name = config.getName();",
      "builder.append(name);",
      "assertTrue(total > 0);",
  };
  return pool;
}

const std::vector<std::string>& name_words() {
  static const std::vector<std::string> words = {
      "Parse", "Load", "Render", "Update", "Create", "Remove", "Merge", "Format", "Check", "Build",
      "Order", "Invoice", "Account", "Report", "Profile", "Payload", "Header", "Record", "Token", "Entry",
  };
  return words;
}

std::string render_test(const std::string& method, const std::vector<std::string>& statements) {
  std::string s = "@Test\npublic void " + method + "() throws Exception {\n";
  for (const auto& st : statements) s += "    " + st + "\n";
  s += "}\n";
  return s;
}

}  // namespace

void SynthSpec::validate() const {
  if (projects < 1) throw InputError("synth: projects must be at least 1");
  if (tests < projects) throw InputError("synth: need at least one test per project");
  auto unit = [](double x) { return x >= 0.0 && x <= 1.0; };
  if (!unit(flaky_fraction)) throw InputError("synth: flaky_fraction must be in [0, 1]");
  if (!unit(q_signal) || !unit(q_noise)) throw InputError("synth: q_signal and q_noise must be in [0, 1]");
}

SynthSpec SynthSpec::benchmark_scaled(double scale, std::uint64_t seed) {
  if (!(scale > 0.0)) throw InputError("synth: scale must be positive");
  SynthSpec s;
  s.tests = static_cast<int>(std::lround(8574.0 * scale));
  s.projects = std::min(40, s.tests);
  s.flaky_fraction = 280.0 / 8574.0;
  s.seed = seed;
  return s;
}

std::array<std::size_t, kNumCategories> synth_category_counts(const SynthSpec& spec) {
  spec.validate();
  const auto flaky = static_cast<std::size_t>(std::llround(spec.tests * spec.flaky_fraction));
  std::array<std::size_t, kNumCategories> counts{};
  for (std::size_t i = 0; i < kFlakyCategories.size(); ++i)
    counts[index_of(kFlakyCategories[i])] = flaky / 5 + (i < flaky % 5 ? 1 : 0);
  counts[index_of(Category::non_flaky)] = static_cast<std::size_t>(spec.tests) - flaky;
  return counts;
}

const std::vector<std::string>& planted_statements(Category c) {
  static const std::array<std::vector<std::string>, kNumCategories> table = {{
      {"Thread.sleep(200);", "future.get();", "Awaitility.await();"},
      {"executorService.shutdown();", "semaphore.acquire();", "lock.unlock();"},
      {"System.nanoTime();", "stopwatch.elapsed();", "clock.millis();"},
      {"json.keys();", "set.iterator();", "map.keySet();"},
      {"repository.save();", "database.delete();", "fileSystem.reset();"},
      {},
  }};
  return table[index_of(c)];
}

std::set<std::string> planted_tokens(Category c) {
  std::set<std::string> filler;
  for (const auto& st : filler_pool())
    for (auto& t : tokenize(st)) filler.insert(std::move(t));
  filler.insert("input");
  std::set<std::string> out;
  for (const auto& st : planted_statements(c))
    for (auto& t : tokenize(st))
      if (!filler.count(t)) out.insert(std::move(t));
  return out;
}

Corpus generate_corpus(const SynthSpec& spec) {
  const auto counts = synth_category_counts(spec);
  Rng rng(derive_seed(spec.seed, "synth"));

  std::vector<int> perm(static_cast<std::size_t>(spec.projects));
  for (int p = 0; p < spec.projects; ++p) perm[static_cast<std::size_t>(p)] = p;
  rng.shuffle(perm);

  // Labels in slot order: flaky categories in enum order, then non-flaky.
  // Slot s lands in project perm[s mod P], so each category spreads over as
  // many projects as it has tests.
  std::vector<Category> slots;
  for (Category c : kAllCategories) slots.insert(slots.end(), counts[index_of(c)], c);

  std::vector<TestCase> tests;
  tests.reserve(slots.size());
  for (std::size_t s = 0; s < slots.size(); ++s) {
    const Category label = slots[s];
    const int project = perm[s % perm.size()];

    std::vector<std::string> body;
    body.push_back("String input = \"sample\";");
    auto filler = filler_pool();
    rng.shuffle(filler);
    filler.resize(static_cast<std::size_t>(rng.between(3, 6)));
    body.insert(body.end(), filler.begin(), filler.end());

    // A noisy non-flaky test carries the same draw a flaky test would, for
    // every flaky category at once, so each trigger's presence rate is
    // q_noise there and q_signal in its own category.
    std::vector<std::string> planted;
    auto draw = [&](Category c) {
      auto st = planted_statements(c);
      rng.shuffle(st);
      st.resize(static_cast<std::size_t>(rng.between(2, 3)));
      planted.insert(planted.end(), st.begin(), st.end());
    };
    if (is_flaky(label)) {
      if (rng.bernoulli(spec.q_signal)) draw(label);
    } else if (rng.bernoulli(spec.q_noise)) {
      for (Category c : kFlakyCategories) draw(c);
    }
    for (const auto& st : planted) {
      const auto at = 1 + rng.below(body.size());
      body.insert(body.begin() + static_cast<std::ptrdiff_t>(at), st);
    }

    const auto& words = name_words();
    const std::string method = "test" + rng.pick(words) + rng.pick(words);
    char pid[32], tid[32];
    std::snprintf(pid, sizeof pid, "proj-%03d", project);
    std::snprintf(tid, sizeof tid, "%05zu", s);
    tests.push_back({std::string(pid) + "::" + tid, pid, render_test(method, body), label});
  }
  // Interleave categories so file order carries no label information.
  std::sort(tests.begin(), tests.end(), [](const TestCase& a, const TestCase& b) {
    if (a.project != b.project) return a.project < b.project;
    return a.id < b.id;
  });
  return Corpus(std::move(tests));
}

}  // namespace flaky
