#include "flaky/eval.hpp"

#include <cstdio>
#include <sstream>

#include "flaky/error.hpp"
#include "flaky/io.hpp"
#include "flaky/symbolic.hpp"

namespace flaky {

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t n = 0;
  for (const auto& row : m)
    for (auto x : row) n += x;
  return n;
}

std::uint64_t ConfusionMatrix::row_sum(Category actual) const {
  std::uint64_t n = 0;
  for (auto x : m[index_of(actual)]) n += x;
  return n;
}

std::uint64_t ConfusionMatrix::col_sum(Category predicted) const {
  std::uint64_t n = 0;
  for (const auto& row : m) n += row[index_of(predicted)];
  return n;
}

ConfusionMatrix confusion(const std::vector<Category>& predictions, const std::vector<Category>& labels) {
  if (predictions.size() != labels.size())
    throw InputError("predictions and labels differ in length (" + std::to_string(predictions.size()) + " vs " +
                     std::to_string(labels.size()) + ")");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < labels.size(); ++i) ++cm.m[index_of(labels[i])][index_of(predictions[i])];
  return cm;
}

MetricsReport metrics_from_confusion(const ConfusionMatrix& cm) {
  MetricsReport r;
  r.n = cm.total();
  double sum = 0.0;
  for (Category c : kAllCategories) {
    const auto tp = static_cast<double>(cm.at(c, c));
    const auto fp = static_cast<double>(cm.col_sum(c)) - tp;
    const auto fn = static_cast<double>(cm.row_sum(c)) - tp;
    auto& k = r.per_class[index_of(c)];
    k.support = cm.row_sum(c);
    k.precision = tp + fp > 0.0 ? 100.0 * tp / (tp + fp) : 0.0;
    k.recall = tp + fn > 0.0 ? 100.0 * tp / (tp + fn) : 0.0;
    // 2PR/(P+R) written over counts; 0 whenever tp = 0
    k.f1 = tp > 0.0 ? 100.0 * (2.0 * tp) / (2.0 * tp + fp + fn) : 0.0;
    sum += k.f1;
  }
  r.macro_f1 = sum / static_cast<double>(kNumCategories);
  return r;
}

MetricsReport f1_scores(const std::vector<Category>& predictions, const std::vector<Category>& labels) {
  return metrics_from_confusion(confusion(predictions, labels));
}

RobustnessReport robustness_drops(const MetricsReport& clean, const std::map<StressMode, MetricsReport>& perturbed,
                                  const std::vector<StressMode>& modes) {
  RobustnessReport r;
  r.clean = clean;
  for (StressMode mode : modes) {
    auto it = perturbed.find(mode);
    if (it == perturbed.end()) throw InputError("no perturbed metrics for mode '" + std::string(render(mode)) + "'");
    r.perturbed[mode] = it->second;
    std::array<double, kNumCategories> d{};
    double sum = 0.0;
    for (std::size_t i = 0; i < kNumCategories; ++i) {
      d[i] = clean.per_class[i].f1 - it->second.per_class[i].f1;
      sum += d[i];
    }
    r.drops[mode] = d;
    r.average_drop[mode] = sum / static_cast<double>(kNumCategories);
  }
  return r;
}

std::vector<Category> predict_corpus(const Checkpoint& ckpt, const Corpus& corpus, kernels::Exec exec) {
  std::vector<ExampleInput> inputs;
  inputs.reserve(corpus.size());
  for (const auto& t : corpus.tests()) inputs.push_back(prepare_input(t, ckpt));
  const auto logits = kernels::batch_forward(ckpt.state, inputs, exec);
  std::vector<Category> out;
  out.reserve(logits.size());
  for (const auto& l : logits) out.push_back(predict(l));
  return out;
}

StressOutcome stress_evaluate(const Checkpoint& ckpt, const Corpus& tests, const AugmentationPolicy& policy,
                              const std::vector<StressMode>& modes, kernels::Exec exec) {
  StressOutcome out;
  std::vector<Category> labels;
  for (const auto& t : tests.tests()) labels.push_back(t.label);
  out.clean = predict_corpus(ckpt, tests, exec);
  const auto clean_metrics = f1_scores(out.clean, labels);
  std::map<StressMode, MetricsReport> perturbed;
  for (StressMode mode : modes) {
    std::vector<TestCase> changed;
    changed.reserve(tests.size());
    for (const auto& t : tests.tests()) changed.push_back(perturb_for_stress(t, mode, policy).test);
    auto preds = predict_corpus(ckpt, Corpus(std::move(changed)), exec);
    perturbed[mode] = f1_scores(preds, labels);
    out.predictions[mode] = std::move(preds);
  }
  out.report = robustness_drops(clean_metrics, perturbed, modes);
  return out;
}

nlohmann::ordered_json metrics_to_json(const MetricsReport& m) {
  nlohmann::ordered_json per = nlohmann::ordered_json::object();
  for (Category c : kAllCategories) {
    const auto& k = m.of(c);
    per[std::string(render(c))] = {
        {"precision", k.precision}, {"recall", k.recall}, {"f1", k.f1}, {"support", k.support}};
  }
  return {{"per_class", std::move(per)}, {"macro_f1", m.macro_f1}, {"n", m.n}};
}

nlohmann::ordered_json confusion_to_json(const ConfusionMatrix& cm) {
  auto rows = nlohmann::ordered_json::array();
  for (const auto& row : cm.m) rows.push_back(row);
  return rows;
}

namespace {

std::string fixed2(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", x);
  // "-0.00" reads badly in a table
  if (std::string_view(buf) == "-0.00") return "0.00";
  return buf;
}

std::vector<std::string> report_modes(const nlohmann::ordered_json& report) {
  std::vector<std::string> modes;
  if (report.contains("pooled") && report["pooled"].contains("stress"))
    for (const auto& [k, _] : report["pooled"]["stress"].items()) modes.push_back(k);
  return modes;
}

std::string setting_name(std::string_view mode) {
  std::string s(mode);
  if (!s.empty()) s[0] = static_cast<char>(s[0] - 'a' + 'A');
  return s;
}

std::vector<double> f1_row(const nlohmann::ordered_json& metrics) {
  std::vector<double> row;
  for (Category c : kAllCategories) row.push_back(metrics.at("per_class").at(std::string(render(c))).at("f1"));
  row.push_back(metrics.at("macro_f1"));
  return row;
}

}  // namespace

std::string render_f1_csv(const nlohmann::ordered_json& report) {
  std::ostringstream out;
  out << "setting";
  for (Category c : kAllCategories) out << ',' << short_name(c);
  out << ",Macro Avg.\n";
  auto line = [&](const std::string& name, const nlohmann::ordered_json& m) {
    out << name;
    for (double x : f1_row(m)) out << ',' << fixed2(x);
    out << '\n';
  };
  const auto& pooled = report.at("pooled");
  line("clean", pooled.at("clean"));
  for (const auto& mode : report_modes(report)) line(mode, pooled.at("stress").at(mode));
  return out.str();
}

std::string render_drops_csv(const nlohmann::ordered_json& report) {
  std::ostringstream out;
  out << "mode,category,clean_f1,perturbed_f1,drop\n";
  const auto& pooled = report.at("pooled");
  const auto clean = f1_row(pooled.at("clean"));
  for (const auto& mode : report_modes(report)) {
    const auto pert = f1_row(pooled.at("stress").at(mode));
    const auto& drops = pooled.at("drops").at(mode);
    for (std::size_t i = 0; i < kNumCategories; ++i) {
      const auto key = std::string(render(kAllCategories[i]));
      out << mode << ',' << key << ',' << fixed2(clean[i]) << ',' << fixed2(pert[i]) << ','
          << fixed2(drops.at("per_class").at(key).get<double>()) << '\n';
    }
    out << mode << ",average," << fixed2(clean[kNumCategories]) << ',' << fixed2(pert[kNumCategories]) << ','
        << fixed2(drops.at("average").get<double>()) << '\n';
  }
  return out.str();
}

std::string render_token_rank_csv(const nlohmann::ordered_json& report) {
  std::ostringstream out;
  out.precision(17);
  out << "category,rank,token,chi2\n";
  for (const auto& e : report.at("token_ranking"))
    out << e.at("category").get<std::string>() << ',' << e.at("rank").get<int>() << ','
        << e.at("token").get<std::string>() << ',' << e.at("chi2").get<double>() << '\n';
  return out.str();
}

std::string render_token_groups_csv(const nlohmann::ordered_json& report) {
  std::ostringstream out;
  out.precision(17);
  out << "group,category,tests_with_group,category_tests,fraction\n";
  for (const auto& e : report.at("token_groups"))
    out << e.at("group").get<std::string>() << ',' << e.at("category").get<std::string>() << ','
        << e.at("tests_with_group").get<std::uint64_t>() << ',' << e.at("category_tests").get<std::uint64_t>()
        << ',' << e.at("fraction").get<double>() << '\n';
  return out.str();
}

std::string render_metrics_markdown(const nlohmann::ordered_json& report) {
  std::ostringstream out;
  const auto& pooled = report.at("pooled");
  out << "# Results\n\n";
  out << "Config hash `" << report.at("config_hash").get<std::string>() << "`, " << report.at("folds").size()
      << " folds, predictions pooled across folds.\n\n";

  auto header = [&](const char* first) {
    out << "| " << first << " |";
    for (Category c : kAllCategories) out << ' ' << short_name(c) << " |";
    out << " Macro Avg. |\n|---|";
    for (std::size_t i = 0; i <= kNumCategories; ++i) out << "---:|";
    out << '\n';
  };
  auto row = [&](const std::string& name, const std::vector<double>& values) {
    out << "| " << name << " |";
    for (double x : values) out << ' ' << fixed2(x) << " |";
    out << '\n';
  };

  out << "## F1 (%)\n\n";
  header("Setting");
  row("Clean", f1_row(pooled.at("clean")));
  for (const auto& mode : report_modes(report)) row(setting_name(mode), f1_row(pooled.at("stress").at(mode)));

  const auto modes = report_modes(report);
  if (!modes.empty()) {
    out << "\n## Drop under perturbation (pp)\n\n";
    header("Mode");
    for (const auto& mode : modes) {
      const auto& d = pooled.at("drops").at(mode);
      std::vector<double> values;
      for (Category c : kAllCategories) values.push_back(d.at("per_class").at(std::string(render(c))));
      values.push_back(d.at("average"));
      row(setting_name(mode), values);
    }
  }

  out << "\n## Per fold (clean)\n\n";
  header("Fold");
  for (const auto& f : report.at("folds")) row(std::to_string(f.at("fold").get<int>()), f1_row(f.at("clean")));

  out << "\n## Confusion matrix (clean, rows actual, columns predicted)\n\n|  |";
  for (Category c : kAllCategories) out << ' ' << short_name(c) << " |";
  out << "\n|---|";
  for (std::size_t i = 0; i < kNumCategories; ++i) out << "---:|";
  out << '\n';
  const auto& cm = pooled.at("confusion").at("clean");
  for (std::size_t r = 0; r < kNumCategories; ++r) {
    out << "| " << short_name(kAllCategories[r]) << " |";
    for (std::size_t c = 0; c < kNumCategories; ++c) out << ' ' << cm.at(r).at(c).get<std::uint64_t>() << " |";
    out << '\n';
  }
  return out.str();
}

nlohmann::ordered_json token_group_grid(const Corpus& corpus) {
  const auto& spec = FeatureGroupSpec::standard();
  std::vector<std::array<std::uint64_t, kNumCategories>> hits(spec.groups.size());
  for (const auto& t : corpus.tests()) {
    const auto tokens = tokenize(t.source);
    for (std::size_t g = 0; g < spec.groups.size(); ++g) {
      for (const auto& tok : tokens) {
        if (spec.matches(g, tok)) {
          ++hits[g][index_of(t.label)];
          break;
        }
      }
    }
  }
  auto out = nlohmann::ordered_json::array();
  for (std::size_t g = 0; g < spec.groups.size(); ++g) {
    for (Category c : kAllCategories) {
      const auto total = corpus.count(c);
      const auto h = hits[g][index_of(c)];
      out.push_back({{"group", spec.groups[g].name},
                     {"category", std::string(render(c))},
                     {"tests_with_group", h},
                     {"category_tests", total},
                     {"fraction", total ? static_cast<double>(h) / static_cast<double>(total) : 0.0}});
    }
  }
  return out;
}

void emit_report(const nlohmann::ordered_json& report, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec || !std::filesystem::is_directory(out_dir))
    throw InputError("cannot create output directory '" + out_dir.string() + "'");
  write_file_atomic(out_dir / "report.json", report.dump(2) + "\n");
  write_file_atomic(out_dir / "metrics.md", render_metrics_markdown(report));
  write_file_atomic(out_dir / "f1_table.csv", render_f1_csv(report));
  write_file_atomic(out_dir / "drops.csv", render_drops_csv(report));
  write_file_atomic(out_dir / "token_rank.csv", render_token_rank_csv(report));
  write_file_atomic(out_dir / "token_groups.csv", render_token_groups_csv(report));
}

}  // namespace flaky
