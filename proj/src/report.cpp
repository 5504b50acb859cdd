#include <algorithm>
#include <map>

#include <fmt/format.h>

#include "ecgxai/error.hpp"
#include "ecgxai/harness.hpp"

namespace ecgxai {

using nlohmann::json;

namespace {

struct CaseValues {
  std::string case_id;
  double dice = 0.0;
  double iou = 0.0;
  double spearman = 0.0;
  std::optional<Label> diagnosis;
  std::optional<Label> prediction;
};

std::string config_key(const AlignConfig& c) { return c.representation + "|" + c.method + "|" + c.prep; }

// One entry per case in first-seen order; seeds are averaged.
std::vector<CaseValues> per_case(std::span<const PoolRow> rows) {
  std::vector<CaseValues> out;
  std::vector<std::size_t> counts;
  std::map<std::string, std::size_t> index;
  for (const auto& r : rows) {
    if (r.error) continue;
    auto [it, inserted] = index.emplace(r.result.case_id, out.size());
    if (inserted) {
      out.push_back({r.result.case_id, 0.0, 0.0, 0.0, r.diagnosis, r.prediction});
      counts.push_back(0);
    }
    auto& v = out[it->second];
    v.dice += r.result.dice;
    v.iou += r.result.iou;
    v.spearman += r.result.spearman;
    ++counts[it->second];
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double n = static_cast<double>(counts[i]);
    out[i].dice /= n;
    out[i].iou /= n;
    out[i].spearman /= n;
  }
  return out;
}

struct MetricCis {
  BootstrapCI dice;
  BootstrapCI iou;
  BootstrapCI spearman;
};

MetricCis summarize(const std::vector<CaseValues>& cases, std::size_t B, double alpha, std::uint64_t seed) {
  std::vector<double> d, i, s;
  for (const auto& c : cases) {
    d.push_back(c.dice);
    i.push_back(c.iou);
    s.push_back(c.spearman);
  }
  return {bca_bootstrap(d, B, alpha, seed), bca_bootstrap(i, B, alpha, seed), bca_bootstrap(s, B, alpha, seed)};
}

StratumSummary make_stratum(const std::string& representation, const std::string& axis, const std::string& name,
                            const std::vector<CaseValues>& members, std::size_t B, double alpha, std::uint64_t seed) {
  StratumSummary s{representation, axis, name, members.size(), members.size() < 2, {}, {}, {}};
  if (!members.empty()) {
    const auto cis = summarize(members, B, alpha, seed);
    s.dice = cis.dice;
    s.iou = cis.iou;
    s.spearman = cis.spearman;
  }
  return s;
}

const char* representation_label(const std::string& r) {
  if (r == "ecg12") return "12-Lead ECG";
  if (r == "cine_direct") return "CineECG (direct)";
  if (r == "cine_mapped") return "CineECG (mapped)";
  return "?";
}

}  // namespace

std::vector<StratumSummary> stratify(std::span<const PoolRow> rows, const std::string& representation,
                                     std::size_t B, double alpha, std::uint64_t seed) {
  const auto cases = per_case(rows);
  std::vector<CaseValues> normal, abnormal, agree, disagree;
  for (const auto& c : cases) {
    if (!c.diagnosis) throw Error(ErrorKind::MissingDiagnosis, "case " + c.case_id);
    if (!c.prediction) throw Error(ErrorKind::MissingPrediction, "case " + c.case_id);
    (*c.diagnosis == Label::Normal ? normal : abnormal).push_back(c);
    (*c.prediction == *c.diagnosis ? agree : disagree).push_back(c);
  }
  return {make_stratum(representation, "diagnosis", "Normal", normal, B, alpha, seed),
          make_stratum(representation, "diagnosis", "Abnormal", abnormal, B, alpha, seed),
          make_stratum(representation, "agreement", "agree", agree, B, alpha, seed),
          make_stratum(representation, "agreement", "disagree", disagree, B, alpha, seed)};
}

CohortReport build_report(std::span<const PoolRow> rows, std::size_t B, double alpha, std::uint64_t seed) {
  CohortReport report;
  report.B = B;
  report.alpha = alpha;
  report.seed = seed;

  std::vector<AlignConfig> order;
  std::map<std::string, std::vector<PoolRow>> by_config;
  for (const auto& r : rows) {
    if (r.error) {
      ++report.error_rows;
      continue;
    }
    const std::string key = config_key(r.result.config);
    auto [it, inserted] = by_config.try_emplace(key);
    if (inserted) order.push_back(r.result.config);
    it->second.push_back(r);
  }
  for (const auto& config : order) {
    const auto& config_rows = by_config.at(config_key(config));
    const auto cases = per_case(config_rows);
    const auto cis = summarize(cases, B, alpha, seed);
    report.configs.push_back({config, cases.size(), cis.dice, cis.iou, cis.spearman});
  }
  for (std::size_t i = 0; i < report.configs.size(); ++i) {
    const auto& rep = report.configs[i].config.representation;
    auto it = report.winners.find(rep);
    if (it == report.winners.end() || report.configs[i].dice.mean > report.configs[it->second].dice.mean) {
      report.winners[rep] = i;
    }
  }
  for (const char* rep : {"ecg12", "cine_direct", "cine_mapped"}) {
    auto won = report.winners.find(rep);
    if (won == report.winners.end()) continue;
    const std::size_t index = won->second;
    const auto& config_rows = by_config.at(config_key(report.configs[index].config));
    bool labelled = std::all_of(config_rows.begin(), config_rows.end(),
                                [](const PoolRow& r) { return r.diagnosis && r.prediction; });
    if (!labelled) continue;  // strata need both diagnosis and prediction
    auto strata = stratify(config_rows, rep, B, alpha, seed);
    report.strata.insert(report.strata.end(), strata.begin(), strata.end());
  }
  return report;
}

std::string format_ci(const BootstrapCI& ci) {
  return fmt::format("{:.2f} ({:.2f}–{:.2f})", ci.mean, ci.lo, ci.hi);
}

std::string emit_markdown(const CohortReport& report) {
  std::string out;
  const char* dash = "—";
  // Best cine representation against the 12-lead winner.
  std::optional<std::size_t> cine_best;
  for (const char* rep : {"cine_direct", "cine_mapped"}) {
    auto it = report.winners.find(rep);
    if (it == report.winners.end()) continue;
    if (!cine_best || report.configs[it->second].dice.mean > report.configs[*cine_best].dice.mean) {
      cine_best = it->second;
    }
  }
  auto metric_cells = [&](std::optional<std::size_t> index) {
    if (!index) return fmt::format("{0} | {0} | {0}", dash);
    const auto& c = report.configs[*index];
    return fmt::format("{} | {} | {}", format_ci(c.dice), format_ci(c.iou), format_ci(c.spearman));
  };
  std::optional<std::size_t> ecg_best;
  if (auto it = report.winners.find("ecg12"); it != report.winners.end()) ecg_best = it->second;

  out += "## Optimised alignment per modality\n\n";
  out += "| Modality | Dice Score | IoU Score | Spearman Cor. |\n";
  out += "|---|---|---|---|\n";
  out += fmt::format("| CineECG | {} |\n", metric_cells(cine_best));
  out += fmt::format("| 12-Lead ECG | {} |\n", metric_cells(ecg_best));

  out += "\n## Winning configuration per representation\n\n";
  out += "| Representation | Method | Prep | n | Dice Score | IoU Score | Spearman Cor. |\n";
  out += "|---|---|---|---|---|---|---|\n";
  for (const char* rep : {"ecg12", "cine_direct", "cine_mapped"}) {
    auto it = report.winners.find(rep);
    if (it == report.winners.end()) continue;
    const auto& c = report.configs[it->second];
    out += fmt::format("| {} | {} | {} | {} | {} |\n", representation_label(rep), c.config.method, c.config.prep, c.n,
                       metric_cells(it->second));
  }

  if (!report.strata.empty()) {
    out += "\n## Strata (winning configuration)\n\n";
    out += "| Representation | Stratum | n | Dice Score | IoU Score | Spearman Cor. |\n";
    out += "|---|---|---|---|---|---|\n";
    for (const auto& s : report.strata) {
      const std::string name = s.axis == "diagnosis" ? s.name : (s.name == "agree" ? "Agreement" : "Disagreement");
      const std::string flag = s.flagged ? " (n<2)" : "";
      if (!s.dice) {
        out += fmt::format("| {} | {}{} | 0 | {} | {} | {} |\n", representation_label(s.representation), name, flag,
                           dash, dash, dash);
      } else {
        out += fmt::format("| {} | {}{} | {} | {} | {} | {} |\n", representation_label(s.representation), name, flag,
                           s.n, format_ci(*s.dice), format_ci(*s.iou), format_ci(*s.spearman));
      }
    }
  }

  out += "\n## All configurations\n\n";
  out += "| Representation | Method | Prep | n | Dice Score | IoU Score | Spearman Cor. |\n";
  out += "|---|---|---|---|---|---|---|\n";
  for (std::size_t i = 0; i < report.configs.size(); ++i) {
    const auto& c = report.configs[i];
    out += fmt::format("| {} | {} | {} | {} | {} |\n", representation_label(c.config.representation), c.config.method,
                       c.config.prep, c.n, metric_cells(i));
  }
  out += fmt::format("\nBCa intervals, B = {}, alpha = {}. Error rows skipped: {}.\n", report.B, report.alpha,
                     report.error_rows);
  return out;
}

json emit_json(const CohortReport& report) {
  json configs = json::array();
  for (const auto& c : report.configs) {
    configs.push_back({{"representation", c.config.representation},
                       {"method", c.config.method},
                       {"prep", c.config.prep},
                       {"n", c.n},
                       {"dice", to_json(c.dice)},
                       {"iou", to_json(c.iou)},
                       {"spearman", to_json(c.spearman)}});
  }
  json winners = json::object();
  for (const auto& [rep, index] : report.winners) winners[rep] = index;
  json strata = json::array();
  for (const auto& s : report.strata) {
    json js = {{"representation", s.representation}, {"axis", s.axis}, {"name", s.name},
               {"n", s.n},                           {"flagged", s.flagged}};
    js["dice"] = s.dice ? to_json(*s.dice) : json(nullptr);
    js["iou"] = s.iou ? to_json(*s.iou) : json(nullptr);
    js["spearman"] = s.spearman ? to_json(*s.spearman) : json(nullptr);
    strata.push_back(std::move(js));
  }
  return {{"configs", std::move(configs)}, {"winners", std::move(winners)}, {"strata", std::move(strata)},
          {"B", report.B},                 {"alpha", report.alpha},         {"seed", report.seed},
          {"error_rows", report.error_rows}};
}

}  // namespace ecgxai
