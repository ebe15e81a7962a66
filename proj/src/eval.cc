#include "phonolid/eval.h"

#include <algorithm>
#include <cstdio>
#include <set>

#include "json.hpp"
#include "phonolid/error.h"

namespace phonolid {

AccuracySummary Summarize(const std::map<std::string, double>& per_language) {
  if (per_language.empty()) throw Error("cannot summarize an empty report");
  AccuracySummary s;
  s.min = s.max = per_language.begin()->second;
  double sum = 0.0;
  for (const auto& [lang, acc] : per_language) {
    s.min = std::min(s.min, acc);
    s.max = std::max(s.max, acc);
    sum += acc;
  }
  s.avg = sum / static_cast<double>(per_language.size());
  // Rounding in the mean must not push it outside [min, max].
  s.avg = std::clamp(s.avg, s.min, s.max);
  return s;
}

EvalReport ReportFromDecisions(const std::string& system_label,
                               std::span<const Decision> decisions,
                               std::span<const std::string> languages) {
  std::map<std::string, size_t> total, correct;
  for (const std::string& lang : languages) total[lang] = correct[lang] = 0;
  for (const Decision& d : decisions) {
    auto it = total.find(d.truth);
    if (it == total.end())
      throw Error("decision for unknown language '" + d.truth + "'");
    ++it->second;
    if (d.decision == d.truth) ++correct[d.truth];
  }
  EvalReport report;
  report.system_label = system_label;
  for (const auto& [lang, n] : total) {
    if (n == 0) throw Error("language '" + lang + "' has no test utterances");
    report.per_language[lang] =
        100.0 * static_cast<double>(correct[lang]) / static_cast<double>(n);
    report.n_test[lang] = n;
  }
  report.summary = Summarize(report.per_language);
  return report;
}

EvalRun EvaluateBank(const ModelBank& bank,
                     const std::map<std::string, std::vector<Utterance>>& test,
                     const ScoreOptions& options,
                     const std::string& system_label) {
  std::vector<std::string> languages;
  for (const auto& [lang, entry] : bank.entries) {
    auto it = test.find(lang);
    if (it == test.end() || it->second.empty())
      throw Error("language '" + lang + "' has no test utterances");
    languages.push_back(lang);
  }
  EvalRun run;
  for (const auto& [lang, utts] : test) {
    if (!bank.entries.count(lang))
      throw Error("test language '" + lang + "' is not in the bank");
    for (const Utterance& u : utts) {
      ClassificationResult r = Classify(bank, u, options);
      run.decisions.push_back({u.source_id, lang, r.decision});
    }
  }
  run.report = ReportFromDecisions(system_label, run.decisions, languages);
  return run;
}

std::map<std::string, std::vector<Utterance>> TestSets(const CorpusSplits& splits) {
  std::map<std::string, std::vector<Utterance>> out;
  for (const auto& [lang, split] : splits) out[lang] = split.test;
  return out;
}

Comparison CompareSystems(std::vector<EvalReport> reports) {
  if (reports.empty()) throw Error("no reports to compare");
  auto languages = [](const EvalReport& r) {
    std::set<std::string> s;
    for (const auto& [lang, acc] : r.per_language) s.insert(lang);
    return s;
  };
  const auto reference = languages(reports.front());
  for (const EvalReport& r : reports)
    if (languages(r) != reference)
      throw Error("report '" + r.system_label +
                  "' covers a different language set than '" +
                  reports.front().system_label + "'");
  std::stable_sort(reports.begin(), reports.end(),
                   [](const EvalReport& a, const EvalReport& b) {
                     if (a.summary.avg != b.summary.avg)
                       return a.summary.avg > b.summary.avg;
                     return a.system_label < b.system_label;
                   });
  Comparison c;
  c.best = reports.front().system_label;
  c.rows = std::move(reports);
  return c;
}

void WriteTable(const Comparison& comparison, std::ostream& out) {
  size_t width = std::string("System").size();
  for (const EvalReport& r : comparison.rows)
    width = std::max(width, r.system_label.size());
  auto pad = [&](const std::string& s) {
    return s + std::string(width - s.size(), ' ');
  };
  out << pad("System") << " | Min    | Max    | Avg Accuracy\n";
  out << std::string(width, '-') << "-+--------+--------+-------------\n";
  char buf[96];
  for (const EvalReport& r : comparison.rows) {
    std::snprintf(buf, sizeof(buf), " | %6.2f | %6.2f | %6.2f", r.summary.min,
                  r.summary.max, r.summary.avg);
    out << pad(r.system_label) << buf;
    if (r.system_label == comparison.best) out << "  (best)";
    out << '\n';
  }
}

void WriteReportRecords(const Comparison& comparison, std::ostream& out) {
  for (const EvalReport& r : comparison.rows) {
    nlohmann::json rec;
    rec["system"] = r.system_label;
    rec["min"] = r.summary.min;
    rec["max"] = r.summary.max;
    rec["avg"] = r.summary.avg;
    rec["best"] = r.system_label == comparison.best;
    rec["per_language"] = r.per_language;
    rec["n_test"] = r.n_test;
    out << rec.dump() << '\n';
  }
}

}  // namespace phonolid
