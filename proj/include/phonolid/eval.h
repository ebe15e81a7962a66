#ifndef PHONOLID_EVAL_H_
#define PHONOLID_EVAL_H_

#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "phonolid/classifier.h"

namespace phonolid {

struct AccuracySummary {
  double min = 0.0;
  double max = 0.0;
  double avg = 0.0;  // unweighted mean over languages
};

// Throws Error on an empty map.
AccuracySummary Summarize(const std::map<std::string, double>& per_language);

struct EvalReport {
  std::string system_label;
  std::map<std::string, double> per_language;  // percent correct
  AccuracySummary summary;
  std::map<std::string, size_t> n_test;  // test utterances per language
};

// One classified test utterance.
struct Decision {
  std::string utterance_id;
  std::string truth;
  std::string decision;
};

// Builds a report from a decision log; every language in `languages` must
// own at least one decision.
EvalReport ReportFromDecisions(const std::string& system_label,
                               std::span<const Decision> decisions,
                               std::span<const std::string> languages);

struct EvalRun {
  EvalReport report;
  std::vector<Decision> decisions;
};

// Classifies every test utterance; `test` maps each bank language to its
// held-out utterances.
EvalRun EvaluateBank(const ModelBank& bank,
                     const std::map<std::string, std::vector<Utterance>>& test,
                     const ScoreOptions& options,
                     const std::string& system_label);

// Test slices of a split, keyed by language.
std::map<std::string, std::vector<Utterance>> TestSets(const CorpusSplits& splits);

struct Comparison {
  std::vector<EvalReport> rows;  // avg descending, then label
  std::string best;
};

// Throws Error on an empty list or reports over different language sets.
Comparison CompareSystems(std::vector<EvalReport> reports);

// "System | Min | Max | Avg Accuracy" table, two decimals.
void WriteTable(const Comparison& comparison, std::ostream& out);
// One JSON object per system per line.
void WriteReportRecords(const Comparison& comparison, std::ostream& out);

}  // namespace phonolid

#endif  // PHONOLID_EVAL_H_
