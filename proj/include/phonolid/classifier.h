#ifndef PHONOLID_CLASSIFIER_H_
#define PHONOLID_CLASSIFIER_H_

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "phonolid/corpus.h"
#include "phonolid/ngram.h"
#include "phonolid/rnnlm.h"

namespace phonolid {

struct BankEntry {
  std::optional<NgramModel> ngram;
  std::optional<RnnLm> rnn;
};

// Per-language models over one alphabet; languages in lexicographic order.
struct ModelBank {
  PhoneAlphabet alphabet;
  std::map<std::string, BankEntry> entries;
  // Free-form provenance (split spec, family settings, seeds).
  std::map<std::string, std::string> metadata;

  // Throws Error if the bank is empty, an entry has no model, or a model
  // uses a different alphabet.
  void Validate() const;
  bool HasNgram() const;
  bool HasRnn() const;
};

struct NgramFamily {
  int order = 3;
  SmoothingConfig smoothing;
};

struct RnnFamily {
  int hidden_size = 40;
  int n_classes = 6;
  TrainingConfig training;
};

struct FamilySpec {
  std::optional<NgramFamily> ngram;
  std::optional<RnnFamily> rnn;
};

struct BuildOptions {
  // Worker threads for per-language training; 0 picks the hardware count.
  unsigned threads = 0;
  // RNN training logs per language, filled when non-null.
  std::map<std::string, std::vector<EpochLog>>* rnn_logs = nullptr;
};

// Trains each requested family on each language's train split (RNN models
// also use the valid split). Languages are independent; errors are tagged
// with the language id.
ModelBank BuildBank(const PhoneAlphabet& alphabet, const CorpusSplits& splits,
                    const FamilySpec& family, const BuildOptions& options = {});

enum class ScoreKind {
  kNgramPerplexity,
  kRnnPerplexity,
  kFused,
};

std::string ScoreKindName(ScoreKind kind);  // "ngram_pp", "rnn_pp", "fused"
ScoreKind ParseScoreKind(const std::string& name);

struct ScoreOptions {
  ScoreKind kind = ScoreKind::kNgramPerplexity;
  double lambda = 0.5;  // n-gram weight, kFused only
  OovPolicy oov = OovPolicy::kStrict;
};

struct RankedLanguage {
  std::string language;
  double score = 0.0;
};

struct ClassificationResult {
  std::vector<RankedLanguage> ranked;  // ascending score, ties by id
  std::string decision;
  ScoreKind score_kind = ScoreKind::kNgramPerplexity;
};

// lambda ln(ngram_pp) + (1 - lambda) ln(rnn_pp); lower is better.
double FuseScores(double ngram_pp, double rnn_pp, double lambda);

// Perplexities of one utterance under both families (NaN where absent).
struct LanguageScores {
  double ngram_pp = 0.0;
  double rnn_pp = 0.0;
};
std::map<std::string, LanguageScores> ScoreAll(const ModelBank& bank,
                                               const Utterance& utt,
                                               const ScoreOptions& options);

// Sorts per-language scores ascending with lexicographic tie-breaking.
ClassificationResult RankScores(const std::map<std::string, double>& scores,
                                ScoreKind kind);

ClassificationResult Classify(const ModelBank& bank, const Utterance& utt,
                              const ScoreOptions& options);

// Prefix of Classify(...).ranked; n must be in [1, bank size].
std::vector<RankedLanguage> ClassifyNbest(const ModelBank& bank,
                                          const Utterance& utt,
                                          const ScoreOptions& options,
                                          size_t n);

struct LabeledUtterance {
  std::string language;
  Utterance utterance;
};

// Collects labeled utterances from one slice of every language's split.
enum class SplitPart { kTrain, kValid, kTest };
std::vector<LabeledUtterance> LabeledSlice(const CorpusSplits& splits,
                                           SplitPart part);

struct LambdaSweep {
  double best_lambda = 0.0;
  std::vector<std::pair<double, double>> accuracy;  // (lambda, percent)
};

// Fused-classification accuracy at each grid value; the best is the
// argmax, smallest lambda on ties.
LambdaSweep TuneLambda(const ModelBank& bank,
                       std::span<const LabeledUtterance> validation,
                       std::span<const double> grid,
                       OovPolicy oov = OovPolicy::kStrict);

// Bank manifest (manifest.json) plus one file per model under `dir`.
void SaveBank(const ModelBank& bank, const std::filesystem::path& dir);
ModelBank LoadBank(const std::filesystem::path& dir);

}  // namespace phonolid

#endif  // PHONOLID_CLASSIFIER_H_
