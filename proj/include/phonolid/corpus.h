#ifndef PHONOLID_CORPUS_H_
#define PHONOLID_CORPUS_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "phonolid/alphabet.h"
#include "phonolid/random.h"

namespace phonolid {

// Utterances per language over one shared alphabet. Languages are kept in
// lexicographic order of their ids.
struct LabeledCorpus {
  PhoneAlphabet alphabet;
  std::map<std::string, std::vector<Utterance>> languages;

  size_t NumUtterances() const;
  bool operator==(const LabeledCorpus& other) const = default;
};

// Reads `<root>/<language-id>/utts.txt` for every subdirectory of `root`.
// If `<root>/alphabet.txt` exists it fixes the alphabet and its order;
// otherwise the alphabet is the sorted set of observed tokens. Utterance
// source ids are "<language>:<line>".
LabeledCorpus LoadCorpus(const std::filesystem::path& root,
                         OovPolicy oov = OovPolicy::kStrict);

// Writes the layout read by LoadCorpus, always including alphabet.txt.
void WriteCorpus(const LabeledCorpus& corpus,
                 const std::filesystem::path& root);

struct SplitSpec {
  size_t n_train = 330;
  size_t n_valid = 0;
  size_t n_test = 45;
  uint64_t seed = 1;

  // The two data protocols: n-gram models use 330/0/45, recurrent models
  // hold out 30 of the 330 development utterances for validation.
  static SplitSpec NgramProtocol(uint64_t seed = 1) { return {330, 0, 45, seed}; }
  static SplitSpec RnnProtocol(uint64_t seed = 1) { return {300, 30, 45, seed}; }
};

struct LanguageSplit {
  std::vector<Utterance> train;
  std::vector<Utterance> valid;
  std::vector<Utterance> test;
};

using CorpusSplits = std::map<std::string, LanguageSplit>;

// Shuffles each language with Rng(DeriveSeed(spec.seed, language_id)) and
// takes consecutive train/valid/test slices; surplus utterances are
// dropped. Throws Error listing every language that is too small.
CorpusSplits SplitCorpus(const LabeledCorpus& corpus, const SplitSpec& spec);

// Fixed-order Markov chain over phones, terminating at "</s>".
//
// A history is the `order` most recent symbols, oldest first, drawn from the
// phones and "<s>". Histories are numbered in base (V + 1) with the oldest
// symbol most significant, phone i as digit i and "<s>" as digit V. Each
// history owns a distribution over the V + 1 predictable outcomes indexed by
// token id (phones, then "</s>").
class MarkovSource {
 public:
  // `table` holds NumHistories() rows of V + 1 probabilities, row-major.
  // Throws Error unless every row is non-negative and sums to 1 within 1e-9.
  MarkovSource(PhoneAlphabet alphabet, int order, std::vector<double> table);

  const PhoneAlphabet& alphabet() const { return alphabet_; }
  int order() const { return order_; }
  size_t NumHistories() const { return num_histories_; }
  const std::vector<double>& table() const { return table_; }

  // `history` may contain phone ids and BeginId(); length must equal order().
  size_t HistoryIndex(std::span<const TokenId> history) const;
  std::span<const double> Row(size_t history_index) const;
  double Prob(std::span<const TokenId> history, TokenId next) const;

  // Draws one utterance. Throws Error if the chain runs past `max_length`.
  Utterance Sample(Rng& rng, std::string source_id,
                   size_t max_length = 1000000) const;

 private:
  PhoneAlphabet alphabet_;
  int order_;
  size_t num_histories_;
  std::vector<double> table_;
};

// Exact natural-log probability of `<s>^order utt </s>` under `source`.
double TrueSourceLogProb(const MarkovSource& source, const Utterance& utt);

struct SyntheticConfig {
  size_t n_languages = 5;
  size_t alphabet_size = 40;
  int order = 2;
  size_t utts_per_language = 375;
  size_t mean_length = 100;
  uint64_t seed = 7;
};

struct SyntheticCorpus {
  LabeledCorpus corpus;
  std::map<std::string, MarkovSource> sources;
};

// Draws one random Markov source per language and samples utterances from
// it. Phones are "t0".."t{n-1}" and languages "lang0".."lang{n-1}" (zero
// padded to equal width).
//
// Every language first draws a sparse successor distribution for each
// previous phone; with order 2 each full history then perturbs the
// distribution of its most recent phone with a second Dirichlet draw. Phone
// marginals are therefore close across languages while transitions are
// not. Utterance length is geometric with mean `mean_length` (the first
// phone can never be "</s>").
SyntheticCorpus GenerateSynthetic(const SyntheticConfig& config);

// sources.json: alphabet plus one transition table per language.
void WriteSources(const std::map<std::string, MarkovSource>& sources,
                  const std::filesystem::path& path);
std::map<std::string, MarkovSource> ReadSources(
    const std::filesystem::path& path);

}  // namespace phonolid

#endif  // PHONOLID_CORPUS_H_
