#ifndef PHONOLID_NGRAM_H_
#define PHONOLID_NGRAM_H_

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "phonolid/alphabet.h"

namespace phonolid {

enum class Smoothing {
  kWittenBell,  // recursive Witten-Bell backoff (default)
  kAddK,        // add-k on the longest seen context; diagnostic only
};

struct SmoothingConfig {
  Smoothing kind = Smoothing::kWittenBell;
  double k = 1.0;  // used by kAddK only

  std::string Tag() const;  // "witten_bell" or "add_k"
  bool operator==(const SmoothingConfig& other) const = default;
};

SmoothingConfig ParseSmoothing(const std::string& tag, double k = 1.0);

// Up to kMaxOrder token ids; used both for n-grams and for their histories.
struct NgramKey {
  static constexpr int kMaxOrder = 6;
  std::array<TokenId, kMaxOrder> ids{};
  uint8_t size = 0;

  NgramKey() = default;
  explicit NgramKey(std::span<const TokenId> tokens);
  std::span<const TokenId> view() const { return {ids.data(), size}; }
  bool operator==(const NgramKey& other) const;
  bool operator<(const NgramKey& other) const;
};

struct NgramKeyHash {
  size_t operator()(const NgramKey& key) const;
};

struct ContextStats {
  uint64_t total = 0;     // c(h): occurrences of h followed by anything
  uint64_t distinct = 0;  // T(h): number of distinct followers
};

// Backoff n-gram model over one alphabet, order 1..6.
//
// Training pads each utterance with order-1 "<s>" and one "</s>" and counts,
// at every predicted position, the n-grams of length 1..order ending there.
// Only integer counts are stored; probabilities are computed on demand:
//
//   P(w | h) = (c(h, w) + T(h) P(w | h')) / (c(h) + T(h))   if c(h) > 0
//            = P(w | h')                                     otherwise
//
// where h' drops the oldest token of h and the recursion bottoms out in the
// uniform distribution over the predictable outcomes (phones and "</s>").
class NgramModel {
 public:
  static constexpr int kMaxOrder = NgramKey::kMaxOrder;
  using CountTable = std::unordered_map<NgramKey, uint64_t, NgramKeyHash>;

  NgramModel() = default;

  // `counts[n - 1]` holds the n-grams of length n. Throws Error on invalid
  // order, ids, or zero counts.
  NgramModel(PhoneAlphabet alphabet, int order, SmoothingConfig smoothing,
             std::vector<CountTable> counts);

  const PhoneAlphabet& alphabet() const { return alphabet_; }
  int order() const { return order_; }
  const SmoothingConfig& smoothing() const { return smoothing_; }
  const std::vector<CountTable>& counts() const { return counts_; }

  uint64_t Count(std::span<const TokenId> ngram) const;
  ContextStats Context(std::span<const TokenId> history) const;

  // `history` is oldest first; anything beyond the most recent order-1 ids
  // is ignored. Throws Error if `w` is not a predictable outcome.
  double Prob(std::span<const TokenId> history, TokenId w) const;

 private:
  double WittenBell(std::span<const TokenId> history, TokenId w) const;
  double AddK(std::span<const TokenId> history, TokenId w) const;

  PhoneAlphabet alphabet_;
  int order_ = 0;
  SmoothingConfig smoothing_;
  std::vector<CountTable> counts_;
  // contexts_[k]: stats for histories of length k.
  std::vector<std::unordered_map<NgramKey, ContextStats, NgramKeyHash>>
      contexts_;
};

// Throws Error on an empty training set or order outside [1, 6]. Utterances
// may contain UnkId() (lenient ingestion); it is then counted like a phone.
NgramModel TrainNgram(const PhoneAlphabet& alphabet,
                      std::span<const Utterance> train, int order,
                      SmoothingConfig smoothing = {});

struct SequenceScore {
  double logprob = 0.0;    // natural log
  size_t n_predicted = 0;  // phones + 1 for "</s>"
};

// Sums ln P over every phone and the final "</s>". In strict mode an
// UnkId() phone is an error; in lenient mode it is scored by the backoff
// chain like any unseen event.
SequenceScore SequenceLogProb(const NgramModel& model, const Utterance& utt,
                              OovPolicy oov = OovPolicy::kStrict);

// exp(-logprob / n_predicted).
double NgramPerplexity(const NgramModel& model, const Utterance& utt,
                       OovPolicy oov = OovPolicy::kStrict);

// Text format, documented in docs/formats.md.
void SaveArpa(const NgramModel& model, const std::filesystem::path& path);
void WriteArpa(const NgramModel& model, std::ostream& out);
NgramModel LoadArpa(const std::filesystem::path& path);
NgramModel ReadArpa(std::istream& in, const std::string& name = "<stream>");

}  // namespace phonolid

#endif  // PHONOLID_NGRAM_H_
