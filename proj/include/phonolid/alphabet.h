#ifndef PHONOLID_ALPHABET_H_
#define PHONOLID_ALPHABET_H_

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace phonolid {

using TokenId = int32_t;

// Closed phone inventory.
//
// Phones occupy ids [0, size()). Three reserved symbols sit directly above
// them and are shared by every model in the toolkit:
//
//   EndId()   = size()      "</s>"   predicted at the end of every utterance
//   BeginId() = size() + 1  "<s>"    history padding, never predicted
//   UnkId()   = size() + 2  "<unk>"  out-of-inventory phone (lenient scoring)
//
// The predictable outcomes of every language model are the phones plus
// "</s>", i.e. ids [0, size()].
class PhoneAlphabet {
 public:
  static constexpr std::string_view kBegin = "<s>";
  static constexpr std::string_view kEnd = "</s>";
  static constexpr std::string_view kUnknown = "<unk>";

  PhoneAlphabet() = default;
  // Throws Error on duplicate, empty, whitespace-bearing or reserved tokens.
  explicit PhoneAlphabet(std::vector<std::string> tokens);

  size_t size() const { return tokens_.size(); }
  size_t num_predictable() const { return tokens_.size() + 1; }
  const std::vector<std::string>& tokens() const { return tokens_; }

  TokenId EndId() const { return static_cast<TokenId>(size()); }
  TokenId BeginId() const { return static_cast<TokenId>(size() + 1); }
  TokenId UnkId() const { return static_cast<TokenId>(size() + 2); }

  bool IsPhone(TokenId id) const {
    return id >= 0 && static_cast<size_t>(id) < size();
  }
  bool IsPredictable(TokenId id) const { return id >= 0 && id <= EndId(); }

  // Spelling of a phone or reserved id.
  const std::string& Symbol(TokenId id) const;

  // Phones only.
  std::optional<TokenId> FindPhone(std::string_view token) const;
  // Phones and the three reserved spellings.
  std::optional<TokenId> FindSymbol(std::string_view token) const;

  // 16 hex digits of FNV-1a over the newline-joined tokens. Equal hashes mean
  // equal token lists in equal order.
  std::string Hash() const;

  bool operator==(const PhoneAlphabet& other) const {
    return tokens_ == other.tokens_;
  }

  static bool IsReserved(std::string_view token) {
    return token == kBegin || token == kEnd || token == kUnknown;
  }
  // Non-empty, no whitespace or control bytes, not reserved.
  static bool IsValidToken(std::string_view token);

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

// One tokenized recording.
struct Utterance {
  std::vector<TokenId> phones;
  std::string source_id;

  bool operator==(const Utterance& other) const = default;
};

enum class OovPolicy {
  kStrict,   // out-of-inventory phones are an error
  kLenient,  // mapped to UnkId()
};

// Splits a single-space-separated line into an utterance. Throws Error
// naming the offending token on reserved markers, blank or malformed lines,
// or (strict mode) unknown phones.
Utterance EncodeUtterance(const PhoneAlphabet& alphabet, std::string_view line,
                          std::string source_id,
                          OovPolicy oov = OovPolicy::kStrict);

std::string DecodeUtterance(const PhoneAlphabet& alphabet,
                            const Utterance& utt);

// Throws Error unless every phone is a valid phone id (or UnkId() when
// `allow_unk`) and the utterance is non-empty.
void CheckUtterance(const PhoneAlphabet& alphabet, const Utterance& utt,
                    bool allow_unk = false);

}  // namespace phonolid

#endif  // PHONOLID_ALPHABET_H_
