#include "phonolid/alphabet.h"

#include <cstdio>

#include "phonolid/error.h"
#include "phonolid/random.h"

namespace phonolid {

namespace {

bool IsSeparatorByte(unsigned char c) { return c <= 0x20 || c == 0x7f; }

}  // namespace

PhoneAlphabet::PhoneAlphabet(std::vector<std::string> tokens)
    : tokens_(std::move(tokens)) {
  index_.reserve(tokens_.size());
  for (size_t i = 0; i < tokens_.size(); ++i) {
    const std::string& t = tokens_[i];
    if (IsReserved(t))
      throw Error("alphabet: reserved label '" + t + "' cannot be a phone");
    if (!IsValidToken(t))
      throw Error("alphabet: invalid phone label '" + t + "'");
    if (!index_.emplace(t, static_cast<TokenId>(i)).second)
      throw Error("alphabet: duplicate phone label '" + t + "'");
  }
}

bool PhoneAlphabet::IsValidToken(std::string_view token) {
  if (token.empty()) return false;
  for (unsigned char c : token)
    if (IsSeparatorByte(c)) return false;
  return !IsReserved(token);
}

const std::string& PhoneAlphabet::Symbol(TokenId id) const {
  static const std::string kEndStr(kEnd), kBeginStr(kBegin),
      kUnknownStr(kUnknown);
  if (IsPhone(id)) return tokens_[static_cast<size_t>(id)];
  if (id == EndId()) return kEndStr;
  if (id == BeginId()) return kBeginStr;
  if (id == UnkId()) return kUnknownStr;
  throw Error("alphabet: token id " + std::to_string(id) + " out of range");
}

std::optional<TokenId> PhoneAlphabet::FindPhone(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::optional<TokenId> PhoneAlphabet::FindSymbol(std::string_view token) const {
  if (token == kEnd) return EndId();
  if (token == kBegin) return BeginId();
  if (token == kUnknown) return UnkId();
  return FindPhone(token);
}

std::string PhoneAlphabet::Hash() const {
  std::string joined;
  for (size_t i = 0; i < tokens_.size(); ++i) {
    if (i) joined += '\n';
    joined += tokens_[i];
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(Fnv1a64(joined)));
  return buf;
}

Utterance EncodeUtterance(const PhoneAlphabet& alphabet, std::string_view line,
                          std::string source_id, OovPolicy oov) {
  Utterance utt;
  utt.source_id = std::move(source_id);
  if (line.empty()) throw Error(utt.source_id + ": blank utterance line");
  size_t pos = 0;
  while (pos <= line.size()) {
    size_t end = line.find(' ', pos);
    if (end == std::string_view::npos) end = line.size();
    std::string_view token = line.substr(pos, end - pos);
    if (token.empty())
      throw Error(utt.source_id +
                  ": empty token (tokens must be separated by single spaces)");
    if (PhoneAlphabet::IsReserved(token))
      throw Error(utt.source_id + ": reserved label '" + std::string(token) +
                  "' in data");
    if (!PhoneAlphabet::IsValidToken(token))
      throw Error(utt.source_id + ": token '" + std::string(token) +
                  "' contains whitespace or control characters");
    if (auto id = alphabet.FindPhone(token)) {
      utt.phones.push_back(*id);
    } else if (oov == OovPolicy::kLenient) {
      utt.phones.push_back(alphabet.UnkId());
    } else {
      throw Error(utt.source_id + ": token '" + std::string(token) +
                  "' is not in the phone alphabet");
    }
    pos = end + 1;
  }
  return utt;
}

std::string DecodeUtterance(const PhoneAlphabet& alphabet,
                            const Utterance& utt) {
  std::string out;
  for (size_t i = 0; i < utt.phones.size(); ++i) {
    if (i) out += ' ';
    out += alphabet.Symbol(utt.phones[i]);
  }
  return out;
}

void CheckUtterance(const PhoneAlphabet& alphabet, const Utterance& utt,
                    bool allow_unk) {
  if (utt.phones.empty())
    throw Error("utterance '" + utt.source_id + "' is empty");
  for (TokenId id : utt.phones) {
    if (alphabet.IsPhone(id)) continue;
    if (allow_unk && id == alphabet.UnkId()) continue;
    if (id == alphabet.UnkId())
      throw Error("utterance '" + utt.source_id +
                  "' contains an out-of-alphabet phone (strict mode)");
    throw Error("utterance '" + utt.source_id + "' contains invalid token id " +
                std::to_string(id));
  }
}

}  // namespace phonolid
