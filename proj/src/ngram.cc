#include "phonolid/ngram.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "phonolid/error.h"

namespace phonolid {

std::string SmoothingConfig::Tag() const {
  return kind == Smoothing::kWittenBell ? "witten_bell" : "add_k";
}

SmoothingConfig ParseSmoothing(const std::string& tag, double k) {
  if (tag == "witten_bell") return {Smoothing::kWittenBell, k};
  if (tag == "add_k") {
    if (!(k > 0.0) || !std::isfinite(k))
      throw Error("add_k smoothing needs a positive k");
    return {Smoothing::kAddK, k};
  }
  throw Error("unknown smoothing '" + tag + "' (expected witten_bell or add_k)");
}

NgramKey::NgramKey(std::span<const TokenId> tokens) {
  if (tokens.size() > static_cast<size_t>(kMaxOrder))
    throw Error("n-gram longer than " + std::to_string(kMaxOrder));
  std::copy(tokens.begin(), tokens.end(), ids.begin());
  size = static_cast<uint8_t>(tokens.size());
}

bool NgramKey::operator==(const NgramKey& other) const {
  return size == other.size &&
         std::equal(ids.begin(), ids.begin() + size, other.ids.begin());
}

bool NgramKey::operator<(const NgramKey& other) const {
  return std::lexicographical_compare(ids.begin(), ids.begin() + size,
                                      other.ids.begin(),
                                      other.ids.begin() + other.size);
}

size_t NgramKeyHash::operator()(const NgramKey& key) const {
  uint64_t h = 0xcbf29ce484222325ULL ^ key.size;
  for (int i = 0; i < key.size; ++i) {
    h ^= static_cast<uint32_t>(key.ids[i]);
    h *= 0x100000001b3ULL;
    h ^= h >> 29;
  }
  return static_cast<size_t>(h);
}

NgramModel::NgramModel(PhoneAlphabet alphabet, int order,
                       SmoothingConfig smoothing,
                       std::vector<CountTable> counts)
    : alphabet_(std::move(alphabet)),
      order_(order),
      smoothing_(smoothing),
      counts_(std::move(counts)) {
  if (order_ < 1 || order_ > kMaxOrder)
    throw Error("n-gram order " + std::to_string(order_) +
                " outside supported range [1, 6]");
  if (counts_.size() != static_cast<size_t>(order_))
    throw Error("n-gram count tables do not match the order");
  if (smoothing_.kind == Smoothing::kAddK && !(smoothing_.k > 0.0))
    throw Error("add_k smoothing needs a positive k");

  contexts_.assign(static_cast<size_t>(order_), {});
  for (int n = 1; n <= order_; ++n) {
    for (const auto& [key, count] : counts_[n - 1]) {
      if (key.size != n) throw Error("n-gram stored under the wrong length");
      if (count == 0) throw Error("n-gram with zero count");
      const TokenId w = key.ids[n - 1];
      if (!alphabet_.IsPredictable(w) && w != alphabet_.UnkId())
        throw Error("n-gram predicts a non-predictable token");
      for (int i = 0; i + 1 < n; ++i) {
        const TokenId h = key.ids[i];
        if (!(alphabet_.IsPhone(h) || h == alphabet_.BeginId() ||
              h == alphabet_.UnkId()))
          throw Error("n-gram history holds an invalid token");
      }
      ContextStats& ctx =
          contexts_[n - 1][NgramKey(key.view().first(n - 1))];
      ctx.total += count;
      ctx.distinct += 1;
    }
  }
}

uint64_t NgramModel::Count(std::span<const TokenId> ngram) const {
  if (ngram.empty() || ngram.size() > static_cast<size_t>(order_)) return 0;
  const CountTable& table = counts_[ngram.size() - 1];
  auto it = table.find(NgramKey(ngram));
  return it == table.end() ? 0 : it->second;
}

ContextStats NgramModel::Context(std::span<const TokenId> history) const {
  if (history.size() >= static_cast<size_t>(order_)) return {};
  const auto& table = contexts_[history.size()];
  auto it = table.find(NgramKey(history));
  return it == table.end() ? ContextStats{} : it->second;
}

double NgramModel::Prob(std::span<const TokenId> history, TokenId w) const {
  if (!alphabet_.IsPredictable(w) && w != alphabet_.UnkId())
    throw Error("n-gram model cannot predict '" +
                (w == alphabet_.BeginId() ? std::string(PhoneAlphabet::kBegin)
                                          : std::to_string(w)) +
                "'");
  const size_t keep = std::min(history.size(), static_cast<size_t>(order_ - 1));
  history = history.last(keep);
  return smoothing_.kind == Smoothing::kWittenBell ? WittenBell(history, w)
                                                   : AddK(history, w);
}

double NgramModel::WittenBell(std::span<const TokenId> history,
                              TokenId w) const {
  double p = 1.0 / static_cast<double>(alphabet_.num_predictable());
  std::array<TokenId, kMaxOrder> buf{};
  for (size_t k = 0; k <= history.size(); ++k) {
    std::span<const TokenId> h = history.last(k);
    auto ctx = contexts_[k].find(NgramKey(h));
    if (ctx == contexts_[k].end()) continue;
    std::copy(h.begin(), h.end(), buf.begin());
    buf[k] = w;
    auto hit = counts_[k].find(NgramKey({buf.data(), k + 1}));
    const double c_hw = hit == counts_[k].end() ? 0.0 : double(hit->second);
    const double total = double(ctx->second.total);
    const double types = double(ctx->second.distinct);
    p = (c_hw + types * p) / (total + types);
  }
  return p;
}

double NgramModel::AddK(std::span<const TokenId> history, TokenId w) const {
  const double vocab = static_cast<double>(alphabet_.num_predictable());
  for (size_t k = history.size() + 1; k-- > 0;) {
    std::span<const TokenId> h = history.last(k);
    auto ctx = contexts_[k].find(NgramKey(h));
    if (ctx == contexts_[k].end()) continue;
    std::array<TokenId, kMaxOrder> buf{};
    std::copy(h.begin(), h.end(), buf.begin());
    buf[k] = w;
    auto hit = counts_[k].find(NgramKey({buf.data(), k + 1}));
    const double c_hw = hit == counts_[k].end() ? 0.0 : double(hit->second);
    return (c_hw + smoothing_.k) /
           (double(ctx->second.total) + smoothing_.k * vocab);
  }
  return 1.0 / vocab;
}

NgramModel TrainNgram(const PhoneAlphabet& alphabet,
                      std::span<const Utterance> train, int order,
                      SmoothingConfig smoothing) {
  if (order < 1 || order > NgramModel::kMaxOrder)
    throw Error("n-gram order " + std::to_string(order) +
                " outside supported range [1, 6]");
  if (train.empty()) throw Error("cannot train an n-gram model on no data");

  std::vector<NgramModel::CountTable> counts(static_cast<size_t>(order));
  std::vector<TokenId> padded;
  for (const Utterance& utt : train) {
    CheckUtterance(alphabet, utt, /*allow_unk=*/true);
    padded.assign(static_cast<size_t>(order - 1), alphabet.BeginId());
    padded.insert(padded.end(), utt.phones.begin(), utt.phones.end());
    padded.push_back(alphabet.EndId());
    for (size_t pos = static_cast<size_t>(order - 1); pos < padded.size();
         ++pos) {
      for (size_t n = 1; n <= static_cast<size_t>(order); ++n) {
        std::span<const TokenId> gram(padded.data() + pos + 1 - n, n);
        ++counts[n - 1][NgramKey(gram)];
      }
    }
  }
  return NgramModel(alphabet, order, smoothing, std::move(counts));
}

SequenceScore SequenceLogProb(const NgramModel& model, const Utterance& utt,
                              OovPolicy oov) {
  const PhoneAlphabet& alphabet = model.alphabet();
  CheckUtterance(alphabet, utt, oov == OovPolicy::kLenient);
  const size_t context = static_cast<size_t>(model.order() - 1);
  std::vector<TokenId> padded(context, alphabet.BeginId());
  padded.insert(padded.end(), utt.phones.begin(), utt.phones.end());
  padded.push_back(alphabet.EndId());

  SequenceScore score;
  for (size_t pos = context; pos < padded.size(); ++pos) {
    std::span<const TokenId> history(padded.data() + pos - context, context);
    score.logprob += std::log(model.Prob(history, padded[pos]));
    ++score.n_predicted;
  }
  return score;
}

double NgramPerplexity(const NgramModel& model, const Utterance& utt,
                       OovPolicy oov) {
  SequenceScore s = SequenceLogProb(model, utt, oov);
  return std::exp(-s.logprob / static_cast<double>(s.n_predicted));
}

// ---------------------------------------------------------------------------
// Text serialization.

namespace {

constexpr const char* kFormatLine = "format phonolid-ngram 1";

std::string FormatDouble(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<std::string> SplitOn(const std::string& s, char sep) {
  std::vector<std::string> out;
  size_t pos = 0;
  while (true) {
    size_t end = s.find(sep, pos);
    out.push_back(s.substr(pos, end == std::string::npos ? end : end - pos));
    if (end == std::string::npos) break;
    pos = end + 1;
  }
  return out;
}

class LineReader {
 public:
  LineReader(std::istream& in, std::string name)
      : in_(in), name_(std::move(name)) {}

  // Next line; throws on end of file.
  const std::string& Next(const char* expecting) {
    if (!std::getline(in_, line_))
      throw ParseError(name_, line_no_ + 1,
                       std::string("unexpected end of file, expected ") +
                           expecting);
    ++line_no_;
    return line_;
  }

  [[noreturn]] void Fail(const std::string& msg) const {
    throw ParseError(name_, line_no_, msg);
  }

  uint64_t ParseCount(const std::string& text) const {
    if (text.empty() ||
        !std::all_of(text.begin(), text.end(),
                     [](char c) { return c >= '0' && c <= '9'; }))
      Fail("invalid count '" + text + "'");
    try {
      return std::stoull(text);
    } catch (const std::exception&) {
      Fail("count out of range '" + text + "'");
    }
  }

 private:
  std::istream& in_;
  std::string name_;
  std::string line_;
  size_t line_no_ = 0;
};

}  // namespace

void WriteArpa(const NgramModel& model, std::ostream& out) {
  const PhoneAlphabet& alphabet = model.alphabet();
  out << "\\data\\\n" << kFormatLine << '\n';
  out << "order " << model.order() << '\n';
  out << "smoothing " << model.smoothing().Tag();
  if (model.smoothing().kind == Smoothing::kAddK)
    out << ' ' << FormatDouble(model.smoothing().k);
  out << '\n';
  out << "alphabet";
  for (const std::string& t : alphabet.tokens()) out << ' ' << t;
  out << '\n';
  for (int n = 1; n <= model.order(); ++n)
    out << "ngram " << n << '=' << model.counts()[n - 1].size() << '\n';
  for (int n = 1; n <= model.order(); ++n) {
    out << "\n\\" << n << "-grams:\n";
    std::vector<std::pair<NgramKey, uint64_t>> entries(
        model.counts()[n - 1].begin(), model.counts()[n - 1].end());
    std::sort(entries.begin(), entries.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (const auto& [key, count] : entries) {
      out << count << '\t';
      for (int i = 0; i < n; ++i) {
        if (i) out << ' ';
        out << alphabet.Symbol(key.ids[i]);
      }
      out << '\n';
    }
  }
  out << "\n\\end\\\n";
}

void SaveArpa(const NgramModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  WriteArpa(model, out);
  if (!out) throw Error("failed to write " + path.string());
}

NgramModel ReadArpa(std::istream& in, const std::string& name) {
  LineReader reader(in, name);
  if (reader.Next("\\data\\") != "\\data\\") reader.Fail("expected \\data\\");
  if (reader.Next(kFormatLine) != kFormatLine)
    reader.Fail(std::string("expected '") + kFormatLine + "'");

  std::vector<std::string> f = SplitOn(reader.Next("order"), ' ');
  if (f.size() != 2 || f[0] != "order") reader.Fail("expected 'order <n>'");
  const uint64_t order_u = reader.ParseCount(f[1]);
  if (order_u < 1 || order_u > static_cast<uint64_t>(NgramModel::kMaxOrder))
    reader.Fail("order must be in [1, 6]");
  const int order = static_cast<int>(order_u);

  f = SplitOn(reader.Next("smoothing"), ' ');
  SmoothingConfig smoothing;
  if (f.size() == 2 && f[0] == "smoothing" && f[1] == "witten_bell") {
    smoothing = {Smoothing::kWittenBell, 1.0};
  } else if (f.size() == 3 && f[0] == "smoothing" && f[1] == "add_k") {
    char* end = nullptr;
    const double k = std::strtod(f[2].c_str(), &end);
    if (end == f[2].c_str() || *end != '\0' || !(k > 0.0))
      reader.Fail("invalid add_k constant '" + f[2] + "'");
    smoothing = {Smoothing::kAddK, k};
  } else {
    reader.Fail("expected 'smoothing witten_bell' or 'smoothing add_k <k>'");
  }

  f = SplitOn(reader.Next("alphabet"), ' ');
  if (f.empty() || f[0] != "alphabet") reader.Fail("expected 'alphabet ...'");
  PhoneAlphabet alphabet;
  try {
    alphabet = PhoneAlphabet(std::vector<std::string>(f.begin() + 1, f.end()));
  } catch (const Error& e) {
    reader.Fail(e.what());
  }

  std::vector<uint64_t> declared(static_cast<size_t>(order));
  for (int n = 1; n <= order; ++n) {
    const std::string& line = reader.Next("ngram count");
    const std::string prefix = "ngram " + std::to_string(n) + "=";
    if (line.rfind(prefix, 0) != 0) reader.Fail("expected '" + prefix + "<count>'");
    declared[n - 1] = reader.ParseCount(line.substr(prefix.size()));
  }

  std::vector<NgramModel::CountTable> counts(static_cast<size_t>(order));
  for (int n = 1; n <= order; ++n) {
    if (!reader.Next("blank line").empty()) reader.Fail("expected a blank line");
    const std::string header = "\\" + std::to_string(n) + "-grams:";
    if (reader.Next(header.c_str()) != header)
      reader.Fail("expected '" + header + "'");
    for (uint64_t i = 0; i < declared[n - 1]; ++i) {
      const std::string& line = reader.Next("n-gram entry");
      const size_t tab = line.find('\t');
      if (tab == std::string::npos) reader.Fail("expected 'count<TAB>tokens'");
      const uint64_t count = reader.ParseCount(line.substr(0, tab));
      if (count == 0) reader.Fail("zero count");
      std::vector<std::string> toks = SplitOn(line.substr(tab + 1), ' ');
      if (toks.size() != static_cast<size_t>(n))
        reader.Fail("expected " + std::to_string(n) + " tokens");
      std::vector<TokenId> ids;
      for (const std::string& t : toks) {
        auto id = alphabet.FindSymbol(t);
        if (!id) reader.Fail("unknown token '" + t + "'");
        ids.push_back(*id);
      }
      if (ids.back() == alphabet.BeginId())
        reader.Fail("n-gram predicts <s>");
      for (size_t j = 0; j + 1 < ids.size(); ++j)
        if (ids[j] == alphabet.EndId()) reader.Fail("</s> inside a history");
      if (!counts[n - 1].emplace(NgramKey(ids), count).second)
        reader.Fail("duplicate n-gram");
    }
  }
  if (!reader.Next("blank line").empty()) reader.Fail("expected a blank line");
  if (reader.Next("\\end\\") != "\\end\\") reader.Fail("expected \\end\\");
  try {
    return NgramModel(std::move(alphabet), order, smoothing, std::move(counts));
  } catch (const Error& e) {
    reader.Fail(e.what());
  }
}

NgramModel LoadArpa(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  return ReadArpa(in, path.string());
}

}  // namespace phonolid
