#include "phonolid/corpus.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "phonolid/error.h"

namespace phonolid {

namespace fs = std::filesystem;

namespace {

// Per-phone Dirichlet shape of each language's successor distributions;
// small values make the rows sparse and the languages easy to tell apart.
constexpr double kSuccessorShape = 0.1;
// Total Dirichlet concentration of an order-2 row around its successor
// distribution; lower values put more information in the older phone.
constexpr double kHistoryConcentration = 1.0;
constexpr double kShapeFloor = 1e-3;

std::vector<std::string> ReadLines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

std::vector<std::string> SplitTokens(const std::string& line) {
  std::vector<std::string> out;
  size_t pos = 0;
  while (pos <= line.size()) {
    size_t end = line.find(' ', pos);
    if (end == std::string::npos) end = line.size();
    out.push_back(line.substr(pos, end - pos));
    pos = end + 1;
  }
  return out;
}

std::string ZeroPadded(const std::string& prefix, size_t i, size_t n) {
  const size_t width = std::to_string(n > 0 ? n - 1 : 0).size();
  std::string digits = std::to_string(i);
  return prefix + std::string(width - digits.size(), '0') + digits;
}

}  // namespace

size_t LabeledCorpus::NumUtterances() const {
  size_t n = 0;
  for (const auto& [id, utts] : languages) n += utts.size();
  return n;
}

LabeledCorpus LoadCorpus(const fs::path& root, OovPolicy oov) {
  if (!fs::is_directory(root))
    throw Error("corpus directory " + root.string() + " does not exist");

  std::vector<fs::path> language_dirs;
  for (const auto& entry : fs::directory_iterator(root))
    if (entry.is_directory()) language_dirs.push_back(entry.path());
  std::sort(language_dirs.begin(), language_dirs.end());
  if (language_dirs.empty())
    throw Error("corpus " + root.string() + " has no language directories");

  std::map<std::string, std::vector<std::string>> raw;
  for (const fs::path& dir : language_dirs) {
    const std::string lang = dir.filename().string();
    const fs::path utts = dir / "utts.txt";
    if (!fs::exists(utts))
      throw Error("language '" + lang + "' has no utts.txt");
    std::vector<std::string> lines = ReadLines(utts);
    if (lines.empty()) throw Error("language '" + lang + "' is empty");
    for (size_t i = 0; i < lines.size(); ++i)
      if (lines[i].empty())
        throw Error(utts.string() + ":" + std::to_string(i + 1) +
                    ": blank line");
    raw.emplace(lang, std::move(lines));
  }

  LabeledCorpus corpus;
  const fs::path alphabet_file = root / "alphabet.txt";
  if (fs::exists(alphabet_file)) {
    std::vector<std::string> tokens = ReadLines(alphabet_file);
    corpus.alphabet = PhoneAlphabet(std::move(tokens));
  } else {
    std::set<std::string> seen;
    for (const auto& [lang, lines] : raw) {
      for (size_t i = 0; i < lines.size(); ++i) {
        for (std::string& t : SplitTokens(lines[i])) {
          if (!PhoneAlphabet::IsValidToken(t)) {
            std::string what = PhoneAlphabet::IsReserved(t)
                                   ? "reserved label '" + t + "' in data"
                                   : "malformed token '" + t + "'";
            throw Error(lang + ":" + std::to_string(i + 1) + ": " + what);
          }
          seen.insert(std::move(t));
        }
      }
    }
    corpus.alphabet = PhoneAlphabet({seen.begin(), seen.end()});
  }

  for (const auto& [lang, lines] : raw) {
    std::vector<Utterance>& utts = corpus.languages[lang];
    utts.reserve(lines.size());
    for (size_t i = 0; i < lines.size(); ++i)
      utts.push_back(EncodeUtterance(corpus.alphabet, lines[i],
                                     lang + ":" + std::to_string(i + 1), oov));
  }
  return corpus;
}

void WriteCorpus(const LabeledCorpus& corpus, const fs::path& root) {
  fs::create_directories(root);
  {
    std::ofstream out(root / "alphabet.txt");
    for (const std::string& t : corpus.alphabet.tokens()) out << t << '\n';
    if (!out) throw Error("failed to write " + (root / "alphabet.txt").string());
  }
  for (const auto& [lang, utts] : corpus.languages) {
    if (lang.empty()) throw Error("empty language id");
    fs::create_directories(root / lang);
    std::ofstream out(root / lang / "utts.txt");
    for (const Utterance& u : utts)
      out << DecodeUtterance(corpus.alphabet, u) << '\n';
    if (!out) throw Error("failed to write utterances for '" + lang + "'");
  }
}

CorpusSplits SplitCorpus(const LabeledCorpus& corpus, const SplitSpec& spec) {
  if (spec.n_train < 1 || spec.n_test < 1)
    throw Error("split needs at least one train and one test utterance");
  const size_t need = spec.n_train + spec.n_valid + spec.n_test;
  std::vector<std::string> deficient;
  for (const auto& [lang, utts] : corpus.languages)
    if (utts.size() < need)
      deficient.push_back(lang + " (" + std::to_string(utts.size()) + ")");
  if (!deficient.empty()) {
    std::string msg = "not enough utterances for split " +
                      std::to_string(spec.n_train) + "/" +
                      std::to_string(spec.n_valid) + "/" +
                      std::to_string(spec.n_test) + " in:";
    for (const std::string& d : deficient) msg += " " + d;
    throw Error(msg);
  }

  CorpusSplits splits;
  for (const auto& [lang, utts] : corpus.languages) {
    std::vector<size_t> order(utts.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(DeriveSeed(spec.seed, lang));
    rng.Shuffle(order);
    LanguageSplit& s = splits[lang];
    size_t k = 0;
    for (size_t i = 0; i < spec.n_train; ++i) s.train.push_back(utts[order[k++]]);
    for (size_t i = 0; i < spec.n_valid; ++i) s.valid.push_back(utts[order[k++]]);
    for (size_t i = 0; i < spec.n_test; ++i) s.test.push_back(utts[order[k++]]);
  }
  return splits;
}

MarkovSource::MarkovSource(PhoneAlphabet alphabet, int order,
                           std::vector<double> table)
    : alphabet_(std::move(alphabet)), order_(order), table_(std::move(table)) {
  if (order_ < 1) throw Error("Markov source order must be >= 1");
  if (alphabet_.size() == 0) throw Error("Markov source needs phones");
  const size_t base = alphabet_.size() + 1;
  num_histories_ = 1;
  for (int i = 0; i < order_; ++i) num_histories_ *= base;
  const size_t width = alphabet_.num_predictable();
  if (table_.size() != num_histories_ * width)
    throw Error("Markov source table has " + std::to_string(table_.size()) +
                " entries, expected " + std::to_string(num_histories_ * width));
  for (size_t h = 0; h < num_histories_; ++h) {
    double sum = 0.0;
    for (size_t w = 0; w < width; ++w) {
      const double p = table_[h * width + w];
      if (!(p >= 0.0) || !std::isfinite(p))
        throw Error("Markov source row " + std::to_string(h) +
                    " has an invalid probability");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9)
      throw Error("Markov source row " + std::to_string(h) + " sums to " +
                  std::to_string(sum));
  }
}

size_t MarkovSource::HistoryIndex(std::span<const TokenId> history) const {
  if (history.size() != static_cast<size_t>(order_))
    throw Error("Markov source history length mismatch");
  const size_t base = alphabet_.size() + 1;
  size_t index = 0;
  for (TokenId t : history) {
    size_t digit;
    if (alphabet_.IsPhone(t))
      digit = static_cast<size_t>(t);
    else if (t == alphabet_.BeginId())
      digit = alphabet_.size();
    else
      throw Error("Markov source history holds invalid token " +
                  std::to_string(t));
    index = index * base + digit;
  }
  return index;
}

std::span<const double> MarkovSource::Row(size_t history_index) const {
  const size_t width = alphabet_.num_predictable();
  return std::span<const double>(table_).subspan(history_index * width, width);
}

double MarkovSource::Prob(std::span<const TokenId> history,
                          TokenId next) const {
  if (!alphabet_.IsPredictable(next))
    throw Error("Markov source cannot predict token " + std::to_string(next));
  return Row(HistoryIndex(history))[static_cast<size_t>(next)];
}

Utterance MarkovSource::Sample(Rng& rng, std::string source_id,
                               size_t max_length) const {
  Utterance utt;
  utt.source_id = std::move(source_id);
  std::vector<TokenId> history(static_cast<size_t>(order_),
                               alphabet_.BeginId());
  while (true) {
    std::span<const double> row = Row(HistoryIndex(history));
    double u = rng.Uniform();
    size_t next = row.size() - 1;
    for (size_t w = 0; w < row.size(); ++w) {
      if (u < row[w]) {
        next = w;
        break;
      }
      u -= row[w];
    }
    // Rounding can leave u just above the last cumulative mass; walk back to
    // the last outcome with non-zero probability.
    while (row[next] == 0.0 && next > 0) --next;
    const TokenId id = static_cast<TokenId>(next);
    if (id == alphabet_.EndId()) break;
    utt.phones.push_back(id);
    if (utt.phones.size() > max_length)
      throw Error("Markov source sample exceeded " +
                  std::to_string(max_length) + " phones");
    history.erase(history.begin());
    history.push_back(id);
  }
  return utt;
}

double TrueSourceLogProb(const MarkovSource& source, const Utterance& utt) {
  const PhoneAlphabet& alphabet = source.alphabet();
  CheckUtterance(alphabet, utt);
  std::vector<TokenId> history(static_cast<size_t>(source.order()),
                               alphabet.BeginId());
  double logprob = 0.0;
  auto predict = [&](TokenId next) {
    logprob += std::log(source.Prob(history, next));
    history.erase(history.begin());
    history.push_back(next);
  };
  for (TokenId t : utt.phones) predict(t);
  predict(alphabet.EndId());
  return logprob;
}

SyntheticCorpus GenerateSynthetic(const SyntheticConfig& config) {
  if (config.n_languages < 1) throw Error("synthetic corpus needs >= 1 language");
  if (config.alphabet_size < 2) throw Error("synthetic alphabet needs >= 2 phones");
  if (config.order != 1 && config.order != 2)
    throw Error("synthetic source order must be 1 or 2");
  if (config.mean_length < 5) throw Error("synthetic mean length must be >= 5");
  if (config.utts_per_language < 1)
    throw Error("synthetic corpus needs >= 1 utterance per language");

  const size_t V = config.alphabet_size;
  std::vector<std::string> tokens;
  for (size_t i = 0; i < V; ++i) tokens.push_back("t" + std::to_string(i));
  PhoneAlphabet alphabet(std::move(tokens));

  const double stop = 1.0 / static_cast<double>(config.mean_length);
  const size_t width = V + 1;
  Rng rng(config.seed);

  SyntheticCorpus out;
  out.corpus.alphabet = alphabet;
  for (size_t l = 0; l < config.n_languages; ++l) {
    const std::string lang = ZeroPadded("lang", l, config.n_languages);

    // Successor distribution over phones for each previous symbol; digit V
    // stands for "<s>".
    std::vector<std::vector<double>> successor(V + 1);
    for (auto& row : successor)
      row = rng.Dirichlet(std::vector<double>(V, kSuccessorShape));

    size_t num_histories = config.order == 1 ? V + 1 : (V + 1) * (V + 1);
    std::vector<double> table(num_histories * width);
    for (size_t h = 0; h < num_histories; ++h) {
      const size_t recent = h % (V + 1);
      std::vector<double> phones;
      if (config.order == 1) {
        phones = successor[recent];
      } else {
        std::vector<double> shape(V);
        for (size_t w = 0; w < V; ++w)
          shape[w] = kHistoryConcentration * successor[recent][w] + kShapeFloor;
        phones = rng.Dirichlet(shape);
      }
      const bool initial = (h == num_histories - 1);  // all "<s>"
      const double p_stop = initial ? 0.0 : stop;
      for (size_t w = 0; w < V; ++w)
        table[h * width + w] = (1.0 - p_stop) * phones[w];
      table[h * width + V] = p_stop;
    }
    MarkovSource source(alphabet, config.order, std::move(table));

    std::vector<Utterance>& utts = out.corpus.languages[lang];
    for (size_t i = 0; i < config.utts_per_language; ++i)
      utts.push_back(source.Sample(rng, lang + ":" + std::to_string(i + 1)));
    out.sources.emplace(lang, std::move(source));
  }
  return out;
}

void WriteSources(const std::map<std::string, MarkovSource>& sources,
                  const fs::path& path) {
  using nlohmann::json;
  json doc;
  doc["format"] = "phonolid-sources";
  doc["version"] = 1;
  doc["history_encoding"] =
      "oldest symbol most significant, base V+1, phone i -> i, <s> -> V";
  doc["outcomes"] = "phones by index, then </s>";
  json langs = json::array();
  const PhoneAlphabet* alphabet = nullptr;
  for (const auto& [lang, src] : sources) {
    if (alphabet && !(*alphabet == src.alphabet()))
      throw Error("sources disagree on the alphabet");
    alphabet = &src.alphabet();
    json entry;
    entry["language"] = lang;
    entry["order"] = src.order();
    json rows = json::array();
    for (size_t h = 0; h < src.NumHistories(); ++h) {
      auto row = src.Row(h);
      rows.push_back(std::vector<double>(row.begin(), row.end()));
    }
    entry["rows"] = std::move(rows);
    langs.push_back(std::move(entry));
  }
  doc["alphabet"] = alphabet ? alphabet->tokens() : std::vector<std::string>{};
  doc["sources"] = std::move(langs);
  std::ofstream out(path);
  out << doc.dump() << '\n';
  if (!out) throw Error("failed to write " + path.string());
}

std::map<std::string, MarkovSource> ReadSources(const fs::path& path) {
  using nlohmann::json;
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  json doc;
  try {
    doc = json::parse(in);
    if (doc.at("format") != "phonolid-sources" || doc.at("version") != 1)
      throw ParseError(path.string(), 0, "not a phonolid sources file");
    PhoneAlphabet alphabet(doc.at("alphabet").get<std::vector<std::string>>());
    std::map<std::string, MarkovSource> out;
    for (const json& entry : doc.at("sources")) {
      std::vector<double> table;
      for (const json& row : entry.at("rows"))
        for (const json& p : row) table.push_back(p.get<double>());
      out.emplace(entry.at("language").get<std::string>(),
                  MarkovSource(alphabet, entry.at("order").get<int>(),
                               std::move(table)));
    }
    return out;
  } catch (const json::exception& e) {
    throw ParseError(path.string(), 0, e.what());
  }
}

}  // namespace phonolid
