#include "phonolid/classifier.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <thread>

#include "json.hpp"
#include "phonolid/error.h"

namespace phonolid {

namespace fs = std::filesystem;

void ModelBank::Validate() const {
  if (entries.empty()) throw Error("model bank is empty");
  for (const auto& [lang, entry] : entries) {
    if (lang.empty()) throw Error("model bank has an empty language id");
    if (!entry.ngram && !entry.rnn)
      throw Error("model bank entry '" + lang + "' has no model");
    if (entry.ngram && !(entry.ngram->alphabet() == alphabet))
      throw Error("n-gram model of '" + lang + "' uses a different alphabet");
    if (entry.rnn && !(entry.rnn->alphabet() == alphabet))
      throw Error("RNN model of '" + lang + "' uses a different alphabet");
  }
}

bool ModelBank::HasNgram() const {
  return !entries.empty() &&
         std::all_of(entries.begin(), entries.end(),
                     [](const auto& e) { return e.second.ngram.has_value(); });
}

bool ModelBank::HasRnn() const {
  return !entries.empty() &&
         std::all_of(entries.begin(), entries.end(),
                     [](const auto& e) { return e.second.rnn.has_value(); });
}

ModelBank BuildBank(const PhoneAlphabet& alphabet, const CorpusSplits& splits,
                    const FamilySpec& family, const BuildOptions& options) {
  if (!family.ngram && !family.rnn)
    throw Error("no model family requested");
  if (splits.empty()) throw Error("no languages to train");
  if (family.rnn) family.rnn->training.Validate();

  std::vector<const std::string*> langs;
  for (const auto& [lang, split] : splits) {
    if (split.train.empty())
      throw Error("language '" + lang + "' has no training utterances");
    if (family.rnn && split.valid.empty())
      throw Error("language '" + lang +
                  "' has no validation utterances (RNN training needs a "
                  "validation split)");
    langs.push_back(&lang);
  }

  std::vector<BankEntry> built(langs.size());
  std::vector<std::vector<EpochLog>> logs(langs.size());
  std::vector<std::string> errors(langs.size());

  auto train_one = [&](size_t i) {
    const std::string& lang = *langs[i];
    const LanguageSplit& split = splits.at(lang);
    try {
      if (family.ngram)
        built[i].ngram = TrainNgram(alphabet, split.train, family.ngram->order,
                                    family.ngram->smoothing);
      if (family.rnn) {
        const RnnFamily& rf = *family.rnn;
        ClassAssignment classes = AssignClasses(alphabet, split.train, rf.n_classes);
        RnnLm init = InitRnnLm(alphabet, rf.hidden_size, std::move(classes),
                               rf.training);
        RnnTrainResult r =
            TrainRnnLm(split.train, split.valid, std::move(init), rf.training);
        built[i].rnn = std::move(r.model);
        logs[i] = std::move(r.log);
      }
    } catch (const std::exception& e) {
      errors[i] = "language '" + lang + "': " + e.what();
    }
  };

  unsigned threads = options.threads ? options.threads
                                     : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(langs.size()));
  if (threads <= 1) {
    for (size_t i = 0; i < langs.size(); ++i) train_one(i);
  } else {
    std::atomic<size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t)
      pool.emplace_back([&] {
        for (size_t i = next++; i < langs.size(); i = next++) train_one(i);
      });
    for (auto& th : pool) th.join();
  }
  for (const std::string& e : errors)
    if (!e.empty()) throw Error(e);

  ModelBank bank;
  bank.alphabet = alphabet;
  for (size_t i = 0; i < langs.size(); ++i) {
    bank.entries.emplace(*langs[i], std::move(built[i]));
    if (options.rnn_logs && family.rnn)
      (*options.rnn_logs)[*langs[i]] = std::move(logs[i]);
  }
  if (family.ngram) {
    bank.metadata["ngram.order"] = std::to_string(family.ngram->order);
    bank.metadata["ngram.smoothing"] = family.ngram->smoothing.Tag();
  }
  if (family.rnn) {
    bank.metadata["rnn.hidden_size"] = std::to_string(family.rnn->hidden_size);
    bank.metadata["rnn.n_classes"] = std::to_string(family.rnn->n_classes);
    bank.metadata["rnn.bptt_steps"] = std::to_string(family.rnn->training.bptt_steps);
    bank.metadata["rnn.seed"] = std::to_string(family.rnn->training.seed);
  }
  return bank;
}

std::string ScoreKindName(ScoreKind kind) {
  switch (kind) {
    case ScoreKind::kNgramPerplexity: return "ngram_pp";
    case ScoreKind::kRnnPerplexity: return "rnn_pp";
    case ScoreKind::kFused: return "fused";
  }
  return "unknown";
}

ScoreKind ParseScoreKind(const std::string& name) {
  if (name == "ngram" || name == "ngram_pp") return ScoreKind::kNgramPerplexity;
  if (name == "rnn" || name == "rnn_pp") return ScoreKind::kRnnPerplexity;
  if (name == "fused") return ScoreKind::kFused;
  throw Error("unknown score kind '" + name + "' (expected ngram, rnn or fused)");
}

double FuseScores(double ngram_pp, double rnn_pp, double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0))
    throw Error("fusion weight must be in [0, 1]");
  if (!(ngram_pp >= 1.0) || !(rnn_pp >= 1.0))
    throw Error("fusion expects perplexities >= 1");
  return lambda * std::log(ngram_pp) + (1.0 - lambda) * std::log(rnn_pp);
}

std::map<std::string, LanguageScores> ScoreAll(const ModelBank& bank,
                                               const Utterance& utt,
                                               const ScoreOptions& options) {
  const bool need_ngram = options.kind != ScoreKind::kRnnPerplexity;
  const bool need_rnn = options.kind != ScoreKind::kNgramPerplexity;
  std::map<std::string, LanguageScores> out;
  for (const auto& [lang, entry] : bank.entries) {
    LanguageScores s;
    s.ngram_pp = s.rnn_pp = std::numeric_limits<double>::quiet_NaN();
    if (need_ngram) {
      if (!entry.ngram)
        throw Error("language '" + lang + "' has no n-gram model");
      s.ngram_pp = NgramPerplexity(*entry.ngram, utt, options.oov);
    }
    if (need_rnn) {
      if (!entry.rnn) throw Error("language '" + lang + "' has no RNN model");
      s.rnn_pp = RnnPerplexity(*entry.rnn, utt);
    }
    out.emplace(lang, s);
  }
  return out;
}

ClassificationResult RankScores(const std::map<std::string, double>& scores,
                                ScoreKind kind) {
  if (scores.empty()) throw Error("nothing to rank");
  ClassificationResult result;
  result.score_kind = kind;
  for (const auto& [lang, score] : scores) {
    if (!std::isfinite(score))
      throw Error("non-finite score for language '" + lang + "'");
    result.ranked.push_back({lang, score});
  }
  // The map is ordered by id, so a stable sort breaks ties lexicographically.
  std::stable_sort(result.ranked.begin(), result.ranked.end(),
                   [](const RankedLanguage& a, const RankedLanguage& b) {
                     return a.score < b.score;
                   });
  result.decision = result.ranked.front().language;
  return result;
}

namespace {

std::map<std::string, double> SelectScores(
    const std::map<std::string, LanguageScores>& all, ScoreKind kind,
    double lambda) {
  std::map<std::string, double> out;
  for (const auto& [lang, s] : all) {
    switch (kind) {
      case ScoreKind::kNgramPerplexity: out[lang] = s.ngram_pp; break;
      case ScoreKind::kRnnPerplexity: out[lang] = s.rnn_pp; break;
      case ScoreKind::kFused: out[lang] = FuseScores(s.ngram_pp, s.rnn_pp, lambda); break;
    }
  }
  return out;
}

}  // namespace

ClassificationResult Classify(const ModelBank& bank, const Utterance& utt,
                              const ScoreOptions& options) {
  if (options.kind == ScoreKind::kFused &&
      !(options.lambda >= 0.0 && options.lambda <= 1.0))
    throw Error("fusion weight must be in [0, 1]");
  return RankScores(
      SelectScores(ScoreAll(bank, utt, options), options.kind, options.lambda),
      options.kind);
}

std::vector<RankedLanguage> ClassifyNbest(const ModelBank& bank,
                                          const Utterance& utt,
                                          const ScoreOptions& options,
                                          size_t n) {
  if (n < 1 || n > bank.entries.size())
    throw Error("n-best size " + std::to_string(n) + " outside [1, " +
                std::to_string(bank.entries.size()) + "]");
  ClassificationResult full = Classify(bank, utt, options);
  full.ranked.resize(n);
  return full.ranked;
}

std::vector<LabeledUtterance> LabeledSlice(const CorpusSplits& splits,
                                           SplitPart part) {
  std::vector<LabeledUtterance> out;
  for (const auto& [lang, split] : splits) {
    const std::vector<Utterance>& utts =
        part == SplitPart::kTrain ? split.train
        : part == SplitPart::kValid ? split.valid
                                    : split.test;
    for (const Utterance& u : utts) out.push_back({lang, u});
  }
  return out;
}

LambdaSweep TuneLambda(const ModelBank& bank,
                       std::span<const LabeledUtterance> validation,
                       std::span<const double> grid, OovPolicy oov) {
  if (validation.empty()) throw Error("lambda tuning needs validation data");
  if (grid.empty()) throw Error("lambda grid is empty");
  if (!bank.HasNgram() || !bank.HasRnn())
    throw Error("lambda tuning needs both n-gram and RNN models in every entry");
  for (double l : grid)
    if (!(l >= 0.0 && l <= 1.0)) throw Error("lambda grid values must be in [0, 1]");

  ScoreOptions options{ScoreKind::kFused, 0.5, oov};
  std::vector<std::map<std::string, LanguageScores>> scored;
  scored.reserve(validation.size());
  for (const LabeledUtterance& lu : validation)
    scored.push_back(ScoreAll(bank, lu.utterance, options));

  LambdaSweep sweep;
  double best_acc = -1.0;
  std::vector<double> sorted(grid.begin(), grid.end());
  std::sort(sorted.begin(), sorted.end());
  for (double lambda : sorted) {
    size_t correct = 0;
    for (size_t i = 0; i < validation.size(); ++i) {
      ClassificationResult r =
          RankScores(SelectScores(scored[i], ScoreKind::kFused, lambda),
                     ScoreKind::kFused);
      if (r.decision == validation[i].language) ++correct;
    }
    const double acc = 100.0 * static_cast<double>(correct) /
                       static_cast<double>(validation.size());
    sweep.accuracy.emplace_back(lambda, acc);
    if (acc > best_acc) {
      best_acc = acc;
      sweep.best_lambda = lambda;
    }
  }
  return sweep;
}

// ---------------------------------------------------------------------------
// Bank persistence.

void SaveBank(const ModelBank& bank, const fs::path& dir) {
  bank.Validate();
  fs::create_directories(dir / "models");
  nlohmann::json manifest;
  manifest["format"] = "phonolid-bank";
  manifest["version"] = 1;
  manifest["alphabet_hash"] = bank.alphabet.Hash();
  manifest["alphabet"] = bank.alphabet.tokens();
  nlohmann::json langs = nlohmann::json::array();
  for (const auto& [lang, entry] : bank.entries) {
    nlohmann::json e;
    e["language"] = lang;
    if (entry.ngram) {
      const std::string rel = "models/" + lang + ".arpa";
      SaveArpa(*entry.ngram, dir / rel);
      e["ngram"] = rel;
    }
    if (entry.rnn) {
      const std::string rel = "models/" + lang + ".rnnlm.json";
      SaveRnnLm(*entry.rnn, dir / rel);
      e["rnn"] = rel;
    }
    langs.push_back(std::move(e));
  }
  manifest["languages"] = std::move(langs);
  manifest["metadata"] = bank.metadata;
  std::ofstream out(dir / "manifest.json");
  out << manifest.dump(2) << '\n';
  if (!out) throw Error("failed to write " + (dir / "manifest.json").string());
}

ModelBank LoadBank(const fs::path& dir) {
  const fs::path path = dir / "manifest.json";
  std::ifstream in(path);
  if (!in) throw Error("cannot open bank manifest " + path.string());
  ModelBank bank;
  try {
    const nlohmann::json manifest = nlohmann::json::parse(in);
    if (manifest.at("format") != "phonolid-bank" || manifest.at("version") != 1)
      throw ParseError(path.string(), 0, "not a phonolid bank manifest");
    bank.alphabet =
        PhoneAlphabet(manifest.at("alphabet").get<std::vector<std::string>>());
    if (bank.alphabet.Hash() != manifest.at("alphabet_hash").get<std::string>())
      throw ParseError(path.string(), 0, "alphabet hash does not match alphabet");
    for (const auto& e : manifest.at("languages")) {
      BankEntry entry;
      if (e.contains("ngram"))
        entry.ngram = LoadArpa(dir / e.at("ngram").get<std::string>());
      if (e.contains("rnn"))
        entry.rnn = LoadRnnLm(dir / e.at("rnn").get<std::string>());
      bank.entries.emplace(e.at("language").get<std::string>(), std::move(entry));
    }
    bank.metadata =
        manifest.at("metadata").get<std::map<std::string, std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string(), 0, e.what());
  }
  bank.Validate();
  return bank;
}

}  // namespace phonolid
