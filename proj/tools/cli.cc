#include "cli.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "phonolid/classifier.h"
#include "phonolid/corpus.h"
#include "phonolid/error.h"
#include "phonolid/eval.h"
#include "phonolid/ngram.h"
#include "phonolid/rnnlm.h"

namespace phonolid::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Invalid flags or flag combinations; reported with exit code 2.
class UsageError : public Error {
 public:
  using Error::Error;
};

void ThrowIfProblems(const std::vector<std::string>& problems) {
  if (problems.empty()) return;
  std::string msg = "invalid configuration:";
  for (const std::string& p : problems) msg += "\n  - " + p;
  throw UsageError(msg);
}

void WriteJsonFile(const fs::path& path, const json& doc) {
  std::ofstream out(path);
  out << doc.dump(2) << '\n';
  if (!out) throw Error("failed to write " + path.string());
}

OovPolicy Oov(bool lenient) {
  return lenient ? OovPolicy::kLenient : OovPolicy::kStrict;
}

// Writes into a sibling staging directory and moves it into place only when
// the whole command succeeded.
class StagedDirectory {
 public:
  StagedDirectory(fs::path target, bool overwrite) : target_(std::move(target)) {
    if (fs::exists(target_) && !fs::is_empty(target_) && !overwrite)
      throw Error("output directory " + target_.string() +
                  " exists and is not empty (use --overwrite)");
    staging_ = target_;
    staging_ += ".partial";
    fs::remove_all(staging_);
    fs::create_directories(staging_);
  }
  ~StagedDirectory() {
    std::error_code ec;
    if (!committed_) fs::remove_all(staging_, ec);
  }
  const fs::path& path() const { return staging_; }
  void Commit() {
    if (fs::exists(target_)) fs::remove_all(target_);
    if (target_.has_parent_path()) fs::create_directories(target_.parent_path());
    fs::rename(staging_, target_);
    committed_ = true;
  }

 private:
  fs::path target_;
  fs::path staging_;
  bool committed_ = false;
};

// ---------------------------------------------------------------------------
// Shared option groups.

struct SplitOptions {
  std::optional<size_t> n_train, n_valid, n_test;
  uint64_t seed = 1;

  void Add(CLI::App* app) {
    app->add_option("--n-train", n_train, "Training utterances per language");
    app->add_option("--n-valid", n_valid, "Validation utterances per language");
    app->add_option("--n-test", n_test, "Test utterances per language");
    app->add_option("--split-seed", seed, "Seed for the per-language shuffle")
        ->capture_default_str();
  }

  SplitSpec Resolve(const SplitSpec& defaults) const {
    SplitSpec s = defaults;
    if (n_train) s.n_train = *n_train;
    if (n_valid) s.n_valid = *n_valid;
    if (n_test) s.n_test = *n_test;
    s.seed = seed;
    return s;
  }
};

json SplitToJson(const SplitSpec& s) {
  return {{"n_train", s.n_train}, {"n_valid", s.n_valid},
          {"n_test", s.n_test}, {"seed", s.seed}};
}

void StoreSplit(ModelBank& bank, const SplitSpec& s) {
  bank.metadata["split.n_train"] = std::to_string(s.n_train);
  bank.metadata["split.n_valid"] = std::to_string(s.n_valid);
  bank.metadata["split.n_test"] = std::to_string(s.n_test);
  bank.metadata["split.seed"] = std::to_string(s.seed);
}

SplitSpec SplitFromBank(const ModelBank& bank) {
  auto get = [&](const std::string& key) -> uint64_t {
    auto it = bank.metadata.find(key);
    if (it == bank.metadata.end())
      throw Error("bank metadata lacks '" + key + "'");
    return std::stoull(it->second);
  };
  return {get("split.n_train"), get("split.n_valid"), get("split.n_test"),
          get("split.seed")};
}

void CheckSplit(const SplitSpec& s, std::vector<std::string>& problems) {
  if (s.n_train < 1) problems.push_back("--n-train must be >= 1");
  if (s.n_test < 1) problems.push_back("--n-test must be >= 1");
}

void CheckAlphabet(const ModelBank& bank, const LabeledCorpus& corpus) {
  if (bank.alphabet.Hash() != corpus.alphabet.Hash())
    throw Error("alphabet mismatch: bank " + bank.alphabet.Hash() +
                " vs corpus " + corpus.alphabet.Hash());
}

std::string NgramLabel(int order, const SmoothingConfig& s) {
  return std::to_string(order) + "-gram " + s.Tag();
}

std::string RnnLabel(const ModelBank& bank) {
  auto it = bank.metadata.find("rnn.n_classes");
  auto ht = bank.metadata.find("rnn.hidden_size");
  std::string label = "RNNLM";
  if (it != bank.metadata.end()) label += " " + it->second + "-classes";
  if (ht != bank.metadata.end()) label += " h" + ht->second;
  return label;
}

std::string FusedLabel(double lambda) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "fused lambda=%.2f", lambda);
  return buf;
}

// ---------------------------------------------------------------------------
// generate

struct GenerateConfig {
  SyntheticConfig synth;
  std::string out;

  json ToJson() const {
    return {{"command", "generate"},
            {"languages", synth.n_languages},
            {"alphabet", synth.alphabet_size},
            {"order", synth.order},
            {"utts", synth.utts_per_language},
            {"mean_len", synth.mean_length},
            {"seed", synth.seed},
            {"out", out}};
  }

  void Validate() const {
    std::vector<std::string> p;
    if (synth.n_languages < 1) p.push_back("--languages must be >= 1");
    if (synth.alphabet_size < 2) p.push_back("--alphabet must be >= 2");
    if (synth.order != 1 && synth.order != 2) p.push_back("--order must be 1 or 2");
    if (synth.utts_per_language < 1) p.push_back("--utts must be >= 1");
    if (synth.mean_length < 5) p.push_back("--mean-len must be >= 5");
    ThrowIfProblems(p);
  }
};

int CmdGenerate(const GenerateConfig& cfg, std::ostream& out) {
  cfg.Validate();
  SyntheticCorpus synth = GenerateSynthetic(cfg.synth);
  WriteCorpus(synth.corpus, cfg.out);
  WriteSources(synth.sources, fs::path(cfg.out) / "sources.json");
  WriteJsonFile(fs::path(cfg.out) / "config.json", cfg.ToJson());
  out << "wrote " << synth.corpus.languages.size() << " languages, "
      << synth.corpus.NumUtterances() << " utterances to " << cfg.out << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// train

struct TrainConfig {
  std::string corpus;
  std::string out;
  std::string family = "ngram";
  int order = 3;
  std::string smoothing = "witten_bell";
  double add_k = 1.0;
  int hidden = 40;
  int classes = 0;  // 0: round(sqrt(|phones| + 1))
  TrainingConfig training;
  SplitOptions split;
  unsigned threads = 0;
  bool lenient = false;
  bool overwrite = false;

  bool WantsNgram() const { return family == "ngram" || family == "both"; }
  bool WantsRnn() const { return family == "rnn" || family == "both"; }

  SplitSpec ResolvedSplit() const {
    return split.Resolve(WantsRnn() ? SplitSpec::RnnProtocol()
                                    : SplitSpec::NgramProtocol());
  }

  json ToJson(int resolved_classes) const {
    json j = {{"command", "train"},
              {"corpus", corpus},
              {"out", out},
              {"family", family},
              {"split", SplitToJson(ResolvedSplit())},
              {"lenient", lenient}};
    if (WantsNgram()) {
      j["order"] = order;
      j["smoothing"] = smoothing;
      if (smoothing == "add_k") j["add_k"] = add_k;
    }
    if (WantsRnn()) {
      j["hidden"] = hidden;
      j["classes"] = resolved_classes;
      j["bptt"] = training.bptt_steps;
      j["lr"] = training.lr0;
      j["lr_threshold"] = training.lr_halving_threshold;
      j["max_epochs"] = training.max_epochs;
      j["grad_clip"] = training.grad_clip;
      j["init_scale"] = training.init_scale;
      j["rnn_seed"] = training.seed;
    }
    return j;
  }

  void Validate() const {
    std::vector<std::string> p;
    if (family != "ngram" && family != "rnn" && family != "both")
      p.push_back("--family must be ngram, rnn or both");
    if (WantsNgram()) {
      if (order < 1 || order > 6) p.push_back("--order must be in [1, 6]");
      if (smoothing != "witten_bell" && smoothing != "add_k")
        p.push_back("--smoothing must be witten_bell or add_k");
      if (smoothing == "add_k" && !(add_k > 0.0)) p.push_back("--add-k must be positive");
    }
    if (WantsRnn()) {
      if (hidden < 1) p.push_back("--hidden must be >= 1");
      if (classes < 0) p.push_back("--classes must be >= 0 (0 = automatic)");
      try {
        training.Validate();
      } catch (const Error& e) {
        p.push_back(e.what());
      }
    }
    const SplitSpec s = ResolvedSplit();
    CheckSplit(s, p);
    if (WantsRnn() && s.n_valid == 0)
      p.push_back(
          "RNN training needs validation utterances (default protocol "
          "300/30/45: 300 train, 30 valid, 45 test); --n-valid must be >= 1");
    ThrowIfProblems(p);
  }
};

int CmdTrain(const TrainConfig& cfg, std::ostream& out) {
  cfg.Validate();
  LabeledCorpus corpus = LoadCorpus(cfg.corpus, Oov(cfg.lenient));
  const SplitSpec spec = cfg.ResolvedSplit();
  CorpusSplits splits = SplitCorpus(corpus, spec);

  FamilySpec family;
  int classes = cfg.classes;
  if (cfg.WantsNgram())
    family.ngram = NgramFamily{cfg.order, ParseSmoothing(cfg.smoothing, cfg.add_k)};
  if (cfg.WantsRnn()) {
    if (classes == 0) classes = DefaultClassCount(corpus.alphabet);
    if (static_cast<size_t>(classes) > corpus.alphabet.num_predictable())
      throw UsageError("--classes " + std::to_string(classes) + " exceeds the " +
                       std::to_string(corpus.alphabet.num_predictable()) +
                       " predictable tokens");
    family.rnn = RnnFamily{cfg.hidden, classes, cfg.training};
  }

  StagedDirectory staged(cfg.out, cfg.overwrite);
  std::map<std::string, std::vector<EpochLog>> logs;
  BuildOptions options;
  options.threads = cfg.threads;
  options.rnn_logs = &logs;
  ModelBank bank = BuildBank(corpus.alphabet, splits, family, options);
  StoreSplit(bank, spec);
  bank.metadata["family"] = cfg.family;
  SaveBank(bank, staged.path());
  if (family.rnn) {
    std::ofstream log(staged.path() / "train_log.jsonl");
    for (const auto& [lang, entries] : logs)
      for (const EpochLog& e : entries)
        log << json{{"language", lang},
                    {"epoch", e.epoch},
                    {"learning_rate", e.learning_rate},
                    {"train_entropy", e.train_entropy},
                    {"valid_entropy", e.valid_entropy}}
                   .dump()
            << '\n';
  }
  WriteJsonFile(staged.path() / "config.json", cfg.ToJson(classes));
  staged.Commit();
  out << "trained " << bank.entries.size() << " languages (" << cfg.family
      << ") into " << cfg.out << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// classify

struct ClassifyConfig {
  std::string bank;
  std::string corpus;
  std::string input;
  std::string split = "test";
  std::string kind;  // empty: ngram when available, else rnn
  double lambda = 0.5;
  size_t nbest = 1;
  std::string out;
  bool lenient = false;

  json ToJson(const std::string& resolved_kind) const {
    json j = {{"command", "classify"}, {"bank", bank},     {"kind", resolved_kind},
              {"lambda", lambda},      {"nbest", nbest},   {"out", out},
              {"lenient", lenient}};
    if (!corpus.empty()) {
      j["corpus"] = corpus;
      j["split"] = split;
    }
    if (!input.empty()) j["input"] = input;
    return j;
  }

  void Validate() const {
    std::vector<std::string> p;
    if (corpus.empty() == input.empty())
      p.push_back("exactly one of --corpus and --input is required");
    if (split != "train" && split != "valid" && split != "test" && split != "all")
      p.push_back("--split must be train, valid, test or all");
    if (!kind.empty() && kind != "ngram" && kind != "rnn" && kind != "fused")
      p.push_back("--kind must be ngram, rnn or fused");
    if (!(lambda >= 0.0 && lambda <= 1.0)) p.push_back("--lambda must be in [0, 1]");
    if (nbest < 1) p.push_back("--nbest must be >= 1");
    ThrowIfProblems(p);
  }
};

std::vector<LabeledUtterance> UtterancesFromCorpus(const ModelBank& bank,
                                                   const std::string& dir,
                                                   const std::string& part,
                                                   bool lenient) {
  LabeledCorpus corpus = LoadCorpus(dir, Oov(lenient));
  CheckAlphabet(bank, corpus);
  std::vector<LabeledUtterance> out;
  if (part == "all") {
    for (const auto& [lang, utts] : corpus.languages)
      for (const Utterance& u : utts) out.push_back({lang, u});
    return out;
  }
  CorpusSplits splits = SplitCorpus(corpus, SplitFromBank(bank));
  return LabeledSlice(splits, part == "train"   ? SplitPart::kTrain
                              : part == "valid" ? SplitPart::kValid
                                                : SplitPart::kTest);
}

std::vector<LabeledUtterance> UtterancesFromFile(const ModelBank& bank,
                                                 const std::string& path,
                                                 bool lenient) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  std::vector<LabeledUtterance> out;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    out.push_back({"", EncodeUtterance(bank.alphabet, line,
                                       path + ":" + std::to_string(line_no),
                                       Oov(lenient))});
  }
  if (out.empty()) throw Error(path + " contains no utterances");
  return out;
}

ScoreKind DefaultKind(const ModelBank& bank, const std::string& requested) {
  if (!requested.empty()) return ParseScoreKind(requested);
  return bank.HasNgram() ? ScoreKind::kNgramPerplexity : ScoreKind::kRnnPerplexity;
}

int CmdClassify(const ClassifyConfig& cfg, std::ostream& out) {
  cfg.Validate();
  ModelBank bank = LoadBank(cfg.bank);
  const ScoreKind kind = DefaultKind(bank, cfg.kind);
  if (cfg.nbest > bank.entries.size())
    throw UsageError("--nbest " + std::to_string(cfg.nbest) + " exceeds the " +
                     std::to_string(bank.entries.size()) + " bank languages");
  if ((kind != ScoreKind::kRnnPerplexity && !bank.HasNgram()) ||
      (kind != ScoreKind::kNgramPerplexity && !bank.HasRnn()))
    throw Error("bank lacks the models needed for score kind " + ScoreKindName(kind));

  const std::vector<LabeledUtterance> utts =
      cfg.corpus.empty() ? UtterancesFromFile(bank, cfg.input, cfg.lenient)
                         : UtterancesFromCorpus(bank, cfg.corpus, cfg.split, cfg.lenient);

  const ScoreOptions options{kind, cfg.lambda, Oov(cfg.lenient)};
  std::ostringstream records;
  for (const LabeledUtterance& lu : utts) {
    ClassificationResult r = Classify(bank, lu.utterance, options);
    json rec;
    rec["utterance"] = lu.utterance.source_id;
    if (!lu.language.empty()) rec["truth"] = lu.language;
    rec["decision"] = r.decision;
    rec["score_kind"] = ScoreKindName(kind);
    json nbest = json::array();
    for (size_t i = 0; i < cfg.nbest; ++i)
      nbest.push_back({{"language", r.ranked[i].language}, {"score", r.ranked[i].score}});
    rec["nbest"] = std::move(nbest);
    records << rec.dump() << '\n';
  }

  const fs::path out_path(cfg.out);
  if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
  std::ofstream file(out_path);
  file << records.str();
  if (!file) throw Error("failed to write " + cfg.out);
  WriteJsonFile(cfg.out + ".config.json", cfg.ToJson(ScoreKindName(kind)));
  out << "classified " << utts.size() << " utterances into " << cfg.out << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateConfig {
  std::string corpus;
  std::string out;
  std::vector<int> orders;
  std::string smoothing = "witten_bell";
  double add_k = 1.0;
  std::vector<std::string> banks;
  std::vector<std::string> kinds;  // empty: every family the bank holds
  double lambda = 0.5;
  SplitOptions split;
  unsigned threads = 0;
  bool lenient = false;
  bool overwrite = false;

  json ToJson() const {
    json j = {{"command", "evaluate"}, {"corpus", corpus},   {"out", out},
              {"orders", orders},      {"smoothing", smoothing},
              {"banks", banks},        {"kinds", kinds},     {"lambda", lambda},
              {"lenient", lenient}};
    if (smoothing == "add_k") j["add_k"] = add_k;
    if (!orders.empty()) j["ngram_split"] = SplitToJson(split.Resolve(SplitSpec::NgramProtocol()));
    j["split_seed"] = split.seed;
    if (split.n_train) j["n_train"] = *split.n_train;
    if (split.n_valid) j["n_valid"] = *split.n_valid;
    if (split.n_test) j["n_test"] = *split.n_test;
    return j;
  }

  void Validate() const {
    std::vector<std::string> p;
    if (orders.empty() && banks.empty())
      p.push_back("nothing to evaluate: give --orders and/or --bank");
    for (int o : orders)
      if (o < 1 || o > 6)
        p.push_back("--orders value " + std::to_string(o) + " outside [1, 6]");
    if (smoothing != "witten_bell" && smoothing != "add_k")
      p.push_back("--smoothing must be witten_bell or add_k");
    for (const std::string& k : kinds)
      if (k != "ngram" && k != "rnn" && k != "fused")
        p.push_back("--kinds value '" + k + "' is not ngram, rnn or fused");
    if (!(lambda >= 0.0 && lambda <= 1.0)) p.push_back("--lambda must be in [0, 1]");
    if (!orders.empty()) CheckSplit(split.Resolve(SplitSpec::NgramProtocol()), p);
    ThrowIfProblems(p);
  }
};

int CmdEvaluate(const EvaluateConfig& cfg, std::ostream& out) {
  cfg.Validate();
  LabeledCorpus corpus = LoadCorpus(cfg.corpus, Oov(cfg.lenient));
  StagedDirectory staged(cfg.out, cfg.overwrite);

  std::vector<EvalReport> reports;
  std::ostringstream decisions;
  auto record = [&](EvalRun run) {
    for (const Decision& d : run.decisions)
      decisions << json{{"system", run.report.system_label},
                        {"utterance", d.utterance_id},
                        {"truth", d.truth},
                        {"decision", d.decision}}
                       .dump()
                << '\n';
    reports.push_back(std::move(run.report));
  };

  if (!cfg.orders.empty()) {
    const SplitSpec spec = cfg.split.Resolve(SplitSpec::NgramProtocol());
    CorpusSplits splits = SplitCorpus(corpus, spec);
    const SmoothingConfig smoothing = ParseSmoothing(cfg.smoothing, cfg.add_k);
    BuildOptions options;
    options.threads = cfg.threads;
    for (int order : cfg.orders) {
      FamilySpec family;
      family.ngram = NgramFamily{order, smoothing};
      ModelBank bank = BuildBank(corpus.alphabet, splits, family, options);
      record(EvaluateBank(bank, TestSets(splits),
                          {ScoreKind::kNgramPerplexity, 0.5, Oov(cfg.lenient)},
                          NgramLabel(order, smoothing)));
    }
  }

  for (const std::string& bank_dir : cfg.banks) {
    ModelBank bank = LoadBank(bank_dir);
    CheckAlphabet(bank, corpus);
    const SplitSpec spec = cfg.split.Resolve(SplitFromBank(bank));
    CorpusSplits splits = SplitCorpus(corpus, spec);
    const auto test = TestSets(splits);

    std::vector<ScoreKind> kinds;
    if (cfg.kinds.empty()) {
      if (bank.HasNgram()) kinds.push_back(ScoreKind::kNgramPerplexity);
      if (bank.HasRnn()) kinds.push_back(ScoreKind::kRnnPerplexity);
      if (bank.HasNgram() && bank.HasRnn()) kinds.push_back(ScoreKind::kFused);
    } else {
      for (const std::string& k : cfg.kinds) kinds.push_back(ParseScoreKind(k));
    }
    for (ScoreKind kind : kinds) {
      if ((kind != ScoreKind::kRnnPerplexity && !bank.HasNgram()) ||
          (kind != ScoreKind::kNgramPerplexity && !bank.HasRnn()))
        throw Error("bank " + bank_dir + " has no models for score kind " +
                    ScoreKindName(kind));
      std::string label;
      switch (kind) {
        case ScoreKind::kNgramPerplexity:
          label = NgramLabel(std::stoi(bank.metadata.at("ngram.order")),
                             ParseSmoothing(bank.metadata.at("ngram.smoothing"),
                                            cfg.add_k));
          break;
        case ScoreKind::kRnnPerplexity: label = RnnLabel(bank); break;
        case ScoreKind::kFused: label = FusedLabel(cfg.lambda); break;
      }
      record(EvaluateBank(bank, test, {kind, cfg.lambda, Oov(cfg.lenient)}, label));
    }
  }

  // Distinct labels keep the table readable when the same system appears
  // more than once.
  std::map<std::string, int> seen;
  for (EvalReport& r : reports)
    if (int n = seen[r.system_label]++; n > 0)
      r.system_label += " #" + std::to_string(n + 1);

  Comparison comparison = CompareSystems(std::move(reports));
  std::ostringstream table, records;
  WriteTable(comparison, table);
  WriteReportRecords(comparison, records);
  {
    std::ofstream f(staged.path() / "report.txt");
    f << table.str();
    std::ofstream g(staged.path() / "report.jsonl");
    g << records.str();
    std::ofstream h(staged.path() / "decisions.jsonl");
    h << decisions.str();
    if (!f || !g || !h) throw Error("failed to write evaluation reports");
  }
  WriteJsonFile(staged.path() / "config.json", cfg.ToJson());
  staged.Commit();
  out << table.str();
  return kExitOk;
}

// ---------------------------------------------------------------------------
// tune-fusion

struct TuneConfig {
  std::string bank;
  std::string corpus;
  std::vector<double> grid = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5,
                              0.6, 0.7, 0.8, 0.9, 1.0};
  std::string split = "valid";
  std::string out;
  bool lenient = false;

  json ToJson() const {
    return {{"command", "tune-fusion"}, {"bank", bank},   {"corpus", corpus},
            {"grid", grid},             {"split", split}, {"out", out},
            {"lenient", lenient}};
  }

  void Validate() const {
    std::vector<std::string> p;
    if (grid.empty()) p.push_back("--grid must not be empty");
    for (double l : grid)
      if (!(l >= 0.0 && l <= 1.0)) p.push_back("--grid values must be in [0, 1]");
    if (split != "train" && split != "valid" && split != "test")
      p.push_back("--split must be train, valid or test");
    ThrowIfProblems(p);
  }
};

int CmdTune(const TuneConfig& cfg, std::ostream& out) {
  cfg.Validate();
  ModelBank bank = LoadBank(cfg.bank);
  if (!bank.HasNgram() || !bank.HasRnn())
    throw Error("tune-fusion needs a bank trained with --family both");
  const std::vector<LabeledUtterance> validation =
      UtterancesFromCorpus(bank, cfg.corpus, cfg.split, cfg.lenient);
  if (validation.empty())
    throw Error("the bank's split has no '" + cfg.split + "' utterances");
  LambdaSweep sweep = TuneLambda(bank, validation, cfg.grid, Oov(cfg.lenient));

  fs::create_directories(cfg.out);
  json result;
  result["best_lambda"] = sweep.best_lambda;
  json rows = json::array();
  for (const auto& [lambda, acc] : sweep.accuracy)
    rows.push_back({{"lambda", lambda}, {"accuracy", acc}});
  result["accuracy"] = std::move(rows);
  WriteJsonFile(fs::path(cfg.out) / "tuning.json", result);
  WriteJsonFile(fs::path(cfg.out) / "config.json", cfg.ToJson());
  out << "best lambda " << sweep.best_lambda << '\n';
  return kExitOk;
}

}  // namespace

int Run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err) {
  CLI::App app{"phonolid: phonotactic language identification from phone sequences"};
  app.name("phonolid");
  app.require_subcommand(1);

  GenerateConfig gen;
  CLI::App* g = app.add_subcommand("generate", "Write a synthetic Markov-source corpus");
  g->add_option("--languages", gen.synth.n_languages, "Number of languages")->capture_default_str();
  g->add_option("--alphabet", gen.synth.alphabet_size, "Phone inventory size")->capture_default_str();
  g->add_option("--order", gen.synth.order, "Markov order of the sources (1 or 2)")->capture_default_str();
  g->add_option("--utts", gen.synth.utts_per_language, "Utterances per language")->capture_default_str();
  g->add_option("--mean-len", gen.synth.mean_length, "Mean utterance length in phones")->capture_default_str();
  g->add_option("--seed", gen.synth.seed, "Random seed")->capture_default_str();
  g->add_option("--out", gen.out, "Output corpus directory")->required();

  TrainConfig train;
  CLI::App* t = app.add_subcommand("train", "Train a per-language model bank");
  t->add_option("--corpus", train.corpus, "Corpus directory")->required();
  t->add_option("--out", train.out, "Output bank directory")->required();
  t->add_option("--family", train.family, "ngram, rnn or both")->capture_default_str();
  t->add_option("--order", train.order, "n-gram order (1-6)")->capture_default_str();
  t->add_option("--smoothing", train.smoothing, "witten_bell or add_k")->capture_default_str();
  t->add_option("--add-k", train.add_k, "Constant for add_k smoothing")->capture_default_str();
  t->add_option("--hidden", train.hidden, "RNN hidden units")->capture_default_str();
  t->add_option("--classes", train.classes, "RNN output classes (0 = round(sqrt(|V|)))")->capture_default_str();
  t->add_option("--bptt", train.training.bptt_steps, "BPTT steps (1-8)")->capture_default_str();
  t->add_option("--lr", train.training.lr0, "Initial learning rate")->capture_default_str();
  t->add_option("--lr-threshold", train.training.lr_halving_threshold,
                "Relative validation improvement below which the rate halves")->capture_default_str();
  t->add_option("--max-epochs", train.training.max_epochs, "Epoch limit")->capture_default_str();
  t->add_option("--grad-clip", train.training.grad_clip, "Per-component gradient clip")->capture_default_str();
  t->add_option("--init-scale", train.training.init_scale, "Uniform init half-width")->capture_default_str();
  t->add_option("--rnn-seed", train.training.seed, "RNN initialization seed")->capture_default_str();
  t->add_option("--threads", train.threads, "Training threads (0 = all cores)")->capture_default_str();
  t->add_flag("--lenient", train.lenient, "Map unknown phones to <unk> instead of failing");
  t->add_flag("--overwrite", train.overwrite, "Replace an existing output directory");
  train.split.Add(t);

  ClassifyConfig cls;
  CLI::App* c = app.add_subcommand("classify", "Classify utterances with a trained bank");
  c->add_option("--bank", cls.bank, "Bank directory")->required();
  c->add_option("--corpus", cls.corpus, "Corpus directory (scores one split)");
  c->add_option("--input", cls.input, "File with one utterance per line");
  c->add_option("--split", cls.split, "train, valid, test or all")->capture_default_str();
  c->add_option("--kind", cls.kind, "ngram, rnn or fused (default: ngram if present)");
  c->add_option("--lambda", cls.lambda, "n-gram weight for fused scores")->capture_default_str();
  c->add_option("--nbest", cls.nbest, "Languages listed per utterance")->capture_default_str();
  c->add_option("--out", cls.out, "Output decision records (JSON lines)")->required();
  c->add_flag("--lenient", cls.lenient, "Map unknown phones to <unk> (n-gram scoring only)");

  EvaluateConfig ev;
  CLI::App* e = app.add_subcommand("evaluate", "Per-language accuracy report");
  e->add_option("--corpus", ev.corpus, "Corpus directory")->required();
  e->add_option("--out", ev.out, "Output report directory")->required();
  e->add_option("--orders", ev.orders, "n-gram orders to train and evaluate")->delimiter(',');
  e->add_option("--smoothing", ev.smoothing, "witten_bell or add_k")->capture_default_str();
  e->add_option("--add-k", ev.add_k, "Constant for add_k smoothing")->capture_default_str();
  e->add_option("--bank", ev.banks, "Trained bank directory (repeatable)");
  e->add_option("--kinds", ev.kinds, "Score kinds for --bank (ngram,rnn,fused)")->delimiter(',');
  e->add_option("--lambda", ev.lambda, "n-gram weight for fused scores")->capture_default_str();
  e->add_option("--threads", ev.threads, "Training threads (0 = all cores)")->capture_default_str();
  e->add_flag("--lenient", ev.lenient, "Map unknown phones to <unk> (n-gram scoring only)");
  e->add_flag("--overwrite", ev.overwrite, "Replace an existing output directory");
  ev.split.Add(e);

  TuneConfig tune;
  CLI::App* f = app.add_subcommand("tune-fusion", "Pick the fusion weight on validation data");
  f->add_option("--bank", tune.bank, "Bank trained with --family both")->required();
  f->add_option("--corpus", tune.corpus, "Corpus directory")->required();
  f->add_option("--grid", tune.grid, "Candidate n-gram weights")->delimiter(',');
  f->add_option("--split", tune.split, "Split scored for tuning")->capture_default_str();
  f->add_option("--out", tune.out, "Output directory")->required();
  f->add_flag("--lenient", tune.lenient, "Map unknown phones to <unk> (n-gram scoring only)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& ex) {
    const int code = app.exit(ex, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (g->parsed()) return CmdGenerate(gen, out);
    if (t->parsed()) return CmdTrain(train, out);
    if (c->parsed()) return CmdClassify(cls, out);
    if (e->parsed()) return CmdEvaluate(ev, out);
    if (f->parsed()) return CmdTune(tune, out);
  } catch (const UsageError& ex) {
    err << "phonolid: " << ex.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& ex) {
    err << "phonolid: error: " << ex.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace phonolid::cli
