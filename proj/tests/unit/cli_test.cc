#include <sstream>

#include "cli.h"
#include "doctest.h"
#include "json.hpp"
#include "phonolid/classifier.h"
#include "phonolid/corpus.h"
#include "test_util.h"

namespace phonolid {
namespace {

using testing::ReadText;
using testing::TempDir;

struct Outcome {
  int code;
  std::string out, err;
};

Outcome RunCli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::Run(args, out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::string> Lines(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  return lines;
}

// Small corpus plus split flags that fit it.
struct Fixture {
  TempDir dir;
  std::string corpus = (dir / "corpus").string();
  std::vector<std::string> split = {"--n-train", "40", "--n-valid", "5", "--n-test", "10"};

  Fixture() {
    Outcome g = RunCli({"generate", "--languages", "3", "--alphabet", "6", "--utts", "60",
                        "--mean-len", "10", "--seed", "3", "--out", corpus});
    REQUIRE(g.code == 0);
  }

  std::vector<std::string> With(std::vector<std::string> args) const {
    args.insert(args.end(), split.begin(), split.end());
    return args;
  }
};

TEST_CASE("generate writes a loadable corpus") {
  Fixture f;
  LabeledCorpus corpus = LoadCorpus(f.corpus);
  CHECK(corpus.languages.size() == 3);
  CHECK(corpus.alphabet.size() == 6);
  CHECK(std::filesystem::exists(f.dir / "corpus/sources.json"));
  CHECK(std::filesystem::exists(f.dir / "corpus/config.json"));
  SyntheticConfig cfg{3, 6, 2, 60, 10, 3};
  CHECK(corpus == GenerateSynthetic(cfg).corpus);
}

TEST_CASE("generate validates its flags") {
  TempDir dir;
  CHECK(RunCli({"generate", "--languages", "2"}).code == cli::kExitUsage);
  Outcome zero = RunCli({"generate", "--languages", "0", "--out", (dir / "x").string()});
  CHECK(zero.code == cli::kExitUsage);
  CHECK(zero.err.find("languages") != std::string::npos);
  CHECK(RunCli({}).code == cli::kExitUsage);
  CHECK(RunCli({"bogus"}).code == cli::kExitUsage);
}

TEST_CASE("train an n-gram bank") {
  Fixture f;
  const std::string bank = (f.dir / "bank").string();
  Outcome t = RunCli(f.With({"train", "--corpus", f.corpus, "--family", "ngram", "--order",
                             "3", "--out", bank}));
  REQUIRE(t.code == 0);
  CHECK(std::filesystem::exists(f.dir / "bank/manifest.json"));
  CHECK(std::filesystem::exists(f.dir / "bank/config.json"));
  size_t models = 0;
  for (const auto& e : std::filesystem::directory_iterator(f.dir / "bank/models"))
    models += e.path().extension() == ".arpa";
  CHECK(models == 3);
  ModelBank loaded = LoadBank(bank);
  CHECK(loaded.entries.begin()->second.ngram->order() == 3);
  CHECK_FALSE(std::filesystem::exists(bank + ".partial"));
  // Existing output is kept unless --overwrite is given.
  CHECK(RunCli(f.With({"train", "--corpus", f.corpus, "--out", bank})).code != 0);
  CHECK(RunCli(f.With({"train", "--corpus", f.corpus, "--out", bank, "--overwrite"})).code == 0);
}

TEST_CASE("rnn training without validation data is rejected") {
  Fixture f;
  Outcome t = RunCli({"train", "--corpus", f.corpus, "--family", "rnn", "--n-train", "40",
                      "--n-valid", "0", "--n-test", "10", "--out", (f.dir / "b").string()});
  CHECK(t.code == cli::kExitUsage);
  CHECK(t.err.find("300/30/45") != std::string::npos);
  // The default RNN protocol needs 375 utterances per language.
  Outcome d = RunCli({"train", "--corpus", f.corpus, "--family", "rnn",
                      "--out", (f.dir / "b").string()});
  CHECK(d.code != 0);
  CHECK_FALSE(std::filesystem::exists(f.dir / "b"));
}

TEST_CASE("classify the test split") {
  Fixture f;
  const std::string bank = (f.dir / "bank").string();
  REQUIRE(RunCli(f.With({"train", "--corpus", f.corpus, "--family", "both", "--hidden", "6",
                         "--classes", "2", "--max-epochs", "2", "--out", bank})).code == 0);
  const std::string all = (f.dir / "all.jsonl").string();
  const std::string top = (f.dir / "top.jsonl").string();
  REQUIRE(RunCli({"classify", "--bank", bank, "--corpus", f.corpus, "--nbest", "3",
                         "--out", all}).code == 0);
  REQUIRE(RunCli({"classify", "--bank", bank, "--corpus", f.corpus, "--nbest", "1",
                         "--out", top}).code == 0);
  auto a = Lines(ReadText(all));
  auto b = Lines(ReadText(top));
  REQUIRE(a.size() == 30);
  REQUIRE(b.size() == 30);
  for (size_t i = 0; i < a.size(); ++i) {
    auto ja = nlohmann::json::parse(a[i]);
    auto jb = nlohmann::json::parse(b[i]);
    CHECK(ja["decision"] == jb["decision"]);
    CHECK(ja["nbest"].size() == 3);
    CHECK(ja["nbest"][0]["language"] == ja["decision"]);
  }
  CHECK(std::filesystem::exists(all + ".config.json"));
  Outcome fused = RunCli({"classify", "--bank", bank, "--corpus", f.corpus, "--kind",
                                 "fused", "--lambda", "0.3", "--out", top});
  CHECK(fused.code == 0);
  Outcome tune = RunCli({"tune-fusion", "--bank", bank, "--corpus", f.corpus,
                                "--grid", "0,0.5,1", "--out", (f.dir / "tune").string()});
  CHECK(tune.code == 0);
  CHECK(std::filesystem::exists(f.dir / "tune/tuning.json"));
}

TEST_CASE("classify input file errors") {
  Fixture f;
  const std::string bank = (f.dir / "bank").string();
  REQUIRE(RunCli(f.With({"train", "--corpus", f.corpus, "--out", bank})).code == 0);
  testing::WriteText(f.dir / "in.txt", "t0 t1\nt2 zz t1\n");
  Outcome bad = RunCli({"classify", "--bank", bank, "--input", (f.dir / "in.txt").string(),
                        "--out", (f.dir / "o.jsonl").string()});
  CHECK(bad.code == cli::kExitFailure);
  CHECK(bad.err.find("zz") != std::string::npos);
  CHECK(bad.err.find(":2") != std::string::npos);
  Outcome lenient = RunCli({"classify", "--bank", bank, "--input", (f.dir / "in.txt").string(),
                            "--lenient", "--out", (f.dir / "o.jsonl").string()});
  CHECK(lenient.code == 0);
  CHECK(Lines(ReadText(f.dir / "o.jsonl")).size() == 2);

  // A corpus over another alphabet cannot be scored with this bank.
  const std::string other = (f.dir / "other").string();
  REQUIRE(RunCli({"generate", "--languages", "3", "--alphabet", "7", "--utts", "60",
                  "--mean-len", "10", "--out", other}).code == 0);
  Outcome mismatch = RunCli({"classify", "--bank", bank, "--corpus", other,
                                    "--out", (f.dir / "m.jsonl").string()});
  CHECK(mismatch.code == cli::kExitFailure);
  CHECK(mismatch.err.find("alphabet") != std::string::npos);
}

TEST_CASE("evaluate n-gram orders") {
  Fixture f;
  const std::string out = (f.dir / "eval").string();
  Outcome e = RunCli(f.With({"evaluate", "--corpus", f.corpus, "--orders", "1,2,3", "--out", out}));
  REQUIRE(e.code == 0);
  auto records = Lines(ReadText(f.dir / "eval/report.jsonl"));
  CHECK(records.size() == 3);
  CHECK(e.out.find("Avg Accuracy") != std::string::npos);
  CHECK(ReadText(f.dir / "eval/report.txt") == e.out);
  CHECK(std::filesystem::exists(f.dir / "eval/decisions.jsonl"));
  CHECK(std::filesystem::exists(f.dir / "eval/config.json"));

  Outcome single = RunCli(f.With({"evaluate", "--corpus", f.corpus, "--orders", "2",
                                  "--out", (f.dir / "one").string()}));
  REQUIRE(single.code == 0);
  CHECK(Lines(ReadText(f.dir / "one/report.jsonl")).size() == 1);

  Outcome seven = RunCli(f.With({"evaluate", "--corpus", f.corpus, "--orders", "7",
                                 "--out", (f.dir / "seven").string()}));
  CHECK(seven.code == cli::kExitUsage);
}

TEST_CASE("evaluate a bank that lacks the requested family") {
  Fixture f;
  const std::string bank = (f.dir / "bank").string();
  REQUIRE(RunCli(f.With({"train", "--corpus", f.corpus, "--out", bank})).code == 0);
  Outcome e = RunCli(f.With({"evaluate", "--corpus", f.corpus, "--bank", bank, "--kinds", "rnn",
                             "--out", (f.dir / "eval").string()}));
  CHECK(e.code != 0);
}

TEST_CASE("train and evaluate are deterministic") {
  Fixture f;
  std::string reports[2];
  for (int run = 0; run < 2; ++run) {
    const std::string bank = (f.dir / ("bank" + std::to_string(run))).string();
    const std::string out = (f.dir / ("eval" + std::to_string(run))).string();
    REQUIRE(RunCli(f.With({"train", "--corpus", f.corpus, "--family", "both", "--hidden", "5",
                           "--classes", "2", "--max-epochs", "2", "--out", bank})).code == 0);
    REQUIRE(RunCli(f.With({"evaluate", "--corpus", f.corpus, "--bank", bank, "--kinds",
                           "ngram,rnn,fused", "--out", out})).code == 0);
    reports[run] = ReadText(out + "/report.txt") + ReadText(out + "/report.jsonl") +
                   ReadText(out + "/decisions.jsonl");
  }
  CHECK(reports[0] == reports[1]);
}

}  // namespace
}  // namespace phonolid
