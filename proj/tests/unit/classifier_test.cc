#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "phonolid/classifier.h"
#include "phonolid/error.h"
#include "test_util.h"

namespace phonolid {
namespace {

using testing::Utt;
using testing::Utts;

const PhoneAlphabet kAbcd({"a", "b", "c", "d"});

// Order-1 source over a..d where `partner[x]` follows x with probability 0.7
// and utterances average 20 phones.
MarkovSource PairedSource(const std::vector<int>& partner) {
  const size_t width = kAbcd.num_predictable();
  std::vector<double> table;
  for (size_t h = 0; h <= kAbcd.size(); ++h) {
    std::vector<double> row(width, 0.0);
    if (h == kAbcd.size()) {
      for (size_t w = 0; w < kAbcd.size(); ++w) row[w] = 0.25;
    } else {
      for (size_t w = 0; w < kAbcd.size(); ++w) row[w] = 0.25 / 3;
      row[static_cast<size_t>(partner[h])] = 0.7;
      row[kAbcd.size()] = 0.05;
    }
    table.insert(table.end(), row.begin(), row.end());
  }
  return MarkovSource(kAbcd, 1, table);
}

struct TwoSources {
  MarkovSource a = PairedSource({1, 0, 3, 2});
  MarkovSource b = PairedSource({2, 3, 0, 1});
  ModelBank bank;
  std::vector<Utterance> test_a;

  TwoSources() {
    Rng rng(17);
    std::vector<Utterance> train_a, train_b;
    for (int i = 0; i < 200; ++i) {
      train_a.push_back(a.Sample(rng, "a"));
      train_b.push_back(b.Sample(rng, "b"));
    }
    for (int i = 0; i < 30; ++i) test_a.push_back(a.Sample(rng, "t"));
    bank.alphabet = kAbcd;
    bank.entries["A"].ngram = TrainNgram(kAbcd, train_a, 3);
    bank.entries["B"].ngram = TrainNgram(kAbcd, train_b, 3);
  }
};

ModelBank UniformBank(const std::vector<std::string>& langs) {
  ModelBank bank;
  bank.alphabet = kAbcd;
  for (const auto& l : langs) {
    bank.entries[l].ngram = TrainNgram(kAbcd, Utts(kAbcd, {"a b c d"}), 1);
    bank.entries[l].rnn = RnnLm(kAbcd, 3, ClassAssignment::FromClassOf({0, 0, 0, 0, 0}, 1));
  }
  return bank;
}

TEST_CASE("single-language bank") {
  ModelBank bank;
  bank.alphabet = kAbcd;
  bank.entries["only"].ngram = TrainNgram(kAbcd, Utts(kAbcd, {"a b"}), 2);
  ClassificationResult r = Classify(bank, Utt(kAbcd, "d d c"), {});
  CHECK(r.decision == "only");
  CHECK(r.ranked.size() == 1);
}

TEST_CASE("exact ties go to the smaller language id") {
  ModelBank bank = UniformBank({"zz", "mm", "aa"});
  for (ScoreKind kind : {ScoreKind::kNgramPerplexity, ScoreKind::kRnnPerplexity,
                         ScoreKind::kFused}) {
    ClassificationResult r = Classify(bank, Utt(kAbcd, "a b"), {kind});
    CHECK(r.decision == "aa");
    CHECK(r.ranked[1].language == "mm");
    CHECK(r.ranked[2].language == "zz");
  }
  ClassificationResult r = RankScores({{"b", 2.0}, {"a", 2.0}, {"c", 1.0}},
                                      ScoreKind::kNgramPerplexity);
  CHECK(r.decision == "c");
  CHECK(r.ranked[1].language == "a");
}

TEST_CASE("decision agrees with the true source") {
  TwoSources s;
  int oracle_a = 0, agree = 0;
  for (const auto& u : s.test_a) {
    const bool oracle = TrueSourceLogProb(s.a, u) > TrueSourceLogProb(s.b, u);
    const bool model = Classify(s.bank, u, {}).decision == "A";
    oracle_a += oracle;
    agree += oracle == model;
  }
  CHECK(oracle_a >= 27);
  CHECK(agree == 30);
}

TEST_CASE("n-best is a prefix of the full ranking") {
  TwoSources s;
  s.bank.entries["C"].ngram = s.bank.entries["A"].ngram;
  for (const auto& u : s.test_a) {
    ClassificationResult full = Classify(s.bank, u, {});
    for (size_t n = 1; n <= 3; ++n) {
      auto top = ClassifyNbest(s.bank, u, {}, n);
      REQUIRE(top.size() == n);
      for (size_t i = 0; i < n; ++i) {
        CHECK(top[i].language == full.ranked[i].language);
        CHECK(top[i].score == full.ranked[i].score);
      }
    }
    CHECK(ClassifyNbest(s.bank, u, {}, 1)[0].language == full.decision);
  }
  CHECK_THROWS_AS(ClassifyNbest(s.bank, s.test_a[0], {}, 0), Error);
  CHECK_THROWS_AS(ClassifyNbest(s.bank, s.test_a[0], {}, 4), Error);
}

TEST_CASE("rankings do not depend on insertion order") {
  TwoSources s;
  std::vector<std::string> langs = {"A", "B", "C", "D"};
  ModelBank reference;
  reference.alphabet = kAbcd;
  for (const auto& l : langs)
    reference.entries[l].ngram = *s.bank.entries[l == "C" || l == "A" ? "A" : "B"].ngram;
  Rng rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    rng.Shuffle(langs);
    ModelBank permuted;
    permuted.alphabet = kAbcd;
    for (const auto& l : langs) permuted.entries[l] = reference.entries[l];
    for (size_t i = 0; i < 5; ++i) {
      auto x = Classify(reference, s.test_a[i], {}).ranked;
      auto y = Classify(permuted, s.test_a[i], {}).ranked;
      REQUIRE(x.size() == y.size());
      for (size_t k = 0; k < x.size(); ++k) {
        CHECK(x[k].language == y[k].language);
        CHECK(x[k].score == y[k].score);
      }
    }
  }
}

TEST_CASE("fusion arithmetic") {
  CHECK(FuseScores(5.0, 5.0, 0.3) == doctest::Approx(std::log(5.0)));
  CHECK(FuseScores(4.0, 9.0, 1.0) == std::log(4.0));
  CHECK(FuseScores(4.0, 9.0, 0.0) == std::log(9.0));
  CHECK_THROWS_AS(FuseScores(4.0, 9.0, 1.5), Error);
  CHECK_THROWS_AS(FuseScores(0.5, 9.0, 0.5), Error);
}

TEST_CASE("missing family is an error") {
  TwoSources s;
  CHECK_THROWS_AS(Classify(s.bank, s.test_a[0], {ScoreKind::kRnnPerplexity}), Error);
  std::vector<LabeledUtterance> valid = {{"A", s.test_a[0]}};
  const double grid[] = {0.5};
  CHECK_THROWS_AS(TuneLambda(s.bank, valid, grid), Error);
}

TEST_CASE("lambda tuning tie rules") {
  ModelBank bank = UniformBank({"x", "y"});
  std::vector<LabeledUtterance> valid = {{"x", Utt(kAbcd, "a b")},
                                         {"y", Utt(kAbcd, "c")}};
  const double one[] = {0.7};
  CHECK(TuneLambda(bank, valid, one).best_lambda == 0.7);
  const double grid[] = {1.0, 0.5, 0.0};
  LambdaSweep sweep = TuneLambda(bank, valid, grid);
  CHECK(sweep.best_lambda == 0.0);
  REQUIRE(sweep.accuracy.size() == 3);
  for (const auto& [l, acc] : sweep.accuracy) CHECK(acc == 50.0);
}

TEST_CASE("bank validation") {
  ModelBank bank;
  bank.alphabet = kAbcd;
  CHECK_THROWS_AS(bank.Validate(), Error);
  bank.entries["x"];
  CHECK_THROWS_AS(bank.Validate(), Error);
  bank.entries["x"].ngram = TrainNgram(PhoneAlphabet({"a"}), Utts(PhoneAlphabet({"a"}), {"a"}), 1);
  CHECK_THROWS_AS(bank.Validate(), Error);
}

TEST_CASE("build bank names a language without training data") {
  CorpusSplits splits;
  splits["good"].train = Utts(kAbcd, {"a b"});
  splits["good"].test = Utts(kAbcd, {"a"});
  splits["empty"].test = Utts(kAbcd, {"a"});
  FamilySpec family;
  family.ngram = NgramFamily{};
  CHECK_THROWS_WITH_AS(BuildBank(kAbcd, splits, family), doctest::Contains("empty"), Error);
}

TEST_CASE("build, save and load a bank") {
  CorpusSplits splits;
  Rng rng(8);
  for (const std::string lang : {"p", "q"}) {
    splits[lang].train = testing::RandomUtterances(kAbcd, rng, 20, 10);
    splits[lang].valid = testing::RandomUtterances(kAbcd, rng, 5, 10);
    splits[lang].test = testing::RandomUtterances(kAbcd, rng, 5, 10);
  }
  FamilySpec family;
  family.ngram = NgramFamily{2, {}};
  RnnFamily rnn;
  rnn.hidden_size = 4;
  rnn.n_classes = 2;
  rnn.training.max_epochs = 2;
  family.rnn = rnn;
  ModelBank bank = BuildBank(kAbcd, splits, family, {1, nullptr});
  CHECK(bank.HasNgram());
  CHECK(bank.HasRnn());
  CHECK(bank.entries.at("p").rnn->hidden_size() == 4);
  testing::TempDir dir;
  SaveBank(bank, dir.path());
  CHECK(std::filesystem::exists(dir / "manifest.json"));
  ModelBank back = LoadBank(dir.path());
  CHECK(back.metadata == bank.metadata);
  for (const auto& u : splits["p"].test) {
    ScoreOptions opt{ScoreKind::kFused, 0.4};
    auto x = Classify(bank, u, opt).ranked;
    auto y = Classify(back, u, opt).ranked;
    for (size_t k = 0; k < x.size(); ++k) {
      CHECK(x[k].language == y[k].language);
      CHECK(std::abs(x[k].score - y[k].score) <= 1e-12);
    }
  }
}

TEST_CASE("score kind names") {
  for (ScoreKind k : {ScoreKind::kNgramPerplexity, ScoreKind::kRnnPerplexity,
                      ScoreKind::kFused})
    CHECK(ParseScoreKind(ScoreKindName(k)) == k);
  CHECK_THROWS_AS(ParseScoreKind("bogus"), Error);
}

}  // namespace
}  // namespace phonolid
