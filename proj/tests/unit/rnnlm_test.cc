#include <cmath>

#include "doctest.h"
#include "phonolid/corpus.h"
#include "phonolid/error.h"
#include "phonolid/rnnlm.h"
#include "test_util.h"

namespace phonolid {
namespace {

using testing::Utt;

ClassAssignment OneClass(const PhoneAlphabet& ab) {
  return ClassAssignment::FromClassOf(std::vector<int>(ab.num_predictable(), 0), 1);
}

RnnLm RandomModel(const PhoneAlphabet& ab, int hidden, int classes, uint64_t seed,
                  double scale = 0.5) {
  std::vector<int> class_of(ab.num_predictable());
  for (size_t w = 0; w < class_of.size(); ++w)
    class_of[w] = static_cast<int>(w * classes / class_of.size());
  TrainingConfig cfg;
  cfg.seed = seed;
  cfg.init_scale = scale;
  return InitRnnLm(ab, hidden, ClassAssignment::FromClassOf(class_of, classes), cfg);
}

struct SyntheticData {
  std::vector<Utterance> train, valid;
  PhoneAlphabet alphabet;
};

SyntheticData MakeData(int order, size_t n_train, size_t n_valid, uint64_t seed) {
  SyntheticConfig cfg;
  cfg.n_languages = 1;
  cfg.alphabet_size = 8;
  cfg.order = order;
  cfg.utts_per_language = n_train + n_valid;
  cfg.mean_length = 25;
  cfg.seed = seed;
  SyntheticCorpus synth = GenerateSynthetic(cfg);
  const auto& utts = synth.corpus.languages.begin()->second;
  SyntheticData d;
  d.alphabet = synth.corpus.alphabet;
  d.train.assign(utts.begin(), utts.begin() + static_cast<long>(n_train));
  d.valid.assign(utts.begin() + static_cast<long>(n_train), utts.end());
  return d;
}

TEST_CASE("class assignment with the default count") {
  std::vector<std::string> tokens;
  for (int i = 0; i < 40; ++i) tokens.push_back("p" + std::to_string(i));
  PhoneAlphabet ab(tokens);
  CHECK(DefaultClassCount(ab) == 6);
  Rng rng(1);
  auto train = testing::RandomUtterances(ab, rng, 50, 30);
  ClassAssignment c = AssignClasses(ab, train, 6);
  REQUIRE(c.num_classes() == 6);
  size_t total = 0;
  for (const auto& m : c.members) {
    CHECK_FALSE(m.empty());
    total += m.size();
  }
  CHECK(total == 41);
  for (TokenId w = 0; w <= ab.EndId(); ++w)
    CHECK(c.members[c.class_of[w]][c.position_of[w]] == w);
}

TEST_CASE("single class holds every outcome") {
  PhoneAlphabet ab({"a", "b", "c"});
  ClassAssignment c = AssignClasses(ab, std::vector<Utterance>{Utt(ab, "a b")}, 1);
  CHECK(c.members.size() == 1);
  CHECK(c.members[0] == std::vector<TokenId>{0, 1, 2, 3});
}

TEST_CASE("dominant token gets its own class") {
  PhoneAlphabet ab({"a", "b", "c"});
  // 'b' carries 99 of 100 token occurrences ("</s>" counts once).
  Utterance u{std::vector<TokenId>(99, 1), "x"};
  ClassAssignment c = AssignClasses(ab, std::vector<Utterance>{u}, 2);
  CHECK(c.members[0] == std::vector<TokenId>{1});
  CHECK(c.members[1] == std::vector<TokenId>{0, 2, 3});
}

TEST_CASE("class assignment rejects impossible counts") {
  PhoneAlphabet ab({"a"});
  CHECK_THROWS_AS(AssignClasses(ab, std::vector<Utterance>{Utt(ab, "a")}, 3), Error);
  CHECK_THROWS_AS(AssignClasses(ab, std::vector<Utterance>{Utt(ab, "a")}, 0), Error);
}

TEST_CASE("initialization shapes and determinism") {
  std::vector<std::string> tokens;
  for (int i = 0; i < 40; ++i) tokens.push_back("p" + std::to_string(i));
  PhoneAlphabet ab(tokens);
  RnnLm a = RandomModel(ab, 40, 6, 9);
  CHECK(a.input().rows() == 41);
  CHECK(a.input().cols() == 40);
  CHECK(a.recurrent().rows() == 40);
  CHECK(a.class_out().cols() == 6);
  CHECK(a.token_out().cols() == 41);
  RnnLm b = RandomModel(ab, 40, 6, 9);
  CHECK(a.input() == b.input());
  CHECK(a.token_out() == b.token_out());
  RnnLm zero = RandomModel(ab, 40, 6, 9, 0.0);
  CHECK(zero.input().isZero(0.0));
  CHECK(zero.recurrent().isZero(0.0));
}

TEST_CASE("zero weights give the symmetric distribution") {
  PhoneAlphabet ab({"a", "b", "c", "d"});
  RnnLm m(ab, 3, ClassAssignment::FromClassOf({0, 0, 0, 1, 1}, 2));
  Eigen::VectorXd s = m.InitialState();
  RnnStep step = ForwardStep(m, s, ab.BeginId());
  CHECK((step.hidden.array() == 0.5).all());
  CHECK(TokenProb(m, step, 0) == doctest::Approx(1.0 / 6));
  CHECK(TokenProb(m, step, 4) == doctest::Approx(1.0 / 4));
  RnnLm flat(PhoneAlphabet({"a", "b"}), 4, OneClass(PhoneAlphabet({"a", "b"})));
  CHECK(RnnPerplexity(flat, Utt(PhoneAlphabet({"a", "b"}), "a b b a")) ==
        doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("one class equals a plain softmax") {
  PhoneAlphabet ab = testing::LetterAlphabet(5);
  RnnLm m = RandomModel(ab, 6, 1, 4);
  Eigen::VectorXd s = m.InitialState();
  ForwardStep(m, s, ab.BeginId());
  RnnStep step = ForwardStep(m, s, 2);
  Eigen::VectorXd logits = m.token_out().transpose() * step.hidden;
  Eigen::VectorXd soft = (logits.array() - logits.maxCoeff()).exp();
  soft /= soft.sum();
  Eigen::VectorXd dist = OutputDistribution(m, step);
  for (Eigen::Index w = 0; w < soft.size(); ++w)
    CHECK(dist[w] == doctest::Approx(soft[w]).epsilon(1e-12));
}

TEST_CASE("factorized output is normalized") {
  std::vector<std::string> tokens;
  for (int i = 0; i < 40; ++i) tokens.push_back("p" + std::to_string(i));
  PhoneAlphabet ab(tokens);
  Rng rng(5);
  for (int classes : {1, 6, DefaultClassCount(ab), 41}) {
    for (uint64_t seed = 0; seed < 25; ++seed) {
      RnnLm m = RandomModel(ab, 8, classes, seed, 2.0);
      Eigen::VectorXd s = m.InitialState();
      RnnStep step = ForwardStep(m, s, ab.BeginId());
      for (int t = 0; t < 3; ++t)
        step = ForwardStep(m, s, static_cast<TokenId>(rng.Below(ab.size())));
      CHECK(std::abs(OutputDistribution(m, step).sum() - 1.0) < 1e-9);
    }
  }
}

TEST_CASE("scoring is pure") {
  PhoneAlphabet ab = testing::LetterAlphabet(4);
  RnnLm m = RandomModel(ab, 5, 2, 1);
  Utterance u = Utt(ab, "a b c d a");
  const double first = RnnSequenceLogProb(m, u);
  RnnSequenceLogProb(m, Utt(ab, "d d d"));
  CHECK(RnnSequenceLogProb(m, u) == first);
  CHECK_THROWS_AS(RnnSequenceLogProb(m, Utterance{{0, ab.UnkId()}, "x"}), Error);
}

TEST_CASE("analytic gradients match central differences") {
  PhoneAlphabet ab = testing::LetterAlphabet(4);
  Utterance u = Utt(ab, "a c b d d a");
  for (uint64_t seed = 1; seed <= 3; ++seed) {
    RnnLm m = RandomModel(ab, 5, 2, seed);
    GradientCheckResult r = GradientCheck(m, u, 1e-5, {50, seed});
    CHECK(r.coordinates == 200);
    CHECK(r.max_relative_error < 1e-4);
  }
}

TEST_CASE("gradient check at zero weights") {
  PhoneAlphabet ab = testing::LetterAlphabet(4);
  RnnLm m(ab, 5, ClassAssignment::FromClassOf({0, 0, 1, 1, 1}, 2));
  GradientCheckResult r = GradientCheck(m, Utt(ab, "a c b d d a"), 1e-5);
  CHECK(r.max_absolute_error < 1e-6);
}

TEST_CASE("gradient check catches a corrupted backward pass") {
  PhoneAlphabet ab = testing::LetterAlphabet(4);
  Utterance u = Utt(ab, "a c b d d a");
  RnnLm m = RandomModel(ab, 5, 2, 1);
  const int window = static_cast<int>(u.phones.size() + 1);
  auto corrupted = [window](const RnnLm& model, const Utterance& utt) {
    RnnGradients g = SequenceGradients(model, utt, window);
    g.recurrent = -g.recurrent;
    return g;
  };
  GradientCheckResult r = GradientCheck(m, u, 1e-5, {}, corrupted);
  CHECK(r.max_relative_error > 1e-2);
}

TEST_CASE("zero epochs return the model unchanged") {
  SyntheticData d = MakeData(1, 10, 5, 2);
  RnnLm m = RandomModel(d.alphabet, 6, 1, 3);
  TrainingConfig cfg;
  cfg.max_epochs = 0;
  RnnTrainResult r = TrainRnnLm(d.train, d.valid, m, cfg);
  CHECK(r.log.empty());
  CHECK(r.model.input() == m.input());
  CHECK(r.model.recurrent() == m.recurrent());
  CHECK(r.model.token_out() == m.token_out());
}

TEST_CASE("training config validation") {
  SyntheticData d = MakeData(1, 10, 5, 2);
  RnnLm m = RandomModel(d.alphabet, 6, 1, 3);
  TrainingConfig cfg;
  cfg.bptt_steps = 0;
  CHECK_THROWS_AS(TrainRnnLm(d.train, d.valid, m, cfg), Error);
  CHECK_THROWS_AS(TrainRnnLm(d.train, {}, m, TrainingConfig{}), Error);
}

TEST_CASE("first epoch improves validation entropy") {
  SyntheticData d = MakeData(1, 60, 20, 5);
  TrainingConfig cfg;
  cfg.max_epochs = 1;
  RnnLm m = InitRnnLm(d.alphabet, 30, OneClass(d.alphabet), cfg);
  RnnTrainResult r = TrainRnnLm(d.train, d.valid, m, cfg);
  REQUIRE(r.log.size() == 1);
  CHECK(r.log[0].valid_entropy < r.initial_valid_entropy);
  CHECK(r.log[0].valid_entropy == doctest::Approx(RnnEntropy(r.model, d.valid)));
}

TEST_CASE("deeper truncation fits second-order data at least as well") {
  SyntheticData d = MakeData(2, 150, 30, 8);
  ClassAssignment classes = AssignClasses(d.alphabet, d.train, 3);
  double entropy[2];
  int i = 0;
  for (int steps : {1, 4}) {
    TrainingConfig cfg;
    cfg.bptt_steps = steps;
    RnnLm m = InitRnnLm(d.alphabet, 20, classes, cfg);
    RnnTrainResult r = TrainRnnLm(d.train, d.valid, m, cfg);
    entropy[i++] = RnnEntropy(r.model, d.valid);
  }
  CHECK(entropy[1] <= entropy[0]);
}

TEST_CASE("trained model prefers real order over shuffled tokens") {
  SyntheticData d = MakeData(2, 100, 20, 12);
  TrainingConfig cfg;
  RnnLm m = InitRnnLm(d.alphabet, 20, AssignClasses(d.alphabet, d.train, 3), cfg);
  RnnTrainResult r = TrainRnnLm(d.train, d.valid, m, cfg);
  Rng rng(1);
  int wins = 0;
  for (size_t i = 0; i < 10; ++i) {
    Utterance shuffled = d.train[i];
    rng.Shuffle(shuffled.phones);
    if (RnnPerplexity(r.model, d.train[i]) < RnnPerplexity(r.model, shuffled)) ++wins;
  }
  CHECK(wins == 10);
}

TEST_CASE("training is deterministic") {
  SyntheticData d = MakeData(1, 20, 5, 6);
  TrainingConfig cfg;
  cfg.max_epochs = 3;
  RnnLm m = InitRnnLm(d.alphabet, 8, OneClass(d.alphabet), cfg);
  RnnTrainResult a = TrainRnnLm(d.train, d.valid, m, cfg);
  RnnTrainResult b = TrainRnnLm(d.train, d.valid, m, cfg);
  CHECK(a.model.input() == b.model.input());
  CHECK(a.model.recurrent() == b.model.recurrent());
  CHECK(a.model.class_out() == b.model.class_out());
  CHECK(a.model.token_out() == b.model.token_out());
}

TEST_CASE("serialization round trip") {
  PhoneAlphabet ab = testing::LetterAlphabet(6);
  RnnLm m = RandomModel(ab, 7, 3, 21);
  testing::TempDir dir;
  SaveRnnLm(m, dir / "m.json");
  RnnLm back = LoadRnnLm(dir / "m.json");
  CHECK(back.alphabet() == ab);
  CHECK(back.classes().class_of == m.classes().class_of);
  Rng rng(2);
  for (const auto& u : testing::RandomUtterances(ab, rng, 10, 12))
    CHECK(std::abs(RnnPerplexity(back, u) - RnnPerplexity(m, u)) <= 1e-12);
}

TEST_CASE("loading a corrupt model fails") {
  testing::TempDir dir;
  testing::WriteText(dir / "bad.json", "{\"format\": \"phonolid-rnnlm\"");
  CHECK_THROWS_AS(LoadRnnLm(dir / "bad.json"), Error);
}

}  // namespace
}  // namespace phonolid
