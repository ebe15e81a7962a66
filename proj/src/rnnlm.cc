#include "phonolid/rnnlm.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "phonolid/error.h"
#include "phonolid/random.h"

namespace phonolid {

namespace {

void SoftmaxInPlace(Eigen::VectorXd& v) {
  const double m = v.maxCoeff();
  v = (v.array() - m).exp();
  v /= v.sum();
}

Eigen::VectorXd Sigmoid(const Eigen::VectorXd& a) {
  return (1.0 + (-a.array()).exp()).inverse().matrix();
}

// Input rows and prediction targets of one utterance: inputs are "<s>" and
// the phones, targets the phones and "</s>".
struct Sequence {
  std::vector<int> inputs;
  std::vector<TokenId> targets;
};

Sequence MakeSequence(const RnnLm& model, const Utterance& utt) {
  const PhoneAlphabet& alphabet = model.alphabet();
  CheckUtterance(alphabet, utt);
  Sequence seq;
  seq.inputs.reserve(utt.phones.size() + 1);
  seq.inputs.push_back(model.InputRow(alphabet.BeginId()));
  for (TokenId t : utt.phones) seq.inputs.push_back(model.InputRow(t));
  seq.targets = utt.phones;
  seq.targets.push_back(alphabet.EndId());
  return seq;
}

// Loss and output-layer error signals of one prediction.
struct OutputError {
  double loss = 0.0;
  int cls = 0;
  Eigen::VectorXd class_err;   // dLoss / d(class logits)
  Eigen::VectorXd member_err;  // dLoss / d(member logits of cls)
  Eigen::VectorXd dhidden;     // dLoss / ds(t)
};

OutputError ComputeOutputError(const RnnLm& model, const Eigen::VectorXd& s,
                               TokenId target) {
  const ClassAssignment& classes = model.classes();
  OutputError out;
  out.cls = classes.class_of[static_cast<size_t>(target)];
  const std::vector<TokenId>& members =
      classes.members[static_cast<size_t>(out.cls)];
  const int pos = classes.position_of[static_cast<size_t>(target)];

  out.class_err = model.class_out().transpose() * s;
  SoftmaxInPlace(out.class_err);
  Eigen::VectorXd member_logits(static_cast<Eigen::Index>(members.size()));
  for (size_t j = 0; j < members.size(); ++j)
    member_logits[static_cast<Eigen::Index>(j)] =
        model.token_out().col(members[j]).dot(s);
  SoftmaxInPlace(member_logits);
  out.member_err = std::move(member_logits);

  out.loss = -std::log(out.class_err[out.cls]) - std::log(out.member_err[pos]);
  out.class_err[out.cls] -= 1.0;
  out.member_err[pos] -= 1.0;

  out.dhidden = model.class_out() * out.class_err;
  for (size_t j = 0; j < members.size(); ++j)
    out.dhidden +=
        model.token_out().col(members[j]) * out.member_err[static_cast<Eigen::Index>(j)];
  return out;
}

// Propagates dLoss/ds(t) back through at most `window` steps, adding to the
// recurrent gradient and to the input-row gradients. states[k + 1] = s(k),
// states[0] is the reset state; inputs[k] is the U row fed at step k.
// `touched` (optional) collects the U rows that received gradient.
void BackpropThroughTime(const RnnLm& model,
                         const std::vector<Eigen::VectorXd>& states,
                         const std::vector<int>& inputs, size_t t,
                         Eigen::VectorXd dh, int window,
                         Eigen::MatrixXd& g_recurrent,
                         RnnLm::RowMatrix& g_input,
                         std::vector<int>* touched) {
  const size_t last = t + 1 >= static_cast<size_t>(window) ? t + 1 - window : 0;
  for (size_t k = t + 1; k-- > last;) {
    const Eigen::VectorXd& s = states[k + 1];
    Eigen::VectorXd delta = dh.array() * s.array() * (1.0 - s.array());
    g_recurrent.noalias() += delta * states[k].transpose();
    g_input.row(inputs[k]) += delta.transpose();
    if (touched) touched->push_back(inputs[k]);
    if (k > last) dh.noalias() = model.recurrent().transpose() * delta;
  }
}

double Clip(double g, double limit) { return std::clamp(g, -limit, limit); }

}  // namespace

ClassAssignment ClassAssignment::FromClassOf(std::vector<int> class_of,
                                             int n_classes) {
  if (n_classes < 1) throw Error("class count must be >= 1");
  ClassAssignment a;
  a.members.assign(static_cast<size_t>(n_classes), {});
  a.position_of.assign(class_of.size(), 0);
  for (size_t w = 0; w < class_of.size(); ++w) {
    const int c = class_of[w];
    if (c < 0 || c >= n_classes)
      throw Error("class index " + std::to_string(c) + " out of range");
    a.position_of[w] = static_cast<int>(a.members[static_cast<size_t>(c)].size());
    a.members[static_cast<size_t>(c)].push_back(static_cast<TokenId>(w));
  }
  for (int c = 0; c < n_classes; ++c)
    if (a.members[static_cast<size_t>(c)].empty())
      throw Error("class " + std::to_string(c) + " is empty");
  a.class_of = std::move(class_of);
  return a;
}

ClassAssignment AssignClasses(const PhoneAlphabet& alphabet,
                              std::span<const Utterance> train,
                              int n_classes) {
  const size_t n_tokens = alphabet.num_predictable();
  if (n_classes < 1 || static_cast<size_t>(n_classes) > n_tokens)
    throw Error("class count " + std::to_string(n_classes) +
                " must be in [1, " + std::to_string(n_tokens) + "]");
  std::vector<uint64_t> freq(n_tokens, 0);
  for (const Utterance& u : train) {
    CheckUtterance(alphabet, u);
    for (TokenId t : u.phones) ++freq[static_cast<size_t>(t)];
    ++freq[static_cast<size_t>(alphabet.EndId())];
  }
  std::vector<TokenId> order(n_tokens);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](TokenId a, TokenId b) {
    return freq[static_cast<size_t>(a)] > freq[static_cast<size_t>(b)];
  });
  const uint64_t total = std::accumulate(freq.begin(), freq.end(), uint64_t{0});
  const uint64_t n = static_cast<uint64_t>(n_classes);

  std::vector<int> class_of(n_tokens, 0);
  uint64_t cls = 0, cum = 0;
  for (size_t i = 0; i < n_tokens; ++i) {
    const TokenId t = order[i];
    class_of[static_cast<size_t>(t)] = static_cast<int>(cls);
    cum += freq[static_cast<size_t>(t)];
    const uint64_t remaining_tokens = n_tokens - i - 1;
    const uint64_t remaining_classes = n - cls - 1;
    if (remaining_classes > 0 &&
        (cum * n >= total * (cls + 1) || remaining_tokens == remaining_classes))
      ++cls;
  }
  return ClassAssignment::FromClassOf(std::move(class_of), n_classes);
}

int DefaultClassCount(const PhoneAlphabet& alphabet) {
  return static_cast<int>(
      std::lround(std::sqrt(static_cast<double>(alphabet.num_predictable()))));
}

void TrainingConfig::Validate() const {
  std::vector<std::string> problems;
  if (bptt_steps < 1 || bptt_steps > 8) problems.push_back("bptt_steps must be in [1, 8]");
  if (!(lr0 > 0.0)) problems.push_back("lr0 must be positive");
  if (!(lr_halving_threshold > 0.0))
    problems.push_back("lr_halving_threshold must be positive");
  if (max_epochs < 0) problems.push_back("max_epochs must be >= 0");
  if (!(grad_clip > 0.0)) problems.push_back("grad_clip must be positive");
  if (!(init_scale >= 0.0)) problems.push_back("init_scale must be >= 0");
  if (!problems.empty()) {
    std::string msg = "invalid RNN training config:";
    for (const auto& p : problems) msg += " " + p + ";";
    throw Error(msg);
  }
}

RnnLm::RnnLm(PhoneAlphabet alphabet, int hidden_size, ClassAssignment classes)
    : alphabet_(std::move(alphabet)),
      hidden_size_(hidden_size),
      classes_(std::move(classes)) {
  if (hidden_size_ < 1) throw Error("hidden size must be >= 1");
  const Eigen::Index V = static_cast<Eigen::Index>(alphabet_.size());
  if (classes_.class_of.size() != alphabet_.num_predictable())
    throw Error("class assignment does not cover the alphabet");
  input_ = RowMatrix::Zero(V + 1, hidden_size_);
  recurrent_ = Eigen::MatrixXd::Zero(hidden_size_, hidden_size_);
  class_out_ = Eigen::MatrixXd::Zero(hidden_size_, classes_.num_classes());
  token_out_ = Eigen::MatrixXd::Zero(hidden_size_, V + 1);
}

Eigen::VectorXd RnnLm::InitialState() const {
  return Eigen::VectorXd::Constant(hidden_size_, kResetActivation);
}

int RnnLm::InputRow(TokenId id) const {
  if (alphabet_.IsPhone(id)) return id;
  if (id == alphabet_.BeginId()) return static_cast<int>(alphabet_.size());
  if (id == alphabet_.UnkId())
    throw Error("RNN model cannot score out-of-alphabet phones");
  throw Error("invalid RNN input token " + std::to_string(id));
}

bool RnnLm::AllFinite() const {
  return input_.allFinite() && recurrent_.allFinite() &&
         class_out_.allFinite() && token_out_.allFinite();
}

RnnLm InitRnnLm(const PhoneAlphabet& alphabet, int hidden_size,
                ClassAssignment classes, const TrainingConfig& cfg) {
  cfg.Validate();
  RnnLm model(alphabet, hidden_size, std::move(classes));
  Rng rng(cfg.seed);
  const double a = cfg.init_scale;
  auto fill = [&](auto& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c)
        m(r, c) = a == 0.0 ? 0.0 : rng.Uniform(-a, a);
  };
  fill(model.input());
  fill(model.recurrent());
  fill(model.class_out());
  fill(model.token_out());
  return model;
}

RnnStep ForwardStep(const RnnLm& model, Eigen::VectorXd& state, TokenId w) {
  const int row = model.InputRow(w);
  Eigen::VectorXd a = model.input().row(row).transpose();
  a.noalias() += model.recurrent() * state;
  state = Sigmoid(a);
  RnnStep step;
  step.hidden = state;
  step.class_probs = model.class_out().transpose() * state;
  SoftmaxInPlace(step.class_probs);
  return step;
}

Eigen::VectorXd WithinClass(const RnnLm& model, const Eigen::VectorXd& hidden,
                            int c) {
  const auto& members = model.classes().members.at(static_cast<size_t>(c));
  Eigen::VectorXd logits(static_cast<Eigen::Index>(members.size()));
  for (size_t j = 0; j < members.size(); ++j)
    logits[static_cast<Eigen::Index>(j)] =
        model.token_out().col(members[j]).dot(hidden);
  SoftmaxInPlace(logits);
  return logits;
}

double TokenProb(const RnnLm& model, const RnnStep& step, TokenId w) {
  if (!model.alphabet().IsPredictable(w))
    throw Error("RNN model cannot predict token " + std::to_string(w));
  const ClassAssignment& classes = model.classes();
  const int c = classes.class_of[static_cast<size_t>(w)];
  return step.class_probs[c] * WithinClass(model, step.hidden, c)[
      classes.position_of[static_cast<size_t>(w)]];
}

Eigen::VectorXd OutputDistribution(const RnnLm& model, const RnnStep& step) {
  const ClassAssignment& classes = model.classes();
  Eigen::VectorXd dist(static_cast<Eigen::Index>(classes.class_of.size()));
  for (int c = 0; c < classes.num_classes(); ++c) {
    Eigen::VectorXd within = WithinClass(model, step.hidden, c);
    const auto& members = classes.members[static_cast<size_t>(c)];
    for (size_t j = 0; j < members.size(); ++j)
      dist[members[j]] = step.class_probs[c] * within[static_cast<Eigen::Index>(j)];
  }
  return dist;
}

double RnnSequenceLogProb(const RnnLm& model, const Utterance& utt) {
  const Sequence seq = MakeSequence(model, utt);
  Eigen::VectorXd state = model.InitialState();
  const PhoneAlphabet& alphabet = model.alphabet();
  double logprob = 0.0;
  TokenId input = alphabet.BeginId();
  for (TokenId target : seq.targets) {
    RnnStep step = ForwardStep(model, state, input);
    logprob += std::log(TokenProb(model, step, target));
    input = target;
  }
  return logprob;
}

double RnnPerplexity(const RnnLm& model, const Utterance& utt) {
  const double lp = RnnSequenceLogProb(model, utt);
  return std::exp(-lp / static_cast<double>(utt.phones.size() + 1));
}

double RnnEntropy(const RnnLm& model, std::span<const Utterance> utts) {
  double loss = 0.0;
  size_t n = 0;
  for (const Utterance& u : utts) {
    loss -= RnnSequenceLogProb(model, u);
    n += u.phones.size() + 1;
  }
  return n == 0 ? 0.0 : loss / static_cast<double>(n);
}

RnnGradients RnnGradients::ZerosLike(const RnnLm& model) {
  RnnGradients g;
  g.input = RnnLm::RowMatrix::Zero(model.input().rows(), model.input().cols());
  g.recurrent = Eigen::MatrixXd::Zero(model.recurrent().rows(),
                                      model.recurrent().cols());
  g.class_out = Eigen::MatrixXd::Zero(model.class_out().rows(),
                                      model.class_out().cols());
  g.token_out = Eigen::MatrixXd::Zero(model.token_out().rows(),
                                      model.token_out().cols());
  return g;
}

RnnGradients SequenceGradients(const RnnLm& model, const Utterance& utt,
                               int bptt_window) {
  if (bptt_window < 1) throw Error("BPTT window must be >= 1");
  const Sequence seq = MakeSequence(model, utt);
  const size_t T = seq.targets.size();
  std::vector<Eigen::VectorXd> states(T + 1);
  states[0] = model.InitialState();
  RnnGradients g = RnnGradients::ZerosLike(model);
  for (size_t t = 0; t < T; ++t) {
    Eigen::VectorXd a = model.input().row(seq.inputs[t]).transpose();
    a.noalias() += model.recurrent() * states[t];
    states[t + 1] = Sigmoid(a);
    const Eigen::VectorXd& s = states[t + 1];

    OutputError err = ComputeOutputError(model, s, seq.targets[t]);
    g.class_out.noalias() += s * err.class_err.transpose();
    const auto& members = model.classes().members[static_cast<size_t>(err.cls)];
    for (size_t j = 0; j < members.size(); ++j)
      g.token_out.col(members[j]) += s * err.member_err[static_cast<Eigen::Index>(j)];
    BackpropThroughTime(model, states, seq.inputs, t, err.dhidden, bptt_window,
                        g.recurrent, g.input, nullptr);
  }
  return g;
}

RnnTrainResult TrainRnnLm(std::span<const Utterance> train,
                          std::span<const Utterance> valid, RnnLm model,
                          const TrainingConfig& cfg) {
  cfg.Validate();
  if (train.empty()) throw Error("RNN training set is empty");
  if (valid.empty()) throw Error("RNN validation set is empty");

  RnnTrainResult result;
  result.initial_valid_entropy = RnnEntropy(model, valid);
  if (cfg.max_epochs == 0) {
    result.model = std::move(model);
    return result;
  }

  const int H = model.hidden_size();
  const double clip = cfg.grad_clip;
  RnnLm best = model;
  double best_entropy = result.initial_valid_entropy;
  double lr = cfg.lr0;
  int consecutive_halvings = 0;

  Eigen::MatrixXd g_recurrent = Eigen::MatrixXd::Zero(H, H);
  RnnLm::RowMatrix g_input =
      RnnLm::RowMatrix::Zero(model.input().rows(), model.input().cols());
  std::vector<int> touched;
  std::vector<Eigen::VectorXd> states;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    double train_loss = 0.0;
    size_t train_tokens = 0;
    size_t step_index = 0;
    for (const Utterance& utt : train) {
      const Sequence seq = MakeSequence(model, utt);
      const size_t T = seq.targets.size();
      states.resize(T + 1);
      states[0] = model.InitialState();
      for (size_t t = 0; t < T; ++t, ++step_index) {
        Eigen::VectorXd a = model.input().row(seq.inputs[t]).transpose();
        a.noalias() += model.recurrent() * states[t];
        states[t + 1] = Sigmoid(a);
        const Eigen::VectorXd& s = states[t + 1];

        OutputError err = ComputeOutputError(model, s, seq.targets[t]);
        if (!std::isfinite(err.loss))
          throw Error("non-finite RNN loss at epoch " + std::to_string(epoch) +
                      ", step " + std::to_string(step_index) + " (" +
                      utt.source_id + ")");
        train_loss += err.loss;
        ++train_tokens;

        // Hidden-layer error uses the pre-update output weights.
        g_recurrent.setZero();
        touched.clear();
        BackpropThroughTime(model, states, seq.inputs, t, err.dhidden,
                            cfg.bptt_steps, g_recurrent, g_input, &touched);

        for (Eigen::Index c = 0; c < model.class_out().cols(); ++c)
          for (Eigen::Index r = 0; r < H; ++r)
            model.class_out()(r, c) -= lr * Clip(s[r] * err.class_err[c], clip);
        const auto& members =
            model.classes().members[static_cast<size_t>(err.cls)];
        for (size_t j = 0; j < members.size(); ++j) {
          const double e = err.member_err[static_cast<Eigen::Index>(j)];
          auto col = model.token_out().col(members[j]);
          for (Eigen::Index r = 0; r < H; ++r) col[r] -= lr * Clip(s[r] * e, clip);
        }
        model.recurrent() -= lr * g_recurrent.cwiseMax(-clip).cwiseMin(clip);
        std::sort(touched.begin(), touched.end());
        touched.erase(std::unique(touched.begin(), touched.end()), touched.end());
        for (int row : touched) {
          model.input().row(row) -=
              lr * g_input.row(row).cwiseMax(-clip).cwiseMin(clip);
          g_input.row(row).setZero();
        }
      }
    }
    if (!model.AllFinite())
      throw Error("non-finite RNN weights after epoch " + std::to_string(epoch));

    EpochLog entry;
    entry.epoch = epoch;
    entry.learning_rate = lr;
    entry.train_entropy =
        train_tokens ? train_loss / static_cast<double>(train_tokens) : 0.0;
    entry.valid_entropy = RnnEntropy(model, valid);
    result.log.push_back(entry);

    const double improvement =
        best_entropy > 0.0 ? (best_entropy - entry.valid_entropy) / best_entropy
                           : 0.0;
    if (entry.valid_entropy < best_entropy) {
      best = model;
      best_entropy = entry.valid_entropy;
    } else {
      model = best;
    }
    if (improvement < cfg.lr_halving_threshold) {
      lr *= 0.5;
      if (++consecutive_halvings >= 2) break;
    } else {
      consecutive_halvings = 0;
    }
  }
  result.model = std::move(best);
  return result;
}

GradientCheckResult GradientCheck(const RnnLm& model, const Utterance& utt,
                                  double epsilon,
                                  const GradientCheckOptions& options,
                                  const GradientFn& analytic) {
  const int window = static_cast<int>(utt.phones.size() + 1);
  const RnnGradients g = analytic ? analytic(model, utt)
                                  : SequenceGradients(model, utt, window);
  RnnLm probe = model;
  Rng rng(options.seed);
  GradientCheckResult result;

  auto check = [&](auto& weights, const auto& grads) {
    const uint64_t n = static_cast<uint64_t>(weights.size());
    if (n == 0) return;
    for (int i = 0; i < options.samples_per_matrix; ++i) {
      const uint64_t k = rng.Below(n);
      const Eigen::Index r = static_cast<Eigen::Index>(k) / weights.cols();
      const Eigen::Index c = static_cast<Eigen::Index>(k) % weights.cols();
      const double saved = weights(r, c);
      weights(r, c) = saved + epsilon;
      const double plus = -RnnSequenceLogProb(probe, utt);
      weights(r, c) = saved - epsilon;
      const double minus = -RnnSequenceLogProb(probe, utt);
      weights(r, c) = saved;
      const double numeric = (plus - minus) / (2.0 * epsilon);
      const double a = grads(r, c);
      const double abs_err = std::abs(a - numeric);
      const double rel_err =
          abs_err / std::max({std::abs(a), std::abs(numeric), 1e-8});
      result.max_absolute_error = std::max(result.max_absolute_error, abs_err);
      result.max_relative_error = std::max(result.max_relative_error, rel_err);
      ++result.coordinates;
    }
  };
  check(probe.input(), g.input);
  check(probe.recurrent(), g.recurrent);
  check(probe.class_out(), g.class_out);
  check(probe.token_out(), g.token_out);
  return result;
}

// ---------------------------------------------------------------------------
// Serialization.

namespace {

template <typename M>
nlohmann::json MatrixToJson(const M& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    std::vector<double> row(static_cast<size_t>(m.cols()));
    for (Eigen::Index c = 0; c < m.cols(); ++c) row[static_cast<size_t>(c)] = m(r, c);
    rows.push_back(std::move(row));
  }
  return rows;
}

template <typename M>
void MatrixFromJson(const nlohmann::json& rows, M& m, const char* name) {
  if (!rows.is_array() || static_cast<Eigen::Index>(rows.size()) != m.rows())
    throw Error(std::string("RNN model: matrix '") + name + "' has wrong row count");
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const auto& row = rows[static_cast<size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != m.cols())
      throw Error(std::string("RNN model: matrix '") + name +
                  "' has wrong column count");
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      m(r, c) = row[static_cast<size_t>(c)].get<double>();
  }
}

}  // namespace

void SaveRnnLm(const RnnLm& model, const std::filesystem::path& path) {
  nlohmann::json doc;
  doc["format"] = "phonolid-rnnlm";
  doc["version"] = 1;
  doc["alphabet"] = model.alphabet().tokens();
  doc["hidden_size"] = model.hidden_size();
  doc["reset_activation"] = RnnLm::kResetActivation;
  doc["n_classes"] = model.classes().num_classes();
  doc["class_of"] = model.classes().class_of;
  doc["input"] = MatrixToJson(model.input());
  doc["recurrent"] = MatrixToJson(model.recurrent());
  doc["class_out"] = MatrixToJson(model.class_out());
  doc["token_out"] = MatrixToJson(model.token_out());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << doc.dump() << '\n';
  if (!out) throw Error("failed to write " + path.string());
}

RnnLm LoadRnnLm(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  try {
    const nlohmann::json doc = nlohmann::json::parse(in);
    if (doc.at("format") != "phonolid-rnnlm")
      throw ParseError(path.string(), 0, "not a phonolid RNN model");
    if (doc.at("version") != 1)
      throw ParseError(path.string(), 0, "unsupported RNN model version");
    PhoneAlphabet alphabet(doc.at("alphabet").get<std::vector<std::string>>());
    ClassAssignment classes = ClassAssignment::FromClassOf(
        doc.at("class_of").get<std::vector<int>>(), doc.at("n_classes").get<int>());
    RnnLm model(std::move(alphabet), doc.at("hidden_size").get<int>(),
                std::move(classes));
    MatrixFromJson(doc.at("input"), model.input(), "input");
    MatrixFromJson(doc.at("recurrent"), model.recurrent(), "recurrent");
    MatrixFromJson(doc.at("class_out"), model.class_out(), "class_out");
    MatrixFromJson(doc.at("token_out"), model.token_out(), "token_out");
    if (!model.AllFinite())
      throw ParseError(path.string(), 0, "non-finite weights");
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string(), 0, e.what());
  } catch (const ParseError&) {
    throw;
  } catch (const Error& e) {
    throw ParseError(path.string(), 0, e.what());
  }
}

}  // namespace phonolid
