#ifndef PHONOLID_RNNLM_H_
#define PHONOLID_RNNLM_H_

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "phonolid/alphabet.h"

namespace phonolid {

// Partition of the predictable outcomes (phones and "</s>") into classes.
struct ClassAssignment {
  // class_of[w] for every predictable id w.
  std::vector<int> class_of;
  // members[c] in ascending id order.
  std::vector<std::vector<TokenId>> members;
  // position_of[w]: index of w inside members[class_of[w]].
  std::vector<int> position_of;

  int num_classes() const { return static_cast<int>(members.size()); }

  // Rebuilds members/position_of; throws Error if a class is empty or an id
  // is out of range.
  static ClassAssignment FromClassOf(std::vector<int> class_of, int n_classes);
};

// Sorts the predictable outcomes by descending training frequency ("</s>"
// once per utterance; ties by id) and cuts the sorted list greedily into
// `n_classes` bins of roughly equal probability mass. A bin closes once its
// cumulative mass reaches its share, or early enough that every later bin
// still receives at least one outcome.
ClassAssignment AssignClasses(const PhoneAlphabet& alphabet,
                              std::span<const Utterance> train, int n_classes);

// round(sqrt(|phones| + 1)).
int DefaultClassCount(const PhoneAlphabet& alphabet);

struct TrainingConfig {
  int bptt_steps = 4;
  double lr0 = 0.1;
  double lr_halving_threshold = 0.003;
  int max_epochs = 30;
  double grad_clip = 5.0;
  double init_scale = 0.1;
  uint64_t seed = 1;

  void Validate() const;  // throws Error
};

// Simple recurrent LM with a sigmoid hidden layer and a class-factorized
// softmax output:
//
//   s(t)      = sigmoid(U[w(t)] + W s(t-1))
//   P(c | t)  = softmax_c(V_class^T s(t))
//   P(w | c)  = softmax over members of c of (V_out^T s(t))
//   P(w)      = P(class(w)) P(w | class(w))
//
// Inputs are phones plus "<s>" (row size() of U); outputs are phones plus
// "</s>" (column size() of V_out). The model holds no recurrent state of its
// own: callers keep an RnnState, so a trained model can be shared.
class RnnLm {
 public:
  using RowMatrix =
      Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  // Every hidden unit starts each sequence at this activation.
  static constexpr double kResetActivation = 0.1;

  RnnLm() = default;
  // All weights zero.
  RnnLm(PhoneAlphabet alphabet, int hidden_size, ClassAssignment classes);

  const PhoneAlphabet& alphabet() const { return alphabet_; }
  int hidden_size() const { return hidden_size_; }
  const ClassAssignment& classes() const { return classes_; }

  // U: (|phones| + 1) x hidden.
  RowMatrix& input() { return input_; }
  const RowMatrix& input() const { return input_; }
  // W: hidden x hidden, applied as W s(t-1).
  Eigen::MatrixXd& recurrent() { return recurrent_; }
  const Eigen::MatrixXd& recurrent() const { return recurrent_; }
  // V_class: hidden x n_classes.
  Eigen::MatrixXd& class_out() { return class_out_; }
  const Eigen::MatrixXd& class_out() const { return class_out_; }
  // V_out: hidden x (|phones| + 1); column w is the output vector of w and
  // each class uses the columns of its members.
  Eigen::MatrixXd& token_out() { return token_out_; }
  const Eigen::MatrixXd& token_out() const { return token_out_; }

  Eigen::VectorXd InitialState() const;
  // Row of U for a phone or "<s>"; throws Error otherwise.
  int InputRow(TokenId id) const;

  bool AllFinite() const;

 private:
  PhoneAlphabet alphabet_;
  int hidden_size_ = 0;
  ClassAssignment classes_;
  RowMatrix input_;
  Eigen::MatrixXd recurrent_;
  Eigen::MatrixXd class_out_;
  Eigen::MatrixXd token_out_;
};

// Weights i.i.d. uniform on [-init_scale, init_scale] from Rng(cfg.seed),
// drawn in the order U, W, V_class, V_out, each row-major.
RnnLm InitRnnLm(const PhoneAlphabet& alphabet, int hidden_size,
                ClassAssignment classes, const TrainingConfig& cfg);

struct RnnStep {
  Eigen::VectorXd hidden;       // s(t)
  Eigen::VectorXd class_probs;  // c(t)
};

// Advances `state` (s(t-1) -> s(t)) on input `w` and returns the class
// distribution for the next token.
RnnStep ForwardStep(const RnnLm& model, Eigen::VectorXd& state, TokenId w);

// Distribution over the members of class `c` given s(t), in members order.
Eigen::VectorXd WithinClass(const RnnLm& model, const Eigen::VectorXd& hidden,
                            int c);

// P(class(w)) P(w | class(w)).
double TokenProb(const RnnLm& model, const RnnStep& step, TokenId w);

// Full distribution over the predictable outcomes, indexed by id.
Eigen::VectorXd OutputDistribution(const RnnLm& model, const RnnStep& step);

// Sum of ln P over the phones and the final "</s>"; starts from
// InitialState() with "<s>" as the first input.
double RnnSequenceLogProb(const RnnLm& model, const Utterance& utt);
double RnnPerplexity(const RnnLm& model, const Utterance& utt);
// Mean negative log-probability per predicted token (nats).
double RnnEntropy(const RnnLm& model, std::span<const Utterance> utts);

struct RnnGradients {
  RnnLm::RowMatrix input;
  Eigen::MatrixXd recurrent;
  Eigen::MatrixXd class_out;
  Eigen::MatrixXd token_out;

  static RnnGradients ZerosLike(const RnnLm& model);
};

// Gradient of the total sequence loss -sum ln P. The error of every
// prediction is propagated back through at most `bptt_window` time steps;
// with a window of at least |phones| + 1 the gradient is exact.
RnnGradients SequenceGradients(const RnnLm& model, const Utterance& utt,
                               int bptt_window);

struct EpochLog {
  int epoch = 0;
  double learning_rate = 0.0;
  double train_entropy = 0.0;  // nats per token, measured while training
  double valid_entropy = 0.0;  // nats per token, after the epoch
};

struct RnnTrainResult {
  RnnLm model;
  std::vector<EpochLog> log;
  double initial_valid_entropy = 0.0;
};

// Online SGD with truncated BPTT, one update per predicted token. After each
// epoch the validation entropy is compared with the best so far: a relative
// improvement below cfg.lr_halving_threshold halves the learning rate, and
// two such epochs in a row end training. Epochs that make validation worse
// are rolled back. Returns the best-validation weights.
RnnTrainResult TrainRnnLm(std::span<const Utterance> train,
                          std::span<const Utterance> valid, RnnLm model,
                          const TrainingConfig& cfg);

struct GradientCheckOptions {
  int samples_per_matrix = 50;
  uint64_t seed = 0;
};

struct GradientCheckResult {
  double max_relative_error = 0.0;
  double max_absolute_error = 0.0;
  size_t coordinates = 0;
};

using GradientFn =
    std::function<RnnGradients(const RnnLm&, const Utterance&)>;

// Compares `analytic` (default: SequenceGradients with a window spanning the
// utterance) against central differences of the sequence loss at randomly
// sampled coordinates of U, W, V_class and V_out. Relative error is
// |a - n| / max(|a|, |n|, 1e-8).
GradientCheckResult GradientCheck(const RnnLm& model, const Utterance& utt,
                                  double epsilon,
                                  const GradientCheckOptions& options = {},
                                  const GradientFn& analytic = nullptr);

void SaveRnnLm(const RnnLm& model, const std::filesystem::path& path);
RnnLm LoadRnnLm(const std::filesystem::path& path);

}  // namespace phonolid

#endif  // PHONOLID_RNNLM_H_
