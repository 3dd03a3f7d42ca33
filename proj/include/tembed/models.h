#pragma once

// Model zoo with hand-written reverse-mode gradients:
//   linreg / logreg - one dense layer on the flattened sequence
//   mlp             - ReLU dense stack on the flattened sequence
//   lstm            - uni-directional LSTM, last hidden state -> ReLU head
//   sa_lstm         - LSTM states pooled by r attention rows -> ReLU head
// Classification ends in a 2-way softmax, regression in max(0, linear).

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "tembed/dataset.h"
#include "tembed/encoding.h"
#include "tembed/params.h"

namespace tembed {

enum class Family { kLinReg, kLogReg, kMlp, kLstm, kSaLstm };

struct AttentionSpec {
  int d_a = 32;
  int r = 8;
  double penalty_c = 1e-4;
};

struct ModelSpec {
  Family family = Family::kLstm;
  Task task = Task::kClassification;
  int hidden = 0;  // lstm / sa_lstm only
  std::vector<int> head_widths = {32, 32, 16};
  TeMode te_mode = TeMode::kNone;
  std::optional<EncoderConfig> te_cfg;
  std::optional<AttentionSpec> attention;

  // Throws ConfigError listing the first violated invariant.
  void validate() const;

  int outputs() const { return task == Task::kClassification ? 2 : 1; }
  bool recurrent() const {
    return family == Family::kLstm || family == Family::kSaLstm;
  }

  // Defaults: linear has no hidden layers; mlp uses [64, 64, 32, 16];
  // recurrent heads use [32, 32, 16]; attention d_a=32, r=8, C=1e-4.
  static ModelSpec linear(Task task, TeMode mode = TeMode::kNone);
  static ModelSpec mlp(Task task, TeMode mode = TeMode::kNone);
  static ModelSpec lstm(Task task, int hidden, TeMode mode = TeMode::kNone);
  static ModelSpec sa_lstm(Task task, int hidden, TeMode mode = TeMode::kNone);
};

std::string family_name(Family f);
Family parse_family(const std::string& s);
std::string te_mode_name(TeMode m);
TeMode parse_te_mode(const std::string& s);

// Width of the first layer's input: steps * features for the flattened
// families, features for the recurrent ones.
int model_input_dim(const ModelSpec& spec, int steps, int features);

// A batch of equally long sequences. x[t] is batch x features; te[t] is
// batch x te_dim and is only read in add_te mode.
struct SequenceBatch {
  std::vector<Eigen::MatrixXd> x;
  std::vector<Eigen::MatrixXd> te;

  int steps() const { return static_cast<int>(x.size()); }
  int batch() const { return x.empty() ? 0 : static_cast<int>(x[0].rows()); }
  int features() const { return x.empty() ? 0 : static_cast<int>(x[0].cols()); }

  // Stacks per-episode (steps x features) matrices; `te` may be empty.
  static SequenceBatch stack(const std::vector<const Eigen::MatrixXd*>& features,
                             const std::vector<const Eigen::MatrixXd*>& te);
};

// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)] per tensor (fan_in = input
// width of the layer; in + hidden for the LSTM). LSTM forget-gate biases
// are 1 and the regression output bias is 1.
ParamSet init_params(const ModelSpec& spec, int input_dim, uint64_t seed);

struct ForwardTrace {
  Family family = Family::kLinReg;
  int batch = 0;
  int steps = 0;
  long long param_count = 0;

  Eigen::MatrixXd output;  // probabilities (batch x 2) or values (batch x 1)
  Eigen::MatrixXd logits;  // last dense layer before softmax / clamp

  // Dense stack: inputs to every dense layer (last entry feeds the output
  // layer) and pre-activations of the hidden ones.
  std::vector<Eigen::MatrixXd> dense_in;
  std::vector<Eigen::MatrixXd> dense_pre;

  // LSTM, per step: inputs, post-activation gates [i f g o], cell, hidden.
  std::vector<Eigen::MatrixXd> x;
  std::vector<Eigen::MatrixXd> gates;
  std::vector<Eigen::MatrixXd> c;
  std::vector<Eigen::MatrixXd> h;

  // Self-attention, per episode: H' (steps x h), tanh(Ws1 H'^T), A.
  std::vector<Eigen::MatrixXd> hidden_states;
  std::vector<Eigen::MatrixXd> att_tanh;
  std::vector<Eigen::MatrixXd> attention;
  double penalty = 0.0;  // batch mean of ||A A^T - I||_F^2

  // Probability of the positive class, or the regression value.
  Eigen::VectorXd prediction() const;
};

// ||A A^T - I||_F^2 for one r x steps attention matrix.
double attention_penalty(const Eigen::MatrixXd& a);

ForwardTrace forward(const ModelSpec& spec, const ParamSet& params,
                     const SequenceBatch& batch);

// Batch mean of cross-entropy (classification, targets in {0,1}) or squared
// error (regression, targets in days), plus C times the mean attention
// penalty for sa_lstm.
double loss(const ModelSpec& spec, const ForwardTrace& trace,
            std::span<const double> targets);

// Exact gradient of loss_scale * loss(...) with respect to every parameter.
ParamSet backward(const ModelSpec& spec, const ParamSet& params,
                  const ForwardTrace& trace, std::span<const double> targets,
                  double loss_scale = 1.0);

long long count_params(const ModelSpec& spec, int input_dim);

// Largest hidden size whose full parameter count (recurrent part, attention
// and head) fits the budget. For add_te the embedding dim follows h.
int solve_hidden_for_budget(const ModelSpec& spec, int input_dim,
                            long long budget);

}  // namespace tembed
