#include "tembed/models.h"

#include <cmath>

#include "tembed/errors.h"
#include "tembed/rng.h"

namespace tembed {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// ---- spec ----------------------------------------------------------------------

std::string family_name(Family f) {
  switch (f) {
    case Family::kLinReg: return "linreg";
    case Family::kLogReg: return "logreg";
    case Family::kMlp: return "mlp";
    case Family::kLstm: return "lstm";
    case Family::kSaLstm: return "sa_lstm";
  }
  return "?";
}

Family parse_family(const std::string& s) {
  for (Family f : {Family::kLinReg, Family::kLogReg, Family::kMlp,
                   Family::kLstm, Family::kSaLstm}) {
    if (family_name(f) == s) return f;
  }
  throw ConfigError("unknown model family '" + s + "'");
}

std::string te_mode_name(TeMode m) {
  switch (m) {
    case TeMode::kNone: return "none";
    case TeMode::kMask: return "mask";
    case TeMode::kCatTe: return "cat_te";
    case TeMode::kAddTe: return "add_te";
  }
  return "?";
}

TeMode parse_te_mode(const std::string& s) {
  for (TeMode m : {TeMode::kNone, TeMode::kMask, TeMode::kCatTe,
                   TeMode::kAddTe}) {
    if (te_mode_name(m) == s) return m;
  }
  throw ConfigError("unknown te_mode '" + s + "'");
}

void ModelSpec::validate() const {
  const std::string name = family_name(family);
  if (family == Family::kLinReg && task != Task::kRegression) {
    throw ConfigError("linreg is a regression model");
  }
  if (family == Family::kLogReg && task != Task::kClassification) {
    throw ConfigError("logreg is a classification model");
  }
  if ((family == Family::kLinReg || family == Family::kLogReg) &&
      !head_widths.empty()) {
    throw ConfigError(name + " takes no hidden layers");
  }
  for (int w : head_widths) {
    if (w < 1) throw ConfigError("head widths must be >= 1");
  }
  if (recurrent() && hidden < 1) {
    throw ConfigError(name + " needs hidden >= 1");
  }
  if (attention.has_value() != (family == Family::kSaLstm)) {
    throw ConfigError("attention settings are required for sa_lstm and only "
                      "allowed there");
  }
  if (attention && (attention->d_a < 1 || attention->r < 1 ||
                    !(attention->penalty_c >= 0.0))) {
    throw ConfigError("attention needs d_a >= 1, r >= 1, penalty_c >= 0");
  }
  if (te_mode == TeMode::kCatTe || te_mode == TeMode::kAddTe) {
    if (!te_cfg) throw ConfigError(te_mode_name(te_mode) + " needs te_cfg");
    te_cfg->validate();
  }
  if (te_mode == TeMode::kAddTe) {
    if (!recurrent()) throw ConfigError("add_te requires lstm or sa_lstm");
    if (te_cfg->dim != hidden) {
      throw ConfigError("add_te requires te dim (" +
                        std::to_string(te_cfg->dim) + ") == hidden (" +
                        std::to_string(hidden) + ")");
    }
  }
}

namespace {

std::optional<EncoderConfig> default_te(TeMode mode, int dim) {
  if (mode == TeMode::kCatTe || mode == TeMode::kAddTe) {
    return EncoderConfig::temporal(dim, 48.0);
  }
  return std::nullopt;
}

}  // namespace

ModelSpec ModelSpec::linear(Task task, TeMode mode) {
  ModelSpec s;
  s.family = task == Task::kRegression ? Family::kLinReg : Family::kLogReg;
  s.task = task;
  s.head_widths = {};
  s.te_mode = mode;
  s.te_cfg = default_te(mode, 32);
  return s;
}

ModelSpec ModelSpec::mlp(Task task, TeMode mode) {
  ModelSpec s;
  s.family = Family::kMlp;
  s.task = task;
  s.head_widths = {64, 64, 32, 16};
  s.te_mode = mode;
  s.te_cfg = default_te(mode, 32);
  return s;
}

ModelSpec ModelSpec::lstm(Task task, int hidden, TeMode mode) {
  ModelSpec s;
  s.family = Family::kLstm;
  s.task = task;
  s.hidden = hidden;
  s.te_mode = mode;
  s.te_cfg = default_te(mode, mode == TeMode::kAddTe ? hidden : 32);
  return s;
}

ModelSpec ModelSpec::sa_lstm(Task task, int hidden, TeMode mode) {
  ModelSpec s = lstm(task, hidden, mode);
  s.family = Family::kSaLstm;
  s.attention = AttentionSpec{};
  return s;
}

int model_input_dim(const ModelSpec& spec, int steps, int features) {
  return spec.recurrent() ? features : steps * features;
}

SequenceBatch SequenceBatch::stack(
    const std::vector<const MatrixXd*>& features,
    const std::vector<const MatrixXd*>& te) {
  SequenceBatch b;
  if (features.empty()) return b;
  const auto steps = features[0]->rows();
  const auto width = features[0]->cols();
  const auto n = static_cast<Eigen::Index>(features.size());
  b.x.assign(steps, MatrixXd(n, width));
  for (Eigen::Index e = 0; e < n; ++e) {
    const MatrixXd& f = *features[e];
    if (f.rows() != steps || f.cols() != width) {
      throw InputError("episodes in a batch must share the same shape");
    }
    for (Eigen::Index t = 0; t < steps; ++t) b.x[t].row(e) = f.row(t);
  }
  if (!te.empty()) {
    if (te.size() != features.size()) {
      throw InputError("one step-embedding matrix per episode is required");
    }
    const auto dim = te[0]->cols();
    b.te.assign(steps, MatrixXd(n, dim));
    for (Eigen::Index e = 0; e < n; ++e) {
      if (te[e]->rows() != steps || te[e]->cols() != dim) {
        throw InputError("step-embedding shape mismatch");
      }
      for (Eigen::Index t = 0; t < steps; ++t) b.te[t].row(e) = te[e]->row(t);
    }
  }
  return b;
}

// ---- parameters ----------------------------------------------------------------

namespace {

struct DenseShape {
  std::string name;
  int in;
  int out;
};

// Input width of the dense stack that follows the encoder.
int dense_input(const ModelSpec& spec, int input_dim) {
  switch (spec.family) {
    case Family::kLstm: return spec.hidden;
    case Family::kSaLstm: return spec.attention->r * spec.hidden;
    default: return input_dim;
  }
}

std::vector<DenseShape> dense_layers(const ModelSpec& spec, int input_dim) {
  std::vector<DenseShape> layers;
  int in = dense_input(spec, input_dim);
  const std::string prefix = spec.family == Family::kMlp ? "dense" : "head";
  for (size_t l = 0; l < spec.head_widths.size(); ++l) {
    layers.push_back({prefix + std::to_string(l), in, spec.head_widths[l]});
    in = spec.head_widths[l];
  }
  layers.push_back({"out", in, spec.outputs()});
  return layers;
}

void fill_uniform(MatrixXd& m, double bound, CounterRng& rng) {
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    m.data()[i] = rng.uniform(-bound, bound);
  }
}

}  // namespace

ParamSet init_params(const ModelSpec& spec, int input_dim, uint64_t seed) {
  spec.validate();
  if (input_dim < 1) throw ConfigError("input_dim must be >= 1");
  ParamSet p;
  uint64_t stream = 0;
  auto uniform = [&](MatrixXd& m, int fan_in) {
    CounterRng rng(seed, stream++);
    fill_uniform(m, 1.0 / std::sqrt(static_cast<double>(fan_in)), rng);
  };

  if (spec.recurrent()) {
    const int h = spec.hidden;
    uniform(p.add("lstm.Wx", 4 * h, input_dim), input_dim + h);
    uniform(p.add("lstm.Wh", 4 * h, h), input_dim + h);
    auto& b = p.add("lstm.b", 4 * h, 1);
    uniform(b, input_dim + h);
    b.middleRows(h, h).setOnes();  // forget gate
  }
  if (spec.family == Family::kSaLstm) {
    const auto& att = *spec.attention;
    uniform(p.add("att.Ws1", att.d_a, spec.hidden), spec.hidden);
    uniform(p.add("att.Ws2", att.r, att.d_a), att.d_a);
  }
  for (const auto& layer : dense_layers(spec, input_dim)) {
    uniform(p.add(layer.name + ".W", layer.out, layer.in), layer.in);
    auto& b = p.add(layer.name + ".b", layer.out, 1);
    uniform(b, layer.in);
    if (layer.name == "out" && spec.task == Task::kRegression) b.setOnes();
  }
  return p;
}

long long count_params(const ModelSpec& spec, int input_dim) {
  spec.validate();
  long long n = 0;
  if (spec.recurrent()) {
    const long long h = spec.hidden;
    n += 4 * (h * (input_dim + h) + h);
  }
  if (spec.family == Family::kSaLstm) {
    n += static_cast<long long>(spec.attention->d_a) * spec.hidden +
         static_cast<long long>(spec.attention->r) * spec.attention->d_a;
  }
  for (const auto& layer : dense_layers(spec, input_dim)) {
    n += static_cast<long long>(layer.in) * layer.out + layer.out;
  }
  return n;
}

int solve_hidden_for_budget(const ModelSpec& spec, int input_dim,
                            long long budget) {
  if (!spec.recurrent()) {
    throw ConfigError("hidden-size budgeting applies to lstm / sa_lstm");
  }
  auto count_at = [&](int h) {
    ModelSpec s = spec;
    s.hidden = h;
    // The count does not depend on the embedding; drop the dim == h
    // constraint so odd h can be probed.
    if (s.te_mode == TeMode::kAddTe) {
      s.te_mode = TeMode::kNone;
      s.te_cfg.reset();
    }
    return count_params(s, input_dim);
  };
  if (count_at(1) > budget) {
    throw ConfigError("budget " + std::to_string(budget) +
                      " is below the smallest model (" +
                      std::to_string(count_at(1)) + " parameters)");
  }
  int h = 1;
  while (count_at(h + 1) <= budget) ++h;
  return h;
}

// ---- forward -------------------------------------------------------------------

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

void check_finite(const MatrixXd& m, const std::string& layer) {
  if (!m.allFinite()) {
    throw NumericError("non-finite activation in layer " + layer);
  }
}

MatrixXd affine(const MatrixXd& a, const MatrixXd& w, const MatrixXd& b) {
  MatrixXd z = a * w.transpose();
  z.rowwise() += b.col(0).transpose();
  return z;
}

MatrixXd flatten(const SequenceBatch& batch) {
  const int f = batch.features();
  MatrixXd out(batch.batch(), static_cast<Eigen::Index>(batch.steps()) * f);
  for (int t = 0; t < batch.steps(); ++t) {
    out.middleCols(static_cast<Eigen::Index>(t) * f, f) = batch.x[t];
  }
  return out;
}

// Row-wise softmax.
MatrixXd softmax_rows(const MatrixXd& z) {
  MatrixXd p(z.rows(), z.cols());
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const double m = z.row(i).maxCoeff();
    p.row(i) = (z.row(i).array() - m).exp().matrix();
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

void lstm_forward(const ModelSpec& spec, const ParamSet& p,
                  const SequenceBatch& batch, ForwardTrace& tr) {
  const int h = spec.hidden;
  const int B = batch.batch();
  const MatrixXd& wx = p["lstm.Wx"];
  const MatrixXd& wh = p["lstm.Wh"];
  const MatrixXd& b = p["lstm.b"];
  if (wx.cols() != batch.features()) {
    throw InputError("input width " + std::to_string(batch.features()) +
                     " does not match lstm.Wx (" + std::to_string(wx.cols()) +
                     ")");
  }
  tr.x = batch.x;
  tr.c.assign(1, MatrixXd::Zero(B, h));
  tr.h.assign(1, MatrixXd::Zero(B, h));
  tr.gates.clear();
  for (int t = 0; t < batch.steps(); ++t) {
    MatrixXd g = batch.x[t] * wx.transpose() + tr.h.back() * wh.transpose();
    g.rowwise() += b.col(0).transpose();
    g.leftCols(2 * h) = g.leftCols(2 * h).unaryExpr(&sigmoid);
    g.middleCols(2 * h, h) = g.middleCols(2 * h, h).array().tanh().matrix();
    g.rightCols(h) = g.rightCols(h).unaryExpr(&sigmoid);
    MatrixXd c = g.middleCols(h, h).cwiseProduct(tr.c.back()) +
                 g.leftCols(h).cwiseProduct(g.middleCols(2 * h, h));
    MatrixXd hn = g.rightCols(h).cwiseProduct(c.array().tanh().matrix());
    tr.gates.push_back(std::move(g));
    tr.c.push_back(std::move(c));
    tr.h.push_back(std::move(hn));
  }
  check_finite(tr.h.back(), "lstm");
}

// Returns the flattened pooled matrices (batch x r*h).
MatrixXd attention_forward(const ModelSpec& spec, const ParamSet& p,
                           const SequenceBatch& batch, ForwardTrace& tr) {
  const auto& att = *spec.attention;
  const int h = spec.hidden;
  const int B = batch.batch();
  const int T = batch.steps();
  const MatrixXd& ws1 = p["att.Ws1"];
  const MatrixXd& ws2 = p["att.Ws2"];
  const bool add_te = spec.te_mode == TeMode::kAddTe;
  if (add_te && (static_cast<int>(batch.te.size()) != T ||
                 (T > 0 && batch.te[0].cols() != h))) {
    throw InputError("add_te needs per-step embeddings of width hidden");
  }
  MatrixXd pooled(B, static_cast<Eigen::Index>(att.r) * h);
  tr.hidden_states.resize(B);
  tr.att_tanh.resize(B);
  tr.attention.resize(B);
  double penalty = 0.0;
  for (int e = 0; e < B; ++e) {
    MatrixXd hs(T, h);
    for (int t = 0; t < T; ++t) {
      hs.row(t) = tr.h[t + 1].row(e);
      if (add_te) hs.row(t) += batch.te[t].row(e);
    }
    MatrixXd s = (ws1 * hs.transpose()).array().tanh().matrix();  // d_a x T
    MatrixXd a = softmax_rows(ws2 * s);                           // r x T
    MatrixXd m = a * hs;                                          // r x h
    for (int i = 0; i < att.r; ++i) {
      pooled.block(e, static_cast<Eigen::Index>(i) * h, 1, h) = m.row(i);
    }
    penalty += attention_penalty(a);
    tr.hidden_states[e] = std::move(hs);
    tr.att_tanh[e] = std::move(s);
    tr.attention[e] = std::move(a);
  }
  tr.penalty = B > 0 ? penalty / B : 0.0;
  check_finite(pooled, "attention");
  return pooled;
}

}  // namespace

double attention_penalty(const MatrixXd& a) {
  return (a * a.transpose() - MatrixXd::Identity(a.rows(), a.rows()))
      .squaredNorm();
}

Eigen::VectorXd ForwardTrace::prediction() const {
  if (output.cols() == 2) return output.col(1);
  return output.col(0);
}

ForwardTrace forward(const ModelSpec& spec, const ParamSet& params,
                     const SequenceBatch& batch) {
  spec.validate();
  ForwardTrace tr;
  tr.family = spec.family;
  tr.batch = batch.batch();
  tr.steps = batch.steps();
  tr.param_count = params.total_size();
  for (const auto& x : batch.x) {
    if (!x.allFinite()) throw InputError("non-finite input features");
  }

  MatrixXd a;
  switch (spec.family) {
    case Family::kLinReg:
    case Family::kLogReg:
    case Family::kMlp:
      a = flatten(batch);
      break;
    case Family::kLstm:
      lstm_forward(spec, params, batch, tr);
      a = tr.h.back();
      // add_te: the last state gets the last step's embedding.
      if (spec.te_mode == TeMode::kAddTe) {
        if (static_cast<int>(batch.te.size()) != tr.steps ||
            (tr.steps > 0 && batch.te.back().cols() != spec.hidden)) {
          throw InputError("add_te needs per-step embeddings of width hidden");
        }
        if (tr.steps > 0) a += batch.te.back();
      }
      break;
    case Family::kSaLstm:
      lstm_forward(spec, params, batch, tr);
      a = attention_forward(spec, params, batch, tr);
      break;
  }

  const auto layers = dense_layers(spec, 0);
  for (size_t l = 0; l < layers.size(); ++l) {
    const auto& name = layers[l].name;
    const MatrixXd& w = params[name + ".W"];
    if (w.cols() != a.cols()) {
      throw InputError("layer " + name + " expects width " +
                       std::to_string(w.cols()) + ", got " +
                       std::to_string(a.cols()));
    }
    MatrixXd z = affine(a, w, params[name + ".b"]);
    check_finite(z, name);
    tr.dense_in.push_back(std::move(a));
    if (l + 1 == layers.size()) {
      tr.logits = std::move(z);
    } else {
      a = z.cwiseMax(0.0);
      tr.dense_pre.push_back(std::move(z));
    }
  }
  tr.output = spec.task == Task::kClassification ? softmax_rows(tr.logits)
                                                 : tr.logits.cwiseMax(0.0);
  return tr;
}

// ---- loss ----------------------------------------------------------------------

namespace {

void check_targets(const ModelSpec& spec, const ForwardTrace& tr,
                   std::span<const double> targets) {
  if (static_cast<int>(targets.size()) != tr.batch) {
    throw InputError("expected " + std::to_string(tr.batch) + " targets, got " +
                     std::to_string(targets.size()));
  }
  if (spec.task == Task::kClassification) {
    for (double y : targets) {
      if (y != 0.0 && y != 1.0) {
        throw InputError("class index out of range: " + std::to_string(y));
      }
    }
  }
}

}  // namespace

double loss(const ModelSpec& spec, const ForwardTrace& trace,
            std::span<const double> targets) {
  check_targets(spec, trace, targets);
  double total = 0.0;
  for (int i = 0; i < trace.batch; ++i) {
    if (spec.task == Task::kClassification) {
      const auto z = trace.logits.row(i);
      const double m = z.maxCoeff();
      const double lse = m + std::log((z.array() - m).exp().sum());
      total += lse - z(static_cast<int>(targets[i]));
    } else {
      const double d = trace.output(i, 0) - targets[i];
      total += d * d;
    }
  }
  double value = trace.batch > 0 ? total / trace.batch : 0.0;
  if (spec.family == Family::kSaLstm) {
    value += spec.attention->penalty_c * trace.penalty;
  }
  return value;
}

// ---- backward ------------------------------------------------------------------

ParamSet backward(const ModelSpec& spec, const ParamSet& params,
                  const ForwardTrace& tr, std::span<const double> targets,
                  double loss_scale) {
  spec.validate();
  if (tr.family != spec.family || tr.param_count != params.total_size()) {
    throw InputError("forward trace does not belong to this model");
  }
  check_targets(spec, tr, targets);
  const int B = tr.batch;
  ParamSet grad = params.zeros_like();
  if (B == 0) return grad;
  const double scale = loss_scale / B;

  // d loss / d logits
  MatrixXd dz = tr.output;
  if (spec.task == Task::kClassification) {
    for (int i = 0; i < B; ++i) dz(i, static_cast<int>(targets[i])) -= 1.0;
    dz *= scale;
  } else {
    for (int i = 0; i < B; ++i) {
      dz(i, 0) = tr.logits(i, 0) > 0.0
                     ? 2.0 * (tr.output(i, 0) - targets[i]) * scale
                     : 0.0;
    }
  }

  const auto layers = dense_layers(spec, 0);
  MatrixXd da;
  for (size_t li = layers.size(); li-- > 0;) {
    const auto& name = layers[li].name;
    if (li + 1 < layers.size()) {
      dz = da.cwiseProduct(
          (tr.dense_pre[li].array() > 0.0).cast<double>().matrix());
    }
    grad[name + ".W"] += dz.transpose() * tr.dense_in[li];
    grad[name + ".b"] += dz.colwise().sum().transpose();
    da = dz * params[name + ".W"];
  }
  if (!spec.recurrent()) return grad;

  const int h = spec.hidden;
  const int T = tr.steps;
  // d loss / d h_t for t = 1..T (index t).
  std::vector<MatrixXd> dh(T + 1, MatrixXd::Zero(B, h));
  if (spec.family == Family::kLstm) {
    dh[T] = da;
  } else {
    const auto& att = *spec.attention;
    const MatrixXd& ws1 = params["att.Ws1"];
    const MatrixXd& ws2 = params["att.Ws2"];
    MatrixXd& gws1 = grad["att.Ws1"];
    MatrixXd& gws2 = grad["att.Ws2"];
    const MatrixXd eye = MatrixXd::Identity(att.r, att.r);
    const double pen_scale = loss_scale * att.penalty_c / B;
    for (int e = 0; e < B; ++e) {
      const MatrixXd& hs = tr.hidden_states[e];
      const MatrixXd& s = tr.att_tanh[e];
      const MatrixXd& a = tr.attention[e];
      MatrixXd dm(att.r, h);
      for (int i = 0; i < att.r; ++i) {
        dm.row(i) = da.block(e, static_cast<Eigen::Index>(i) * h, 1, h);
      }
      // ||A A^T - I||^2 has gradient 4 (A A^T - I) A.
      MatrixXd dA = dm * hs.transpose() +
                    pen_scale * 4.0 * (a * a.transpose() - eye) * a;
      MatrixXd dhs = a.transpose() * dm;
      // Row-softmax backward.
      MatrixXd de(a.rows(), a.cols());
      for (Eigen::Index i = 0; i < a.rows(); ++i) {
        const double dot = a.row(i).dot(dA.row(i));
        de.row(i) = a.row(i).cwiseProduct(
            (dA.row(i).array() - dot).matrix());
      }
      gws2 += de * s.transpose();
      MatrixXd dpre =
          (ws2.transpose() * de).cwiseProduct(
              (1.0 - s.array().square()).matrix());  // d_a x T
      gws1 += dpre * hs;
      dhs += dpre.transpose() * ws1;
      for (int t = 0; t < T; ++t) dh[t + 1].row(e) += dhs.row(t);
    }
  }

  const MatrixXd& wh = params["lstm.Wh"];
  MatrixXd& gwx = grad["lstm.Wx"];
  MatrixXd& gwh = grad["lstm.Wh"];
  MatrixXd& gb = grad["lstm.b"];
  MatrixXd dh_next = MatrixXd::Zero(B, h);
  MatrixXd dc_next = MatrixXd::Zero(B, h);
  MatrixXd dg(B, 4 * h);
  for (int t = T; t >= 1; --t) {
    const MatrixXd& g = tr.gates[t - 1];
    const auto gi = g.leftCols(h).array();
    const auto gf = g.middleCols(h, h).array();
    const auto gg = g.middleCols(2 * h, h).array();
    const auto go = g.rightCols(h).array();
    const Eigen::ArrayXXd tc = tr.c[t].array().tanh();
    const Eigen::ArrayXXd dht = (dh[t] + dh_next).array();
    const Eigen::ArrayXXd dc = dc_next.array() + dht * go * (1.0 - tc.square());
    dg.leftCols(h) = (dc * gg * gi * (1.0 - gi)).matrix();
    dg.middleCols(h, h) = (dc * tr.c[t - 1].array() * gf * (1.0 - gf)).matrix();
    dg.middleCols(2 * h, h) = (dc * gi * (1.0 - gg.square())).matrix();
    dg.rightCols(h) = (dht * tc * go * (1.0 - go)).matrix();
    gwx += dg.transpose() * tr.x[t - 1];
    gwh += dg.transpose() * tr.h[t - 1];
    gb += dg.colwise().sum().transpose();
    dh_next = dg * wh;
    dc_next = (dc * gf).matrix();
  }
  return grad;
}

}  // namespace tembed
