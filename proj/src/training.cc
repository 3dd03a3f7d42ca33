#include "tembed/training.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <numeric>
#include <thread>

#include "json.hpp"
#include "tembed/errors.h"
#include "tembed/io.h"
#include "tembed/metrics.h"
#include "tembed/rng.h"

namespace tembed {

// ---- features ------------------------------------------------------------------

FeaturePipeline FeaturePipeline::for_model(const ModelSpec& spec,
                                           const Schema& schema, double window,
                                           double bin_width) {
  FeaturePipeline p;
  p.schema = schema;
  p.task = spec.task;
  p.window = window;
  p.bin_width = bin_width;
  p.mode = spec.te_mode;
  if (spec.te_cfg) p.te_cfg = *spec.te_cfg;
  const size_t nc = schema.channels.size();
  p.stats = {std::vector<double>(nc, 0.0), std::vector<double>(nc, 1.0)};
  return p;
}

int FeaturePipeline::steps() const {
  return static_cast<int>(std::ceil(window / bin_width));
}

int FeaturePipeline::feature_width() const {
  return step_feature_width(schema, mode, te_cfg);
}

PreparedSet prepare(const FeaturePipeline& pipeline,
                    const std::vector<IrregularSeries>& series,
                    const std::vector<double>& labels) {
  if (!labels.empty() && labels.size() != series.size()) {
    throw InputError("prepare: one label per series is required");
  }
  PreparedSet out;
  out.features.reserve(series.size());
  for (size_t i = 0; i < series.size(); ++i) {
    const auto normalized = apply_norm(crop(series[i], pipeline.window),
                                       pipeline.stats, pipeline.schema);
    const auto ep = bin(normalized, pipeline.schema, pipeline.window,
                        pipeline.bin_width);
    out.features.push_back(step_features(ep, pipeline.mode, pipeline.te_cfg));
    if (pipeline.mode == TeMode::kAddTe) {
      out.step_te.push_back(step_embeddings(ep, pipeline.te_cfg));
    }
    if (!labels.empty()) {
      out.targets.push_back(pipeline.task == Task::kRegression
                                ? label_convert(labels[i], LabelUnit::kToDays)
                                : labels[i]);
    }
  }
  return out;
}

namespace {

SequenceBatch gather(const PreparedSet& data, std::span<const size_t> idx) {
  std::vector<const Eigen::MatrixXd*> f, t;
  f.reserve(idx.size());
  for (size_t i : idx) {
    f.push_back(&data.features[i]);
    if (!data.step_te.empty()) t.push_back(&data.step_te[i]);
  }
  return SequenceBatch::stack(f, t);
}

}  // namespace

Eigen::VectorXd predict(const ModelSpec& spec, const ParamSet& params,
                        const PreparedSet& data, int chunk) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(data.size()));
  std::vector<size_t> idx;
  for (size_t start = 0; start < data.size(); start += chunk) {
    const size_t end = std::min(data.size(), start + chunk);
    idx.resize(end - start);
    std::iota(idx.begin(), idx.end(), start);
    const auto tr = forward(spec, params, gather(data, idx));
    out.segment(static_cast<Eigen::Index>(start),
                static_cast<Eigen::Index>(end - start)) = tr.prediction();
  }
  if (spec.task == Task::kRegression) out *= 24.0;  // days -> hours
  return out;
}

MetricSet evaluate_metrics(Task task, std::span<const double> predictions,
                           std::span<const double> targets) {
  if (task == Task::kClassification) {
    return {{"auc_roc", auc_roc(predictions, targets)},
            {"avg_precision", avg_precision(predictions, targets)}};
  }
  return {{"mae", mae(predictions, targets)},
          {"rmse", rmse(predictions, targets)},
          {"ev", explained_variance(predictions, targets)}};
}

// ---- training ------------------------------------------------------------------

bool val_better(Task task, double candidate, double incumbent) {
  if (std::isnan(incumbent)) return !std::isnan(candidate);
  return task == Task::kClassification ? candidate > incumbent
                                       : candidate < incumbent;
}

namespace {

double validation_metric(const ModelSpec& spec, const ParamSet& params,
                         const PreparedSet& val) {
  const Eigen::VectorXd pred = predict(spec, params, val);
  std::span<const double> p(pred.data(), static_cast<size_t>(pred.size()));
  if (spec.task == Task::kClassification) return auc_roc(p, val.targets);
  std::vector<double> hours(val.targets.size());
  for (size_t i = 0; i < hours.size(); ++i) hours[i] = val.targets[i] * 24.0;
  return mae(p, hours);
}

}  // namespace

TrainResult train_one(const ModelSpec& spec, const PreparedSet& train,
                      const PreparedSet& val, const TrainHyper& hyper,
                      uint64_t seed) {
  if (train.size() == 0) throw InputError("empty training set");
  if (hyper.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (hyper.epochs < 0) throw ConfigError("epochs must be >= 0");
  const int steps = static_cast<int>(train.features[0].rows());
  const int width = static_cast<int>(train.features[0].cols());
  ParamSet params = init_params(spec, model_input_dim(spec, steps, width),
                                derive_seed(seed, 0));
  TrainResult result;
  result.best = params;
  result.best_val = std::numeric_limits<double>::quiet_NaN();
  if (hyper.epochs == 0) return result;

  OptState state = OptState::zeros_like(
      params, {hyper.lr, 0.9, 0.999, 1e-8, hyper.weight_decay});
  std::vector<size_t> order(train.size());
  std::vector<double> targets;
  try {
    for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
      std::iota(order.begin(), order.end(), 0);
      CounterRng rng(seed, 1 + static_cast<uint64_t>(epoch));
      shuffle(order, rng);
      double loss_sum = 0.0;
      for (size_t start = 0; start < order.size(); start += hyper.batch_size) {
        const size_t end =
            std::min(order.size(), start + static_cast<size_t>(hyper.batch_size));
        std::span<const size_t> idx(order.data() + start, end - start);
        targets.clear();
        for (size_t i : idx) targets.push_back(train.targets[i]);
        const auto batch = gather(train, idx);
        const auto tr = forward(spec, params, batch);
        const double l = loss(spec, tr, targets);
        if (!std::isfinite(l)) {
          throw NumericError("non-finite training loss at epoch " +
                             std::to_string(epoch));
        }
        loss_sum += l * static_cast<double>(idx.size());
        opt_step(params, backward(spec, params, tr, targets), state);
      }
      EpochRecord rec{epoch, loss_sum / static_cast<double>(train.size()),
                      std::numeric_limits<double>::quiet_NaN()};
      if (val.size() > 0) {
        rec.val_metric = validation_metric(spec, params, val);
        if (val_better(spec.task, rec.val_metric, result.best_val)) {
          result.best_val = rec.val_metric;
          result.best_epoch = epoch;
          result.best = params;
        }
      } else {
        result.best = params;
        result.best_epoch = epoch;
      }
      result.history.push_back(rec);
    }
  } catch (const NumericError& e) {
    result.failed = true;
    result.failure = e.what();
  } catch (const UndefinedMetricError& e) {
    result.failed = true;
    result.failure = e.what();
  }
  return result;
}

// ---- held-out test ---------------------------------------------------------------

HeldOutTest::HeldOutTest(std::vector<IrregularSeries> series,
                         std::vector<double> labels, Task task)
    : series_(std::move(series)), labels_(std::move(labels)), task_(task) {
  if (series_.size() != labels_.size()) {
    throw InputError("test set needs one label per series");
  }
}

MetricSet HeldOutTest::evaluate(
    const std::vector<IrregularSeries>& series,
    const std::function<Eigen::VectorXd(const std::vector<IrregularSeries>&)>&
        predict_fn) const {
  if (series.size() != series_.size()) {
    throw InputError("evaluate: series count differs from the test set");
  }
  const Eigen::VectorXd pred = predict_fn(series);
  if (pred.size() != static_cast<Eigen::Index>(labels_.size())) {
    throw InputError("evaluate: prediction count differs from the test set");
  }
  return evaluate_metrics(
      task_, std::span<const double>(pred.data(), labels_.size()), labels_);
}

// ---- report --------------------------------------------------------------------

MetricSummary summarize(const std::string& metric,
                        const std::vector<double>& values) {
  MetricSummary s;
  s.metric = metric;
  s.n = static_cast<int>(values.size());
  if (values.empty()) {
    s.mean = s.std = s.stderr_ = std::numeric_limits<double>::quiet_NaN();
    return s;
  }
  const double n = static_cast<double>(values.size());
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(ss / n);
  s.stderr_ = values.size() > 1 ? std::sqrt(ss / (n - 1.0)) / std::sqrt(n) : 0.0;
  return s;
}

void RunReport::aggregate() {
  std::map<std::string, std::vector<double>> by_metric;
  failed_runs = 0;
  for (const auto& r : runs) {
    if (r.failed) ++failed_runs;
    if (!r.selected) continue;
    for (const auto& [name, value] : r.test) by_metric[name].push_back(value);
  }
  summary.clear();
  for (const auto& [name, values] : by_metric) {
    summary.push_back(summarize(name, values));
  }
}

namespace {

std::string num(double v) {
  return std::isfinite(v) ? format_double(v) : std::string("nan");
}

}  // namespace

std::string RunReport::to_jsonl() const {
  std::string out;
  for (const auto& r : runs) {
    nlohmann::ordered_json j;
    j["type"] = "run";
    j["model"] = alias;
    j["fold"] = r.fold;
    j["run"] = r.run;
    j["seed"] = r.seed;
    j["status"] = r.failed ? "failed" : "ok";
    if (r.failed) j["failure"] = r.failure;
    j["best_epoch"] = r.best_epoch;
    j["best_val"] = num(r.best_val);
    j["selected"] = r.selected;
    nlohmann::ordered_json t = nlohmann::ordered_json::object();
    for (const auto& [name, value] : r.test) t[name] = num(value);
    j["test"] = t;
    out += j.dump() + "\n";
  }
  for (const auto& s : summary) {
    nlohmann::ordered_json j;
    j["type"] = "summary";
    j["model"] = alias;
    j["metric"] = s.metric;
    j["n"] = s.n;
    j["mean"] = num(s.mean);
    j["std"] = num(s.std);
    j["stderr"] = num(s.stderr_);
    j["trainings"] = trainings;
    j["failed_runs"] = failed_runs;
    out += j.dump() + "\n";
  }
  return out;
}

std::string RunReport::summary_csv() const {
  std::string out = "model,metric,mean,std,stderr,n\n";
  for (const auto& s : summary) {
    out += alias + "," + s.metric + "," + num(s.mean) + "," + num(s.std) + "," +
           num(s.stderr_) + "," + std::to_string(s.n) + "\n";
  }
  return out;
}

std::vector<std::string> RunReport::summary_rows() const {
  std::vector<std::string> rows;
  for (const auto& s : summary) {
    rows.push_back(alias + "," + s.metric + "," + num(s.mean) + "," +
                   num(s.std));
  }
  return rows;
}

// ---- cross-validation ------------------------------------------------------------

int thread_count_from_env() {
  if (const char* env = std::getenv("TEMBED_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return 1;
}

uint64_t run_seed(uint64_t base_seed, int fold, int run) {
  return derive_seed(base_seed, static_cast<uint64_t>(fold),
                     static_cast<uint64_t>(run));
}

namespace {

// Runs fn(i) for i in [0, n) on up to `threads` workers.
void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  threads = std::max(1, std::min(threads, n));
  if (threads == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  for (int w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (int i = next++; i < n; i = next++) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

CvResult run_cv(const ModelSpec& spec, const Schema& schema,
                const std::vector<LabeledSeries>& pool, const HeldOutTest& test,
                const CvOptions& options) {
  spec.validate();
  const int k = options.folds;
  std::vector<std::string> ids;
  std::vector<double> labels;
  for (const auto& ep : pool) {
    ids.push_back(ep.series.id);
    labels.push_back(ep.label);
  }
  const auto fold_of =
      split_folds(ids, labels, k, options.base_seed,
                  spec.task == Task::kClassification);
  const int threads =
      options.threads > 0 ? options.threads : thread_count_from_env();

  CvResult result;
  RunReport& report = result.report;
  report.alias = options.alias;
  report.task = spec.task;
  report.folds = k;
  report.runs_per_fold = options.runs_per_fold;
  report.base_seed = options.base_seed;

  for (int fold = 0; fold < k; ++fold) {
    std::vector<IrregularSeries> train_s, val_s;
    std::vector<double> train_y, val_y;
    std::vector<std::string> val_ids;
    for (size_t i = 0; i < pool.size(); ++i) {
      const auto cropped = crop(pool[i].series, options.window);
      if (fold_of[i] == fold) {
        val_ids.push_back(pool[i].series.id);
        val_s.push_back(cropped);
        val_y.push_back(pool[i].label);
      } else {
        train_s.push_back(cropped);
        train_y.push_back(pool[i].label);
      }
    }
    auto pipeline = FeaturePipeline::for_model(spec, schema, options.window,
                                               options.bin_width);
    pipeline.stats = fit_norm(train_s, schema);
    const PreparedSet train = prepare(pipeline, train_s, train_y);
    const PreparedSet val = prepare(pipeline, val_s, val_y);

    std::vector<TrainResult> results(options.runs_per_fold);
    parallel_for(options.runs_per_fold, threads, [&](int run) {
      results[run] = train_one(spec, train, val, options.hyper,
                               run_seed(options.base_seed, fold, run));
    });
    report.trainings += options.runs_per_fold;
    if (options.on_training) {
      for (int run = 0; run < options.runs_per_fold; ++run) {
        options.on_training(fold, run, val_ids);
      }
    }

    int best = -1;
    for (int run = 0; run < options.runs_per_fold; ++run) {
      const auto& r = results[run];
      if (r.failed) continue;
      if (best < 0 || val_better(spec.task, r.best_val, results[best].best_val)) {
        best = run;
      }
    }
    for (int run = 0; run < options.runs_per_fold; ++run) {
      const auto& r = results[run];
      RunRecord rec;
      rec.fold = fold;
      rec.run = run;
      rec.seed = run_seed(options.base_seed, fold, run);
      rec.failed = r.failed;
      rec.failure = r.failure;
      rec.best_epoch = r.best_epoch;
      rec.best_val = r.best_val;
      rec.selected = run == best;
      if (rec.selected) {
        rec.test = test.evaluate(
            test.series(), [&](const std::vector<IrregularSeries>& s) {
              return predict(spec, r.best, prepare(pipeline, s, {}));
            });
        result.selected.push_back({fold, run, r.best, pipeline.stats});
      }
      report.runs.push_back(std::move(rec));
    }
  }
  report.aggregate();
  return result;
}

// ---- dropout sweep ---------------------------------------------------------------

std::vector<double> default_keep_fractions() {
  return {1.0, 0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1};
}

std::vector<SweepRow> sweep_dropout(const ModelSpec& spec, const Schema& schema,
                                    const std::vector<SelectedModel>& selected,
                                    const HeldOutTest& test,
                                    const std::vector<double>& fractions,
                                    double window, double bin_width,
                                    uint64_t seed) {
  std::vector<SweepRow> rows;
  for (size_t fi = 0; fi < fractions.size(); ++fi) {
    const double f = fractions[fi];
    std::vector<IrregularSeries> dropped;
    dropped.reserve(test.size());
    const uint64_t fraction_seed = derive_seed(seed, fi);
    for (const auto& s : test.series()) {
      dropped.push_back(drop_observations(s, f, fraction_seed));
    }
    std::map<std::string, std::vector<double>> values;
    for (const auto& model : selected) {
      auto pipeline = FeaturePipeline::for_model(spec, schema, window, bin_width);
      pipeline.stats = model.stats;
      const auto metrics =
          test.evaluate(dropped, [&](const std::vector<IrregularSeries>& s) {
            return predict(spec, model.params, prepare(pipeline, s, {}));
          });
      for (const auto& [name, v] : metrics) values[name].push_back(v);
    }
    for (const auto& [name, v] : values) {
      const auto s = summarize(name, v);
      rows.push_back({f, name, s.mean, s.std});
    }
  }
  return rows;
}

}  // namespace tembed
