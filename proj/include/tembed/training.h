#pragma once

// Mini-batch training, cross-validated experiment protocol and the
// observation-dropout sweep.

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "tembed/dataset.h"
#include "tembed/models.h"
#include "tembed/optim.h"
#include "tembed/params.h"

namespace tembed {

struct TrainHyper {
  double lr = 1e-3;
  int epochs = 40;
  int batch_size = 100;
  double weight_decay = 1e-2;
};

// Series -> model inputs: crop to the window, normalize, bin, and build the
// per-step features for the model's input regime.
struct FeaturePipeline {
  Schema schema;
  Task task = Task::kClassification;
  double window = 48.0;
  double bin_width = 1.0;
  TeMode mode = TeMode::kNone;
  EncoderConfig te_cfg;  // used by cat_te / add_te
  NormStats stats;

  static FeaturePipeline for_model(const ModelSpec& spec, const Schema& schema,
                                   double window, double bin_width);
  int steps() const;
  int feature_width() const;
};

struct PreparedSet {
  std::vector<Eigen::MatrixXd> features;  // steps x width per episode
  std::vector<Eigen::MatrixXd> step_te;   // add_te only
  std::vector<double> targets;            // class index or days

  size_t size() const { return features.size(); }
};

PreparedSet prepare(const FeaturePipeline& pipeline,
                    const std::vector<IrregularSeries>& series,
                    const std::vector<double>& labels);

// Model outputs in file units: positive-class probability, or hours.
Eigen::VectorXd predict(const ModelSpec& spec, const ParamSet& params,
                        const PreparedSet& data, int chunk = 256);

using MetricSet = std::map<std::string, double>;

// classification: auc_roc, avg_precision; regression: mae, rmse, ev.
// Inputs in file units.
MetricSet evaluate_metrics(Task task, std::span<const double> predictions,
                           std::span<const double> targets);

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_metric = 0.0;
};

struct TrainResult {
  ParamSet best;
  std::vector<EpochRecord> history;
  int best_epoch = -1;  // -1: initial parameters
  double best_val = 0.0;
  bool failed = false;
  std::string failure;
};

// Validation metric: AUC-ROC (maximized) for classification, MAE in hours
// (minimized) for regression. Keeps the parameters of the best epoch.
TrainResult train_one(const ModelSpec& spec, const PreparedSet& train,
                      const PreparedSet& val, const TrainHyper& hyper,
                      uint64_t seed);

bool val_better(Task task, double candidate, double incumbent);

// Test episodes whose labels can only be read through evaluate().
class HeldOutTest {
 public:
  HeldOutTest(std::vector<IrregularSeries> series, std::vector<double> labels,
              Task task);

  const std::vector<IrregularSeries>& series() const { return series_; }
  size_t size() const { return series_.size(); }

  // `predict` maps (possibly modified) test series to predictions in file
  // units, one per series in order.
  MetricSet evaluate(
      const std::vector<IrregularSeries>& series,
      const std::function<Eigen::VectorXd(const std::vector<IrregularSeries>&)>&
          predict) const;

 private:
  std::vector<IrregularSeries> series_;
  std::vector<double> labels_;
  Task task_;
};

struct MetricSummary {
  std::string metric;
  int n = 0;
  double mean = 0.0;
  double std = 0.0;     // population
  double stderr_ = 0.0;  // sample std / sqrt(n)
};

MetricSummary summarize(const std::string& metric,
                        const std::vector<double>& values);

struct RunRecord {
  int fold = 0;
  int run = 0;
  uint64_t seed = 0;
  bool failed = false;
  std::string failure;
  int best_epoch = -1;
  double best_val = 0.0;
  bool selected = false;
  MetricSet test;  // selected runs only
};

struct RunReport {
  std::string alias;
  Task task = Task::kClassification;
  int folds = 0;
  int runs_per_fold = 0;
  uint64_t base_seed = 0;
  int trainings = 0;
  int failed_runs = 0;
  std::vector<RunRecord> runs;  // ordered by (fold, run)
  std::vector<MetricSummary> summary;

  // Recomputes `summary` from the selected rows.
  void aggregate();
  // One JSON record per run followed by one per metric summary.
  std::string to_jsonl() const;
  // `model,metric,mean,std,stderr,n`
  std::string summary_csv() const;
  // `alias,metric,mean,std` lines.
  std::vector<std::string> summary_rows() const;
};

struct CvOptions {
  int folds = 5;
  int runs_per_fold = 10;
  TrainHyper hyper;
  double window = 48.0;
  double bin_width = 1.0;
  uint64_t base_seed = 0;
  int threads = 0;  // 0: TEMBED_THREADS env var, else 1
  std::string alias;
  // Called once per finished training with the validation episode ids.
  std::function<void(int fold, int run, const std::vector<std::string>& val_ids)>
      on_training;
};

struct SelectedModel {
  int fold = 0;
  int run = 0;
  ParamSet params;
  NormStats stats;
};

struct CvResult {
  RunReport report;
  std::vector<SelectedModel> selected;  // one per fold with a successful run
};

// Seed of training (fold, run).
uint64_t run_seed(uint64_t base_seed, int fold, int run);

// k-fold protocol: folds from a seeded (stratified for classification)
// assignment; for each fold and run, normalize on the k-1 training folds,
// train, validate on the held fold; per fold keep the run with the best
// validation metric and evaluate it on the test set.
CvResult run_cv(const ModelSpec& spec, const Schema& schema,
                const std::vector<LabeledSeries>& pool,
                const HeldOutTest& test, const CvOptions& options);

struct SweepRow {
  double fraction = 1.0;
  std::string metric;
  double value = 0.0;  // mean over selected models
  double std = 0.0;    // population std over selected models
};

// For every keep fraction, drops test observations (seeded, shared by all
// models), rebuilds features and re-evaluates each selected model.
std::vector<SweepRow> sweep_dropout(const ModelSpec& spec, const Schema& schema,
                                    const std::vector<SelectedModel>& selected,
                                    const HeldOutTest& test,
                                    const std::vector<double>& fractions,
                                    double window, double bin_width,
                                    uint64_t seed);

std::vector<double> default_keep_fractions();

int thread_count_from_env();

}  // namespace tembed
