#pragma once

// Irregular multivariate series, their fixed-grid binned view, and the
// preprocessing steps between the two: normalization, one-hot expansion,
// mask/delta and time-embedding features, observation dropout, label unit
// conversion and fold assignment.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "tembed/encoding.h"

namespace tembed {

enum class Task { kClassification, kRegression };

// How per-step inputs are built from a binned episode.
//   kNone  - values only
//   kMask  - values + missingness indicators + scaled time-since-last
//   kCatTe - values + time embedding of each step's observation time
//   kAddTe - values only; the model adds step embeddings to its hidden states
enum class TeMode { kNone, kMask, kCatTe, kAddTe };

enum class ChannelKind { kReal, kCategorical };

struct Channel {
  std::string name;
  ChannelKind kind = ChannelKind::kReal;
  int cardinality = 0;  // categorical only
};

struct Schema {
  std::vector<Channel> channels;

  int index_of(const std::string& name) const;  // -1 if unknown
  // Width of the value block of X: 1 per real channel, cardinality per
  // categorical channel.
  int value_width() const;
  void validate() const;

  static Schema all_real(int n_channels);
  static Schema from_json(const std::string& text);
  std::string to_json() const;
};

struct Observation {
  double time = 0.0;  // hours since episode start
  int channel = 0;
  double value = 0.0;

  friend bool operator==(const Observation&, const Observation&) = default;
};

struct IrregularSeries {
  std::string id;
  std::vector<Observation> observations;  // sorted by time

  // Throws InputError on unsorted/negative/non-finite times or categorical
  // values outside [0, cardinality).
  void validate(const Schema& schema) const;
};

// Labels are kept in file units: hours for regression, {0,1} for
// classification.
struct LabeledSeries {
  IrregularSeries series;
  double label = 0.0;
};

struct Dataset {
  Schema schema;
  Task task = Task::kClassification;
  std::vector<LabeledSeries> episodes;
};

// ---- CSV input/output ------------------------------------------------------
//
// observations: `episode_id,time_hours,channel,value`
// labels:       `episode_id,label`
// Episodes are returned in label-file order. Labels without observations
// become empty series; observations without a label are an error.

Dataset load_csv(const std::filesystem::path& observations,
                 const std::filesystem::path& labels, const Schema& schema,
                 Task task);

std::string observations_csv(const std::vector<LabeledSeries>& episodes,
                             const Schema& schema);
std::string labels_csv(const std::vector<LabeledSeries>& episodes);

// ---- normalization -----------------------------------------------------------

struct NormStats {
  std::vector<double> mean;  // per channel; categorical entries are 0
  std::vector<double> std;   // per channel; categorical entries are 1

  friend bool operator==(const NormStats&, const NormStats&) = default;
};

// Population mean/std of the pooled real-channel observations. Channels with
// zero variance get std 1; channels with no observations get mean 0, std 1
// and a warning on stderr.
NormStats fit_norm(const std::vector<IrregularSeries>& train,
                   const Schema& schema);

// Not idempotent: applying twice standardizes twice.
IrregularSeries apply_norm(const IrregularSeries& series,
                           const NormStats& stats, const Schema& schema);

// Drops observations at or after window_hours.
IrregularSeries crop(const IrregularSeries& series, double window_hours);

// ---- binning -----------------------------------------------------------------

struct BinnedEpisode {
  std::string id;
  double window = 0.0;
  double bin_width = 0.0;
  std::vector<double> grid_times;  // j * bin_width
  // Time of the latest observation (any channel) inside bin j, if any.
  std::vector<std::optional<double>> event_times;
  Eigen::MatrixXd X;  // steps x features
  Eigen::MatrixXd M;  // steps x channels, 1 = observed in bin
  Eigen::MatrixXd D;  // steps x channels, hours since last observation
  double label = 0.0;
  bool all_missing = false;

  int steps() const { return static_cast<int>(grid_times.size()); }
};

// Last observation per (bin, channel); unobserved bins forward-filled,
// leading gaps filled with 0 (the training mean once normalized; an all-zero
// one-hot block for categorical channels). Observations at or after the
// window are ignored.
BinnedEpisode bin(const IrregularSeries& series, const Schema& schema,
                  double window_hours, double bin_width);

// steps x dim matrix whose row j is te(event_times[j]), or zeros when bin j
// holds no observation.
Eigen::MatrixXd step_embeddings(const BinnedEpisode& ep,
                                const EncoderConfig& cfg);

// Appends step_embeddings(ep, cfg) to X. Requires cfg.max_time >= window.
BinnedEpisode attach_te(const BinnedEpisode& ep, const EncoderConfig& cfg);

// Appends M and D / window to X.
BinnedEpisode attach_mask(const BinnedEpisode& ep);

// Per-step input matrix for the given regime (kAddTe gives plain values).
Eigen::MatrixXd step_features(const BinnedEpisode& ep, TeMode mode,
                              const EncoderConfig& cfg);
int step_feature_width(const Schema& schema, TeMode mode,
                       const EncoderConfig& cfg);

// ---- sampling, labels, folds -------------------------------------------------

// Keeps each observation independently with probability keep_fraction.
IrregularSeries drop_observations(const IrregularSeries& series,
                                  double keep_fraction, uint64_t seed);

enum class LabelUnit { kToDays, kToHours };
double label_convert(double label, LabelUnit direction);

// Fold index in [0, k) per episode. Assignment depends only on (ids, labels,
// seed), never on input order. With stratify, each class is dealt
// round-robin across folds after a seeded shuffle.
std::vector<int> split_folds(const std::vector<std::string>& ids,
                             const std::vector<double>& labels, int k,
                             uint64_t seed, bool stratify);

}  // namespace tembed
