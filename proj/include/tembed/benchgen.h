#pragma once

// Synthetic irregular episodes whose labels are functions of observation
// timing. Arrivals are homogeneous Poisson per channel; values are standard
// normal noise unless a value weight is configured.

#include <cstdint>
#include <string>
#include <vector>

#include "tembed/dataset.h"

namespace tembed {

enum class SynthTask { kTimingClassification, kElapsedRegression };

struct SynthConfig {
  int n_channels = 18;
  double rate_per_hour = 0.5;
  double window_hours = 48.0;
  SynthTask task = SynthTask::kTimingClassification;
  double gap_threshold_hours = 6.0;
  uint64_t rng_seed = 0;
  // 0 gives a pure timing task. With w > 0 the label also depends on the
  // channel-0 values: classification thresholds max_gap + w * mean(values),
  // regression adds w * sum(|values|).
  double value_weight = 0.0;

  void validate() const;
  Task dataset_task() const {
    return task == SynthTask::kTimingClassification ? Task::kClassification
                                                    : Task::kRegression;
  }
  // Canonical text of every field; the manifest hash is computed over it.
  std::string canonical() const;
  std::string hash() const;
};

// Episode generated from cfg.rng_seed. The label is in file units (hours for
// regression).
LabeledSeries gen_episode(const SynthConfig& cfg, const std::string& id = "e0");

// Gaps on channel 0 between consecutive observations inside the window,
// including the leading gap from 0 and the trailing gap to the window end.
std::vector<double> channel0_gaps(const IrregularSeries& series,
                                  double window_hours);

// Recomputes the label from raw timestamps (and values when value_weight>0).
double oracle_label(const IrregularSeries& series, const SynthConfig& cfg);

struct Manifest {
  SynthConfig config;
  int n_episodes = 0;
  std::vector<uint64_t> episode_seeds;
  double positive_rate = 0.0;  // classification
  double label_mean = 0.0;
  std::string to_json() const;
};

struct GeneratedDataset {
  Dataset dataset;
  Manifest manifest;
};

// Episode i uses seed derive_seed(cfg.rng_seed, i) and id "e<i>".
GeneratedDataset gen_dataset(const SynthConfig& cfg, int n_episodes);

}  // namespace tembed
