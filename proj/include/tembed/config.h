#pragma once

// Experiment configuration: one JSON file per experiment. Unknown keys are
// rejected and every problem found is reported at once.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "tembed/benchgen.h"
#include "tembed/dataset.h"
#include "tembed/encoding.h"
#include "tembed/models.h"
#include "tembed/training.h"

namespace tembed {

struct ModelEntry {
  std::string alias;
  ModelSpec spec;  // hidden == 0 when it is solved from param_budget
  std::optional<long long> param_budget;
};

struct ExperimentConfig {
  Task task = Task::kClassification;
  std::filesystem::path data_dir;
  std::optional<SynthConfig> synthetic;
  int n_train = 0;
  int n_test = 0;
  double window = 48.0;
  double bin_width = 1.0;
  EncoderConfig te = EncoderConfig::temporal(32, 48.0);
  std::vector<ModelEntry> models;
  TrainHyper hyper;
  int folds = 5;
  int runs_per_fold = 10;
  std::vector<double> keep_fractions = default_keep_fractions();
  uint64_t seed = 0;
  std::filesystem::path output_dir;

  // Relative paths are resolved against base_dir. Throws ConfigError with
  // one line per problem.
  static ExperimentConfig parse(const std::string& json_text,
                                const std::filesystem::path& base_dir);
  static ExperimentConfig load(const std::filesystem::path& path);

  CvOptions cv_options(const std::string& alias) const;
};

// Fills in hidden from the parameter budget (and the add_te embedding dim).
ModelSpec resolve_model(const ModelEntry& entry, const Schema& schema,
                        const ExperimentConfig& cfg);

// File layout of a dataset directory.
struct DataFiles {
  std::filesystem::path train_observations;
  std::filesystem::path train_labels;
  std::filesystem::path test_observations;
  std::filesystem::path test_labels;
  std::filesystem::path schema;
  std::filesystem::path manifest;

  static DataFiles in(const std::filesystem::path& dir);
};

}  // namespace tembed
