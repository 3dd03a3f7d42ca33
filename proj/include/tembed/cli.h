#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

#include "tembed/config.h"

namespace tembed {

struct CommandOptions {
  std::optional<std::filesystem::path> out;
  bool force = false;
  std::optional<uint64_t> seed;
  std::optional<std::vector<double>> keep_fractions;
};

// Each command throws on failure (ConfigError/InputError/...) and returns
// normally only after every output has been written.

// Writes train/test CSVs, schema.json and manifest.json into --out or
// data.dir.
void cmd_gen(const ExperimentConfig& cfg, const CommandOptions& opts,
             std::ostream& log);

// Runs the cross-validation protocol for every configured model. Writes
// report.jsonl, summary.csv and models/<alias>/fold<k>.params into --out or
// output_dir, and prints one `alias,metric,mean,std` row per metric.
void cmd_train(const ExperimentConfig& cfg, const CommandOptions& opts,
               std::ostream& log);

// Re-evaluates the trained fold models under observation dropout and writes
// sweep.csv (`model,fraction,metric,value,std`).
void cmd_sweep(const ExperimentConfig& cfg, const CommandOptions& opts,
               std::ostream& log);

// Appends te_0..te_{dim-1} to a one-column timestamp CSV.
void cmd_encode(const std::filesystem::path& input,
                const std::filesystem::path& output, const EncoderConfig& te,
                bool force);

std::string alias_dir_name(const std::string& alias);

}  // namespace tembed
