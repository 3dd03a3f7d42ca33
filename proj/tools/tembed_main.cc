// tembed: generate synthetic data, train/evaluate models, run dropout
// sweeps and export time embeddings.

#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "tembed/cli.h"
#include "tembed/errors.h"

namespace {

std::vector<double> parse_fractions(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    size_t used = 0;
    const double v = std::stod(item, &used);
    if (used != item.size()) throw tembed::ConfigError("bad fraction " + item);
    out.push_back(v);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Time-embedding toolkit for irregularly sampled time series"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out;
  bool force = false;
  uint64_t seed = 0;
  std::string fractions;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "experiment config (JSON)")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--out", out, "output directory (overrides the config)");
    cmd->add_flag("--force", force, "overwrite existing outputs");
    cmd->add_option("--seed", seed, "seed override");
  };
  auto* gen = app.add_subcommand("gen", "generate a synthetic dataset");
  add_common(gen);
  auto* train = app.add_subcommand("train", "cross-validated training");
  add_common(train);
  auto* sweep = app.add_subcommand("sweep", "observation-dropout sweep");
  add_common(sweep);
  sweep->add_option("--keep-fractions", fractions,
                    "comma-separated keep fractions, e.g. 1,0.5,0.1");

  auto* encode = app.add_subcommand("encode", "append time embeddings to a CSV");
  std::string input, output;
  int dim = 32;
  double max_time = 48.0;
  encode->add_option("--input", input, "one-column timestamp CSV")
      ->required()
      ->check(CLI::ExistingFile);
  encode->add_option("--output", output, "output CSV")->required();
  encode->add_option("--dim", dim, "embedding dimension (even)");
  encode->add_option("--max-time", max_time, "maximum time in hours");
  encode->add_flag("--force", force, "overwrite an existing output");

  CLI11_PARSE(app, argc, argv);

  try {
    if (encode->parsed()) {
      tembed::cmd_encode(input, output,
                         tembed::EncoderConfig::temporal(dim, max_time), force);
      return 0;
    }
    const auto cfg = tembed::ExperimentConfig::load(config_path);
    tembed::CommandOptions opts;
    if (!out.empty()) opts.out = out;
    opts.force = force;
    for (auto* cmd : {gen, train, sweep}) {
      if (cmd->parsed() && cmd->count("--seed") > 0) opts.seed = seed;
    }
    if (!fractions.empty()) opts.keep_fractions = parse_fractions(fractions);
    if (gen->parsed()) tembed::cmd_gen(cfg, opts, std::cout);
    if (train->parsed()) tembed::cmd_train(cfg, opts, std::cout);
    if (sweep->parsed()) tembed::cmd_sweep(cfg, opts, std::cout);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
