#include "tembed/cli.h"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "json.hpp"
#include "tembed/benchgen.h"
#include "tembed/errors.h"
#include "tembed/io.h"
#include "tembed/rng.h"

namespace fs = std::filesystem;

namespace tembed {
namespace {

bool non_empty_dir(const fs::path& p) {
  return fs::exists(p) && fs::is_directory(p) && !fs::is_empty(p);
}

void refuse_overwrite(const fs::path& p, bool force) {
  if (fs::exists(p) && !force) {
    throw InputError(p.string() + " already exists; pass --force to overwrite");
  }
}

struct LoadedData {
  Schema schema;
  Dataset train;
  Dataset test;
};

LoadedData load_data(const ExperimentConfig& cfg) {
  const auto files = DataFiles::in(cfg.data_dir);
  std::vector<std::string> missing;
  for (const auto& p : {files.schema, files.train_observations,
                        files.train_labels, files.test_observations,
                        files.test_labels}) {
    if (!fs::exists(p)) missing.push_back(p.string());
  }
  if (!missing.empty()) {
    std::string msg = "pre-flight check failed:";
    for (const auto& m : missing) msg += "\n  - missing file " + m;
    throw ConfigError(msg);
  }
  LoadedData d;
  d.schema = Schema::from_json(read_file(files.schema));
  d.train = load_csv(files.train_observations, files.train_labels, d.schema,
                     cfg.task);
  d.test = load_csv(files.test_observations, files.test_labels, d.schema,
                    cfg.task);
  return d;
}

HeldOutTest make_test(const Dataset& test) {
  std::vector<IrregularSeries> series;
  std::vector<double> labels;
  for (const auto& ep : test.episodes) {
    series.push_back(ep.series);
    labels.push_back(ep.label);
  }
  return HeldOutTest(std::move(series), std::move(labels), test.task);
}

std::vector<ModelSpec> resolve_all(const ExperimentConfig& cfg,
                                   const Schema& schema) {
  std::vector<ModelSpec> specs;
  std::string problems;
  for (const auto& m : cfg.models) {
    try {
      specs.push_back(resolve_model(m, schema, cfg));
    } catch (const ConfigError& e) {
      problems += "\n  - model '" + m.alias + "': " + e.what();
    }
  }
  if (!problems.empty()) {
    throw ConfigError("pre-flight check failed:" + problems);
  }
  return specs;
}

std::string spec_json(const ModelSpec& s, int input_dim) {
  nlohmann::ordered_json j;
  j["family"] = family_name(s.family);
  j["task"] = s.task == Task::kClassification ? "classification" : "regression";
  j["hidden"] = s.hidden;
  j["head_widths"] = s.head_widths;
  j["te_mode"] = te_mode_name(s.te_mode);
  if (s.te_cfg) {
    j["te"] = {{"dim", s.te_cfg->dim},
               {"max_time", format_double(s.te_cfg->max_time)}};
  }
  if (s.attention) {
    j["attention"] = {{"d_a", s.attention->d_a},
                      {"r", s.attention->r},
                      {"penalty_c", format_double(s.attention->penalty_c)}};
  }
  j["input_dim"] = input_dim;
  j["param_count"] = count_params(s, input_dim);
  return j.dump(2) + "\n";
}

ParamSet bundle(const SelectedModel& m) {
  ParamSet out = m.params;
  const auto n = static_cast<Eigen::Index>(m.stats.mean.size());
  out.add("norm.mean", n, 1) =
      Eigen::Map<const Eigen::VectorXd>(m.stats.mean.data(), n);
  out.add("norm.std", n, 1) =
      Eigen::Map<const Eigen::VectorXd>(m.stats.std.data(), n);
  return out;
}

SelectedModel unbundle(const ParamSet& stored, int fold) {
  SelectedModel m;
  m.fold = fold;
  for (const auto& t : stored) {
    if (t.name == "norm.mean") {
      m.stats.mean.assign(t.value.data(), t.value.data() + t.value.size());
    } else if (t.name == "norm.std") {
      m.stats.std.assign(t.value.data(), t.value.data() + t.value.size());
    } else {
      m.params.add(t.name, t.value.rows(), t.value.cols()) = t.value;
    }
  }
  if (m.stats.mean.empty() || m.stats.std.size() != m.stats.mean.size()) {
    throw InputError("model file lacks normalization statistics");
  }
  return m;
}

}  // namespace

std::string alias_dir_name(const std::string& alias) {
  std::string out;
  for (char c : alias) {
    out += std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_'
               ? c
               : '_';
  }
  return out;
}

void cmd_gen(const ExperimentConfig& cfg, const CommandOptions& opts,
             std::ostream& log) {
  if (!cfg.synthetic) {
    throw ConfigError("gen needs a 'data.synthetic' block in the config");
  }
  const fs::path dir = opts.out.value_or(cfg.data_dir);
  if (non_empty_dir(dir) && !opts.force) {
    throw InputError(dir.string() +
                     " already exists and is not empty; pass --force");
  }
  SynthConfig synth = *cfg.synthetic;
  if (opts.seed) synth.rng_seed = *opts.seed;
  auto generated = gen_dataset(synth, cfg.n_train + cfg.n_test);
  auto& episodes = generated.dataset.episodes;
  const std::vector<LabeledSeries> train(episodes.begin(),
                                         episodes.begin() + cfg.n_train);
  const std::vector<LabeledSeries> test(episodes.begin() + cfg.n_train,
                                        episodes.end());
  const auto files = DataFiles::in(dir);
  const auto& schema = generated.dataset.schema;
  atomic_write(files.schema, schema.to_json());
  atomic_write(files.train_observations, observations_csv(train, schema));
  atomic_write(files.train_labels, labels_csv(train));
  atomic_write(files.test_observations, observations_csv(test, schema));
  atomic_write(files.test_labels, labels_csv(test));

  auto manifest = nlohmann::ordered_json::parse(generated.manifest.to_json());
  manifest["split"] = {{"train", cfg.n_train}, {"test", cfg.n_test}};
  atomic_write(files.manifest, manifest.dump(2) + "\n");

  log << "episodes: " << generated.manifest.n_episodes << " (train "
      << cfg.n_train << ", test " << cfg.n_test << ")\n";
  if (synth.task == SynthTask::kTimingClassification) {
    log << "positive rate: " << format_double(generated.manifest.positive_rate)
        << "\n";
  } else {
    log << "mean label (hours): "
        << format_double(generated.manifest.label_mean) << "\n";
  }
}

void cmd_train(const ExperimentConfig& cfg, const CommandOptions& opts,
               std::ostream& log) {
  const LoadedData data = load_data(cfg);
  const auto specs = resolve_all(cfg, data.schema);
  const fs::path out = opts.out.value_or(cfg.output_dir);
  refuse_overwrite(out / "report.jsonl", opts.force);
  const uint64_t seed = opts.seed.value_or(cfg.seed);

  const HeldOutTest test = make_test(data.test);
  std::string report_text, summary_text = "model,metric,mean,std,stderr,n\n";
  std::vector<std::string> rows;
  const int steps = static_cast<int>(std::ceil(cfg.window / cfg.bin_width));
  for (size_t i = 0; i < specs.size(); ++i) {
    const auto& alias = cfg.models[i].alias;
    auto options = cfg.cv_options(alias);
    options.base_seed = seed;
    log << "training " << alias << " (" << family_name(specs[i].family)
        << ", h=" << specs[i].hidden << ", "
        << te_mode_name(specs[i].te_mode) << ")\n";
    const auto result =
        run_cv(specs[i], data.schema, data.train.episodes, test, options);
    const fs::path model_dir = out / "models" / alias_dir_name(alias);
    const int width =
        step_feature_width(data.schema, specs[i].te_mode, cfg.te);
    atomic_write(model_dir / "spec.json",
                 spec_json(specs[i], model_input_dim(specs[i], steps, width)));
    for (const auto& m : result.selected) {
      save_params(model_dir / ("fold" + std::to_string(m.fold) + ".params"),
                  bundle(m));
    }
    report_text += result.report.to_jsonl();
    const auto csv = result.report.summary_csv();
    summary_text += csv.substr(csv.find('\n') + 1);
    for (auto& r : result.report.summary_rows()) rows.push_back(r);
    if (result.report.failed_runs > 0) {
      log << "  " << result.report.failed_runs
          << " failed run(s) excluded from selection\n";
    }
  }
  atomic_write(out / "report.jsonl", report_text);
  atomic_write(out / "summary.csv", summary_text);
  for (const auto& r : rows) log << r << "\n";
  log << "report checksum: " << hex64(fnv1a64(report_text)) << "\n";
}

void cmd_sweep(const ExperimentConfig& cfg, const CommandOptions& opts,
               std::ostream& log) {
  const LoadedData data = load_data(cfg);
  const auto specs = resolve_all(cfg, data.schema);
  const fs::path out = opts.out.value_or(cfg.output_dir);
  refuse_overwrite(out / "sweep.csv", opts.force);
  std::vector<double> fractions = opts.keep_fractions.value_or(cfg.keep_fractions);
  for (double f : fractions) {
    if (!(f > 0.0 && f <= 1.0)) {
      throw ConfigError("keep fractions must lie in (0, 1]");
    }
  }
  std::sort(fractions.begin(), fractions.end(), std::greater<>());
  if (std::adjacent_find(fractions.begin(), fractions.end()) != fractions.end()) {
    throw ConfigError("keep fractions must be distinct");
  }
  const uint64_t seed = derive_seed(opts.seed.value_or(cfg.seed), 0x5357);
  const HeldOutTest test = make_test(data.test);

  std::string csv = "model,fraction,metric,value,std\n";
  for (size_t i = 0; i < specs.size(); ++i) {
    const auto& alias = cfg.models[i].alias;
    const fs::path model_dir = out / "models" / alias_dir_name(alias);
    std::vector<SelectedModel> models;
    for (int fold = 0; fold < cfg.folds; ++fold) {
      const auto path = model_dir / ("fold" + std::to_string(fold) + ".params");
      if (!fs::exists(path)) continue;
      models.push_back(unbundle(load_params(path), fold));
    }
    if (models.empty()) {
      throw InputError("no trained model files in " + model_dir.string() +
                       "; run `train` first");
    }
    log << "sweeping " << alias << " over " << models.size() << " model(s)\n";
    const auto rows = sweep_dropout(specs[i], data.schema, models, test,
                                    fractions, cfg.window, cfg.bin_width, seed);
    for (const auto& r : rows) {
      csv += alias + "," + format_double(r.fraction) + "," + r.metric + "," +
             format_double(r.value) + "," + format_double(r.std) + "\n";
    }
  }
  atomic_write(out / "sweep.csv", csv);
  log << "wrote " << (out / "sweep.csv").string() << "\n";
}

void cmd_encode(const fs::path& input, const fs::path& output,
                const EncoderConfig& te_cfg, bool force) {
  te_cfg.validate();
  refuse_overwrite(output, force);
  const std::string text = read_file(input);
  std::string header_name = "time_hours";
  std::string body;
  size_t line_no = 0;
  bool header_seen = false;
  size_t pos = 0;
  while (pos < text.size()) {
    size_t nl = text.find('\n', pos);
    if (nl == std::string::npos) nl = text.size();
    std::string_view line(text.data() + pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (line.find(',') != std::string_view::npos) {
      throw InputError(input.string() + ":" + std::to_string(line_no) +
                       ": expected a single timestamp column");
    }
    double t;
    if (!parse_double(line, t)) {
      if (line_no == 1 && !header_seen) {
        header_name = std::string(line);
        header_seen = true;
        continue;
      }
      throw InputError(input.string() + ":" + std::to_string(line_no) +
                       ": non-numeric timestamp '" + std::string(line) + "'");
    }
    if (!std::isfinite(t)) {
      throw InputError(input.string() + ":" + std::to_string(line_no) +
                       ": non-finite timestamp");
    }
    const auto v = te(t, te_cfg);
    body += line;
    for (Eigen::Index k = 0; k < v.size(); ++k) {
      body += ',';
      body += format_double(v[k]);
    }
    body += '\n';
  }
  std::string header = header_name;
  for (int k = 0; k < te_cfg.dim; ++k) header += ",te_" + std::to_string(k);
  atomic_write(output, header + "\n" + body);
}

}  // namespace tembed
