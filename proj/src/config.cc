#include "tembed/config.h"

#include <cmath>
#include <functional>
#include <set>

#include "json.hpp"
#include "tembed/errors.h"
#include "tembed/io.h"

namespace tembed {

using nlohmann::json;

namespace {

class Problems {
 public:
  void add(std::string msg) { items_.push_back(std::move(msg)); }
  bool empty() const { return items_.empty(); }
  std::string joined() const {
    std::string s = "invalid configuration:";
    for (const auto& i : items_) s += "\n  - " + i;
    return s;
  }

 private:
  std::vector<std::string> items_;
};

void reject_unknown(const json& obj, const std::string& where,
                    const std::set<std::string>& allowed, Problems& problems) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!allowed.count(it.key())) {
      problems.add("unknown key '" + where + it.key() + "'");
    }
  }
}

// Reads obj[key] into out when present; records a problem on type errors.
template <typename T>
void read(const json& obj, const std::string& key, const std::string& where,
          T& out, Problems& problems) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception&) {
    problems.add("'" + where + key + "' has the wrong type");
  }
}

void check(bool ok, const std::string& msg, Problems& problems) {
  if (!ok) problems.add(msg);
}

Task parse_task(const std::string& s, Problems& problems) {
  if (s == "classification") return Task::kClassification;
  if (s == "regression") return Task::kRegression;
  problems.add("task must be 'classification' or 'regression', got '" + s +
               "'");
  return Task::kClassification;
}

SynthConfig parse_synthetic(const json& j, Problems& problems) {
  SynthConfig s;
  if (!j.is_object()) {
    problems.add("'data.synthetic' must be an object");
    return s;
  }
  reject_unknown(j, "data.synthetic.",
                 {"n_channels", "rate_per_hour", "window_hours", "task",
                  "gap_threshold_hours", "seed", "value_weight"},
                 problems);
  read(j, "n_channels", "data.synthetic.", s.n_channels, problems);
  read(j, "rate_per_hour", "data.synthetic.", s.rate_per_hour, problems);
  read(j, "window_hours", "data.synthetic.", s.window_hours, problems);
  read(j, "gap_threshold_hours", "data.synthetic.", s.gap_threshold_hours,
       problems);
  read(j, "seed", "data.synthetic.", s.rng_seed, problems);
  read(j, "value_weight", "data.synthetic.", s.value_weight, problems);
  std::string task = "timing_classification";
  read(j, "task", "data.synthetic.", task, problems);
  if (task == "timing_classification") {
    s.task = SynthTask::kTimingClassification;
  } else if (task == "elapsed_regression") {
    s.task = SynthTask::kElapsedRegression;
  } else {
    problems.add("data.synthetic.task must be 'timing_classification' or "
                 "'elapsed_regression'");
  }
  try {
    s.validate();
  } catch (const ConfigError& e) {
    problems.add(std::string("data.synthetic: ") + e.what());
  }
  return s;
}

ModelEntry parse_model(const json& j, size_t index, Task task,
                       const EncoderConfig& te, Problems& problems) {
  const std::string where = "models[" + std::to_string(index) + "].";
  ModelEntry m;
  if (!j.is_object()) {
    problems.add("'" + where + "' must be an object");
    return m;
  }
  reject_unknown(j, where,
                 {"alias", "family", "hidden", "param_budget", "head_widths",
                  "te_mode", "attention"},
                 problems);
  read(j, "alias", where, m.alias, problems);
  if (m.alias.empty()) problems.add(where + "alias is required");
  std::string family = "lstm", mode = "none";
  read(j, "family", where, family, problems);
  read(j, "te_mode", where, mode, problems);
  try {
    m.spec.family = parse_family(family);
    m.spec.te_mode = parse_te_mode(mode);
  } catch (const ConfigError& e) {
    problems.add(where + e.what());
    return m;
  }
  m.spec.task = task;
  switch (m.spec.family) {
    case Family::kLinReg:
    case Family::kLogReg:
      m.spec.head_widths = {};
      break;
    case Family::kMlp:
      m.spec.head_widths = {64, 64, 32, 16};
      break;
    default:
      break;
  }
  read(j, "head_widths", where, m.spec.head_widths, problems);
  read(j, "hidden", where, m.spec.hidden, problems);
  if (j.contains("param_budget")) {
    long long budget = 0;
    read(j, "param_budget", where, budget, problems);
    m.param_budget = budget;
    if (j.contains("hidden")) {
      problems.add(where + "give either hidden or param_budget, not both");
    }
  }
  if (m.spec.family == Family::kSaLstm) {
    AttentionSpec att;
    if (j.contains("attention")) {
      const auto& a = j["attention"];
      reject_unknown(a, where + "attention.", {"d_a", "r", "penalty_c"},
                     problems);
      read(a, "d_a", where + "attention.", att.d_a, problems);
      read(a, "r", where + "attention.", att.r, problems);
      read(a, "penalty_c", where + "attention.", att.penalty_c, problems);
    }
    m.spec.attention = att;
  } else if (j.contains("attention")) {
    problems.add(where + "attention is only valid for sa_lstm");
  }
  if (m.spec.te_mode == TeMode::kCatTe || m.spec.te_mode == TeMode::kAddTe) {
    m.spec.te_cfg = te;
    if (m.spec.te_mode == TeMode::kAddTe) m.spec.te_cfg->dim = m.spec.hidden;
  }
  if (!m.param_budget) {
    try {
      m.spec.validate();
    } catch (const ConfigError& e) {
      problems.add(where + e.what());
    }
  } else if (!m.spec.recurrent()) {
    problems.add(where + "param_budget applies to lstm / sa_lstm only");
  }
  return m;
}

}  // namespace

ExperimentConfig ExperimentConfig::parse(const std::string& json_text,
                                         const std::filesystem::path& base_dir) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");

  Problems problems;
  ExperimentConfig cfg;
  reject_unknown(j, "",
                 {"task", "data", "window_hours", "bin_width", "te", "models",
                  "training", "sweep", "seed", "output_dir"},
                 problems);
  auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() ? path : base_dir / path;
  };

  std::string task = "classification";
  if (!j.contains("task")) problems.add("'task' is required");
  read(j, "task", "", task, problems);
  cfg.task = parse_task(task, problems);
  read(j, "window_hours", "", cfg.window, problems);
  read(j, "bin_width", "", cfg.bin_width, problems);
  check(cfg.window > 0.0, "window_hours must be positive", problems);
  check(cfg.bin_width > 0.0, "bin_width must be positive", problems);
  read(j, "seed", "", cfg.seed, problems);
  std::string out_dir = "runs";
  read(j, "output_dir", "", out_dir, problems);
  cfg.output_dir = resolve(out_dir);

  if (j.contains("data") && j["data"].is_object()) {
    const auto& d = j["data"];
    reject_unknown(d, "data.", {"dir", "synthetic", "n_train", "n_test"},
                   problems);
    std::string dir;
    read(d, "dir", "data.", dir, problems);
    if (dir.empty()) problems.add("'data.dir' is required");
    cfg.data_dir = resolve(dir);
    if (d.contains("synthetic")) {
      cfg.synthetic = parse_synthetic(d["synthetic"], problems);
      read(d, "n_train", "data.", cfg.n_train, problems);
      read(d, "n_test", "data.", cfg.n_test, problems);
      check(cfg.n_train >= 1, "data.n_train must be >= 1", problems);
      check(cfg.n_test >= 1, "data.n_test must be >= 1", problems);
      if (cfg.synthetic->dataset_task() != cfg.task) {
        problems.add("task does not match data.synthetic.task");
      }
    }
  } else {
    problems.add("'data' object is required");
  }

  if (j.contains("te")) {
    const auto& t = j["te"];
    reject_unknown(t, "te.", {"dim", "max_time"}, problems);
    read(t, "dim", "te.", cfg.te.dim, problems);
    read(t, "max_time", "te.", cfg.te.max_time, problems);
  }
  try {
    cfg.te.validate();
  } catch (const ConfigError& e) {
    problems.add(std::string("te: ") + e.what());
  }
  check(cfg.te.max_time >= cfg.window,
        "te.max_time must be >= window_hours", problems);

  if (j.contains("training")) {
    const auto& t = j["training"];
    reject_unknown(t, "training.",
                   {"lr", "epochs", "batch_size", "weight_decay", "folds",
                    "runs_per_fold"},
                   problems);
    read(t, "lr", "training.", cfg.hyper.lr, problems);
    read(t, "epochs", "training.", cfg.hyper.epochs, problems);
    read(t, "batch_size", "training.", cfg.hyper.batch_size, problems);
    read(t, "weight_decay", "training.", cfg.hyper.weight_decay, problems);
    read(t, "folds", "training.", cfg.folds, problems);
    read(t, "runs_per_fold", "training.", cfg.runs_per_fold, problems);
  }
  check(cfg.hyper.lr > 0.0, "training.lr must be positive", problems);
  check(cfg.hyper.epochs >= 0, "training.epochs must be >= 0", problems);
  check(cfg.hyper.batch_size >= 1, "training.batch_size must be >= 1",
        problems);
  check(cfg.hyper.weight_decay >= 0.0, "training.weight_decay must be >= 0",
        problems);
  check(cfg.folds >= 2, "training.folds must be >= 2", problems);
  check(cfg.runs_per_fold >= 1, "training.runs_per_fold must be >= 1",
        problems);

  if (j.contains("sweep")) {
    const auto& s = j["sweep"];
    reject_unknown(s, "sweep.", {"keep_fractions"}, problems);
    read(s, "keep_fractions", "sweep.", cfg.keep_fractions, problems);
  }
  for (double f : cfg.keep_fractions) {
    check(f > 0.0 && f <= 1.0, "sweep.keep_fractions must lie in (0, 1]",
          problems);
  }

  if (j.contains("models") && j["models"].is_array() && !j["models"].empty()) {
    std::set<std::string> aliases;
    for (size_t i = 0; i < j["models"].size(); ++i) {
      auto m = parse_model(j["models"][i], i, cfg.task, cfg.te, problems);
      if (!m.alias.empty() && !aliases.insert(m.alias).second) {
        problems.add("duplicate model alias '" + m.alias + "'");
      }
      cfg.models.push_back(std::move(m));
    }
  } else {
    problems.add("'models' must be a non-empty array");
  }

  if (!problems.empty()) throw ConfigError(problems.joined());
  return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  return parse(read_file(path), path.parent_path());
}

CvOptions ExperimentConfig::cv_options(const std::string& alias) const {
  CvOptions o;
  o.folds = folds;
  o.runs_per_fold = runs_per_fold;
  o.hyper = hyper;
  o.window = window;
  o.bin_width = bin_width;
  o.base_seed = seed;
  o.alias = alias;
  return o;
}

ModelSpec resolve_model(const ModelEntry& entry, const Schema& schema,
                        const ExperimentConfig& cfg) {
  ModelSpec spec = entry.spec;
  if (entry.param_budget) {
    const int steps = static_cast<int>(std::ceil(cfg.window / cfg.bin_width));
    const int width = step_feature_width(schema, spec.te_mode, cfg.te);
    spec.hidden = solve_hidden_for_budget(
        spec, model_input_dim(spec, steps, width), *entry.param_budget);
    if (spec.te_mode == TeMode::kAddTe) {
      if (spec.hidden % 2 != 0) --spec.hidden;  // embedding dim must be even
      spec.te_cfg->dim = spec.hidden;
    }
  }
  spec.validate();
  return spec;
}

DataFiles DataFiles::in(const std::filesystem::path& dir) {
  return {dir / "train_observations.csv", dir / "train_labels.csv",
          dir / "test_observations.csv",  dir / "test_labels.csv",
          dir / "schema.json",            dir / "manifest.json"};
}

}  // namespace tembed
