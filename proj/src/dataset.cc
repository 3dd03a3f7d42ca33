#include "tembed/dataset.h"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <map>
#include <numeric>
#include <unordered_map>

#include "json.hpp"

#include "tembed/errors.h"
#include "tembed/io.h"
#include "tembed/rng.h"

namespace tembed {

// ---- Schema --------------------------------------------------------------------

int Schema::index_of(const std::string& name) const {
  for (size_t i = 0; i < channels.size(); ++i) {
    if (channels[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

int Schema::value_width() const {
  int w = 0;
  for (const auto& c : channels) {
    w += c.kind == ChannelKind::kReal ? 1 : c.cardinality;
  }
  return w;
}

void Schema::validate() const {
  if (channels.empty()) throw ConfigError("schema has no channels");
  for (size_t i = 0; i < channels.size(); ++i) {
    const auto& c = channels[i];
    if (c.name.empty()) throw ConfigError("schema channel with empty name");
    if (c.kind == ChannelKind::kCategorical && c.cardinality < 1) {
      throw ConfigError("categorical channel '" + c.name +
                        "' needs cardinality >= 1");
    }
    for (size_t j = 0; j < i; ++j) {
      if (channels[j].name == c.name) {
        throw ConfigError("duplicate channel name '" + c.name + "'");
      }
    }
  }
}

Schema Schema::all_real(int n_channels) {
  Schema s;
  for (int c = 0; c < n_channels; ++c) {
    s.channels.push_back({"ch" + std::to_string(c), ChannelKind::kReal, 0});
  }
  return s;
}

Schema Schema::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("schema is not valid JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("channels") || !j["channels"].is_array()) {
    throw ConfigError("schema must be an object with a 'channels' array");
  }
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (it.key() != "channels") {
      throw ConfigError("unknown schema key '" + it.key() + "'");
    }
  }
  Schema s;
  for (const auto& cj : j["channels"]) {
    Channel c;
    for (auto it = cj.begin(); it != cj.end(); ++it) {
      if (it.key() != "name" && it.key() != "kind" &&
          it.key() != "cardinality") {
        throw ConfigError("unknown channel key '" + it.key() + "'");
      }
    }
    std::string kind;
    try {
      c.name = cj.at("name").get<std::string>();
      kind = cj.value("kind", std::string("real"));
      if (kind == "categorical") {
        c.cardinality = cj.at("cardinality").get<int>();
      }
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("bad schema channel: ") + e.what());
    }
    if (kind == "real") {
      c.kind = ChannelKind::kReal;
    } else if (kind == "categorical") {
      c.kind = ChannelKind::kCategorical;
    } else {
      throw ConfigError("channel '" + c.name + "' has unknown kind '" + kind +
                        "'");
    }
    s.channels.push_back(std::move(c));
  }
  s.validate();
  return s;
}

std::string Schema::to_json() const {
  nlohmann::ordered_json j;
  j["channels"] = nlohmann::ordered_json::array();
  for (const auto& c : channels) {
    nlohmann::ordered_json cj;
    cj["name"] = c.name;
    if (c.kind == ChannelKind::kReal) {
      cj["kind"] = "real";
    } else {
      cj["kind"] = "categorical";
      cj["cardinality"] = c.cardinality;
    }
    j["channels"].push_back(cj);
  }
  return j.dump(2) + "\n";
}

void IrregularSeries::validate(const Schema& schema) const {
  double prev = 0.0;
  for (size_t i = 0; i < observations.size(); ++i) {
    const auto& o = observations[i];
    if (!std::isfinite(o.time) || o.time < 0.0) {
      throw InputError("episode " + id + ": invalid observation time");
    }
    if (o.time < prev) throw InputError("episode " + id + ": unsorted times");
    prev = o.time;
    if (o.channel < 0 ||
        o.channel >= static_cast<int>(schema.channels.size())) {
      throw InputError("episode " + id + ": channel index out of range");
    }
    if (!std::isfinite(o.value)) {
      throw InputError("episode " + id + ": non-finite value");
    }
    const auto& ch = schema.channels[o.channel];
    if (ch.kind == ChannelKind::kCategorical &&
        (o.value < 0 || o.value >= ch.cardinality ||
         o.value != std::floor(o.value))) {
      throw InputError("episode " + id + ": categorical value out of range");
    }
  }
}

// ---- CSV -------------------------------------------------------------------------

namespace {

std::vector<std::string_view> lines_of(const std::string& text) {
  std::vector<std::string_view> out;
  std::string_view rest(text);
  while (!rest.empty()) {
    const size_t nl = rest.find('\n');
    if (nl == std::string_view::npos) {
      out.push_back(rest);
      break;
    }
    out.push_back(rest.substr(0, nl));
    rest.remove_prefix(nl + 1);
  }
  return out;
}

bool blank(std::string_view s) {
  return s.find_first_not_of(" \t\r") == std::string_view::npos;
}

[[noreturn]] void row_error(const std::filesystem::path& path, size_t line,
                            const std::string& what) {
  throw InputError(path.string() + ":" + std::to_string(line) + ": " + what);
}

}  // namespace

Dataset load_csv(const std::filesystem::path& observations,
                 const std::filesystem::path& labels, const Schema& schema,
                 Task task) {
  schema.validate();
  Dataset ds;
  ds.schema = schema;
  ds.task = task;

  std::unordered_map<std::string, size_t> index;
  const std::string label_text = read_file(labels);
  const auto label_lines = lines_of(label_text);
  for (size_t n = 0; n < label_lines.size(); ++n) {
    const auto line = label_lines[n];
    if (blank(line)) continue;
    const auto f = split_csv_line(line);
    if (n == 0 && f.size() == 2 && f[0] == "episode_id") continue;
    if (f.size() != 2) row_error(labels, n + 1, "expected 2 fields");
    double label;
    if (!parse_double(f[1], label) || !std::isfinite(label)) {
      row_error(labels, n + 1, "invalid label '" + std::string(f[1]) + "'");
    }
    if (task == Task::kClassification && label != 0.0 && label != 1.0) {
      row_error(labels, n + 1, "classification label must be 0 or 1");
    }
    if (task == Task::kRegression && label < 0.0) {
      row_error(labels, n + 1, "regression label must be non-negative");
    }
    std::string id(f[0]);
    if (index.count(id)) row_error(labels, n + 1, "duplicate episode " + id);
    index[id] = ds.episodes.size();
    ds.episodes.push_back({IrregularSeries{id, {}}, label});
  }

  const std::string obs_text = read_file(observations);
  const auto obs_lines = lines_of(obs_text);
  for (size_t n = 0; n < obs_lines.size(); ++n) {
    const auto line = obs_lines[n];
    if (blank(line)) continue;
    const auto f = split_csv_line(line);
    if (n == 0 && !f.empty() && f[0] == "episode_id") continue;
    if (f.size() != 4) row_error(observations, n + 1, "expected 4 fields");
    const auto it = index.find(std::string(f[0]));
    if (it == index.end()) {
      row_error(observations, n + 1,
                "episode '" + std::string(f[0]) + "' has no label");
    }
    Observation o;
    if (!parse_double(f[1], o.time) || !std::isfinite(o.time)) {
      row_error(observations, n + 1, "invalid time '" + std::string(f[1]) + "'");
    }
    if (o.time < 0.0) row_error(observations, n + 1, "negative time");
    o.channel = schema.index_of(std::string(f[2]));
    if (o.channel < 0) {
      row_error(observations, n + 1,
                "unknown channel '" + std::string(f[2]) + "'");
    }
    if (!parse_double(f[3], o.value) || !std::isfinite(o.value)) {
      row_error(observations, n + 1,
                "invalid value '" + std::string(f[3]) + "'");
    }
    const auto& ch = schema.channels[o.channel];
    if (ch.kind == ChannelKind::kCategorical &&
        (o.value < 0 || o.value >= ch.cardinality ||
         o.value != std::floor(o.value))) {
      row_error(observations, n + 1, "categorical value out of range");
    }
    ds.episodes[it->second].series.observations.push_back(o);
  }
  for (auto& ep : ds.episodes) {
    std::stable_sort(ep.series.observations.begin(),
                     ep.series.observations.end(),
                     [](const Observation& a, const Observation& b) {
                       return a.time < b.time;
                     });
  }
  return ds;
}

std::string observations_csv(const std::vector<LabeledSeries>& episodes,
                             const Schema& schema) {
  std::string out = "episode_id,time_hours,channel,value\n";
  for (const auto& ep : episodes) {
    for (const auto& o : ep.series.observations) {
      out += ep.series.id;
      out += ',';
      out += format_double(o.time);
      out += ',';
      out += schema.channels.at(o.channel).name;
      out += ',';
      out += format_double(o.value);
      out += '\n';
    }
  }
  return out;
}

std::string labels_csv(const std::vector<LabeledSeries>& episodes) {
  std::string out = "episode_id,label\n";
  for (const auto& ep : episodes) {
    out += ep.series.id;
    out += ',';
    out += format_double(ep.label);
    out += '\n';
  }
  return out;
}

// ---- normalization -------------------------------------------------------------

NormStats fit_norm(const std::vector<IrregularSeries>& train,
                   const Schema& schema) {
  const size_t nc = schema.channels.size();
  std::vector<double> sum(nc, 0.0);
  std::vector<long long> count(nc, 0);
  for (const auto& s : train) {
    for (const auto& o : s.observations) {
      sum[o.channel] += o.value;
      ++count[o.channel];
    }
  }
  NormStats st{std::vector<double>(nc, 0.0), std::vector<double>(nc, 1.0)};
  std::vector<double> ss(nc, 0.0);
  for (size_t c = 0; c < nc; ++c) {
    if (count[c] > 0) st.mean[c] = sum[c] / static_cast<double>(count[c]);
  }
  for (const auto& s : train) {
    for (const auto& o : s.observations) {
      const double d = o.value - st.mean[o.channel];
      ss[o.channel] += d * d;
    }
  }
  for (size_t c = 0; c < nc; ++c) {
    if (schema.channels[c].kind != ChannelKind::kReal) {
      st.mean[c] = 0.0;
      st.std[c] = 1.0;
      continue;
    }
    if (count[c] == 0) {
      std::cerr << "warning: channel '" << schema.channels[c].name
                << "' has no training observations; using mean 0, std 1\n";
      continue;
    }
    const double sd = std::sqrt(ss[c] / static_cast<double>(count[c]));
    st.std[c] = sd > 0.0 ? sd : 1.0;
  }
  return st;
}

IrregularSeries apply_norm(const IrregularSeries& series,
                           const NormStats& stats, const Schema& schema) {
  IrregularSeries out = series;
  for (auto& o : out.observations) {
    if (schema.channels[o.channel].kind == ChannelKind::kReal) {
      o.value = (o.value - stats.mean[o.channel]) / stats.std[o.channel];
    }
  }
  return out;
}

IrregularSeries crop(const IrregularSeries& series, double window_hours) {
  IrregularSeries out{series.id, {}};
  for (const auto& o : series.observations) {
    if (o.time < window_hours) out.observations.push_back(o);
  }
  return out;
}

// ---- binning -------------------------------------------------------------------

BinnedEpisode bin(const IrregularSeries& series, const Schema& schema,
                  double window_hours, double bin_width) {
  if (!(window_hours > 0.0) || !(bin_width > 0.0)) {
    throw InputError("window and bin width must be positive");
  }
  const int steps = static_cast<int>(std::ceil(window_hours / bin_width));
  const int nc = static_cast<int>(schema.channels.size());

  std::vector<int> offset(nc);
  for (int c = 0, w = 0; c < nc; ++c) {
    offset[c] = w;
    w += schema.channels[c].kind == ChannelKind::kReal
             ? 1
             : schema.channels[c].cardinality;
  }

  BinnedEpisode ep;
  ep.id = series.id;
  ep.window = window_hours;
  ep.bin_width = bin_width;
  ep.grid_times.resize(steps);
  ep.event_times.assign(steps, std::nullopt);
  for (int j = 0; j < steps; ++j) ep.grid_times[j] = j * bin_width;
  ep.X = Eigen::MatrixXd::Zero(steps, schema.value_width());
  ep.M = Eigen::MatrixXd::Zero(steps, nc);
  ep.D = Eigen::MatrixXd::Zero(steps, nc);

  // Last value per (bin, channel); observations are time-sorted so a later
  // observation simply overwrites.
  Eigen::MatrixXd last = Eigen::MatrixXd::Zero(steps, nc);
  for (const auto& o : series.observations) {
    if (o.time >= window_hours) continue;
    const int j = std::min(steps - 1, static_cast<int>(o.time / bin_width));
    last(j, o.channel) = o.value;
    ep.M(j, o.channel) = 1.0;
    ep.event_times[j] = o.time;
  }

  int observed_total = 0;
  for (int c = 0; c < nc; ++c) {
    const auto& ch = schema.channels[c];
    bool seen = false;
    double carry = 0.0;
    for (int j = 0; j < steps; ++j) {
      if (ep.M(j, c) == 1.0) {
        carry = last(j, c);
        seen = true;
        ++observed_total;
        ep.D(j, c) = 0.0;
      } else {
        ep.D(j, c) = j == 0 ? 0.0 : ep.D(j - 1, c) + bin_width;
      }
      if (!seen) continue;  // leading gap keeps the zero fill
      if (ch.kind == ChannelKind::kReal) {
        ep.X(j, offset[c]) = carry;
      } else {
        ep.X(j, offset[c] + static_cast<int>(carry)) = 1.0;
      }
    }
  }
  ep.all_missing = observed_total == 0;
  return ep;
}

Eigen::MatrixXd step_embeddings(const BinnedEpisode& ep,
                                const EncoderConfig& cfg) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(ep.steps(), cfg.dim);
  for (int j = 0; j < ep.steps(); ++j) {
    if (ep.event_times[j]) out.row(j) = te(*ep.event_times[j], cfg).transpose();
  }
  return out;
}

BinnedEpisode attach_te(const BinnedEpisode& ep, const EncoderConfig& cfg) {
  cfg.validate();
  if (cfg.max_time < ep.window) {
    throw ConfigError("time embedding max_time must cover the window");
  }
  BinnedEpisode out = ep;
  const Eigen::MatrixXd emb = step_embeddings(ep, cfg);
  out.X.resize(ep.steps(), ep.X.cols() + cfg.dim);
  out.X << ep.X, emb;
  return out;
}

BinnedEpisode attach_mask(const BinnedEpisode& ep) {
  BinnedEpisode out = ep;
  out.X.resize(ep.steps(), ep.X.cols() + 2 * ep.M.cols());
  out.X << ep.X, ep.M, ep.D / ep.window;
  return out;
}

Eigen::MatrixXd step_features(const BinnedEpisode& ep, TeMode mode,
                              const EncoderConfig& cfg) {
  switch (mode) {
    case TeMode::kMask:
      return attach_mask(ep).X;
    case TeMode::kCatTe:
      return attach_te(ep, cfg).X;
    case TeMode::kNone:
    case TeMode::kAddTe:
      break;
  }
  return ep.X;
}

int step_feature_width(const Schema& schema, TeMode mode,
                       const EncoderConfig& cfg) {
  const int base = schema.value_width();
  switch (mode) {
    case TeMode::kMask:
      return base + 2 * static_cast<int>(schema.channels.size());
    case TeMode::kCatTe:
      return base + cfg.dim;
    case TeMode::kNone:
    case TeMode::kAddTe:
      break;
  }
  return base;
}

// ---- sampling, labels, folds ---------------------------------------------------

IrregularSeries drop_observations(const IrregularSeries& series,
                                  double keep_fraction, uint64_t seed) {
  if (!(keep_fraction > 0.0) || keep_fraction > 1.0) {
    throw InputError("keep_fraction must lie in (0, 1]");
  }
  if (keep_fraction == 1.0) return series;
  CounterRng rng(seed, fnv1a64(series.id));
  IrregularSeries out{series.id, {}};
  for (const auto& o : series.observations) {
    if (rng.uniform() < keep_fraction) out.observations.push_back(o);
  }
  return out;
}

double label_convert(double label, LabelUnit direction) {
  if (!(label >= 0.0)) throw InputError("label must be non-negative");
  return direction == LabelUnit::kToDays ? label / 24.0 : label * 24.0;
}

std::vector<int> split_folds(const std::vector<std::string>& ids,
                             const std::vector<double>& labels, int k,
                             uint64_t seed, bool stratify) {
  if (k < 2) throw ConfigError("need at least 2 folds");
  if (ids.size() < static_cast<size_t>(k)) {
    throw InputError("fewer episodes (" + std::to_string(ids.size()) +
                     ") than folds (" + std::to_string(k) + ")");
  }
  if (stratify && labels.size() != ids.size()) {
    throw InputError("stratified split needs one label per episode");
  }
  // Canonical order by id so that input order does not matter.
  std::map<double, std::vector<size_t>> groups;
  for (size_t i = 0; i < ids.size(); ++i) {
    groups[stratify ? labels[i] : 0.0].push_back(i);
  }
  std::vector<int> fold(ids.size(), -1);
  CounterRng rng(seed, 0x466f6c64);  // "Fold"
  int next = 0;
  for (auto& [label, members] : groups) {
    std::sort(members.begin(), members.end(),
              [&](size_t a, size_t b) { return ids[a] < ids[b]; });
    for (size_t i = 1; i < members.size(); ++i) {
      if (ids[members[i]] == ids[members[i - 1]]) {
        throw InputError("duplicate episode id " + ids[members[i]]);
      }
    }
    shuffle(members, rng);
    for (size_t m : members) {
      fold[m] = next;
      next = (next + 1) % k;
    }
  }
  return fold;
}

}  // namespace tembed
