#include "tembed/benchgen.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "json.hpp"
#include "tembed/errors.h"
#include "tembed/io.h"
#include "tembed/rng.h"

namespace tembed {

void SynthConfig::validate() const {
  if (n_channels < 1) throw ConfigError("n_channels must be >= 1");
  if (!(rate_per_hour > 0.0) || !std::isfinite(rate_per_hour)) {
    throw ConfigError("rate_per_hour must be positive");
  }
  if (!(window_hours > 0.0)) throw ConfigError("window_hours must be positive");
  if (!(gap_threshold_hours > 0.0) || gap_threshold_hours >= window_hours) {
    throw ConfigError("gap_threshold_hours must lie in (0, window_hours)");
  }
  if (!(value_weight >= 0.0)) throw ConfigError("value_weight must be >= 0");
}

std::string SynthConfig::canonical() const {
  nlohmann::ordered_json j;
  j["n_channels"] = n_channels;
  j["rate_per_hour"] = format_double(rate_per_hour);
  j["window_hours"] = format_double(window_hours);
  j["task"] = task == SynthTask::kTimingClassification ? "timing_classification"
                                                        : "elapsed_regression";
  j["gap_threshold_hours"] = format_double(gap_threshold_hours);
  j["rng_seed"] = rng_seed;
  j["value_weight"] = format_double(value_weight);
  return j.dump();
}

std::string SynthConfig::hash() const { return hex64(fnv1a64(canonical())); }

std::vector<double> channel0_gaps(const IrregularSeries& series,
                                  double window_hours) {
  std::vector<double> gaps;
  double prev = 0.0;
  for (const auto& o : series.observations) {
    if (o.channel != 0 || o.time >= window_hours) continue;
    gaps.push_back(o.time - prev);
    prev = o.time;
  }
  gaps.push_back(window_hours - prev);
  return gaps;
}

double oracle_label(const IrregularSeries& series, const SynthConfig& cfg) {
  const auto gaps = channel0_gaps(series, cfg.window_hours);
  double value_sum = 0.0, abs_sum = 0.0;
  int n = 0;
  for (const auto& o : series.observations) {
    if (o.channel != 0 || o.time >= cfg.window_hours) continue;
    value_sum += o.value;
    abs_sum += std::abs(o.value);
    ++n;
  }
  if (cfg.task == SynthTask::kTimingClassification) {
    double score = *std::max_element(gaps.begin(), gaps.end());
    if (cfg.value_weight > 0.0 && n > 0) {
      score += cfg.value_weight * value_sum / n;
    }
    return score > cfg.gap_threshold_hours ? 1.0 : 0.0;
  }
  double total = 0.0;
  for (double g : gaps) total += std::min(g, cfg.gap_threshold_hours);
  return total + cfg.value_weight * abs_sum;
}

LabeledSeries gen_episode(const SynthConfig& cfg, const std::string& id) {
  cfg.validate();
  LabeledSeries out;
  out.series.id = id;
  auto& obs = out.series.observations;
  for (int c = 0; c < cfg.n_channels; ++c) {
    CounterRng arrivals(cfg.rng_seed, 2 * static_cast<uint64_t>(c));
    CounterRng values(cfg.rng_seed, 2 * static_cast<uint64_t>(c) + 1);
    double t = arrivals.exponential(cfg.rate_per_hour);
    while (t < cfg.window_hours) {
      obs.push_back({t, c, values.normal()});
      t += arrivals.exponential(cfg.rate_per_hour);
    }
  }
  std::stable_sort(obs.begin(), obs.end(),
                   [](const Observation& a, const Observation& b) {
                     return a.time < b.time ||
                            (a.time == b.time && a.channel < b.channel);
                   });
  out.label = oracle_label(out.series, cfg);
  return out;
}

GeneratedDataset gen_dataset(const SynthConfig& cfg, int n_episodes) {
  cfg.validate();
  if (n_episodes < 1) throw ConfigError("n_episodes must be >= 1");
  GeneratedDataset g;
  g.dataset.schema = Schema::all_real(cfg.n_channels);
  g.dataset.task = cfg.dataset_task();
  g.manifest.config = cfg;
  g.manifest.n_episodes = n_episodes;
  double positives = 0.0, label_sum = 0.0;
  for (int i = 0; i < n_episodes; ++i) {
    SynthConfig episode_cfg = cfg;
    episode_cfg.rng_seed = derive_seed(cfg.rng_seed, static_cast<uint64_t>(i));
    g.manifest.episode_seeds.push_back(episode_cfg.rng_seed);
    auto ep = gen_episode(episode_cfg, "e" + std::to_string(i));
    positives += ep.label == 1.0 ? 1.0 : 0.0;
    label_sum += ep.label;
    g.dataset.episodes.push_back(std::move(ep));
  }
  g.manifest.positive_rate = positives / n_episodes;
  g.manifest.label_mean = label_sum / n_episodes;
  return g;
}

std::string Manifest::to_json() const {
  nlohmann::ordered_json j;
  j["config"] = nlohmann::ordered_json::parse(config.canonical());
  j["config_hash"] = config.hash();
  j["rng"] = CounterRng::kAlgorithm;
  j["episode_seed_rule"] = "derive_seed(rng_seed, episode_index)";
  j["n_episodes"] = n_episodes;
  if (config.task == SynthTask::kTimingClassification) {
    j["class_balance"] = {{"positive_rate", format_double(positive_rate)},
                          {"positives", static_cast<long long>(std::llround(
                                            positive_rate * n_episodes))}};
  } else {
    j["label_mean_hours"] = format_double(label_mean);
  }
  j["episode_seeds"] = episode_seeds;
  return j.dump(2) + "\n";
}

}  // namespace tembed
