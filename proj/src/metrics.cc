#include "tembed/metrics.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "tembed/errors.h"

namespace tembed {
namespace {

void check_batch(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InputError("metric inputs differ in length");
  if (a.empty()) throw UndefinedMetricError("metric of an empty batch");
}

void check_ranking(std::span<const double> scores,
                   std::span<const double> labels) {
  check_batch(scores, labels);
  for (size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i])) throw InputError("non-finite score");
    if (labels[i] != 0.0 && labels[i] != 1.0) {
      throw InputError("labels must be 0 or 1");
    }
  }
}

std::vector<size_t> order_by_score_desc(std::span<const double> scores) {
  std::vector<size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](size_t a, size_t b) { return scores[a] > scores[b]; });
  return idx;
}

}  // namespace

double auc_roc(std::span<const double> scores, std::span<const double> labels) {
  check_ranking(scores, labels);
  const auto idx = order_by_score_desc(scores);
  double pos = 0.0, neg = 0.0;
  for (double y : labels) (y > 0.5 ? pos : neg) += 1.0;
  if (pos == 0.0 || neg == 0.0) {
    throw UndefinedMetricError("AUC-ROC needs both classes");
  }
  // Tie groups in decreasing score: each negative is outranked by every
  // positive above it and half-outranked by positives in its own group.
  double wins = 0.0;
  double pos_above = 0.0;
  for (size_t i = 0; i < idx.size();) {
    size_t j = i;
    double gp = 0.0, gn = 0.0;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) {
      (labels[idx[j]] > 0.5 ? gp : gn) += 1.0;
      ++j;
    }
    wins += gn * (pos_above + 0.5 * gp);
    pos_above += gp;
    i = j;
  }
  return wins / (pos * neg);
}

double avg_precision(std::span<const double> scores,
                     std::span<const double> labels) {
  check_ranking(scores, labels);
  const auto idx = order_by_score_desc(scores);
  double total_pos = 0.0;
  for (double y : labels) total_pos += y > 0.5 ? 1.0 : 0.0;
  if (total_pos == 0.0) {
    throw UndefinedMetricError("average precision needs a positive label");
  }
  double tp = 0.0, fp = 0.0, ap = 0.0, prev_recall = 0.0;
  for (size_t i = 0; i < idx.size();) {
    size_t j = i;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) {
      (labels[idx[j]] > 0.5 ? tp : fp) += 1.0;
      ++j;
    }
    const double recall = tp / total_pos;
    ap += (recall - prev_recall) * (tp / (tp + fp));
    prev_recall = recall;
    i = j;
  }
  return ap;
}

double mae(std::span<const double> predictions,
           std::span<const double> targets) {
  check_batch(predictions, targets);
  double s = 0.0;
  for (size_t i = 0; i < targets.size(); ++i) {
    s += std::abs(predictions[i] - targets[i]);
  }
  return s / static_cast<double>(targets.size());
}

double rmse(std::span<const double> predictions,
            std::span<const double> targets) {
  check_batch(predictions, targets);
  double s = 0.0;
  for (size_t i = 0; i < targets.size(); ++i) {
    const double d = predictions[i] - targets[i];
    s += d * d;
  }
  return std::sqrt(s / static_cast<double>(targets.size()));
}

double explained_variance(std::span<const double> predictions,
                          std::span<const double> targets) {
  check_batch(predictions, targets);
  const double n = static_cast<double>(targets.size());
  double my = 0.0, mr = 0.0;
  for (size_t i = 0; i < targets.size(); ++i) {
    my += targets[i];
    mr += targets[i] - predictions[i];
  }
  my /= n;
  mr /= n;
  double vy = 0.0, vr = 0.0;
  for (size_t i = 0; i < targets.size(); ++i) {
    const double dy = targets[i] - my;
    const double dr = targets[i] - predictions[i] - mr;
    vy += dy * dy;
    vr += dr * dr;
  }
  if (vy == 0.0) {
    throw UndefinedMetricError("explained variance of constant targets");
  }
  return 1.0 - vr / vy;
}

}  // namespace tembed
