#pragma once

#include <span>

namespace tembed {

// Mann-Whitney statistic P(s+ > s-) + P(s+ == s-)/2. Labels are 0/1.
// Throws UndefinedMetricError unless both classes are present.
double auc_roc(std::span<const double> scores, std::span<const double> labels);

// Step-wise average precision sum_n (R_n - R_{n-1}) P_n over distinct score
// thresholds in decreasing order (tied scores form one threshold). Throws
// UndefinedMetricError when there are no positives.
double avg_precision(std::span<const double> scores,
                     std::span<const double> labels);

double mae(std::span<const double> predictions, std::span<const double> targets);
double rmse(std::span<const double> predictions,
            std::span<const double> targets);

// 1 - Var(y - y_hat) / Var(y) with population variances. Throws
// UndefinedMetricError for constant targets.
double explained_variance(std::span<const double> predictions,
                          std::span<const double> targets);

}  // namespace tembed
