#pragma once
// O(n^2) / per-threshold reference implementations of the ranking metrics.
#include <algorithm>
#include <functional>
#include <vector>

namespace tembed::testing {

inline double brute_auc(const std::vector<double>& s,
                        const std::vector<double>& y) {
  double num = 0;
  double pairs = 0;
  for (size_t i = 0; i < s.size(); ++i) {
    if (y[i] != 1.0) continue;
    for (size_t j = 0; j < s.size(); ++j) {
      if (y[j] != 0.0) continue;
      pairs += 1;
      if (s[i] > s[j]) num += 1;
      else if (s[i] == s[j]) num += 0.5;
    }
  }
  return num / pairs;
}

// Enumerate each distinct threshold; precision and recall at score >= thr.
inline double brute_ap(const std::vector<double>& s,
                       const std::vector<double>& y) {
  double pos = 0;
  for (double v : y) pos += v;
  std::vector<double> thresholds(s);
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()),
                   thresholds.end());
  double ap = 0;
  double prev_recall = 0;
  for (double thr : thresholds) {
    double tp = 0;
    double n = 0;
    for (size_t i = 0; i < s.size(); ++i) {
      if (s[i] >= thr) {
        n += 1;
        tp += y[i];
      }
    }
    const double recall = tp / pos;
    ap += (recall - prev_recall) * (tp / n);
    prev_recall = recall;
  }
  return ap;
}

}  // namespace tembed::testing
