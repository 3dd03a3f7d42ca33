#pragma once

// Sinusoidal position and time embeddings.
//
// A configuration with dimension d and base B defines d/2 frequency pairs
//   omega_i = B^(-2i/d),  i in [0, d/2),
// and embeds a scalar position/time x as the interleaved vector
//   v[2i] = sin(x * omega_i),  v[2i+1] = cos(x * omega_i).
// Positional embeddings use B = 10000 on integer positions; time embeddings
// use B = max_time on real timestamps (hours by default). Every embedding has
// squared norm d/2, and a shift by k is the block-diagonal rotation with
// angles k * omega_i.

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace tembed {

enum class BaseKind { kPositional, kTemporal };

inline constexpr double kPositionalBase = 10000.0;

struct EncoderConfig {
  int dim = 32;
  double max_time = 48.0;
  BaseKind base_kind = BaseKind::kTemporal;

  static EncoderConfig positional(int dim) {
    return {dim, kPositionalBase, BaseKind::kPositional};
  }
  static EncoderConfig temporal(int dim, double max_time) {
    return {dim, max_time, BaseKind::kTemporal};
  }

  // Throws ConfigError unless dim is even and >= 2 and max_time > 0.
  void validate() const;

  double base() const {
    return base_kind == BaseKind::kPositional ? kPositionalBase : max_time;
  }
  int pairs() const { return dim / 2; }
  // omega_i = base^(-2i/dim).
  double frequency(int pair) const;
  // Largest |delta| that estimate_delta can resolve: pi / omega_min.
  double delta_range_limit() const;
};

using EmbeddingVector = Eigen::VectorXd;

EmbeddingVector pe(long long pos, const EncoderConfig& cfg);

EmbeddingVector te(double time, const EncoderConfig& cfg);

// Row j is te(times[j]); an empty input yields a 0 x dim matrix.
Eigen::MatrixXd te_batch(std::span<const double> times,
                         const EncoderConfig& cfg);

// Rotation that advances an embedding by a time offset k.
class ShiftMap {
 public:
  ShiftMap(double k, const EncoderConfig& cfg);

  double offset() const { return offset_; }
  const std::vector<double>& angles() const { return angles_; }

  EmbeddingVector apply(const EmbeddingVector& v) const;
  // The same map as an explicit dim x dim block-diagonal matrix.
  Eigen::MatrixXd matrix() const;

 private:
  double offset_;
  std::vector<double> angles_;
  std::vector<double> cos_;
  std::vector<double> sin_;
};

inline ShiftMap shift_map(double k, const EncoderConfig& cfg) {
  return ShiftMap(k, cfg);
}

// Recovers dt with te(t + dt) ~= b when a = te(t), by coarse-to-fine phase
// unwrapping. Throws InputError if either vector is not a valid embedding
// (pair norms off by more than 1e-6) and AmbiguityError if max_abs_delta is
// given and reaches cfg.delta_range_limit().
double estimate_delta(const EmbeddingVector& a, const EmbeddingVector& b,
                      const EncoderConfig& cfg,
                      std::optional<double> max_abs_delta = std::nullopt);

// Number of te() calls so far with time > max_time. A warning is printed to
// stderr the first time this happens in a process.
long long aliased_time_count();

}  // namespace tembed
