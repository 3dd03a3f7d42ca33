#include "tembed/encoding.h"

#include <atomic>
#include <cmath>
#include <iostream>
#include <numbers>
#include <string>

#include "tembed/errors.h"

namespace tembed {
namespace {

std::atomic<long long> g_aliased{0};

void note_alias(double time, double max_time) {
  if (g_aliased.fetch_add(1) == 0) {
    std::cerr << "warning: time " << time << " exceeds max_time " << max_time
              << "; embeddings beyond max_time alias earlier times\n";
  }
}

// Shared by pe/te/te_batch so that every route gives bit-identical values.
void fill_embedding(double x, const EncoderConfig& cfg, double* out) {
  for (int i = 0; i < cfg.pairs(); ++i) {
    const double angle = x * cfg.frequency(i);
    out[2 * i] = std::sin(angle);
    out[2 * i + 1] = std::cos(angle);
  }
}

double wrap_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  a = std::remainder(a, two_pi);
  return a;
}

}  // namespace

void EncoderConfig::validate() const {
  if (dim < 2 || dim % 2 != 0) {
    throw ConfigError("encoder dim must be even and >= 2, got " +
                      std::to_string(dim));
  }
  if (!(max_time > 0.0) || !std::isfinite(max_time)) {
    throw ConfigError("encoder max_time must be a positive finite number");
  }
}

double EncoderConfig::frequency(int pair) const {
  return 1.0 / std::pow(base(), 2.0 * pair / dim);
}

double EncoderConfig::delta_range_limit() const {
  return std::numbers::pi / frequency(pairs() - 1);
}

EmbeddingVector pe(long long pos, const EncoderConfig& cfg) {
  cfg.validate();
  if (cfg.base_kind != BaseKind::kPositional) {
    throw ConfigError("pe() requires a positional encoder config");
  }
  if (pos < 0) throw InputError("pe() position must be non-negative");
  EmbeddingVector v(cfg.dim);
  fill_embedding(static_cast<double>(pos), cfg, v.data());
  return v;
}

EmbeddingVector te(double time, const EncoderConfig& cfg) {
  cfg.validate();
  if (cfg.base_kind != BaseKind::kTemporal) {
    throw ConfigError("te() requires a temporal encoder config");
  }
  if (!std::isfinite(time)) throw InputError("te() time must be finite");
  if (time > cfg.max_time) note_alias(time, cfg.max_time);
  EmbeddingVector v(cfg.dim);
  fill_embedding(time, cfg, v.data());
  return v;
}

Eigen::MatrixXd te_batch(std::span<const double> times,
                         const EncoderConfig& cfg) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(times.size()), cfg.dim);
  for (size_t j = 0; j < times.size(); ++j) {
    try {
      out.row(static_cast<Eigen::Index>(j)) = te(times[j], cfg).transpose();
    } catch (const InputError& e) {
      throw InputError("row " + std::to_string(j) + ": " + e.what());
    }
  }
  return out;
}

ShiftMap::ShiftMap(double k, const EncoderConfig& cfg) : offset_(k) {
  cfg.validate();
  if (!std::isfinite(k)) throw InputError("shift offset must be finite");
  for (int i = 0; i < cfg.pairs(); ++i) {
    const double angle = k * cfg.frequency(i);
    angles_.push_back(angle);
    cos_.push_back(std::cos(angle));
    sin_.push_back(std::sin(angle));
  }
}

EmbeddingVector ShiftMap::apply(const EmbeddingVector& v) const {
  if (v.size() != 2 * static_cast<Eigen::Index>(angles_.size())) {
    throw InputError("shift map dimension mismatch");
  }
  EmbeddingVector out(v.size());
  for (size_t i = 0; i < angles_.size(); ++i) {
    const double s = v[2 * i];
    const double c = v[2 * i + 1];
    // sin(a+k) = sin a cos k + cos a sin k; cos(a+k) = cos a cos k - sin a sin k
    out[2 * i] = s * cos_[i] + c * sin_[i];
    out[2 * i + 1] = c * cos_[i] - s * sin_[i];
  }
  return out;
}

Eigen::MatrixXd ShiftMap::matrix() const {
  const auto n = static_cast<Eigen::Index>(2 * angles_.size());
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (size_t i = 0; i < angles_.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(2 * i);
    m(r, r) = cos_[i];
    m(r, r + 1) = sin_[i];
    m(r + 1, r) = -sin_[i];
    m(r + 1, r + 1) = cos_[i];
  }
  return m;
}

double estimate_delta(const EmbeddingVector& a, const EmbeddingVector& b,
                      const EncoderConfig& cfg,
                      std::optional<double> max_abs_delta) {
  cfg.validate();
  if (a.size() != cfg.dim || b.size() != cfg.dim) {
    throw InputError("embedding length does not match encoder dim");
  }
  for (int i = 0; i < cfg.pairs(); ++i) {
    const double na = a[2 * i] * a[2 * i] + a[2 * i + 1] * a[2 * i + 1];
    const double nb = b[2 * i] * b[2 * i] + b[2 * i + 1] * b[2 * i + 1];
    if (std::abs(na - 1.0) > 1e-6 || std::abs(nb - 1.0) > 1e-6) {
      throw InputError("invalid embedding: pair " + std::to_string(i) +
                       " is not on the unit circle");
    }
  }
  const double limit = cfg.delta_range_limit();
  if (max_abs_delta && std::abs(*max_abs_delta) >= limit) {
    throw AmbiguityError("requested delta range " +
                         std::to_string(*max_abs_delta) +
                         " reaches the coarsest half-period " +
                         std::to_string(limit));
  }

  constexpr double two_pi = 2.0 * std::numbers::pi;
  auto phase_step = [&](int i) {
    const double pa = std::atan2(a[2 * i], a[2 * i + 1]);
    const double pb = std::atan2(b[2 * i], b[2 * i + 1]);
    return wrap_angle(pb - pa);
  };

  // The coarsest pair fixes the branch; each finer pair resolves its own
  // 2*pi ambiguity using the running estimate.
  const int coarsest = cfg.pairs() - 1;
  double delta = phase_step(coarsest) / cfg.frequency(coarsest);
  for (int i = coarsest - 1; i >= 0; --i) {
    const double omega = cfg.frequency(i);
    const double measured = phase_step(i);
    const double turns = std::round((delta * omega - measured) / two_pi);
    delta = (measured + two_pi * turns) / omega;
  }
  return delta;
}

long long aliased_time_count() { return g_aliased.load(); }

}  // namespace tembed
