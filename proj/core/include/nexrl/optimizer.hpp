#pragma once

#include <cstdint>
#include <vector>

#include "nexrl/network.hpp"

namespace nexrl {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// First/second-moment accumulators, one pair of arrays per parameter array
/// (same order as param_refs).
struct AdamState {
  AdamConfig config;
  std::int64_t step = 0;
  std::vector<std::vector<float>> m;
  std::vector<std::vector<float>> v;

  static AdamState init(NetworkParams& params, const AdamConfig& cfg = {});
};

/// One element's bias-corrected update, in double:
///   m <- b1*m + (1-b1)*g;  v <- b2*v + (1-b2)*g^2;
///   theta <- theta - lr * m_hat / (sqrt(v_hat) + eps)
/// with m_hat = m/(1-b1^step), v_hat = v/(1-b2^step). `step` counts from 1.
/// adam_step applies this rule to every element.
double adam_scalar_step(double theta, double grad, double& m, double& v,
                        std::int64_t step, const AdamConfig& cfg, double lr);

/// One whole-network Adam update. A non-finite gradient rejects the whole
/// step and names the offending parameter array.
void adam_step(NetworkParams& params, NetworkGrads& grads, AdamState& state,
               double lr);

/// Multiplies the learning rate by `factor` after `patience` consecutive
/// epochs without strict improvement of the monitored value; the patience
/// counter resets on every drop and on every new best.
class PlateauScheduler {
 public:
  PlateauScheduler(double initial_lr, double factor = 0.2, int patience = 10)
      : lr_(initial_lr), factor_(factor), patience_(patience) {
    if (initial_lr <= 0) throw DataError("plateau scheduler: lr must be > 0");
    if (factor <= 0 || factor >= 1)
      throw DataError("plateau scheduler: factor must lie in (0,1)");
    if (patience < 1) throw DataError("plateau scheduler: patience must be >= 1");
  }

  /// Feeds one epoch's monitored loss; returns the lr for the next epoch.
  double observe(double monitored);

  double lr() const { return lr_; }
  double best() const { return best_; }
  bool has_best() const { return has_best_; }
  int stale_epochs() const { return stale_; }

  /// Reinstates a checkpointed scheduler state (training resume).
  void restore(double lr, double best, bool has_best, int stale) {
    lr_ = lr;
    best_ = best;
    has_best_ = has_best;
    stale_ = stale;
  }

 private:
  double lr_;
  double factor_;
  int patience_;
  double best_ = 0.0;
  bool has_best_ = false;
  int stale_ = 0;
};

}  // namespace nexrl
