#include "nexrl/optimizer.hpp"

#include <cmath>

namespace nexrl {
namespace {

// Core update with the bias corrections (1 - beta^step) precomputed.
inline double adam_update(double theta, double grad, double& m, double& v,
                          double bc1, double bc2, const AdamConfig& cfg,
                          double lr) {
  m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad;
  v = cfg.beta2 * v + (1.0 - cfg.beta2) * grad * grad;
  return theta - lr * (m / bc1) / (std::sqrt(v / bc2) + cfg.epsilon);
}

}  // namespace

AdamState AdamState::init(NetworkParams& params, const AdamConfig& cfg) {
  AdamState st;
  st.config = cfg;
  for (const ParamRef<float>& r : param_refs(params)) {
    st.m.emplace_back(r.size, 0.0f);
    st.v.emplace_back(r.size, 0.0f);
  }
  return st;
}

void adam_step(NetworkParams& params, NetworkGrads& grads, AdamState& state,
               double lr) {
  if (lr <= 0) throw DataError("adam_step: lr must be > 0");
  const auto prefs = param_refs(params);
  const auto grefs = grad_refs(grads, params);
  if (state.m.size() != prefs.size())
    throw ShapeError("adam_step: optimizer state does not match the network");

  // Reject the whole step before mutating anything.
  for (std::size_t a = 0; a < grefs.size(); ++a) {
    if (grefs[a].size != prefs[a].size)
      throw ShapeError("adam_step: gradient size mismatch at " +
                       prefs[a].path);
    for (std::size_t t = 0; t < grefs[a].size; ++t)
      if (!std::isfinite(static_cast<double>(grefs[a].data[t])))
        throw NumericalError("adam_step: non-finite gradient in " +
                             grefs[a].path);
  }

  ++state.step;
  const double bc1 =
      1.0 - std::pow(state.config.beta1, static_cast<double>(state.step));
  const double bc2 =
      1.0 - std::pow(state.config.beta2, static_cast<double>(state.step));
  for (std::size_t a = 0; a < prefs.size(); ++a) {
    float* theta = prefs[a].data;
    const float* g = grefs[a].data;
    float* m = state.m[a].data();
    float* v = state.v[a].data();
    for (std::size_t t = 0; t < prefs[a].size; ++t) {
      double mt = static_cast<double>(m[t]);
      double vt = static_cast<double>(v[t]);
      theta[t] = static_cast<float>(
          adam_update(static_cast<double>(theta[t]),
                      static_cast<double>(g[t]), mt, vt, bc1, bc2,
                      state.config, lr));
      m[t] = static_cast<float>(mt);
      v[t] = static_cast<float>(vt);
    }
  }
}

double adam_scalar_step(double theta, double grad, double& m, double& v,
                        std::int64_t step, const AdamConfig& cfg, double lr) {
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
  return adam_update(theta, grad, m, v, bc1, bc2, cfg, lr);
}

double PlateauScheduler::observe(double monitored) {
  if (!has_best_ || monitored < best_) {  // strict improvement resets patience
    best_ = monitored;
    has_best_ = true;
    stale_ = 0;
    return lr_;
  }
  ++stale_;
  if (stale_ >= patience_) {
    lr_ *= factor_;
    stale_ = 0;
  }
  return lr_;
}

}  // namespace nexrl
