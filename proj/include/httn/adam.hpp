#ifndef HTTN_ADAM_HPP
#define HTTN_ADAM_HPP

#include <cmath>
#include <cstdint>

#include "httn/matrix.hpp"

namespace httn {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Moment buffers for one parameter matrix.
struct AdamState {
  AdamConfig config;
  Matrix first_moment;
  Matrix second_moment;
  std::uint64_t step = 0;

  AdamState() = default;
  AdamState(std::size_t rows, std::size_t cols, AdamConfig cfg = {})
      : config(cfg), first_moment(rows, cols), second_moment(rows, cols) {}
  explicit AdamState(const Matrix& like, AdamConfig cfg = {}) : AdamState(like.rows(), like.cols(), cfg) {}
};

/// One bias-corrected Adam update, in place.
inline void adam_update(Matrix& params, const Matrix& grads, AdamState& state) {
  Matrix::require_same_shape(params, grads, "adam_step (params vs grads)");
  Matrix::require_same_shape(params, state.first_moment, "adam_step (params vs state)");
  Matrix::require_same_shape(params, state.second_moment, "adam_step (params vs state)");
  const auto& cfg = state.config;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);
  auto& p = params.data();
  const auto& g = grads.data();
  auto& m = state.first_moment.data();
  auto& v = state.second_moment.data();
  for (std::size_t i = 0; i < p.size(); ++i) {
    m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
    v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
    const double m_hat = m[i] / bc1;
    const double v_hat = v[i] / bc2;
    p[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
  }
}

/// Value-returning form of adam_update.
inline std::pair<Matrix, AdamState> adam_step(Matrix params, const Matrix& grads, AdamState state) {
  adam_update(params, grads, state);
  return {std::move(params), std::move(state)};
}

}  // namespace httn

#endif  // HTTN_ADAM_HPP
