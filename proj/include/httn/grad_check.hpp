#ifndef HTTN_GRAD_CHECK_HPP
#define HTTN_GRAD_CHECK_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include "httn/matrix.hpp"

namespace httn {

/// Compares `analytic` against central differences of `loss` around
/// `params`. `params` is perturbed in place and restored.
///
/// Returns max over entries of |analytic - numeric| / max(1, |numeric|).
inline double grad_check(const std::function<double()>& loss, Matrix& params, const Matrix& analytic,
                         double eps = 1e-5) {
  Matrix::require_same_shape(params, analytic, "grad_check");
  double worst = 0.0;
  auto& p = params.data();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double saved = p[i];
    p[i] = saved + eps;
    const double up = loss();
    p[i] = saved - eps;
    const double down = loss();
    p[i] = saved;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw NumericError("grad_check: non-finite loss at entry " + std::to_string(i));
    }
    const double numeric = (up - down) / (2.0 * eps);
    const double err = std::abs(analytic.data()[i] - numeric) / std::max(1.0, std::abs(numeric));
    worst = std::max(worst, err);
  }
  return worst;
}

/// Functional form: `loss_fn(params)` returns the loss and `grad_fn(params)`
/// the analytic gradient.
inline double grad_check(const std::function<double(const Matrix&)>& loss_fn,
                         const std::function<Matrix(const Matrix&)>& grad_fn, Matrix params, double eps = 1e-5) {
  const Matrix analytic = grad_fn(params);
  return grad_check([&] { return loss_fn(params); }, params, analytic, eps);
}

}  // namespace httn

#endif  // HTTN_GRAD_CHECK_HPP
