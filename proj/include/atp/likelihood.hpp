#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "atp/model.hpp"

namespace atp {

namespace detail {

/// Per-row negative log-likelihood from already-evaluated parts.
inline double row_nll(const RowParts& parts, const ModelSpec& spec) {
  const double dh_dy = parts.deriv_dot / spec.bounds.span();
  if (!(dh_dy > 0.0))
    throw std::logic_error("monotonicity violated: dh_dy <= 0");
  return -base_logpdf(parts.h, spec.base) - std::log(dh_dy);
}

/// Accumulates the gradient of one row's NLL into grad (flat layout
/// gamma | phi | beta_series | beta_exog), scaled by weight.
///
/// The chain rule pieces: dh/dtheta = b(y) + sum_j phi_j b(y_lag_j),
/// dh/dphi_j = b(y_lag_j)^T theta, d(log dh_dy)/dtheta = b'(y)/(b'(y)^T theta),
/// and the constrain Jacobian is lower-triangular with softplus slopes.
inline void accumulate_row_grad(const RowParts& parts, const SupervisedRow& row,
                                const std::vector<double>& dtheta_dgamma,
                                const ParamVector& params,
                                const ModelSpec& spec, double weight,
                                std::vector<double>& grad) {
  const int m1 = spec.bsp_order + 1;
  const double g_h = -base_dlogpdf(parts.h, spec.base);

  // d nll / d theta
  std::vector<double> grad_theta(m1);
  for (int m = 0; m < m1; ++m) {
    double dh_dtheta = parts.y_basis.values[m];
    for (int j = 0; j < spec.lag_order; ++j)
      dh_dtheta +=
          params.phi[j] * parts.lag_values[static_cast<std::size_t>(j) * m1 + m];
    grad_theta[m] =
        g_h * dh_dtheta - parts.y_basis.derivs[m] / parts.deriv_dot;
  }

  // Chain through constrain: grad_gamma[k] = slope_k * sum_{m>=k} grad_theta[m].
  double suffix = 0.0;
  for (int k = m1 - 1; k >= 0; --k) {
    suffix += grad_theta[k];
    grad[k] += weight * suffix * dtheta_dgamma[k];
  }

  int off = m1;
  for (int j = 0; j < spec.lag_order; ++j)
    grad[off + j] += weight * g_h * parts.lag_h1[j];
  off += spec.lag_order;
  if (spec.n_series > 0) grad[off + row.series_idx] += weight * g_h;
  off += spec.n_series;
  for (int k = 0; k < spec.n_exog; ++k)
    grad[off + k] += weight * g_h * row.exog[k];
}

inline std::vector<double> constrain_slopes(const std::vector<double>& gamma) {
  std::vector<double> slopes(gamma.size());
  slopes[0] = 1.0;
  for (std::size_t k = 1; k < gamma.size(); ++k)
    slopes[k] = sigmoid(gamma[k]);
  return slopes;
}

}  // namespace detail

/// Mean per-row negative log-likelihood (mean, not sum, so the scale is
/// batch-size invariant).
inline double nll(const ParamVector& params, std::span<const SupervisedRow> rows,
                  const ModelSpec& spec) {
  spec.validate();
  params.validate(spec);
  if (rows.empty()) throw std::invalid_argument("empty row set");
  const ConstrainedTheta ct = constrain(params.gamma);
  double total = 0.0;
  for (const auto& row : rows) {
    auto parts = detail::eval_row(row.y, row.lags, row.exog, row.series_idx,
                                  ct, params, spec);
    total += detail::row_nll(parts, spec);
  }
  return total / static_cast<double>(rows.size());
}

/// Exact analytic gradient of nll w.r.t. the unconstrained parameters,
/// flat layout gamma | phi | beta_series | beta_exog.
inline std::vector<double> nll_grad(const ParamVector& params,
                                    std::span<const SupervisedRow> rows,
                                    const ModelSpec& spec) {
  spec.validate();
  params.validate(spec);
  if (rows.empty()) throw std::invalid_argument("empty row set");
  const ConstrainedTheta ct = constrain(params.gamma);
  const auto slopes = detail::constrain_slopes(params.gamma);
  std::vector<double> grad(spec.n_params(), 0.0);
  const double w = 1.0 / static_cast<double>(rows.size());
  for (const auto& row : rows) {
    auto parts = detail::eval_row(row.y, row.lags, row.exog, row.series_idx,
                                  ct, params, spec);
    if (!(parts.deriv_dot > 0.0))
      throw std::logic_error("monotonicity violated: dh_dy <= 0");
    detail::accumulate_row_grad(parts, row, slopes, params, spec, w, grad);
  }
  return grad;
}

/// Gradient of a single row's NLL contribution; nll_grad is the mean of
/// these over the row set.
inline std::vector<double> per_row_score(const ParamVector& params,
                                         const SupervisedRow& row,
                                         const ModelSpec& spec) {
  return nll_grad(params, std::span<const SupervisedRow>(&row, 1), spec);
}

/// log of the conditional density f_Z(h) * dh_dy at one observation.
inline double conditional_logdensity(double y, std::span<const double> lags,
                                     std::span<const double> exog,
                                     int series_idx, const ParamVector& params,
                                     const ModelSpec& spec) {
  const Transformed t = transform(y, lags, exog, series_idx, params, spec);
  return base_logpdf(t.h, spec.base) + std::log(t.dh_dy);
}

}  // namespace atp
