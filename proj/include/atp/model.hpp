#pragma once

#include <cmath>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "atp/base_distribution.hpp"
#include "atp/bernstein.hpp"

namespace atp {

/// Static model configuration: BSP order M, lag order p, base distribution,
/// outcome support, and the layout of the additive shift term.
struct ModelSpec {
  int bsp_order = 1;  // M
  int lag_order = 0;  // p
  BaseKind base = BaseKind::standard_normal;
  SupportBounds bounds;
  int n_series = 0;  // series-identifier levels in the categorical shift
  int n_exog = 0;    // linear exogenous features in the shift

  void validate() const {
    if (bsp_order < 1 || bsp_order > kMaxBspOrder)
      throw std::invalid_argument("unsupported order");
    if (lag_order < 0 || lag_order > 32)
      throw std::invalid_argument("lag order must be in [0, 32]");
    if (n_series < 0 || n_exog < 0)
      throw std::invalid_argument("shift layout counts must be non-negative");
    bounds.validate();
  }

  int n_params() const { return bsp_order + 1 + lag_order + n_series + n_exog; }
};

/// Unconstrained trainable parameters. gamma holds the raw BSP coefficients;
/// the monotone coefficients are obtained through constrain().
struct ParamVector {
  std::vector<double> gamma;        // M+1
  std::vector<double> phi;          // p
  std::vector<double> beta_series;  // n_series
  std::vector<double> beta_exog;    // n_exog

  std::size_t size() const {
    return gamma.size() + phi.size() + beta_series.size() + beta_exog.size();
  }

  void validate(const ModelSpec& spec) const {
    if (static_cast<int>(gamma.size()) != spec.bsp_order + 1 ||
        static_cast<int>(phi.size()) != spec.lag_order ||
        static_cast<int>(beta_series.size()) != spec.n_series ||
        static_cast<int>(beta_exog.size()) != spec.n_exog)
      throw std::invalid_argument("parameter layout does not match spec");
    auto finite = [](const std::vector<double>& v) {
      for (double x : v)
        if (!std::isfinite(x)) return false;
      return true;
    };
    if (!finite(gamma) || !finite(phi) || !finite(beta_series) ||
        !finite(beta_exog))
      throw std::invalid_argument("non-finite parameter");
  }

  std::vector<double> flatten() const {
    std::vector<double> out;
    out.reserve(size());
    out.insert(out.end(), gamma.begin(), gamma.end());
    out.insert(out.end(), phi.begin(), phi.end());
    out.insert(out.end(), beta_series.begin(), beta_series.end());
    out.insert(out.end(), beta_exog.begin(), beta_exog.end());
    return out;
  }

  static ParamVector unflatten(const ModelSpec& spec,
                               std::span<const double> flat) {
    if (static_cast<int>(flat.size()) != spec.n_params())
      throw std::invalid_argument("flat parameter length does not match spec");
    ParamVector p;
    auto it = flat.begin();
    p.gamma.assign(it, it + spec.bsp_order + 1);
    it += spec.bsp_order + 1;
    p.phi.assign(it, it + spec.lag_order);
    it += spec.lag_order;
    p.beta_series.assign(it, it + spec.n_series);
    it += spec.n_series;
    p.beta_exog.assign(it, it + spec.n_exog);
    return p;
  }
};

/// Strictly increasing BSP coefficients.
struct ConstrainedTheta {
  std::vector<double> theta;
};

/// One supervised observation: outcome, its p lags in order
/// (y_{t-1}, ..., y_{t-p}), exogenous features, and the series index.
struct SupervisedRow {
  double y = 0.0;
  std::vector<double> lags;
  std::vector<double> exog;
  int series_idx = 0;
};

namespace detail {

inline double softplus(double x) {
  return (x > 0.0) ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline double softplus_inverse(double y) {
  if (!(y > 0.0)) throw std::invalid_argument("softplus inverse needs y > 0");
  return (y > 30.0) ? y : std::log(std::expm1(y));
}

}  // namespace detail

/// theta[0] = gamma[0]; theta[m] = theta[m-1] + softplus(gamma[m]).
/// Strictly increasing by construction.
inline ConstrainedTheta constrain(const std::vector<double>& gamma) {
  if (gamma.empty()) throw std::invalid_argument("empty coefficient vector");
  ConstrainedTheta out;
  out.theta.resize(gamma.size());
  out.theta[0] = gamma[0];
  for (std::size_t m = 1; m < gamma.size(); ++m)
    out.theta[m] = out.theta[m - 1] + detail::softplus(gamma[m]);
  return out;
}

/// Inverse of constrain via log(expm1).
inline std::vector<double> unconstrain(const std::vector<double>& theta) {
  if (theta.empty()) throw std::invalid_argument("empty coefficient vector");
  std::vector<double> gamma(theta.size());
  gamma[0] = theta[0];
  for (std::size_t m = 1; m < theta.size(); ++m)
    gamma[m] = detail::softplus_inverse(theta[m] - theta[m - 1]);
  return gamma;
}

/// Value and outcome-derivative of the transformation at one observation.
struct Transformed {
  double h = 0.0;
  double dh_dy = 0.0;  // per outcome unit, strictly positive
};

namespace detail {

/// Everything the likelihood and its gradient need from one row:
/// the outcome basis, per-lag basis values, per-lag h1 contributions,
/// and the derivative inner product before dividing by the span.
struct RowParts {
  BasisEval y_basis;
  std::vector<double> lag_values;  // p rows of length M+1, flattened
  std::vector<double> lag_h1;      // a(y_lag)^T theta per lag
  double shift = 0.0;
  double h = 0.0;
  double deriv_dot = 0.0;  // b'(y)^T theta, in rescaled units
};

inline RowParts eval_row(double y, std::span<const double> lags,
                         std::span<const double> exog, int series_idx,
                         const ConstrainedTheta& ct, const ParamVector& params,
                         const ModelSpec& spec) {
  const int m1 = spec.bsp_order + 1;
  if (static_cast<int>(lags.size()) != spec.lag_order)
    throw std::invalid_argument("lag vector length does not match spec");
  if (static_cast<int>(exog.size()) != spec.n_exog)
    throw std::invalid_argument("exog vector length does not match spec");
  if (spec.n_series > 0 && (series_idx < 0 || series_idx >= spec.n_series))
    throw std::invalid_argument("series index out of range");

  RowParts parts;
  parts.y_basis = basis_extrapolated(rescale(y, spec.bounds), spec.bsp_order);

  double h = 0.0;
  for (int m = 0; m < m1; ++m) h += parts.y_basis.values[m] * ct.theta[m];
  parts.deriv_dot = 0.0;
  for (int m = 0; m < m1; ++m) parts.deriv_dot += parts.y_basis.derivs[m] * ct.theta[m];

  parts.lag_values.resize(static_cast<std::size_t>(spec.lag_order) * m1);
  parts.lag_h1.resize(spec.lag_order);
  for (int j = 0; j < spec.lag_order; ++j) {
    BasisEval lb =
        basis_extrapolated(rescale(lags[j], spec.bounds), spec.bsp_order);
    double h1 = 0.0;
    for (int m = 0; m < m1; ++m) {
      parts.lag_values[static_cast<std::size_t>(j) * m1 + m] = lb.values[m];
      h1 += lb.values[m] * ct.theta[m];
    }
    parts.lag_h1[j] = h1;
    h += params.phi[j] * h1;
  }

  double shift = 0.0;
  if (spec.n_series > 0) shift += params.beta_series[series_idx];
  for (int k = 0; k < spec.n_exog; ++k) shift += exog[k] * params.beta_exog[k];
  parts.shift = shift;
  parts.h = h + shift;
  return parts;
}

}  // namespace detail

/// h_t of the AT(p) model: the outcome transformation plus the lag shift
/// term and the additive series/exogenous shift; dh_dy is the Jacobian
/// used in the change of variables.
inline Transformed transform(double y, std::span<const double> lags,
                             std::span<const double> exog, int series_idx,
                             const ParamVector& params, const ModelSpec& spec) {
  spec.validate();
  params.validate(spec);
  const ConstrainedTheta ct = constrain(params.gamma);
  auto parts = detail::eval_row(y, lags, exog, series_idx, ct, params, spec);
  const double dh_dy = parts.deriv_dot / spec.bounds.span();
  if (!(dh_dy > 0.0))
    throw std::logic_error("monotonicity violated: dh_dy <= 0");
  return {parts.h, dh_dy};
}

inline Transformed transform(const SupervisedRow& row, const ParamVector& params,
                             const ModelSpec& spec) {
  return transform(row.y, row.lags, row.exog, row.series_idx, params, spec);
}

/// AR(p) parameters recovered from an M=1 fit, on the rescaled-outcome
/// scale. The lag term passes each lag through the same h1, so the slope
/// factor cancels and the AR coefficient is just the negated lag weight.
/// Any additive shift active in the given context folds into the
/// intercept.
struct ArMapping {
  double intercept = 0.0;
  std::vector<double> ar_coefs;
  double sigma = 1.0;
};

inline ArMapping at_to_ar(const ParamVector& params, const ModelSpec& spec,
                          int series_idx = 0,
                          std::span<const double> exog = {}) {
  if (spec.bsp_order != 1)
    throw std::invalid_argument("mapping defined only for M=1");
  params.validate(spec);
  const ConstrainedTheta ct = constrain(params.gamma);
  const double slope = ct.theta[1] - ct.theta[0];

  double shift = 0.0;
  if (spec.n_series > 0) {
    if (series_idx < 0 || series_idx >= spec.n_series)
      throw std::invalid_argument("series index out of range");
    shift += params.beta_series[series_idx];
  }
  if (!exog.empty()) {
    if (static_cast<int>(exog.size()) != spec.n_exog)
      throw std::invalid_argument("exog vector length does not match spec");
    for (int k = 0; k < spec.n_exog; ++k)
      shift += exog[k] * params.beta_exog[k];
  }

  const double phi_sum =
      std::accumulate(params.phi.begin(), params.phi.end(), 0.0);
  ArMapping map;
  map.sigma = 1.0 / slope;
  map.intercept = -(ct.theta[0] * (1.0 + phi_sum) + shift) / slope;
  map.ar_coefs.resize(params.phi.size());
  for (std::size_t j = 0; j < params.phi.size(); ++j)
    map.ar_coefs[j] = -params.phi[j];
  return map;
}

/// Converts an AR parameterization on the rescaled scale back to outcome
/// units: z = (y - lower)/span.
inline ArMapping ar_to_outcome_units(const ArMapping& map,
                                     const SupportBounds& bounds) {
  const double coef_sum =
      std::accumulate(map.ar_coefs.begin(), map.ar_coefs.end(), 0.0);
  ArMapping out = map;
  out.intercept = bounds.lower * (1.0 - coef_sum) + bounds.span() * map.intercept;
  out.sigma = bounds.span() * map.sigma;
  return out;
}

/// Support rule used when fitting: pad the observed range by 10% on each
/// side. Extrapolation handles anything that still falls outside.
inline SupportBounds bounds_from_range(double y_min, double y_max) {
  if (!std::isfinite(y_min) || !std::isfinite(y_max) || y_min > y_max)
    throw std::invalid_argument("invalid outcome range");
  double range = y_max - y_min;
  if (range == 0.0) range = std::max(1.0, std::abs(y_min));  // constant series
  return {y_min - 0.1 * range, y_max + 0.1 * range};
}

/// Deterministic starting point: theta equally spaced on [-2, 2]
/// (a near-identity transformation of the standardized outcome), all
/// shift and lag weights zero.
inline ParamVector init_params(const ModelSpec& spec) {
  spec.validate();
  std::vector<double> theta(spec.bsp_order + 1);
  for (int m = 0; m <= spec.bsp_order; ++m)
    theta[m] = -2.0 + 4.0 * m / spec.bsp_order;
  ParamVector p;
  p.gamma = unconstrain(theta);
  p.phi.assign(spec.lag_order, 0.0);
  p.beta_series.assign(spec.n_series, 0.0);
  p.beta_exog.assign(spec.n_exog, 0.0);
  return p;
}

}  // namespace atp
