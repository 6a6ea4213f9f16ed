#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace atp {

/// Outcome support [lower, upper] on which the Bernstein basis lives.
struct SupportBounds {
  double lower = 0.0;
  double upper = 1.0;

  void validate() const {
    if (!std::isfinite(lower) || !std::isfinite(upper))
      throw std::invalid_argument("support bounds must be finite");
    if (!(lower < upper))
      throw std::invalid_argument("support bounds require lower < upper");
  }
  double span() const { return upper - lower; }
};

/// Bernstein basis values B_{m,M} and their derivatives w.r.t. the
/// rescaled outcome, both of length M+1.
struct BasisEval {
  std::vector<double> values;
  std::vector<double> derivs;
};

inline constexpr int kMaxBspOrder = 64;

/// Map y to the unit interval: (y - lower) / (upper - lower).
/// Values outside [0,1] are returned unchanged; extrapolation is the
/// caller's concern.
inline double rescale(double y, const SupportBounds& bounds) {
  bounds.validate();
  if (!std::isfinite(y)) throw std::invalid_argument("non-finite outcome");
  return (y - bounds.lower) / bounds.span();
}

namespace detail {

/// log C(n, k) for all n <= kMaxBspOrder, built once via lgamma.
inline const std::vector<std::vector<double>>& log_binomial_tables() {
  static const std::vector<std::vector<double>> tables = [] {
    std::vector<std::vector<double>> t(kMaxBspOrder + 1);
    for (int n = 0; n <= kMaxBspOrder; ++n) {
      t[n].resize(n + 1);
      for (int k = 0; k <= n; ++k)
        t[n][k] = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) -
                  std::lgamma(n - k + 1.0);
    }
    return t;
  }();
  return tables;
}

/// Fills out[0..n] with B_{m,n}(u) for u in [0,1]. Endpoints are handled
/// explicitly so that B_{0,n}(0) = 1 without relying on 0*log(0).
inline void bernstein_values(double u, int n, double* out) {
  if (u == 0.0) {
    for (int m = 0; m <= n; ++m) out[m] = 0.0;
    out[0] = 1.0;
    return;
  }
  if (u == 1.0) {
    for (int m = 0; m <= n; ++m) out[m] = 0.0;
    out[n] = 1.0;
    return;
  }
  const auto& lc = log_binomial_tables()[n];
  const double lu = std::log(u);
  const double l1mu = std::log1p(-u);
  for (int m = 0; m <= n; ++m)
    out[m] = std::exp(lc[m] + m * lu + (n - m) * l1mu);
}

}  // namespace detail

/// Basis values and derivatives at a rescaled outcome in [0,1].
///
/// Both are obtained from one order-(M-1) evaluation W:
///   B_{m,M}(u)  = u W_{m-1} + (1-u) W_m
///   B'_{m,M}(u) = M (W_{m-1} - W_m)
/// with out-of-range W terms zero. This keeps the partition of unity
/// exact up to the accuracy of W itself.
inline BasisEval basis(double u, int order) {
  if (order < 1 || order > kMaxBspOrder)
    throw std::invalid_argument("unsupported order");
  if (!std::isfinite(u)) throw std::invalid_argument("non-finite outcome");
  if (u < 0.0 || u > 1.0)
    throw std::invalid_argument(
        "rescaled outcome outside [0,1]; use basis_extrapolated");

  std::vector<double> w(order);
  detail::bernstein_values(u, order - 1, w.data());

  BasisEval out;
  out.values.resize(order + 1);
  out.derivs.resize(order + 1);
  for (int m = 0; m <= order; ++m) {
    const double wl = (m >= 1) ? w[m - 1] : 0.0;
    const double wr = (m <= order - 1) ? w[m] : 0.0;
    out.values[m] = u * wl + (1.0 - u) * wr;
    out.derivs[m] = order * (wl - wr);
  }
  return out;
}

/// Basis with linear continuation outside [0,1]: first-order Taylor
/// extension around the nearest endpoint. The induced transformation h
/// is then strictly increasing on all of R and maps onto R, so F_Z(h)
/// stays a proper CDF.
inline BasisEval basis_extrapolated(double u, int order) {
  if (!std::isfinite(u)) throw std::invalid_argument("non-finite outcome");
  if (u >= 0.0 && u <= 1.0) return basis(u, order);

  const double anchor = (u < 0.0) ? 0.0 : 1.0;
  BasisEval at = basis(anchor, order);
  const double step = u - anchor;
  BasisEval out;
  out.values.resize(order + 1);
  out.derivs = at.derivs;
  for (int m = 0; m <= order; ++m)
    out.values[m] = at.values[m] + step * at.derivs[m];
  return out;
}

}  // namespace atp
