#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace atp {

/// Parameter-free reference distribution the transformed outcome follows.
enum class BaseKind { standard_normal, standard_logistic };

inline constexpr double kLogTwoPi = 1.8378770664093454836;

namespace detail {

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// Inverse standard normal CDF: Acklam's rational approximation refined
/// with one Halley step, full double accuracy on (0,1).
inline double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0))
    throw std::invalid_argument("quantile level must be in (0,1)");
  static constexpr double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                  -2.759285104469687e+02, 1.383577518672690e+02,
                                  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                  -1.556989798598866e+02, 6.680131188771972e+01,
                                  -1.328068155288572e+01};
  static constexpr double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                  -2.400758277161838e+00, -2.549732539343734e+00,
                                  4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                                  2.445134137142996e+00, 3.754408661907416e+00};
  const double p_low = 0.02425;
  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) *
        q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // Halley refinement against the erfc-based CDF.
  const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
  const double u = e * std::sqrt(2.0 * M_PI) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

}  // namespace detail

/// log f_Z(z), overflow-safe for all finite z.
inline double base_logpdf(double z, BaseKind kind) {
  if (!std::isfinite(z)) throw std::invalid_argument("non-finite argument");
  if (kind == BaseKind::standard_normal) return -0.5 * z * z - 0.5 * kLogTwoPi;
  return (z >= 0.0) ? -z - 2.0 * std::log1p(std::exp(-z))
                    : z - 2.0 * std::log1p(std::exp(z));
}

/// d/dz log f_Z(z).
inline double base_dlogpdf(double z, BaseKind kind) {
  if (kind == BaseKind::standard_normal) return -z;
  return -std::tanh(0.5 * z);
}

inline double base_cdf(double z, BaseKind kind) {
  if (!std::isfinite(z)) throw std::invalid_argument("non-finite argument");
  if (kind == BaseKind::standard_normal)
    return 0.5 * std::erfc(-z / std::sqrt(2.0));
  return detail::sigmoid(z);
}

inline double base_quantile(double p, BaseKind kind) {
  if (!(p > 0.0 && p < 1.0))
    throw std::invalid_argument("quantile level must be in (0,1)");
  if (kind == BaseKind::standard_normal) return detail::normal_quantile(p);
  return std::log(p) - std::log1p(-p);
}

inline const char* base_name(BaseKind kind) {
  return kind == BaseKind::standard_normal ? "normal" : "logistic";
}

inline BaseKind base_from_name(const std::string& name) {
  if (name == "normal" || name == "standard_normal")
    return BaseKind::standard_normal;
  if (name == "logistic" || name == "standard_logistic")
    return BaseKind::standard_logistic;
  throw std::invalid_argument("unknown base distribution: " + name);
}

}  // namespace atp
