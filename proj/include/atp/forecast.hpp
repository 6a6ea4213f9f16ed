#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "atp/likelihood.hpp"
#include "atp/rng.hpp"
#include "atp/uq.hpp"

namespace atp {

/// f(y | lags, x) = f_Z(h(y)) * dh/dy.
inline double cond_density(double y, const SupervisedRow& conditioning,
                           const ParamVector& params, const ModelSpec& spec) {
  return std::exp(conditional_logdensity(y, conditioning.lags,
                                         conditioning.exog,
                                         conditioning.series_idx, params, spec));
}

/// F(y | lags, x) = F_Z(h(y)).
inline double cond_cdf(double y, const SupervisedRow& conditioning,
                       const ParamVector& params, const ModelSpec& spec) {
  const Transformed t = transform(y, conditioning.lags, conditioning.exog,
                                  conditioning.series_idx, params, spec);
  return base_cdf(t.h, spec.base);
}

/// Quantile through the inverse transform of the base quantile.
inline double cond_quantile(double alpha, const SupervisedRow& conditioning,
                            const ParamVector& params, const ModelSpec& spec) {
  return invert_transform(base_quantile(alpha, spec.base), conditioning,
                          params, spec);
}

/// Evaluable conditional law of Y_t at one conditioning context.
struct ForecastDistribution {
  const ParamVector* params;
  const ModelSpec* spec;
  SupervisedRow conditioning;

  double density(double y) const {
    return cond_density(y, conditioning, *params, *spec);
  }
  double cdf(double y) const { return cond_cdf(y, conditioning, *params, *spec); }
  double quantile(double alpha) const {
    return cond_quantile(alpha, conditioning, *params, *spec);
  }
};

struct PathForecast {
  int horizon = 0;
  int n_samples = 0;
  std::vector<double> samples;  // n_samples x horizon, row-major
  std::vector<double> levels;
  std::vector<std::vector<double>> quantile_summary;  // [step][level]
  std::vector<double> step_means;

  double at(int sample, int step) const {
    return samples[static_cast<std::size_t>(sample) * horizon + step];
  }
};

namespace detail {

/// Type-7 empirical quantile of a sorted sample.
inline double sorted_quantile(const std::vector<double>& sorted, double level) {
  if (sorted.empty()) throw std::invalid_argument("empty sample");
  const double pos = level * (static_cast<double>(sorted.size()) - 1.0);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double w = pos - static_cast<double>(lo);
  return (1.0 - w) * sorted[lo] + w * sorted[hi];
}

}  // namespace detail

/// Monte-Carlo rollout: each path iterates the one-step law, drawing
/// Z ~ F_Z and inverting the transform under the sliding lag window.
/// Every path derives its own random stream, so results do not depend on
/// evaluation order.
inline PathForecast forecast_paths(const ParamVector& params,
                                   const ModelSpec& spec,
                                   std::span<const double> initial_lags,
                                   const std::vector<std::vector<double>>& exog_schedule,
                                   int series_idx, int horizon, int n_samples,
                                   std::uint64_t seed,
                                   const std::vector<double>& levels) {
  spec.validate();
  params.validate(spec);
  if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
  if (n_samples < 1) throw std::invalid_argument("need at least one sample");
  if (static_cast<int>(initial_lags.size()) != spec.lag_order)
    throw std::invalid_argument("initial lags length does not match spec");
  if (spec.n_exog > 0 && static_cast<int>(exog_schedule.size()) != horizon)
    throw std::invalid_argument("exog schedule must cover the horizon");

  PathForecast out;
  out.horizon = horizon;
  out.n_samples = n_samples;
  out.samples.resize(static_cast<std::size_t>(n_samples) * horizon);
  std::vector<double> sorted_levels = levels;
  std::sort(sorted_levels.begin(), sorted_levels.end());
  out.levels = sorted_levels;

  SupervisedRow ctx;
  ctx.series_idx = series_idx;
  for (int s = 0; s < n_samples; ++s) {
    std::mt19937_64 gen(mix_seed(seed, static_cast<std::uint64_t>(s)));
    ctx.lags.assign(initial_lags.begin(), initial_lags.end());
    for (int t = 0; t < horizon; ++t) {
      ctx.exog = (spec.n_exog > 0) ? exog_schedule[t] : std::vector<double>{};
      const double z = base_quantile(uniform01(gen), spec.base);
      const double y = invert_transform(z, ctx, params, spec);
      out.samples[static_cast<std::size_t>(s) * horizon + t] = y;
      if (spec.lag_order > 0) {
        for (int j = spec.lag_order - 1; j > 0; --j)
          ctx.lags[j] = ctx.lags[j - 1];
        ctx.lags[0] = y;
      }
    }
  }

  out.quantile_summary.resize(horizon);
  out.step_means.resize(horizon);
  std::vector<double> column(n_samples);
  for (int t = 0; t < horizon; ++t) {
    for (int s = 0; s < n_samples; ++s) column[s] = out.at(s, t);
    std::sort(column.begin(), column.end());
    double total = 0.0;
    for (double v : column) total += v;
    out.step_means[t] = total / n_samples;
    out.quantile_summary[t].reserve(sorted_levels.size());
    for (double level : sorted_levels)
      out.quantile_summary[t].push_back(detail::sorted_quantile(column, level));
  }
  return out;
}

/// Mean log predictive density over the rows (teacher forcing: true
/// observed lags). Higher is better.
inline double log_score(const ParamVector& params,
                        std::span<const SupervisedRow> rows,
                        const ModelSpec& spec) {
  if (rows.empty()) throw std::invalid_argument("empty row set");
  double total = 0.0;
  for (const auto& row : rows)
    total += conditional_logdensity(row.y, row.lags, row.exog, row.series_idx,
                                    params, spec);
  return total / static_cast<double>(rows.size());
}

/// Rollout variant: lags are the model's own recursive one-step medians
/// rather than the observed history. Rows must be in time order per
/// series, as build_rows produces them.
inline double log_score_rollout(const ParamVector& params,
                                std::span<const SupervisedRow> rows,
                                const ModelSpec& spec) {
  if (rows.empty()) throw std::invalid_argument("empty row set");
  double total = 0.0;
  SupervisedRow ctx;
  int current_series = -1;
  for (const auto& row : rows) {
    if (row.series_idx != current_series) {
      current_series = row.series_idx;
      ctx = row;  // first row of a series starts from observed lags
    }
    ctx.exog = row.exog;
    total += conditional_logdensity(row.y, ctx.lags, ctx.exog, ctx.series_idx,
                                    params, spec);
    if (spec.lag_order > 0) {
      const double median = cond_quantile(0.5, ctx, params, spec);
      for (int j = spec.lag_order - 1; j > 0; --j) ctx.lags[j] = ctx.lags[j - 1];
      ctx.lags[0] = median;
    }
  }
  return total / static_cast<double>(rows.size());
}

/// Standard report grid: 512 equally spaced points over the support
/// extended by half a range on each side.
inline std::vector<double> default_density_grid(const SupportBounds& bounds,
                                                int n_points = 512) {
  const double lo = bounds.lower - 0.5 * bounds.span();
  const double hi = bounds.upper + 0.5 * bounds.span();
  std::vector<double> grid(n_points);
  for (int i = 0; i < n_points; ++i)
    grid[i] = lo + (hi - lo) * i / (n_points - 1.0);
  return grid;
}

}  // namespace atp
