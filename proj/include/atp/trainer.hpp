#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "atp/likelihood.hpp"
#include "atp/rng.hpp"

namespace atp {

struct TrainConfig {
  std::uint64_t seed = 0;  // required; everything stochastic derives from it
  int epochs = 2500;
  int batch_size = 50;
  double learning_rate = 0.01;
  double val_fraction = 0.1;
  int patience = 50;
  double min_delta = 1e-6;
  double clip_norm = 10.0;         // global gradient-norm clip
  std::ostream* progress = &std::cerr;
  int progress_every = 10;         // epochs between progress lines; 0 = silent

  void validate() const {
    if (epochs < 1 || batch_size < 1 || patience < 1)
      throw std::invalid_argument("epochs, batch_size, patience must be >= 1");
    if (!(learning_rate > 0.0))
      throw std::invalid_argument("learning rate must be positive");
    if (!(val_fraction >= 0.0 && val_fraction < 1.0))
      throw std::invalid_argument("val_fraction must be in [0,1)");
  }
};

struct FitResult {
  ParamVector params;  // parameters of the best validation epoch
  std::vector<double> train_loss_trace;
  std::vector<double> val_loss_trace;
  int best_epoch = 0;
  bool converged = false;  // true when early stopping fired
  int epochs_run = 0;
  double final_nll = std::numeric_limits<double>::quiet_NaN();  // mean, full data
};

/// Adam first/second moment state. Kept separate from fit so the update
/// rule is unit-testable on its own.
struct AdamState {
  std::vector<double> m, v;
  long step = 0;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

  explicit AdamState(std::size_t dim) : m(dim, 0.0), v(dim, 0.0) {}
};

/// Standard Adam update with bias correction, applied in place.
inline void adam_step(AdamState& state, std::vector<double>& theta,
                      const std::vector<double>& grad, double lr) {
  if (grad.size() != theta.size() || grad.size() != state.m.size())
    throw std::invalid_argument("gradient dimension mismatch");
  ++state.step;
  const double bc1 = 1.0 - std::pow(state.beta1, state.step);
  const double bc2 = 1.0 - std::pow(state.beta2, state.step);
  for (std::size_t i = 0; i < theta.size(); ++i) {
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grad[i];
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grad[i] * grad[i];
    const double mhat = state.m[i] / bc1;
    const double vhat = state.v[i] / bc2;
    theta[i] -= lr * mhat / (std::sqrt(vhat) + state.eps);
  }
}

namespace detail {

/// Chronologically last val_fraction of rows per series. Rows are assumed
/// time-ordered within series, as build_rows produces them.
inline void split_train_val(std::span<const SupervisedRow> rows,
                            double val_fraction,
                            std::vector<std::size_t>& train_idx,
                            std::vector<std::size_t>& val_idx) {
  // group contiguously by series_idx while preserving order
  std::vector<std::pair<std::size_t, std::size_t>> runs;  // [begin, end)
  std::size_t begin = 0;
  for (std::size_t i = 1; i <= rows.size(); ++i) {
    if (i == rows.size() || rows[i].series_idx != rows[begin].series_idx) {
      runs.emplace_back(begin, i);
      begin = i;
    }
  }
  for (auto [b, e] : runs) {
    const std::size_t n = e - b;
    const auto n_val = static_cast<std::size_t>(val_fraction * n);
    for (std::size_t i = b; i < e - n_val; ++i) train_idx.push_back(i);
    for (std::size_t i = e - n_val; i < e; ++i) val_idx.push_back(i);
  }
}

inline double mean_nll_at(const ParamVector& params,
                          std::span<const SupervisedRow> rows,
                          const std::vector<std::size_t>& idx,
                          const ModelSpec& spec) {
  const ConstrainedTheta ct = constrain(params.gamma);
  double total = 0.0;
  for (std::size_t i : idx) {
    const auto& row = rows[i];
    auto parts = eval_row(row.y, row.lags, row.exog, row.series_idx, ct,
                          params, spec);
    total += row_nll(parts, spec);
  }
  return total / static_cast<double>(idx.size());
}

inline void check_monotone_probe(const ParamVector& params,
                                 const ModelSpec& spec) {
  const ConstrainedTheta ct = constrain(params.gamma);
  for (int i = 0; i <= 16; ++i) {
    const double u = i / 16.0;
    BasisEval b = basis(u, spec.bsp_order);
    double dot = 0.0;
    for (std::size_t m = 0; m < ct.theta.size(); ++m)
      dot += b.derivs[m] * ct.theta[m];
    if (!(dot > 0.0))
      throw std::logic_error("monotonicity violated on probe grid");
  }
}

}  // namespace detail

struct RefineResult {
  ParamVector params;
  double grad_norm = 0.0;
  int iterations = 0;
};

/// Deterministic full-batch L-BFGS polish of a fitted parameter vector to
/// the exact MLE of the given rows. Mini-batch Adam with early stopping
/// leaves a gradient norm around 1e-2; asymptotic inference (sandwich
/// covariance, coefficient mapping) wants the actual optimum, and
/// information_estimates documents gradient norm < 1e-3 as advisable.
inline RefineResult refine_to_mle(const ModelSpec& spec,
                                  std::span<const SupervisedRow> rows,
                                  const ParamVector& start,
                                  int max_iterations = 500,
                                  double grad_tol = 1e-6) {
  spec.validate();
  start.validate(spec);
  const std::size_t dim = start.size();

  auto eval_nll = [&](const std::vector<double>& flat) {
    return nll(ParamVector::unflatten(spec, flat), rows, spec);
  };
  auto eval_grad = [&](const std::vector<double>& flat) {
    return nll_grad(ParamVector::unflatten(spec, flat), rows, spec);
  };
  auto norm_inf = [](const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
  };

  std::vector<double> x = start.flatten();
  double fx = eval_nll(x);
  std::vector<double> grad = eval_grad(x);

  const int history = 8;
  std::vector<std::vector<double>> s_hist, y_hist;
  std::vector<double> rho_hist;

  RefineResult result;
  for (int iter = 0; iter < max_iterations; ++iter) {
    result.iterations = iter;
    if (norm_inf(grad) < grad_tol) break;

    // two-loop recursion for the search direction
    std::vector<double> q = grad;
    std::vector<double> alpha(s_hist.size());
    for (std::size_t i = s_hist.size(); i-- > 0;) {
      double dot = 0.0;
      for (std::size_t k = 0; k < dim; ++k) dot += s_hist[i][k] * q[k];
      alpha[i] = rho_hist[i] * dot;
      for (std::size_t k = 0; k < dim; ++k) q[k] -= alpha[i] * y_hist[i][k];
    }
    double scale = 1.0;
    if (!s_hist.empty()) {
      double sy = 0.0, yy = 0.0;
      for (std::size_t k = 0; k < dim; ++k) {
        sy += s_hist.back()[k] * y_hist.back()[k];
        yy += y_hist.back()[k] * y_hist.back()[k];
      }
      if (yy > 0.0) scale = sy / yy;
    }
    for (auto& v : q) v *= scale;
    for (std::size_t i = 0; i < s_hist.size(); ++i) {
      double dot = 0.0;
      for (std::size_t k = 0; k < dim; ++k) dot += y_hist[i][k] * q[k];
      const double beta = rho_hist[i] * dot;
      for (std::size_t k = 0; k < dim; ++k)
        q[k] += (alpha[i] - beta) * s_hist[i][k];
    }

    double dir_deriv = 0.0;
    for (std::size_t k = 0; k < dim; ++k) dir_deriv -= grad[k] * q[k];
    if (!(dir_deriv < 0.0)) {  // fall back to steepest descent
      q = grad;
      dir_deriv = 0.0;
      for (double g : grad) dir_deriv -= g * g;
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
    }

    // Armijo backtracking on the full-batch objective
    double step = 1.0;
    std::vector<double> x_new(dim);
    double f_new = fx;
    bool accepted = false;
    for (int ls = 0; ls < 50; ++ls) {
      for (std::size_t k = 0; k < dim; ++k) x_new[k] = x[k] - step * q[k];
      f_new = eval_nll(x_new);
      if (std::isfinite(f_new) && f_new <= fx + 1e-4 * step * dir_deriv) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;

    const std::vector<double> grad_new = eval_grad(x_new);
    std::vector<double> s(dim), y(dim);
    double sy = 0.0;
    for (std::size_t k = 0; k < dim; ++k) {
      s[k] = x_new[k] - x[k];
      y[k] = grad_new[k] - grad[k];
      sy += s[k] * y[k];
    }
    if (sy > 1e-12) {
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > history) {
        s_hist.erase(s_hist.begin());
        y_hist.erase(y_hist.begin());
        rho_hist.erase(rho_hist.begin());
      }
    }
    x = std::move(x_new);
    fx = f_new;
    grad = grad_new;
  }

  result.params = ParamVector::unflatten(spec, x);
  result.grad_norm = norm_inf(grad);
  return result;
}

/// Mini-batch Adam on the mean NLL with chronological validation split and
/// early stopping. Deterministic given config.seed; the best-validation
/// parameters are restored at the end.
///
/// Bases are evaluated per batch on the fly; no full-dataset basis matrix
/// is ever materialized.
inline FitResult fit(const ModelSpec& spec, std::span<const SupervisedRow> rows,
                     const TrainConfig& config,
                     std::optional<ParamVector> warm_start = std::nullopt) {
  spec.validate();
  config.validate();
  if (rows.empty()) throw std::invalid_argument("empty row set");

  std::vector<std::size_t> train_idx, val_idx;
  detail::split_train_val(rows, config.val_fraction, train_idx, val_idx);
  if (train_idx.empty()) throw std::invalid_argument("empty training split");
  const bool has_val = !val_idx.empty();

  ParamVector params = warm_start ? *warm_start : init_params(spec);
  params.validate(spec);
  std::vector<double> flat = params.flatten();
  AdamState adam(flat.size());
  std::mt19937_64 gen(config.seed);

  FitResult result;
  double best_val = std::numeric_limits<double>::infinity();  // restore point
  double best_significant = std::numeric_limits<double>::infinity();
  std::vector<double> best_flat = flat;
  int stall = 0;

  std::vector<std::size_t> order = train_idx;
  std::vector<SupervisedRow> batch;
  batch.reserve(config.batch_size);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    deterministic_shuffle(order, gen);

    double epoch_loss = 0.0;
    std::size_t epoch_rows = 0;
    for (std::size_t start = 0; start < order.size();
         start += config.batch_size) {
      const std::size_t stop =
          std::min(order.size(), start + config.batch_size);
      batch.clear();
      for (std::size_t i = start; i < stop; ++i) batch.push_back(rows[order[i]]);

      params = ParamVector::unflatten(spec, flat);
      const double batch_loss = nll(params, batch, spec);
      if (!std::isfinite(batch_loss))
        throw std::runtime_error("diverged at epoch " + std::to_string(epoch));
      epoch_loss += batch_loss * static_cast<double>(batch.size());
      epoch_rows += batch.size();

      std::vector<double> grad = nll_grad(params, batch, spec);
      double norm2 = 0.0;
      for (double g : grad) norm2 += g * g;
      const double norm = std::sqrt(norm2);
      if (norm > config.clip_norm)
        for (double& g : grad) g *= config.clip_norm / norm;
      adam_step(adam, flat, grad, config.learning_rate);
    }

    params = ParamVector::unflatten(spec, flat);
    const double train_nll = epoch_loss / static_cast<double>(epoch_rows);
    const double val_nll =
        has_val ? detail::mean_nll_at(params, rows, val_idx, spec) : train_nll;
    if (!std::isfinite(val_nll))
      throw std::runtime_error("diverged at epoch " + std::to_string(epoch));
    result.train_loss_trace.push_back(train_nll);
    result.val_loss_trace.push_back(val_nll);

    if (config.progress && config.progress_every > 0 &&
        epoch % config.progress_every == 0)
      *config.progress << "epoch=" << epoch << " train_nll=" << train_nll
                       << " val_nll=" << val_nll << '\n';

    if (epoch % 100 == 0) detail::check_monotone_probe(params, spec);

    // Restore point follows the strict minimum; the patience counter only
    // resets on improvements of at least min_delta.
    if (val_nll < best_val) {
      best_val = val_nll;
      best_flat = flat;
      result.best_epoch = epoch;
    }
    if (val_nll < best_significant - config.min_delta) {
      best_significant = val_nll;
      stall = 0;
    } else if (++stall >= config.patience) {
      result.converged = true;
      result.epochs_run = epoch;
      break;
    }
    result.epochs_run = epoch;
  }

  result.params = ParamVector::unflatten(spec, best_flat);
  result.final_nll = nll(result.params, rows, spec);
  return result;
}

}  // namespace atp
