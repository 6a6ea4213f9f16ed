#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "atp/likelihood.hpp"
#include "atp/rng.hpp"
#include "atp/trainer.hpp"

namespace atp {

/// Theorem-3 estimates at the MLE: observed information I_hat, outer-product
/// score matrix J_hat, and the sandwich I^-1 J I^-1 / T.
struct CovarianceEstimate {
  Eigen::MatrixXd I_hat;
  Eigen::MatrixXd J_hat;
  Eigen::MatrixXd sandwich;
};

namespace detail {

inline Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& a) {
  return 0.5 * (a + a.transpose());
}

}  // namespace detail

/// J_hat from per-row score outer products; I_hat from central finite
/// differences of the analytic gradient; sandwich via linear solves.
/// Throws "information singular" when I_hat is numerically singular
/// (non-identified fit, e.g. redundant series dummies).
inline CovarianceEstimate information_estimates(
    const ParamVector& params, std::span<const SupervisedRow> rows,
    const ModelSpec& spec) {
  spec.validate();
  params.validate(spec);
  if (rows.empty()) throw std::invalid_argument("empty row set");
  const int v = spec.n_params();
  const auto T = static_cast<double>(rows.size());

  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(v, v);
  for (const auto& row : rows) {
    const std::vector<double> s = per_row_score(params, row, spec);
    Eigen::Map<const Eigen::VectorXd> sv(s.data(), v);
    J.noalias() += sv * sv.transpose();
  }
  J /= T;
  J = detail::symmetrize(J);

  const double step = 1e-5;
  std::vector<double> flat = params.flatten();
  Eigen::MatrixXd I(v, v);
  for (int j = 0; j < v; ++j) {
    const double saved = flat[j];
    flat[j] = saved + step;
    const std::vector<double> gp =
        nll_grad(ParamVector::unflatten(spec, flat), rows, spec);
    flat[j] = saved - step;
    const std::vector<double> gm =
        nll_grad(ParamVector::unflatten(spec, flat), rows, spec);
    flat[j] = saved;
    for (int i = 0; i < v; ++i) I(i, j) = (gp[i] - gm[i]) / (2.0 * step);
  }
  I = detail::symmetrize(I);

  // Condition check through the eigenvalue spread of the symmetric I.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(I);
  const double lmax = es.eigenvalues().cwiseAbs().maxCoeff();
  const double lmin = es.eigenvalues().cwiseAbs().minCoeff();
  if (!(lmin > 0.0) || lmax / lmin > 1e12)
    throw std::runtime_error("information singular");

  Eigen::LDLT<Eigen::MatrixXd> solver(I);
  Eigen::MatrixXd sandwich = solver.solve(J);
  sandwich = solver.solve(sandwich.transpose()).transpose();
  sandwich = detail::symmetrize(sandwich) / T;

  return {std::move(I), std::move(J), std::move(sandwich)};
}

namespace detail {

/// Rows of the Jacobian of h w.r.t. the unconstrained parameters at the
/// given conditioning context, one row per grid point.
inline Eigen::MatrixXd h_jacobian(const std::vector<double>& y_grid,
                                  const SupervisedRow& conditioning,
                                  const ParamVector& params,
                                  const ModelSpec& spec) {
  const int v = spec.n_params();
  const int m1 = spec.bsp_order + 1;
  const ConstrainedTheta ct = constrain(params.gamma);
  const auto slopes = constrain_slopes(params.gamma);

  Eigen::MatrixXd jac(static_cast<Eigen::Index>(y_grid.size()), v);
  for (std::size_t i = 0; i < y_grid.size(); ++i) {
    const auto parts =
        eval_row(y_grid[i], conditioning.lags, conditioning.exog,
                 conditioning.series_idx, ct, params, spec);
    std::vector<double> dh_dtheta(m1);
    for (int m = 0; m < m1; ++m) {
      double d = parts.y_basis.values[m];
      for (int j = 0; j < spec.lag_order; ++j)
        d += params.phi[j] *
             parts.lag_values[static_cast<std::size_t>(j) * m1 + m];
      dh_dtheta[m] = d;
    }
    double suffix = 0.0;
    for (int k = m1 - 1; k >= 0; --k) {
      suffix += dh_dtheta[k];
      jac(i, k) = suffix * slopes[k];
    }
    int off = m1;
    for (int j = 0; j < spec.lag_order; ++j)
      jac(i, off + j) = parts.lag_h1[j];
    off += spec.lag_order;
    for (int s = 0; s < spec.n_series; ++s)
      jac(i, off + s) = (s == conditioning.series_idx) ? 1.0 : 0.0;
    off += spec.n_series;
    for (int k = 0; k < spec.n_exog; ++k)
      jac(i, off + k) = conditioning.exog[k];
  }
  return jac;
}

}  // namespace detail

/// Delta-method covariance of h over a y-grid: Upsilon * sandwich *
/// Upsilon^T with Upsilon the Jacobian of h in the unconstrained
/// parameterization.
inline Eigen::MatrixXd h_covariance(const CovarianceEstimate& cov,
                                    const std::vector<double>& y_grid,
                                    const SupervisedRow& conditioning,
                                    const ParamVector& params,
                                    const ModelSpec& spec) {
  const Eigen::MatrixXd jac =
      detail::h_jacobian(y_grid, conditioning, params, spec);
  return jac * cov.sandwich * jac.transpose();
}

/// Solve h(y) = z by bisection. The initial bracket spans the support
/// plus one range on each side and is doubled geometrically until it
/// brackets z; the linear tails of h make this terminate.
inline double invert_transform(double z, const SupervisedRow& conditioning,
                               const ParamVector& params,
                               const ModelSpec& spec) {
  if (!std::isfinite(z)) throw std::invalid_argument("non-finite argument");
  const double range = spec.bounds.span();
  auto h_at = [&](double y) {
    return transform(y, conditioning.lags, conditioning.exog,
                     conditioning.series_idx, params, spec)
        .h;
  };
  double lo = spec.bounds.lower - range;
  double hi = spec.bounds.upper + range;
  int doublings = 0;
  while (h_at(lo) > z) {
    lo -= (hi - lo);
    if (++doublings > 60) throw std::runtime_error("inversion failed");
  }
  while (h_at(hi) < z) {
    hi += (hi - lo);
    if (++doublings > 60) throw std::runtime_error("inversion failed");
  }
  while (hi - lo > 1e-9 * range) {
    const double mid = 0.5 * (lo + hi);
    if (h_at(mid) < z)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

struct BootstrapReplicate {
  int nu = 0;
  bool failed = false;
  ParamVector params;
  std::vector<double> density_grid;
};

struct BootstrapResult {
  std::vector<BootstrapReplicate> replicates;
  int n_failed = 0;
};

/// Appendix-C parametric bootstrap: draw parameters from the limiting
/// distribution (in the unconstrained parameterization), simulate a
/// synthetic path through the inverse transform, refit (warm-started,
/// reduced budget), and evaluate the refitted conditional density on the
/// grid at the given conditioning context. Failed refits are recorded;
/// more than 10% failures is an error.
inline BootstrapResult parametric_bootstrap(
    const ParamVector& fitted, const CovarianceEstimate& cov,
    std::span<const SupervisedRow> rows, const ModelSpec& spec, int n_reps,
    std::uint64_t seed, const std::vector<double>& y_grid,
    const TrainConfig& train_config, const SupervisedRow& conditioning) {
  spec.validate();
  fitted.validate(spec);
  if (n_reps < 1) throw std::invalid_argument("need at least one replicate");
  if (rows.empty()) throw std::invalid_argument("empty row set");
  const int v = spec.n_params();

  // PSD factor for the draw; eigendecomposition with clamped eigenvalues
  // handles the degenerate (zero-covariance) case.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov.sandwich);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("covariance factorization failed");
  Eigen::MatrixXd draw_factor =
      es.eigenvectors() *
      es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();

  const std::vector<double> center = fitted.flatten();
  const int p = spec.lag_order;

  BootstrapResult result;
  result.replicates.resize(n_reps);
  for (int nu = 0; nu < n_reps; ++nu) {
    auto& rep = result.replicates[nu];
    rep.nu = nu;
    std::mt19937_64 gen(mix_seed(seed, 2 * static_cast<std::uint64_t>(nu)));
    try {
      // Step 1: theta^(nu) ~ N(theta_hat, sandwich), unconstrained scale.
      Eigen::VectorXd eps(v);
      for (int i = 0; i < v; ++i)
        eps[i] = detail::normal_quantile(uniform01(gen));
      Eigen::VectorXd drawn =
          Eigen::Map<const Eigen::VectorXd>(center.data(), v) +
          draw_factor * eps;
      std::vector<double> drawn_flat(drawn.data(), drawn.data() + v);
      const ParamVector drawn_params =
          ParamVector::unflatten(spec, drawn_flat);

      // Step 2: simulate forward from the real data's initial lags.
      SupervisedRow ctx;
      ctx.lags = rows.front().lags;
      ctx.exog = rows.front().exog;
      ctx.series_idx = rows.front().series_idx;
      std::vector<SupervisedRow> synth;
      synth.reserve(rows.size());
      for (std::size_t t = 0; t < rows.size(); ++t) {
        const double z =
            base_quantile(uniform01(gen), spec.base);
        const double y = invert_transform(z, ctx, drawn_params, spec);
        SupervisedRow srow = ctx;
        srow.y = y;
        synth.push_back(srow);
        if (p > 0) {
          for (int j = p - 1; j > 0; --j) ctx.lags[j] = ctx.lags[j - 1];
          ctx.lags[0] = y;
        }
      }

      // Step 3: refit, warm-started at the original fit with 1/5 budget.
      TrainConfig refit_config = train_config;
      refit_config.seed = mix_seed(seed, 2 * static_cast<std::uint64_t>(nu) + 1);
      refit_config.epochs = std::max(1, train_config.epochs / 5);
      refit_config.progress = nullptr;
      FitResult refit = fit(spec, synth, refit_config, fitted);

      // Step 4: conditional density on the grid.
      rep.params = refit.params;
      rep.density_grid.resize(y_grid.size());
      for (std::size_t i = 0; i < y_grid.size(); ++i)
        rep.density_grid[i] = std::exp(conditional_logdensity(
            y_grid[i], conditioning.lags, conditioning.exog,
            conditioning.series_idx, refit.params, spec));
    } catch (const std::exception&) {
      rep.failed = true;
      ++result.n_failed;
    }
  }

  if (10 * result.n_failed > n_reps)
    throw std::runtime_error("bootstrap failure rate above 10%");
  return result;
}

}  // namespace atp
