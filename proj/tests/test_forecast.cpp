#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "atp/data.hpp"
#include "atp/forecast.hpp"
#include "atp/trainer.hpp"
#include "oracles.hpp"

using namespace atp;

namespace {

ModelSpec identity_spec() {
  ModelSpec spec;
  spec.bsp_order = 1;
  spec.bounds = {0.0, 1.0};
  return spec;
}

ParamVector identity_params() {
  ParamVector p;
  p.gamma = unconstrain({0.0, 1.0});
  return p;
}

}  // namespace

TEST_CASE("conditional density at pinned points") {
  const auto spec = identity_spec();
  SupervisedRow ctx;
  CHECK(cond_density(0.0, ctx, identity_params(), spec) ==
        Catch::Approx(0.3989422804014327).margin(1e-9));

  ParamVector steep;
  steep.gamma = unconstrain({0.0, 2.0});
  CHECK(cond_density(0.0, ctx, steep, spec) ==
        Catch::Approx(0.7978845608028654).margin(1e-9));

  // integrates to one over the extended support
  const double mass = oracle::simpson(
      [&](double y) { return cond_density(y, ctx, identity_params(), spec); },
      -6.0, 7.0, 2000);
  CHECK(mass == Catch::Approx(1.0).margin(1e-4));
}

TEST_CASE("conditional cdf behaves like a distribution function") {
  const auto spec = identity_spec();
  const auto params = identity_params();
  SupervisedRow ctx;
  CHECK(cond_cdf(0.0, ctx, params, spec) == Catch::Approx(0.5).margin(1e-12));
  CHECK(cond_cdf(-10.0, ctx, params, spec) < 1e-6);
  CHECK(cond_cdf(11.0, ctx, params, spec) > 1.0 - 1e-6);

  const double q = cond_quantile(0.73, ctx, params, spec);
  CHECK(cond_cdf(q, ctx, params, spec) == Catch::Approx(0.73).margin(1e-6));
}

TEST_CASE("conditional quantiles at pinned points") {
  const auto spec = identity_spec();
  const auto params = identity_params();
  SupervisedRow ctx;
  CHECK(cond_quantile(0.5, ctx, params, spec) == Catch::Approx(0.0).margin(1e-7));
  CHECK(cond_quantile(0.975, ctx, params, spec) ==
        Catch::Approx(1.959963984540054).margin(1e-6));

  // shift model h(y) = y - c: the median moves to c
  ModelSpec shifted = spec;
  shifted.n_series = 1;
  ParamVector sp = params;
  sp.beta_series = {-1.7};
  CHECK(cond_quantile(0.5, ctx, sp, shifted) == Catch::Approx(1.7).margin(1e-7));

  CHECK_THROWS_AS(cond_quantile(0.0, ctx, params, spec), std::invalid_argument);
}

TEST_CASE("distribution-function axioms hold for random models") {
  std::mt19937_64 gen(107);
  for (int rep = 0; rep < 100; ++rep) {
    const int M = 1 + static_cast<int>(gen() % 10);
    ModelSpec spec;
    spec.bsp_order = M;
    spec.lag_order = 1;
    spec.bounds = {-1.0, 2.0};
    if (rep % 2 == 1) spec.base = BaseKind::standard_logistic;
    ParamVector params;
    std::vector<double> theta(M + 1);
    theta[0] = -3.0 + 2.0 * uniform01(gen);
    for (int m = 1; m <= M; ++m)
      theta[m] = theta[m - 1] + 0.2 + 5.0 * uniform01(gen) / M;
    params.gamma = unconstrain(theta);
    params.phi = {0.8 * (uniform01(gen) - 0.5)};
    SupervisedRow ctx;
    ctx.lags = {3.0 * uniform01(gen) - 1.0};

    double prev = -1.0;
    for (int i = 0; i <= 20; ++i) {
      const double y = -3.0 + 7.0 * i / 20.0;
      const double c = cond_cdf(y, ctx, params, spec);
      REQUIRE(c >= prev);
      prev = c;
    }
    const double alpha = 0.05 + 0.9 * uniform01(gen);
    const double q = cond_quantile(alpha, ctx, params, spec);
    REQUIRE(std::abs(cond_cdf(q, ctx, params, spec) - alpha) < 1e-5);
  }
}

TEST_CASE("path forecasts with no dynamics are i.i.d.") {
  ModelSpec spec;
  spec.bsp_order = 1;
  spec.n_series = 1;
  spec.bounds = {0.0, 1.0};
  ParamVector params;
  params.gamma = unconstrain({0.0, 1.0});
  params.beta_series = {0.4};

  const int n = 4000, H = 6;
  const auto paths = forecast_paths(params, spec, {}, {}, 0, H, n, 19,
                                    {0.05, 0.5, 0.95});
  // step-1 and step-H means agree within Monte-Carlo error (3 sigma / sqrt n)
  const double tol = 3.0 / std::sqrt(static_cast<double>(n));
  CHECK(std::abs(paths.step_means[0] - paths.step_means[H - 1]) < 2.0 * tol);
  // the true mean is -0.4 (shift moves the median to -beta)
  CHECK(std::abs(paths.step_means[0] + 0.4) < tol);

  // quantile summaries are non-decreasing across levels
  for (int t = 0; t < H; ++t)
    for (std::size_t l = 1; l < paths.levels.size(); ++l)
      REQUIRE(paths.quantile_summary[t][l] >= paths.quantile_summary[t][l - 1]);
}

TEST_CASE("AR(1)-equivalent rollout reaches the stationary variance") {
  // AT(1) with identity h and phi = -0.4 is an AR(1) with coefficient 0.4
  // and sigma 1; its stationary variance is 1/(1-0.16)
  ModelSpec spec;
  spec.bsp_order = 1;
  spec.lag_order = 1;
  spec.bounds = {0.0, 1.0};
  ParamVector params;
  params.gamma = unconstrain({0.0, 1.0});
  params.phi = {-0.4};

  const int n = 10000, H = 30;
  std::vector<double> lags = {0.0};
  const auto paths =
      forecast_paths(params, spec, lags, {}, 0, H, n, 23, {0.5});
  std::vector<double> last(n);
  for (int s = 0; s < n; ++s) last[s] = paths.at(s, H - 1);
  const double target = 1.0 / (1.0 - 0.16);
  CHECK(oracle::variance(last) == Catch::Approx(target).epsilon(0.05));
}

TEST_CASE("one-step path quantiles match the analytic quantiles") {
  ModelSpec spec;
  spec.bsp_order = 2;
  spec.lag_order = 1;
  spec.bounds = {-1.0, 2.0};
  ParamVector params;
  params.gamma = unconstrain({-1.5, 0.3, 1.9});
  params.phi = {-0.25};
  SupervisedRow ctx;
  ctx.lags = {0.6};

  const auto paths = forecast_paths(params, spec, ctx.lags, {}, 0, 1, 20000,
                                    31, {0.05, 0.5, 0.95});
  for (std::size_t l = 0; l < paths.levels.size(); ++l) {
    const double analytic =
        cond_quantile(paths.levels[l], ctx, params, spec);
    REQUIRE(paths.quantile_summary[0][l] ==
            Catch::Approx(analytic).margin(0.05));
  }
  // determinism
  const auto again = forecast_paths(params, spec, ctx.lags, {}, 0, 1, 100, 31,
                                    {0.5});
  const auto again2 = forecast_paths(params, spec, ctx.lags, {}, 0, 1, 100, 31,
                                     {0.5});
  REQUIRE(again.samples == again2.samples);
}

TEST_CASE("log score at pinned points") {
  const auto spec = identity_spec();
  const auto params = identity_params();
  std::vector<SupervisedRow> rows(3);
  for (auto& r : rows) r.y = 0.0;
  CHECK(log_score(params, rows, spec) ==
        Catch::Approx(-0.9189385332046727).margin(1e-9));

  // one-row test set is just that row's log density
  const double one = log_score(params, std::span{rows.data(), 1}, spec);
  CHECK(one == Catch::Approx(std::log(cond_density(0.0, rows[0], params, spec)))
                   .margin(1e-12));
}

TEST_CASE("fitted model beats a moment-matched Gaussian on bimodal data") {
  const PanelDataset data = gen_bimodal(1000, 2.0, 0.1, 131);
  const auto rows = build_rows(data, 0);
  ModelSpec spec;
  spec.bsp_order = 16;
  spec.bounds = bounds_from_range(data.y_min(), data.y_max());
  TrainConfig config;
  config.seed = 3;
  config.epochs = 600;
  config.progress = nullptr;
  const FitResult fitted = fit(spec, rows, config);

  // Gaussian i.i.d. baseline from sample moments, evaluated analytically
  std::vector<double> y;
  for (const auto& r : rows) y.push_back(r.y);
  const double mu = oracle::mean(y);
  const double var = oracle::variance(y);
  double gauss = 0.0;
  for (double v : y)
    gauss += -0.5 * (v - mu) * (v - mu) / var - 0.5 * std::log(var) -
             0.5 * oracle::kLogTwoPi;
  gauss /= static_cast<double>(y.size());

  CHECK(log_score(fitted.params, rows, spec) > gauss);
}

TEST_CASE("rollout log score runs and differs from teacher forcing") {
  const PanelDataset data = gen_ar({0.6}, 300, 1.0, 137);
  const auto rows = build_rows(data, 1);
  ModelSpec spec;
  spec.bsp_order = 1;
  spec.lag_order = 1;
  spec.bounds = bounds_from_range(data.y_min(), data.y_max());
  TrainConfig config;
  config.seed = 5;
  config.epochs = 200;
  config.progress = nullptr;
  const FitResult fitted = fit(spec, rows, config);

  const double teacher = log_score(fitted.params, rows, spec);
  const double rollout = log_score_rollout(fitted.params, rows, spec);
  CHECK(std::isfinite(rollout));
  // with a real lag effect, feeding back medians loses information
  CHECK(rollout < teacher);
}
