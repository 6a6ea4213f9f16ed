// Command-line front end: simulate | fit | forecast | evaluate | bootstrap |
// reproduce. Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "atp/atp.hpp"
#include "atp/experiments.hpp"

namespace {

std::vector<double> parse_level_list(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    out.push_back(std::stod(tok));
  }
  if (out.empty()) throw CLI::ValidationError("empty list: " + csv);
  return out;
}

std::string format_double(double x) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, ptr);
}

int cmd_simulate(const std::string& kind, int p, int T, std::uint64_t seed,
                 const std::string& out_path, double sigma,
                 const std::string& coefs_csv, double rho, double phi1) {
  atp::PanelDataset data;
  if (kind == "bimodal") {
    data = atp::gen_bimodal(T, rho, phi1, seed);
  } else {
    const std::vector<double> coefs =
        coefs_csv.empty() ? atp::study_coefs(p) : parse_level_list(coefs_csv);
    data = (kind == "ar") ? atp::gen_ar(coefs, T, sigma, seed)
                          : atp::gen_exp_ar(coefs, T, sigma, seed);
  }
  atp::write_panel_csv(out_path, data);
  return 0;
}

int cmd_fit(const std::string& data_path, int M, int p, const std::string& base,
            atp::TrainConfig config, const std::string& out_path) {
  const atp::PanelDataset data = atp::load_panel_csv(data_path);
  // single-series data gets no dummy: the BSP intercept carries the level
  const atp::ModelSpec spec =
      atp::study_spec(data, M, p, atp::base_from_name(base));
  const std::vector<atp::SupervisedRow> rows = atp::build_rows(data, p);
  const atp::FitResult result = atp::fit(spec, rows, config);

  atp::SavedModel model;
  model.spec = spec;
  model.params = result.params;
  model.meta = {config.seed, result.epochs_run, result.final_nll};
  atp::save_model(out_path, model);

  const double total = result.final_nll * static_cast<double>(rows.size());
  std::cout << "train_nll_mean=" << format_double(result.final_nll)
            << " train_nll_sum=" << format_double(total)
            << " rows=" << rows.size() << " best_epoch=" << result.best_epoch
            << " epochs_run=" << result.epochs_run << '\n';
  return 0;
}

int cmd_forecast(const std::string& model_path, const std::string& data_path,
                 int horizon, int n_samples, const std::string& quantiles_csv,
                 std::uint64_t seed, const std::string& out_path) {
  const atp::SavedModel model = atp::load_model(model_path);
  const atp::PanelDataset data = atp::load_panel_csv(data_path);
  const std::vector<double> levels = parse_level_list(quantiles_csv);
  if (model.spec.n_series > 0 && data.n_series() > model.spec.n_series)
    throw std::runtime_error("data has more series than the fitted model");

  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + out_path);

  const int p = model.spec.lag_order;
  for (int s = 0; s < data.n_series(); ++s) {
    auto recs = data.series(s);
    if (recs.size() < static_cast<std::size_t>(p)) {
      std::cerr << "warning: series '" << data.series_ids[s]
                << "' shorter than lag order; skipped\n";
      continue;
    }
    std::vector<double> lags(p);
    for (int j = 0; j < p; ++j) lags[j] = recs[recs.size() - 1 - j].y;
    std::vector<std::vector<double>> exog_schedule;
    if (model.spec.n_exog > 0)
      exog_schedule.assign(horizon, recs.back().exog);

    const atp::PathForecast paths = atp::forecast_paths(
        model.params, model.spec, lags, exog_schedule, s, horizon, n_samples,
        atp::mix_seed(seed, static_cast<std::uint64_t>(s)), levels);

    for (int t = 0; t < horizon; ++t) {
      nlohmann::json rec;
      rec["series_id"] = data.series_ids[s];
      rec["step"] = t + 1;
      nlohmann::json q;
      for (std::size_t li = 0; li < paths.levels.size(); ++li)
        q[format_double(paths.levels[li])] = paths.quantile_summary[t][li];
      rec["quantiles"] = q;
      rec["mean"] = paths.step_means[t];
      rec["n_samples"] = n_samples;
      out << rec.dump() << '\n';
    }
  }
  return 0;
}

int cmd_evaluate(const std::string& model_path, const std::string& data_path,
                 const std::string& mode) {
  const atp::SavedModel model = atp::load_model(model_path);
  const atp::PanelDataset data = atp::load_panel_csv(data_path);
  const std::vector<atp::SupervisedRow> rows =
      atp::build_rows(data, model.spec.lag_order);
  const double score = (mode == "teacher")
                           ? atp::log_score(model.params, rows, model.spec)
                           : atp::log_score_rollout(model.params, rows, model.spec);
  std::cout << "logscore=" << format_double(score) << '\n';
  return 0;
}

nlohmann::json params_to_json(const atp::ParamVector& params) {
  return {{"gamma", params.gamma},
          {"phi", params.phi},
          {"beta_series", params.beta_series},
          {"beta_exog", params.beta_exog}};
}

int cmd_bootstrap(const std::string& model_path, const std::string& data_path,
                  int n_reps, std::uint64_t seed, const std::string& out_path,
                  const atp::TrainConfig& config,
                  const std::string& density_csv) {
  const atp::SavedModel model = atp::load_model(model_path);
  const atp::PanelDataset data = atp::load_panel_csv(data_path);
  const std::vector<atp::SupervisedRow> rows =
      atp::build_rows(data, model.spec.lag_order);
  if (rows.empty()) throw std::runtime_error("no usable rows");

  const atp::CovarianceEstimate cov =
      atp::information_estimates(model.params, rows, model.spec);
  const std::vector<double> grid = atp::default_density_grid(model.spec.bounds);
  const atp::SupervisedRow conditioning = rows.back();

  const atp::BootstrapResult result =
      atp::parametric_bootstrap(model.params, cov, rows, model.spec, n_reps,
                                seed, grid, config, conditioning);

  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + out_path);
  for (const auto& rep : result.replicates) {
    nlohmann::json rec;
    rec["nu"] = rep.nu;
    rec["failed"] = rep.failed;
    if (!rep.failed) {
      rec["params"] = params_to_json(rep.params);
      rec["density_grid"] = rep.density_grid;
    }
    out << rec.dump() << '\n';
  }

  if (!density_csv.empty()) {
    std::ofstream dens(density_csv, std::ios::binary);
    if (!dens) throw std::runtime_error("cannot open " + density_csv);
    dens << "y,density,lower_band,upper_band\n";
    std::vector<double> column;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      column.clear();
      for (const auto& rep : result.replicates)
        if (!rep.failed) column.push_back(rep.density_grid[i]);
      std::sort(column.begin(), column.end());
      const double fitted = atp::cond_density(grid[i], conditioning,
                                              model.params, model.spec);
      dens << format_double(grid[i]) << ',' << format_double(fitted) << ','
           << format_double(atp::detail::sorted_quantile(column, 0.05)) << ','
           << format_double(atp::detail::sorted_quantile(column, 0.95)) << '\n';
    }
  }
  return 0;
}

// ---------------------------------------------------------------------------
// reproduce: the simulation protocols behind the coefficient-recovery tables
// and the QQ/coverage experiment.
// ---------------------------------------------------------------------------

struct ReproRow {
  std::string experiment, cell, metric;
  double run_value = 0.0, run_sd = 0.0;
  std::string paper_value;
  bool pass = false;
};

void write_report(const std::string& path, const std::vector<ReproRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "experiment,cell,metric,run_value,run_sd,paper_value,pass\n";
  for (const auto& r : rows)
    out << r.experiment << ',' << r.cell << ',' << r.metric << ','
        << format_double(r.run_value) << ',' << format_double(r.run_sd) << ','
        << r.paper_value << ',' << (r.pass ? "true" : "false") << '\n';
}

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sd_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

void recovery_report(std::vector<ReproRow>& report, const std::string& name,
                     bool exponentiated, int T, int M, int n_seeds,
                     std::uint64_t seed, double threshold,
                     const std::vector<std::string>& paper_values) {
  for (int cell = 0; cell < 2; ++cell) {
    const int p = cell + 1;
    std::vector<double> mses =
        atp::recovery_mses(exponentiated, p, T, M, n_seeds,
                           atp::mix_seed(seed, 7919 * (cell + 1)));
    for (double& m : mses) m *= 100.0;
    const double mean = mean_of(mses);
    report.push_back({name, "p=" + std::to_string(p), "mse_x100", mean,
                      sd_of(mses), paper_values[cell], mean <= threshold});
  }
}

int cmd_reproduce(const std::string& experiment, int n_seeds, int replications,
                  std::uint64_t seed, const std::string& out_path) {
  std::vector<ReproRow> report;

  if (experiment == "table-d1") {
    recovery_report(report, "table_d1", false, 1000, 1, n_seeds, seed, 0.6,
                    {"0.17 (0.25)", "0.15 (0.16)"});
  } else if (experiment == "table-d2") {
    recovery_report(report, "table_d2", true, 800, 30, n_seeds, seed, 1.0,
                    {"0.26 (0.36)", "0.17 (0.17)"});
  } else {  // qq
    const atp::QqExperimentResult qq = atp::qq_experiment(replications, seed);
    for (std::size_t j = 0; j < qq.truth.size(); ++j) {
      report.push_back({"qq", "phi" + std::to_string(j + 1), "qq_correlation",
                        qq.qq_correlations[j], 0.0, "1.0",
                        qq.qq_correlations[j] > 0.99});
      report.push_back({"qq", "phi" + std::to_string(j + 1), "mean_estimate",
                        mean_of(qq.estimates[j]), sd_of(qq.estimates[j]),
                        format_double(qq.truth[j]), true});
    }
    report.push_back({"qq", "pooled", "wald90_coverage", qq.coverage90, 0.0,
                      "0.90", qq.coverage90 >= 0.85 && qq.coverage90 <= 0.95});
    report.push_back({"qq", "pooled", "replications",
                      static_cast<double>(replications), 0.0, "1000", true});
  }

  write_report(out_path, report);
  for (const auto& r : report)
    std::cout << r.experiment << ' ' << r.cell << ' ' << r.metric << '='
              << format_double(r.run_value) << " paper=" << r.paper_value
              << (r.pass ? " PASS" : " FAIL") << '\n';
  const bool all_pass =
      std::all_of(report.begin(), report.end(), [](auto& r) { return r.pass; });
  return all_pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Autoregressive transformation models: simulate, fit, "
               "forecast, evaluate, bootstrap, reproduce"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "Write a simulated panel CSV");
  std::string kind = "ar", out_path, coefs_csv;
  int p = 1, T = 1000;
  std::uint64_t seed = 1;
  double sigma = 1.0, rho = 2.0, phi1 = 0.1;
  sim->add_option("--kind", kind)->check(CLI::IsMember({"ar", "expar", "bimodal"}));
  sim->add_option("--p", p);
  sim->add_option("--T", T);
  sim->add_option("--seed", seed)->required();
  sim->add_option("--out", out_path)->required();
  sim->add_option("--sigma", sigma, "AR innovation scale");
  sim->add_option("--coefs", coefs_csv, "comma-separated AR coefficients");
  sim->add_option("--rho", rho, "bimodal shift");
  sim->add_option("--phi1", phi1, "bimodal lag weight");

  // fit
  auto* fit_cmd = app.add_subcommand("fit", "Train a model on a panel CSV");
  std::string data_path, base = "normal", model_out;
  int M = 1, fit_p = 0;
  atp::TrainConfig config;
  fit_cmd->add_option("--data", data_path)->required();
  fit_cmd->add_option("--M", M);
  fit_cmd->add_option("--p", fit_p);
  fit_cmd->add_option("--base", base)->check(CLI::IsMember({"normal", "logistic"}));
  fit_cmd->add_option("--epochs", config.epochs);
  fit_cmd->add_option("--batch-size", config.batch_size);
  fit_cmd->add_option("--lr", config.learning_rate);
  fit_cmd->add_option("--val-frac", config.val_fraction);
  fit_cmd->add_option("--patience", config.patience);
  fit_cmd->add_option("--seed", config.seed)->required();
  fit_cmd->add_option("--out", model_out)->required();

  // forecast
  auto* fc = app.add_subcommand("forecast", "Monte-Carlo path forecasts");
  std::string fc_model, fc_data, fc_out, quantiles = "0.05,0.5,0.95";
  int horizon = 1, n_samples = 1000;
  std::uint64_t fc_seed = 1;
  fc->add_option("--model", fc_model)->required();
  fc->add_option("--data", fc_data)->required();
  fc->add_option("--horizon", horizon);
  fc->add_option("--samples", n_samples);
  fc->add_option("--quantiles", quantiles);
  fc->add_option("--seed", fc_seed)->required();
  fc->add_option("--out", fc_out)->required();

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "Mean log-score on a dataset");
  std::string ev_model, ev_data, mode = "teacher";
  ev->add_option("--model", ev_model)->required();
  ev->add_option("--data", ev_data)->required();
  ev->add_option("--mode", mode)->check(CLI::IsMember({"teacher", "rollout"}));

  // bootstrap
  auto* bs = app.add_subcommand("bootstrap", "Parametric bootstrap replicates");
  std::string bs_model, bs_data, bs_out, density_csv;
  int replicates = 20;
  std::uint64_t bs_seed = 1;
  atp::TrainConfig bs_config;
  bs->add_option("--model", bs_model)->required();
  bs->add_option("--data", bs_data)->required();
  bs->add_option("--replicates", replicates);
  bs->add_option("--seed", bs_seed)->required();
  bs->add_option("--out", bs_out)->required();
  bs->add_option("--epochs", bs_config.epochs);
  bs->add_option("--batch-size", bs_config.batch_size);
  bs->add_option("--lr", bs_config.learning_rate);
  bs->add_option("--val-frac", bs_config.val_fraction);
  bs->add_option("--patience", bs_config.patience);
  bs->add_option("--density-csv", density_csv,
                 "write y,density,lower_band,upper_band");

  // reproduce
  auto* rp = app.add_subcommand("reproduce", "Run a simulation study protocol");
  std::string experiment, rp_out;
  int n_seeds = 20, replications = 200;
  std::uint64_t rp_seed = 1;
  rp->add_option("--experiment", experiment)
      ->required()
      ->check(CLI::IsMember({"table-d1", "table-d2", "qq"}));
  rp->add_option("--seeds", n_seeds);
  rp->add_option("--replications", replications);
  rp->add_option("--seed", rp_seed);
  rp->add_option("--out", rp_out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << '\n';
    return 2;
  }

  try {
    if (sim->parsed())
      return cmd_simulate(kind, p, T, seed, out_path, sigma, coefs_csv, rho, phi1);
    if (fit_cmd->parsed())
      return cmd_fit(data_path, M, fit_p, base, config, model_out);
    if (fc->parsed())
      return cmd_forecast(fc_model, fc_data, horizon, n_samples, quantiles,
                          fc_seed, fc_out);
    if (ev->parsed()) return cmd_evaluate(ev_model, ev_data, mode);
    if (bs->parsed()) {
      bs_config.seed = bs_seed;
      bs_config.progress = nullptr;
      return cmd_bootstrap(bs_model, bs_data, replicates, bs_seed, bs_out,
                           bs_config, density_csv);
    }
    if (rp->parsed())
      return cmd_reproduce(experiment, n_seeds, replications, rp_seed, rp_out);
  } catch (const CLI::ValidationError& e) {
    std::cerr << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
