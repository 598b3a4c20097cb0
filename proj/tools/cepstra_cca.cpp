// Command line front end: spectra, fit, cca, and simulate subcommands over
// CSV inputs, with plot-ready CSV/JSON outputs and a reproducibility manifest.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "cepcca/cepcca.hpp"
#include "cepcca/serialize.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct FitFlags {
  int max_iterations = 100;
  double score_tolerance = 1e-8;
  double nll_tolerance = 1e-10;

  cepcca::FitOptions options() const { return {max_iterations, score_tolerance, nll_tolerance}; }

  void attach(CLI::App* cmd) {
    cmd->add_option("--max-iterations", max_iterations, "Fisher scoring iteration cap")
        ->capture_default_str();
    cmd->add_option("--score-tol", score_tolerance, "score norm stop, per frequency")
        ->capture_default_str();
    cmd->add_option("--nll-tol", nll_tolerance, "relative NLL change stop")
        ->capture_default_str();
  }

  json to_json() const {
    return {{"max_iterations", max_iterations},
            {"score_tolerance", score_tolerance},
            {"nll_tolerance", nll_tolerance}};
  }
};

std::pair<int, int> parse_order_range(const std::string& text) {
  const auto pos = text.find(':');
  if (pos == std::string::npos || pos == 0 || pos + 1 >= text.size()) {
    throw cepcca::ValueError("--k-range expects the form a:b, got '" + text + "'");
  }
  try {
    const int lo = std::stoi(text.substr(0, pos));
    const int hi = std::stoi(text.substr(pos + 1));
    return {lo, hi};
  } catch (const std::exception&) {
    throw cepcca::ValueError("--k-range expects integers a:b, got '" + text + "'");
  }
}

void require_input(const std::string& path) {
  if (!fs::exists(path)) throw cepcca::FormatError("input file does not exist: " + path);
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);  // '\n' endings on every platform
  if (!out) throw cepcca::FormatError("cannot write file: " + path.string());
  return out;
}

void write_manifest(const fs::path& dir, const std::string& command, json options) {
  json manifest;
  manifest["command"] = command;
  manifest["tool"] = "cepstra_cca";
  manifest["version"] = CEPCCA_VERSION;
  manifest["options"] = std::move(options);
  auto out = open_output(dir / "manifest.json");
  out << manifest.dump(2) << "\n";
}

void write_frequency_table(const cepcca::PeriodogramSet& p,
                           const std::vector<std::string>& subjects,
                           const Eigen::MatrixXd& values, const char* value_column,
                           std::optional<double> rate, const fs::path& path) {
  auto out = open_output(path);
  out << "subject,freq";
  if (rate) out << ",hz";
  out << ',' << value_column << "\n";
  for (int j = 0; j < static_cast<int>(values.rows()); ++j) {
    for (int l = 0; l < p.bins(); ++l) {
      out << subjects[j] << ',' << cepcca::csv::format(p.freqs(l));
      if (rate) out << ',' << cepcca::csv::format(*rate * p.freqs(l));
      out << ',' << cepcca::csv::format(values(j, l)) << "\n";
    }
  }
}

void write_grid_table(const std::vector<std::string>& subjects, const Eigen::VectorXd& grid,
                      const Eigen::MatrixXd& values, std::optional<double> rate,
                      const fs::path& path) {
  auto out = open_output(path);
  out << "subject,omega";
  if (rate) out << ",hz";
  out << ",value\n";
  for (int j = 0; j < static_cast<int>(values.rows()); ++j) {
    for (Eigen::Index i = 0; i < grid.size(); ++i) {
      out << subjects[j] << ',' << cepcca::csv::format(grid(i));
      if (rate) out << ',' << cepcca::csv::format(*rate * grid(i));
      out << ',' << cepcca::csv::format(values(j, i)) << "\n";
    }
  }
}

void write_aic_table(const cepcca::OrderSelection& sel, const fs::path& path) {
  auto out = open_output(path);
  out << "k,aic\n";
  for (const auto& row : sel.table) {
    out << row.order << ',' << cepcca::csv::format(row.aic) << "\n";
  }
}

void write_fit_tables(const cepcca::PanelFit& fit, const std::vector<std::string>& subjects,
                      const fs::path& dir) {
  auto coeffs = open_output(dir / "cepstral_coefficients.csv");
  coeffs << "subject,k,coefficient\n";
  for (int j = 0; j < static_cast<int>(fit.coefficients.rows()); ++j) {
    for (int k = 0; k < static_cast<int>(fit.coefficients.cols()); ++k) {
      coeffs << subjects[j] << ',' << k << ',' << cepcca::csv::format(fit.coefficients(j, k))
             << "\n";
    }
  }
  auto diag = open_output(dir / "fit_diagnostics.csv");
  diag << "subject,converged,iterations,nll,score_norm\n";
  for (int j = 0; j < static_cast<int>(fit.fits.size()); ++j) {
    const auto& f = fit.fits[j];
    diag << subjects[j] << ',' << (f.converged ? 1 : 0) << ',' << f.iterations << ','
         << cepcca::csv::format(f.nll) << ',' << cepcca::csv::format(f.score_norm) << "\n";
  }
}

// Shared order resolution: explicit K, or AIC over an explicit/default range.
struct OrderChoice {
  int selected = 0;
  std::optional<cepcca::OrderSelection> selection;
};

OrderChoice resolve_order(const cepcca::PeriodogramSet& pgram, std::optional<int> fixed,
                          const std::optional<std::string>& range_text,
                          const cepcca::FitOptions& fit, unsigned threads, bool default_to_aic) {
  OrderChoice choice;
  if (fixed) {
    choice.selected = *fixed;
    return choice;
  }
  if (range_text) {
    auto [lo, hi] = parse_order_range(*range_text);
    choice.selection = cepcca::select_order(pgram, lo, hi, fit, threads);
    choice.selected = choice.selection->selected;
    return choice;
  }
  if (default_to_aic) {
    auto [lo, hi] = cepcca::default_order_range(pgram.series_length);
    choice.selection = cepcca::select_order(pgram, lo, hi, fit, threads);
    choice.selected = choice.selection->selected;
  }
  return choice;
}

int run_spectra(const std::string& series_path, const std::string& out_dir,
                std::optional<int> k, std::optional<std::string> k_range, int grid_points,
                std::optional<double> rate, const FitFlags& flags, unsigned threads) {
  require_input(series_path);
  fs::create_directories(out_dir);
  const fs::path dir(out_dir);

  const cepcca::TimeSeriesPanel panel = cepcca::load_series_csv(series_path);
  const cepcca::PeriodogramSet pgram = cepcca::periodogram(panel);
  write_frequency_table(pgram, panel.subjects, pgram.values, "value", rate,
                        dir / "periodogram.csv");
  const Eigen::MatrixXd adjusted =
      cepcca::adjusted_log_periodogram(pgram, cepcca::default_log_floor(pgram));
  write_frequency_table(pgram, panel.subjects, adjusted, "value", rate,
                        dir / "adjusted_log_periodogram.csv");

  const OrderChoice choice =
      resolve_order(pgram, k, k_range, flags.options(), threads, /*default_to_aic=*/false);
  if (choice.selection) write_aic_table(*choice.selection, dir / "aic.csv");
  if (choice.selected > 0) {
    const auto design = cepcca::cosine_design(pgram.series_length, choice.selected);
    const auto fit = cepcca::fit_panel(pgram, design, flags.options(), threads);
    const Eigen::VectorXd grid = cepcca::half_unit_grid(grid_points);
    Eigen::MatrixXd spectra(panel.subject_count(), grid.size());
    for (int j = 0; j < panel.subject_count(); ++j) {
      spectra.row(j) =
          cepcca::reconstruct_log_spectrum(fit.fits[j].coefficients, grid).transpose();
    }
    write_grid_table(panel.subjects, grid, spectra, rate, dir / "log_spectra.csv");
  }

  json options = {{"series", series_path},     {"out", out_dir},
                  {"grid", grid_points},       {"threads", threads},
                  {"fit", flags.to_json()},    {"k", k ? json(*k) : json()},
                  {"k_range", k_range ? json(*k_range) : json()},
                  {"rate", rate ? json(*rate) : json()},
                  {"selected_k", choice.selected > 0 ? json(choice.selected) : json()}};
  write_manifest(dir, "spectra", options);
  return 0;
}

int run_fit(const std::string& series_path, const std::string& out_dir, std::optional<int> k,
            std::optional<std::string> k_range, const FitFlags& flags, unsigned threads) {
  require_input(series_path);
  fs::create_directories(out_dir);
  const fs::path dir(out_dir);

  const cepcca::TimeSeriesPanel panel = cepcca::load_series_csv(series_path);
  const cepcca::PeriodogramSet pgram = cepcca::periodogram(panel);
  const OrderChoice choice =
      resolve_order(pgram, k, k_range, flags.options(), threads, /*default_to_aic=*/true);
  if (choice.selection) write_aic_table(*choice.selection, dir / "aic.csv");

  const auto design = cepcca::cosine_design(pgram.series_length, choice.selected);
  const auto fit = cepcca::fit_panel(pgram, design, flags.options(), threads);
  write_fit_tables(fit, panel.subjects, dir);

  json options = {{"series", series_path},  {"out", out_dir},
                  {"threads", threads},     {"fit", flags.to_json()},
                  {"k", k ? json(*k) : json()}, {"k_range", k_range ? json(*k_range) : json()},
                  {"selected_k", choice.selected}};
  write_manifest(dir, "fit", options);
  return 0;
}

int run_cca(const std::string& series_path, const std::string& outcomes_path,
            const std::string& out_dir, bool standardize, std::optional<int> k,
            std::optional<std::string> k_range, int grid_points, std::optional<double> rate,
            double rank_tol, const FitFlags& flags, unsigned threads) {
  require_input(series_path);
  require_input(outcomes_path);
  fs::create_directories(out_dir);
  const fs::path dir(out_dir);

  auto [panel, outcomes] = cepcca::load_panel(series_path, outcomes_path);
  if (standardize) outcomes = cepcca::standardize_outcomes(outcomes);

  const cepcca::PeriodogramSet pgram = cepcca::periodogram(panel);
  const OrderChoice choice =
      resolve_order(pgram, k, k_range, flags.options(), threads, /*default_to_aic=*/true);
  if (choice.selection) write_aic_table(*choice.selection, dir / "aic.csv");

  const auto design = cepcca::cosine_design(pgram.series_length, choice.selected);
  const auto fit = cepcca::fit_panel(pgram, design, flags.options(), threads);
  write_fit_tables(fit, panel.subjects, dir);

  const auto bundle = cepcca::covariances(fit.coefficients, outcomes, rank_tol);
  const auto result = cepcca::cepstral_cca(bundle, rank_tol);

  json result_json = cepcca::cca_result_to_json(result);
  result_json["selected_k"] = choice.selected;
  result_json["standardized_outcomes"] = standardize;
  result_json["outcome_names"] = outcomes.variable_names;
  result_json["rank_f"] = bundle.rank_f;
  result_json["rank_tolerance"] = rank_tol;
  {
    auto out = open_output(dir / "cca_result.json");
    out << result_json.dump(2) << "\n";
  }

  {
    auto out = open_output(dir / "cepstral_weights.csv");
    out << "q,k,value\n";
    for (int q = 0; q < result.pairs; ++q) {
      for (int kk = 0; kk < result.cepstral_weights.cols(); ++kk) {
        out << (q + 1) << ',' << kk << ','
            << cepcca::csv::format(result.cepstral_weights(q, kk)) << "\n";
      }
    }
  }
  {
    auto out = open_output(dir / "outcome_weights.csv");
    out << "q,variable,value\n";
    for (int q = 0; q < result.pairs; ++q) {
      for (int p = 0; p < result.outcome_weights.cols(); ++p) {
        out << (q + 1) << ',' << outcomes.variable_names[p] << ','
            << cepcca::csv::format(result.outcome_weights(q, p)) << "\n";
      }
    }
  }

  const Eigen::VectorXd grid = cepcca::half_unit_grid(grid_points);
  for (int q = 0; q < result.pairs; ++q) {
    const Eigen::VectorXd values =
        cepcca::log_spectral_weight(result.cepstral_weights.row(q), grid);
    auto out = open_output(dir / ("weight_function_q" + std::to_string(q + 1) + ".csv"));
    out << "omega";
    if (rate) out << ",hz";
    out << ",value\n";
    for (Eigen::Index i = 0; i < grid.size(); ++i) {
      out << cepcca::csv::format(grid(i));
      if (rate) out << ',' << cepcca::csv::format(*rate * grid(i));
      out << ',' << cepcca::csv::format(values(i)) << "\n";
    }
  }

  const auto scores = cepcca::canonical_scores(result, fit.coefficients, outcomes);
  {
    auto out = open_output(dir / "canonical_scores.csv");
    out << "subject,pair,cepstral_score,outcome_score\n";
    for (int j = 0; j < panel.subject_count(); ++j) {
      for (int q = 0; q < result.pairs; ++q) {
        out << panel.subjects[j] << ',' << (q + 1) << ','
            << cepcca::csv::format(scores.cepstral(j, q)) << ','
            << cepcca::csv::format(scores.outcome(j, q)) << "\n";
      }
    }
  }

  json options = {{"series", series_path},
                  {"outcomes", outcomes_path},
                  {"out", out_dir},
                  {"standardize", standardize},
                  {"grid", grid_points},
                  {"threads", threads},
                  {"rank_tolerance", rank_tol},
                  {"fit", flags.to_json()},
                  {"k", k ? json(*k) : json()},
                  {"k_range", k_range ? json(*k_range) : json()},
                  {"rate", rate ? json(*rate) : json()},
                  {"selected_k", choice.selected}};
  write_manifest(dir, "cca", options);
  return 0;
}

int run_simulate(int n, int t, int replicates, std::uint64_t seed, const std::string& out_dir,
                 std::optional<int> fixed_k, std::optional<std::string> k_range, int oversample,
                 bool dump_raw, const FitFlags& flags, unsigned threads) {
  fs::create_directories(out_dir);
  const fs::path dir(out_dir);

  cepcca::SimulationDesign design;
  design.subjects = n;
  design.series_length = t;
  design.replicates = replicates;
  design.seed = seed;
  design.oversample = oversample;

  cepcca::StudyOptions options;
  options.fit = flags.options();
  options.threads = threads;
  if (fixed_k) {
    options.order_mode = cepcca::OrderMode::fixed;
    options.fixed_order = *fixed_k;
  }
  if (k_range) {
    auto [lo, hi] = parse_order_range(*k_range);
    options.k_min = lo;
    options.k_max = hi;
  }

  const cepcca::SimulationReport report = cepcca::run_study(design, options);

  {
    auto out = open_output(dir / "report.json");
    out << cepcca::report_to_json(report).dump(2) << "\n";
  }
  {
    auto out = open_output(dir / "report.csv");
    cepcca::write_report_csv(report, out);
  }
  if (dump_raw) {
    auto out = open_output(dir / "raw_errors.csv");
    cepcca::write_raw_errors_csv(report, out);
  }

  json manifest_options = {{"n", n},
                           {"t", t},
                           {"replicates", replicates},
                           {"seed", seed},
                           {"out", out_dir},
                           {"oversample", oversample},
                           {"threads", threads},
                           {"dump_raw", dump_raw},
                           {"fit", flags.to_json()},
                           {"k", fixed_k ? json(*fixed_k) : json()},
                           {"k_range", k_range ? json(*k_range) : json()}};
  write_manifest(dir, "simulate", manifest_options);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cepstral canonical correlation analysis for panels of time series"};
  app.require_subcommand(1);

  std::string series_path;
  std::string outcomes_path;
  std::string out_dir;
  std::optional<int> k;
  std::optional<std::string> k_range;
  std::optional<double> rate;
  int grid_points = 512;
  unsigned threads = 0;
  bool standardize = false;
  double rank_tol = 1e-10;
  int sim_n = 100;
  int sim_t = 100;
  int sim_replicates = 500;
  std::uint64_t sim_seed = 20120901;
  int oversample = 8;
  bool dump_raw = false;
  FitFlags flags;

  auto add_common = [&](CLI::App* cmd, bool with_grid) {
    cmd->add_option("--out", out_dir, "output directory")->required();
    cmd->add_option("--threads", threads,
                    "worker threads (0 = all cores; CEPSTRA_CCA_THREADS overrides)")
        ->capture_default_str();
    if (with_grid) {
      cmd->add_option("--grid", grid_points, "evaluation grid size over [0, 1/2]")
          ->check(CLI::Range(16, 1 << 20))
          ->capture_default_str();
    }
    flags.attach(cmd);
  };

  CLI::App* spectra = app.add_subcommand("spectra", "periodograms and estimated log-spectra");
  spectra->add_option("--series", series_path, "series CSV (subject,t1,...,tT)")->required();
  spectra->add_option("--k", k, "cepstral truncation order");
  spectra->add_option("--k-range", k_range, "AIC search range a:b");
  spectra->add_option("--rate", rate, "sampling rate in Hz for labeling");
  add_common(spectra, true);

  CLI::App* fit = app.add_subcommand("fit", "cepstral coefficient estimates and diagnostics");
  fit->add_option("--series", series_path, "series CSV (subject,t1,...,tT)")->required();
  fit->add_option("--k", k, "cepstral truncation order");
  fit->add_option("--k-range", k_range, "AIC search range a:b");
  add_common(fit, false);

  CLI::App* cca = app.add_subcommand("cca", "canonical correlation analysis against outcomes");
  cca->add_option("--series", series_path, "series CSV (subject,t1,...,tT)")->required();
  cca->add_option("--outcomes", outcomes_path, "outcome CSV (subject,<name1>,...)")->required();
  cca->add_flag("--standardize", standardize, "standardize outcome columns first");
  cca->add_option("--k", k, "cepstral truncation order");
  cca->add_option("--k-range", k_range, "AIC search range a:b");
  cca->add_option("--rate", rate, "sampling rate in Hz for labeling");
  cca->add_option("--rank-tol", rank_tol, "relative eigenvalue cutoff for the generalized inverse")
      ->capture_default_str();
  add_common(cca, true);

  CLI::App* simulate = app.add_subcommand("simulate", "replicate the reference error study");
  simulate->add_option("--n", sim_n, "subjects per replicate")->capture_default_str();
  simulate->add_option("--t", sim_t, "series length")->capture_default_str();
  simulate->add_option("--replicates", sim_replicates, "number of replicates")
      ->capture_default_str();
  simulate->add_option("--seed", sim_seed, "master RNG seed")->capture_default_str();
  simulate->add_option("--k", k, "fixed order override (default: AIC per replicate)");
  simulate->add_option("--k-range", k_range, "AIC search range a:b");
  simulate->add_option("--oversample", oversample, "synthesis oversampling factor")
      ->capture_default_str();
  simulate->add_flag("--dump-raw", dump_raw, "write per-replicate squared errors");
  add_common(simulate, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (spectra->parsed()) {
      return run_spectra(series_path, out_dir, k, k_range, grid_points, rate, flags, threads);
    }
    if (fit->parsed()) {
      return run_fit(series_path, out_dir, k, k_range, flags, threads);
    }
    if (cca->parsed()) {
      return run_cca(series_path, outcomes_path, out_dir, standardize, k, k_range, grid_points,
                     rate, rank_tol, flags, threads);
    }
    if (simulate->parsed()) {
      return run_simulate(sim_n, sim_t, sim_replicates, sim_seed, out_dir, k, k_range, oversample,
                          dump_raw, flags, threads);
    }
  } catch (const cepcca::SimulationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const cepcca::FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const cepcca::JoinError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const cepcca::ValueError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const cepcca::DegenerateColumnError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const cepcca::OrderError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const cepcca::DimensionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const cepcca::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
