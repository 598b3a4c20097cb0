#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cepcca/cca.hpp"
#include "cepcca/cepstral.hpp"
#include "cepcca/dataset.hpp"
#include "cepcca/errors.hpp"
#include "cepcca/parallel.hpp"
#include "cepcca/rng.hpp"
#include "cepcca/spectral.hpp"

namespace cepcca {

/// Ties one latent cepstral deviation xi_k to one outcome component.
struct CrossCorrelation {
  int cepstral_index = 0;
  int outcome_index = 0;
  double correlation = 0.0;
};

/// Random-transfer-function study design. The defaults are the reference
/// setting: F_j(omega) = 5 + sqrt(2)cos(2 pi omega) + xi_j0 + sum_{k=1}^{3}
/// xi_jk sqrt(2)cos(2 pi k omega) with var(xi) = 4, outcomes N(0, diag(4,4,4)),
/// cor(xi_2, Z_1) = 0.5 and cor(xi_3, Z_2) = 0.25, which give canonical
/// correlations (0.5, 0.25, 0).
struct SimulationDesign {
  int subjects = 100;
  int series_length = 100;
  int replicates = 500;
  Eigen::VectorXd base_cepstrum = (Eigen::VectorXd(4) << 5.0, 1.0, 0.0, 0.0).finished();
  double latent_sd = 2.0;
  Eigen::VectorXd outcome_variances = (Eigen::VectorXd(3) << 4.0, 4.0, 4.0).finished();
  std::vector<CrossCorrelation> cross_correlations = {{2, 0, 0.5}, {3, 1, 0.25}};
  std::uint64_t seed = 20120901;
  int oversample = 8;

  int latent_count() const { return static_cast<int>(base_cepstrum.size()); }
  int outcome_count() const { return static_cast<int>(outcome_variances.size()); }
};

/// Joint covariance of (xi_0..xi_{K-1}, Z_1..Z_P) implied by the design.
inline Eigen::MatrixXd joint_covariance(const SimulationDesign& design) {
  const int k = design.latent_count();
  const int p = design.outcome_count();
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(k + p, k + p);
  cov.topLeftCorner(k, k).diagonal().setConstant(design.latent_sd * design.latent_sd);
  cov.bottomRightCorner(p, p).diagonal() = design.outcome_variances;
  for (const auto& cc : design.cross_correlations) {
    if (cc.cepstral_index < 0 || cc.cepstral_index >= k || cc.outcome_index < 0 ||
        cc.outcome_index >= p) {
      throw ValueError("cross-correlation index out of range");
    }
    const double cov_value =
        cc.correlation * design.latent_sd * std::sqrt(design.outcome_variances(cc.outcome_index));
    cov(cc.cepstral_index, k + cc.outcome_index) = cov_value;
    cov(k + cc.outcome_index, cc.cepstral_index) = cov_value;
  }
  return cov;
}

inline void validate_design(const SimulationDesign& design) {
  if (design.subjects < 2) throw ValueError("design needs at least 2 subjects");
  if (design.series_length < 4) throw ValueError("design needs series length >= 4");
  if (design.replicates < 1) throw ValueError("design needs at least 1 replicate");
  if (design.latent_count() < 1) throw ValueError("base cepstrum must not be empty");
  if (design.outcome_count() < 1) throw ValueError("design needs at least one outcome");
  if (!(design.latent_sd > 0.0)) throw ValueError("latent sd must be positive");
  if ((design.outcome_variances.array() <= 0.0).any()) {
    throw ValueError("outcome variances must be positive");
  }
  if (design.oversample < 1) throw ValueError("oversample factor must be >= 1");
  Eigen::LLT<Eigen::MatrixXd> llt(joint_covariance(design));
  if (llt.info() != Eigen::Success) {
    throw ValueError("implied joint covariance of (xi, Z) is not positive definite");
  }
}

/// Draws the latent (xi, Z) pairs of a design through one Cholesky factor.
class JointSampler {
 public:
  explicit JointSampler(const SimulationDesign& design)
      : latent_count_(design.latent_count()), outcome_count_(design.outcome_count()) {
    Eigen::LLT<Eigen::MatrixXd> llt(joint_covariance(design));
    if (llt.info() != Eigen::Success) {
      throw ValueError("implied joint covariance of (xi, Z) is not positive definite");
    }
    chol_ = llt.matrixL();
  }

  /// One subject: xi offsets first, outcomes second.
  std::pair<Eigen::VectorXd, Eigen::VectorXd> draw(RngStream& rng) const {
    Eigen::VectorXd z(latent_count_ + outcome_count_);
    for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = rng.normal();
    const Eigen::VectorXd x = chol_ * z;
    return {x.head(latent_count_), x.tail(outcome_count_)};
  }

 private:
  int latent_count_;
  int outcome_count_;
  Eigen::MatrixXd chol_;
};

struct SubjectDraw {
  Eigen::VectorXd xi;        // latent cepstral offsets
  Eigen::VectorXd outcomes;  // Z_j
};

/// One subject from the design's joint Gaussian law.
inline SubjectDraw draw_subject(const SimulationDesign& design, RngStream& rng) {
  const JointSampler sampler(design);
  auto [xi, z] = sampler.draw(rng);
  return {std::move(xi), std::move(z)};
}

/// Subject-specific true cepstrum: base coefficients plus latent offsets.
inline Eigen::VectorXd true_cepstrum(const SimulationDesign& design, const Eigen::VectorXd& xi) {
  if (xi.size() != design.base_cepstrum.size()) throw DimensionError("xi size mismatch");
  return design.base_cepstrum + xi;
}

/// Exact population covariances implied by the design, for the algebra-only
/// canonical analysis (no Monte Carlo error).
inline CovarianceBundle population_bundle(const SimulationDesign& design) {
  const int k = design.latent_count();
  const int p = design.outcome_count();
  const Eigen::MatrixXd joint = joint_covariance(design);
  CovarianceBundle b;
  b.gamma_f = joint.topLeftCorner(k, k);
  b.gamma_fz = joint.topRightCorner(k, p);
  b.gamma_z = joint.bottomRightCorner(p, p);
  b.mean_f = design.base_cepstrum;
  b.mean_z = Eigen::VectorXd::Zero(p);
  b.rank_f = k;
  return b;
}

/// Population canonical correlations and weights of the design.
inline CcaResult population_truth(const SimulationDesign& design) {
  return cepstral_cca(population_bundle(design));
}

/// Draws stationary conditionally Gaussian series with spectral density
/// e^{F}: a harmonic superposition on an oversampled frequency grid
///   X_t = sum_l e^{F(l/T')/2} sqrt(2/T') (a_l cos(2 pi l t/T') + b_l sin(2 pi l t/T'))
/// with T' = oversample * T and the returned window taken from the middle.
/// The trig tables are built once and reused across draws.
class SeriesSynthesizer {
 public:
  explicit SeriesSynthesizer(int series_length, int oversample = 8)
      : series_length_(series_length), grid_length_(series_length * oversample) {
    if (series_length < 4) throw ValueError("series length must be >= 4");
    if (oversample < 1) throw ValueError("oversample factor must be >= 1");
    const int mp = (grid_length_ - 1) / 2;
    freqs_.resize(mp);
    for (int l = 1; l <= mp; ++l) freqs_(l - 1) = static_cast<double>(l) / grid_length_;

    const int offset = (grid_length_ - series_length_) / 2;
    cos_table_.resize(series_length_, mp);
    sin_table_.resize(series_length_, mp);
    for (int t = 0; t < series_length_; ++t) {
      for (int l = 1; l <= mp; ++l) {
        const double angle = 2.0 * std::numbers::pi * l * (offset + t) / grid_length_;
        cos_table_(t, l - 1) = std::cos(angle);
        sin_table_(t, l - 1) = std::sin(angle);
      }
    }
  }

  Eigen::VectorXd draw(const Eigen::VectorXd& cepstrum, RngStream& rng) const {
    const Eigen::ArrayXd theta = (0.5 * cosine_series(cepstrum, freqs_)).array().exp();
    const double scale = std::sqrt(2.0 / grid_length_);
    Eigen::VectorXd cos_amp(freqs_.size());
    Eigen::VectorXd sin_amp(freqs_.size());
    for (Eigen::Index l = 0; l < freqs_.size(); ++l) {
      cos_amp(l) = scale * theta(l) * rng.normal();
      sin_amp(l) = scale * theta(l) * rng.normal();
    }
    return cos_table_ * cos_amp + sin_table_ * sin_amp;
  }

  int series_length() const { return series_length_; }

 private:
  int series_length_;
  int grid_length_;  // T'
  Eigen::VectorXd freqs_;
  Eigen::MatrixXd cos_table_;
  Eigen::MatrixXd sin_table_;
};

inline Eigen::VectorXd synthesize_series(const Eigen::VectorXd& cepstrum, int series_length,
                                         RngStream& rng, int oversample = 8) {
  return SeriesSynthesizer(series_length, oversample).draw(cepstrum, rng);
}

/// Squared errors of one replicate against the population truth, in the
/// reporting order of the error study.
struct SquaredErrors {
  double a1 = 0.0;    // log-spectral weight function 1 on the Fourier grid
  double a2 = 0.0;
  double b1 = 0.0;    // outcome weight vectors
  double b2 = 0.0;
  double rho1 = 0.0;  // canonical correlations
  double rho2 = 0.0;
  double rho3 = 0.0;

  std::array<double, 7> as_array() const { return {a1, a2, b1, b2, rho1, rho2, rho3}; }
  static const std::array<const char*, 7>& names() {
    static const std::array<const char*, 7> n = {"A1", "A2", "B1", "B2", "rho1", "rho2", "rho3"};
    return n;
  }
};

/// Error metrics between an estimated and the true canonical structure.
/// Weight pairs are sign-indeterminate, so each (A_q, B_q) pair is compared
/// under the joint sign minimizing its total squared error. Correlations
/// beyond the estimated pair count enter as zero.
inline SquaredErrors squared_errors(const CcaResult& estimate, const CcaResult& truth,
                                    const Eigen::VectorXd& grid) {
  if (estimate.pairs < 2) throw DimensionError("need at least 2 estimated canonical pairs");
  if (truth.pairs < 2) throw DimensionError("need at least 2 true canonical pairs");

  SquaredErrors err;
  auto rho_at = [](const CcaResult& r, int q) {
    return q < r.pairs ? r.correlations(q) : 0.0;
  };
  err.rho1 = std::pow(rho_at(estimate, 0) - rho_at(truth, 0), 2);
  err.rho2 = std::pow(rho_at(estimate, 1) - rho_at(truth, 1), 2);
  err.rho3 = std::pow(rho_at(estimate, 2) - rho_at(truth, 2), 2);

  for (int q = 0; q < 2; ++q) {
    const Eigen::VectorXd a_true = log_spectral_weight(truth.cepstral_weights.row(q), grid);
    const Eigen::VectorXd a_est = log_spectral_weight(estimate.cepstral_weights.row(q), grid);
    const Eigen::VectorXd b_true = truth.outcome_weights.row(q);
    const Eigen::VectorXd b_est = estimate.outcome_weights.row(q);

    const double plus = (a_est - a_true).squaredNorm() + (b_est - b_true).squaredNorm();
    const double minus = (-a_est - a_true).squaredNorm() + (-b_est - b_true).squaredNorm();
    const double sign = minus < plus ? -1.0 : 1.0;
    const double a_err = (sign * a_est - a_true).squaredNorm();
    const double b_err = (sign * b_est - b_true).squaredNorm();
    if (q == 0) {
      err.a1 = a_err;
      err.b1 = b_err;
    } else {
      err.a2 = a_err;
      err.b2 = b_err;
    }
  }
  return err;
}

enum class OrderMode { aic, fixed };

/// Controls for the replication harness.
struct StudyOptions {
  FitOptions fit;
  OrderMode order_mode = OrderMode::aic;
  int fixed_order = 4;
  int k_min = 1;
  int k_max = 0;  // 0 = min(30, floor((T-1)/2))
  unsigned threads = 1;
  double max_failure_rate = 0.05;
};

struct MetricSummary {
  std::string name;
  double mean_x100 = 0.0;
  double sd_x100 = 0.0;
};

struct ReplicateFailure {
  int replicate = 0;
  std::string reason;
};

struct SimulationReport {
  SimulationDesign design;
  std::string order_mode;
  int fixed_order = 0;
  int k_min = 0;
  int k_max = 0;
  int replicates_requested = 0;
  int replicates_completed = 0;
  std::vector<ReplicateFailure> failures;
  std::map<int, int> selected_order_counts;
  std::vector<MetricSummary> metrics;        // 7 entries in SquaredErrors order
  std::vector<std::array<double, 7>> raw;    // per completed replicate
  std::vector<int> raw_replicates;           // replicate index of each raw row
};

namespace detail {

struct ReplicateOutcome {
  std::optional<SquaredErrors> errors;
  int selected_order = 0;
  std::string failure;
};

}  // namespace detail

/// Runs the full error study: per replicate, generate a panel, fit cepstra
/// (AIC-selected or fixed K), run the canonical analysis, and score against
/// the population truth. Deterministic for a fixed seed regardless of the
/// thread count (each replicate has its own stream and output slot).
inline SimulationReport run_study(const SimulationDesign& design, const StudyOptions& options) {
  validate_design(design);
  const int T = design.series_length;
  const int m = frequency_count(T);
  const int k_min = options.k_min;
  const int k_max = options.k_max > 0 ? options.k_max : std::min(30, m);
  if (k_min < 1 || k_max < k_min || k_max > m) throw OrderError("AIC order range out of bounds");
  if (options.order_mode == OrderMode::fixed &&
      (options.fixed_order < 1 || options.fixed_order > m)) {
    throw OrderError("fixed order out of bounds");
  }

  const CcaResult truth = population_truth(design);
  const Eigen::VectorXd grid = fourier_frequencies(T);
  const JointSampler sampler(design);
  const SeriesSynthesizer synthesizer(T, design.oversample);
  const int n = design.subjects;
  const int reps = design.replicates;

  std::vector<detail::ReplicateOutcome> slots(reps);
  parallel_for(static_cast<std::size_t>(reps), options.threads, [&](std::size_t r) {
    detail::ReplicateOutcome& slot = slots[r];
    try {
      RngStream rng(design.seed, static_cast<std::uint64_t>(r) + 1);

      TimeSeriesPanel panel;
      panel.series.resize(n, T);
      panel.subjects.reserve(n);
      OutcomeMatrix outcomes;
      outcomes.values.resize(n, design.outcome_count());
      for (int p = 0; p < design.outcome_count(); ++p) {
        outcomes.variable_names.push_back("Z" + std::to_string(p + 1));
      }
      for (int j = 0; j < n; ++j) {
        panel.subjects.push_back("s" + std::to_string(j + 1));
        auto [xi, z] = sampler.draw(rng);
        outcomes.values.row(j) = z.transpose();
        panel.series.row(j) = synthesizer.draw(true_cepstrum(design, xi), rng).transpose();
      }

      const PeriodogramSet pgram = periodogram(panel);
      int order = options.fixed_order;
      if (options.order_mode == OrderMode::aic) {
        order = select_order(pgram, k_min, k_max, options.fit).selected;
      }
      slot.selected_order = order;

      const PanelFit fit = fit_panel(pgram, cosine_design(T, order), options.fit);
      if (!fit.all_converged) throw NumericalError("cepstral fit did not converge");

      const CovarianceBundle bundle = covariances(fit.coefficients, outcomes);
      const CcaResult estimate = cepstral_cca(bundle);
      slot.errors = squared_errors(estimate, truth, grid);
    } catch (const Error& e) {
      slot.failure = e.what();
    }
  });

  SimulationReport report;
  report.design = design;
  report.order_mode = options.order_mode == OrderMode::aic ? "aic" : "fixed";
  report.fixed_order = options.fixed_order;
  report.k_min = k_min;
  report.k_max = k_max;
  report.replicates_requested = reps;
  for (int r = 0; r < reps; ++r) {
    const auto& slot = slots[r];
    if (slot.errors.has_value()) {
      report.raw.push_back(slot.errors->as_array());
      report.raw_replicates.push_back(r);
      if (slot.selected_order > 0) ++report.selected_order_counts[slot.selected_order];
    } else {
      report.failures.push_back({r, slot.failure});
    }
  }
  report.replicates_completed = static_cast<int>(report.raw.size());

  const auto& names = SquaredErrors::names();
  for (std::size_t metric = 0; metric < names.size(); ++metric) {
    MetricSummary summary;
    summary.name = names[metric];
    const int count = report.replicates_completed;
    if (count > 0) {
      double mean = 0.0;
      for (const auto& row : report.raw) mean += row[metric];
      mean /= count;
      double ss = 0.0;
      for (const auto& row : report.raw) ss += (row[metric] - mean) * (row[metric] - mean);
      const double sd = count > 1 ? std::sqrt(ss / (count - 1)) : 0.0;
      summary.mean_x100 = 100.0 * mean;
      summary.sd_x100 = 100.0 * sd;
    }
    report.metrics.push_back(summary);
  }

  const double failure_rate = reps > 0 ? 1.0 - static_cast<double>(report.replicates_completed) / reps : 0.0;
  if (failure_rate > options.max_failure_rate) {
    throw SimulationError(std::to_string(report.failures.size()) + " of " + std::to_string(reps) +
                          " replicates failed (tolerated rate " +
                          std::to_string(options.max_failure_rate) + ")");
  }
  return report;
}

}  // namespace cepcca
