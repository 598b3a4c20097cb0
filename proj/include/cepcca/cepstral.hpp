#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "cepcca/errors.hpp"
#include "cepcca/parallel.hpp"
#include "cepcca/spectral.hpp"

namespace cepcca {

/// Stopping controls for the Fisher scoring iteration.
/// score_tolerance is per frequency (the stop is ||U|| <= score_tolerance * m)
/// and nll_tolerance is relative (|dL| <= nll_tolerance * (1 + |L|)).
struct FitOptions {
  int max_iterations = 100;
  double score_tolerance = 1e-8;
  double nll_tolerance = 1e-10;
};

/// One subject's maximum Whittle likelihood cepstral fit.
struct CepstralFit {
  Eigen::VectorXd coefficients;  // K entries, log-power units
  double nll = 0.0;              // final negative log-Whittle likelihood
  int iterations = 0;            // accepted Fisher steps
  bool converged = false;
  double score_norm = 0.0;       // ||U|| at the returned estimate
  bool numerical_warning = false;  // exponent clamp was hit during evaluation
};

namespace detail {

inline void check_fit_dims(const Eigen::VectorXd& f, const Eigen::VectorXd& y,
                           const CosineDesign& design) {
  if (f.size() != design.order) throw DimensionError("coefficient length does not match order K");
  if (y.size() != design.rows.rows()) {
    throw DimensionError("periodogram row length does not match design");
  }
}

// e^{-C'f} with the exponent clamped to +-700 to avoid overflow; sets the
// warning flag when the clamp was active.
inline Eigen::ArrayXd clamped_exp_neg(const Eigen::VectorXd& linear, bool* clamped) {
  Eigen::ArrayXd arg = (-linear).array().cwiseMax(-700.0).cwiseMin(700.0);
  if (clamped != nullptr && (linear.array().abs() > 700.0).any()) *clamped = true;
  return arg.exp();
}

struct WhittleEval {
  double nll = 0.0;
  bool clamped = false;
};

inline WhittleEval whittle_eval(const Eigen::VectorXd& f, const Eigen::VectorXd& y,
                                const CosineDesign& design) {
  WhittleEval ev;
  const Eigen::VectorXd linear = design.rows * f;  // C'f per frequency
  const Eigen::ArrayXd e = clamped_exp_neg(linear, &ev.clamped);
  ev.nll = (y.array() * e + linear.array()).sum();
  return ev;
}

inline Eigen::VectorXd whittle_score_impl(const Eigen::VectorXd& f, const Eigen::VectorXd& y,
                                          const CosineDesign& design, bool* clamped) {
  const Eigen::VectorXd linear = design.rows * f;
  const Eigen::ArrayXd e = clamped_exp_neg(linear, clamped);
  const Eigen::VectorXd w = (1.0 - y.array() * e).matrix();
  return design.rows.transpose() * w;
}

}  // namespace detail

/// Negative log-Whittle likelihood L(f) = sum_ell (Y_ell e^{-C_ell'f} + C_ell'f).
inline double whittle_nll(const Eigen::VectorXd& f, const Eigen::VectorXd& y,
                          const CosineDesign& design) {
  detail::check_fit_dims(f, y, design);
  return detail::whittle_eval(f, y, design).nll;
}

/// Score U(f) = sum_ell (1 - Y_ell e^{-C_ell'f}) C_ell.
inline Eigen::VectorXd whittle_score(const Eigen::VectorXd& f, const Eigen::VectorXd& y,
                                     const CosineDesign& design) {
  detail::check_fit_dims(f, y, design);
  return detail::whittle_score_impl(f, y, design, nullptr);
}

/// Expected-information matrix in its positive form J = sum_ell C_ell C_ell'.
/// The Fisher step f <- f - J^{-1} U is algebraically the scoring update,
/// and J is constant in f, so it is factored once and shared.
inline Eigen::MatrixXd fisher_information(const CosineDesign& design) {
  Eigen::MatrixXd info = design.rows.transpose() * design.rows;
  return 0.5 * (info + info.transpose());
}

/// Holds a cosine design together with its factored information matrix so a
/// panel of subjects (and all scoring iterations) reuse one factorization.
class FisherSolver {
 public:
  explicit FisherSolver(CosineDesign design) : design_(std::move(design)) {
    information_ = fisher_information(design_);
    llt_.compute(information_);
    if (llt_.info() != Eigen::Success) {
      throw DesignRankError("cosine design information matrix is not positive definite (K=" +
                            std::to_string(design_.order) + ", T=" +
                            std::to_string(design_.series_length) + ")");
    }
  }

  const CosineDesign& design() const { return design_; }
  const Eigen::MatrixXd& information() const { return information_; }
  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const { return llt_.solve(rhs); }

 private:
  CosineDesign design_;
  Eigen::MatrixXd information_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
};

namespace detail {

inline Eigen::VectorXd init_least_squares_impl(const FisherSolver& solver,
                                               const Eigen::VectorXd& y, double floor) {
  if (!(floor > 0.0)) throw ValueError("log floor must be positive");
  const Eigen::VectorXd adjusted = (y.array().max(floor).log() + euler_gamma).matrix();
  return solver.solve(solver.design().rows.transpose() * adjusted);
}

}  // namespace detail

/// Log-periodogram least squares start f0 = (C'C)^{-1} C' (log max(Y,floor) + gamma).
inline Eigen::VectorXd init_least_squares(const Eigen::VectorXd& y, const CosineDesign& design,
                                          double floor) {
  if (y.size() != design.rows.rows()) {
    throw DimensionError("periodogram row length does not match design");
  }
  return detail::init_least_squares_impl(FisherSolver(design), y, floor);
}

namespace detail {

inline CepstralFit fit_with_solver(const FisherSolver& solver, const Eigen::VectorXd& y,
                                   const FitOptions& opts, double floor) {
  const CosineDesign& design = solver.design();
  const int m = design.bins();
  const double score_stop = opts.score_tolerance * m;

  CepstralFit fit;
  Eigen::VectorXd f = init_least_squares_impl(solver, y, floor);
  WhittleEval ev = whittle_eval(f, y, design);
  double nll = ev.nll;
  fit.numerical_warning = ev.clamped;

  Eigen::VectorXd score = whittle_score_impl(f, y, design, &fit.numerical_warning);
  double score_norm = score.norm();
  int accepted = 0;
  bool converged = false;

  // Full Fisher step with halving until the likelihood does not increase.
  // Returns the achieved decrease, or a negative value when stalled.
  auto take_step = [&]() -> double {
    const Eigen::VectorXd direction = solver.solve(score);
    double scale = 1.0;
    for (int h = 0; h <= 30; ++h) {
      const Eigen::VectorXd candidate = f - scale * direction;
      const WhittleEval cand = whittle_eval(candidate, y, design);
      fit.numerical_warning |= cand.clamped;
      if (cand.nll <= nll) {
        const double decrease = nll - cand.nll;
        f = candidate;
        nll = cand.nll;
        score = whittle_score_impl(f, y, design, &fit.numerical_warning);
        score_norm = score.norm();
        return decrease;
      }
      scale *= 0.5;
    }
    return -1.0;
  };

  while (accepted < opts.max_iterations) {
    if (score_norm <= score_stop) {
      converged = true;
      break;
    }
    const double decrease = take_step();
    if (decrease < 0.0) break;  // no acceptable step left
    ++accepted;
    if (decrease <= opts.nll_tolerance * (1.0 + std::abs(nll))) {
      converged = true;
      break;
    }
  }
  if (!converged && score_norm <= score_stop) converged = true;

  if (converged) {
    // One refinement step past the trigger; quadratic convergence makes the
    // K=1 closed form log(mean Y) exact to well below 1e-10.
    if (take_step() >= 0.0) ++accepted;
  }

  fit.coefficients = std::move(f);
  fit.nll = nll;
  fit.iterations = accepted;
  fit.converged = converged;
  fit.score_norm = score_norm;
  return fit;
}

}  // namespace detail

/// Minimizes the Whittle NLL by Fisher scoring from the least squares start.
/// Nonconvergence is reported through the returned diagnostics, not thrown.
inline CepstralFit fit_cepstrum(const Eigen::VectorXd& y, const CosineDesign& design,
                                const FitOptions& opts = {}) {
  if (y.size() != design.rows.rows()) {
    throw DimensionError("periodogram row length does not match design");
  }
  const double floor = 1e-12 * std::max(1.0, y.mean());
  return detail::fit_with_solver(FisherSolver(design), y, opts, floor);
}

/// All subjects of a panel fitted at one order K.
struct PanelFit {
  std::vector<CepstralFit> fits;
  Eigen::MatrixXd coefficients;  // N x K
  bool all_converged = false;
  double total_nll = 0.0;
};

inline PanelFit fit_panel(const PeriodogramSet& p, const CosineDesign& design,
                          const FitOptions& opts = {}, unsigned threads = 1) {
  if (p.bins() != design.bins() || p.series_length != design.series_length) {
    throw DimensionError("periodogram set and design disagree on T");
  }
  const FisherSolver solver(design);
  const double floor = default_log_floor(p);
  const int n = p.subject_count();

  PanelFit out;
  out.fits.resize(n);
  out.coefficients.resize(n, design.order);
  parallel_for(static_cast<std::size_t>(n), threads, [&](std::size_t j) {
    out.fits[j] = detail::fit_with_solver(solver, p.values.row(j).transpose(), opts, floor);
  });

  out.all_converged = true;
  out.total_nll = 0.0;
  for (int j = 0; j < n; ++j) {
    out.coefficients.row(j) = out.fits[j].coefficients.transpose();
    out.all_converged = out.all_converged && out.fits[j].converged;
    out.total_nll += out.fits[j].nll;
  }
  return out;
}

/// One row of the AIC table C(k) = sum_j L_jk(fhat_j) + 2Nk.
struct AicRow {
  int order = 0;
  double aic = 0.0;
  bool all_converged = false;
};

struct OrderSelection {
  int selected = 0;
  std::vector<AicRow> table;
};

/// Default AIC search range 1..min(30, floor((T-1)/2)).
inline std::pair<int, int> default_order_range(int series_length) {
  return {1, std::min(30, frequency_count(series_length))};
}

/// Minimizes C(k) over [k_min, k_max]; ties break toward the smaller order.
/// Orders with a nonconvergent subject fit are flagged and skipped; it is an
/// error when no order converges for every subject.
inline OrderSelection select_order(const PeriodogramSet& p, int k_min, int k_max,
                                   const FitOptions& opts = {}, unsigned threads = 1) {
  const int m = p.bins();
  if (k_min < 1 || k_max < k_min || k_max > m) {
    throw OrderError("order range [" + std::to_string(k_min) + ", " + std::to_string(k_max) +
                     "] outside [1, " + std::to_string(m) + "]");
  }
  const int n = p.subject_count();

  OrderSelection sel;
  for (int k = k_min; k <= k_max; ++k) {
    const PanelFit fit = fit_panel(p, cosine_design(p.series_length, k), opts, threads);
    sel.table.push_back({k, fit.total_nll + 2.0 * n * k, fit.all_converged});
  }

  double best = 0.0;
  bool have = false;
  for (const AicRow& row : sel.table) {
    if (!row.all_converged) continue;
    if (!have || row.aic < best) {
      best = row.aic;
      sel.selected = row.order;
      have = true;
    }
  }
  if (!have) throw NumericalError("no order in the AIC range converged for every subject");
  return sel;
}

/// Estimated log-spectrum F(omega) = f0 + sum f_k sqrt(2) cos(2 pi omega k).
inline Eigen::VectorXd reconstruct_log_spectrum(const Eigen::VectorXd& coefficients,
                                                const Eigen::VectorXd& grid) {
  return cosine_series(coefficients, grid);
}

}  // namespace cepcca
