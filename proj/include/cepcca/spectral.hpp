#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <numbers>

#include "cepcca/dataset.hpp"
#include "cepcca/errors.hpp"

namespace cepcca {

inline constexpr double euler_gamma = std::numbers::egamma_v<double>;

/// Number of retained Fourier frequencies: ell = 1..floor((T-1)/2).
/// ell = 0 and the Nyquist index are excluded.
inline int frequency_count(int series_length) { return (series_length - 1) / 2; }

/// The retained frequency grid ell/T in cycles per sample.
inline Eigen::VectorXd fourier_frequencies(int series_length) {
  const int m = frequency_count(series_length);
  Eigen::VectorXd freqs(m);
  for (int l = 1; l <= m; ++l) freqs(l - 1) = static_cast<double>(l) / series_length;
  return freqs;
}

/// Per-subject periodograms Y_{j,ell} = |DFT|^2 / T over the retained band.
struct PeriodogramSet {
  int series_length = 0;
  Eigen::VectorXd freqs;   // m entries, ell/T
  Eigen::MatrixXd values;  // N x m, non-negative

  int subject_count() const { return static_cast<int>(values.rows()); }
  int bins() const { return static_cast<int>(values.cols()); }
};

/// Cosine regression design: row C_ell = (1, sqrt(2)cos(2*pi*ell*k/T))_{k=1..K-1}.
struct CosineDesign {
  int series_length = 0;
  int order = 0;           // K
  Eigen::MatrixXd rows;    // m x K

  int bins() const { return static_cast<int>(rows.rows()); }
};

/// Computes Y_{j,ell} = T^{-1} |sum_t X_{jt} e^{-2 pi i ell t / T}|^2 for
/// ell = 1..floor((T-1)/2). Each series is centered by its sample mean first,
/// which leaves these ordinates unchanged and makes the set invariant to
/// additive shifts.
inline PeriodogramSet periodogram(const TimeSeriesPanel& panel) {
  validate_panel(panel);
  const int T = panel.length();
  const int m = frequency_count(T);

  Eigen::MatrixXd cos_table(m, T);
  Eigen::MatrixXd sin_table(m, T);
  for (int l = 1; l <= m; ++l) {
    const double w = 2.0 * std::numbers::pi * l / T;
    for (int t = 0; t < T; ++t) {
      cos_table(l - 1, t) = std::cos(w * t);
      sin_table(l - 1, t) = std::sin(w * t);
    }
  }

  Eigen::MatrixXd centered = panel.series;
  centered.colwise() -= panel.series.rowwise().mean();

  const Eigen::MatrixXd re = centered * cos_table.transpose();  // N x m
  const Eigen::MatrixXd im = centered * sin_table.transpose();

  PeriodogramSet out;
  out.series_length = T;
  out.freqs = fourier_frequencies(T);
  out.values = (re.array().square() + im.array().square()) / T;
  return out;
}

/// Builds the m x K cosine design for series length T. K must lie in
/// [1, floor((T-1)/2)] so the design has full column rank.
inline CosineDesign cosine_design(int series_length, int order) {
  const int m = frequency_count(series_length);
  if (order < 1 || order > m) {
    throw OrderError("order K=" + std::to_string(order) + " outside [1, " + std::to_string(m) +
                     "] for T=" + std::to_string(series_length));
  }
  CosineDesign design;
  design.series_length = series_length;
  design.order = order;
  design.rows.resize(m, order);
  design.rows.col(0).setOnes();
  const double root2 = std::numbers::sqrt2;
  for (int l = 1; l <= m; ++l) {
    for (int k = 1; k < order; ++k) {
      design.rows(l - 1, k) = root2 * std::cos(2.0 * std::numbers::pi * l * k / series_length);
    }
  }
  return design;
}

/// Default floor used before taking logs of periodogram ordinates.
inline double default_log_floor(const PeriodogramSet& p) {
  return 1e-12 * std::max(1.0, p.values.mean());
}

/// Bias-adjusted log-periodogram log(max(Y, floor)) + gamma, used to seed the
/// Whittle fit and for diagnostic plots.
inline Eigen::MatrixXd adjusted_log_periodogram(const PeriodogramSet& p, double floor) {
  if (!(floor > 0.0)) throw ValueError("log floor must be positive");
  return (p.values.array().max(floor).log() + euler_gamma).matrix();
}

/// Evaluates f0 + sum_{k>=1} f_k sqrt(2) cos(2 pi omega k) on a grid.
/// Shared by log-spectrum reconstruction and CCA weight functions.
inline Eigen::VectorXd cosine_series(const Eigen::VectorXd& coefficients,
                                     const Eigen::VectorXd& grid) {
  const int K = static_cast<int>(coefficients.size());
  if (K < 1) throw DimensionError("cosine series needs at least the constant coefficient");
  Eigen::VectorXd out(grid.size());
  const double root2 = std::numbers::sqrt2;
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    const double omega = grid(i);
    if (!std::isfinite(omega)) throw ValueError("cosine series grid value not finite");
    double acc = coefficients(0);
    for (int k = 1; k < K; ++k) {
      acc += coefficients(k) * root2 * std::cos(2.0 * std::numbers::pi * omega * k);
    }
    out(i) = acc;
  }
  return out;
}

/// Equally spaced grid of `points` frequencies covering [0, 1/2].
inline Eigen::VectorXd half_unit_grid(int points) {
  if (points < 2) throw ValueError("grid needs at least 2 points");
  Eigen::VectorXd grid(points);
  for (int i = 0; i < points; ++i) grid(i) = 0.5 * i / (points - 1);
  return grid;
}

}  // namespace cepcca
