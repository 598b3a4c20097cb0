#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "cepcca/dataset.hpp"
#include "cepcca/errors.hpp"
#include "cepcca/spectral.hpp"

namespace cepcca {

/// Sample moments feeding the plug-in CCA, all with N-1 denominators.
struct CovarianceBundle {
  Eigen::MatrixXd gamma_f;   // K x K covariance of fitted cepstra
  Eigen::MatrixXd gamma_fz;  // K x P cross-covariance with outcomes
  Eigen::MatrixXd gamma_z;   // P x P outcome covariance
  Eigen::VectorXd mean_f;    // K
  Eigen::VectorXd mean_z;    // P
  int rank_f = 0;            // numerical rank of gamma_f
};

/// Canonical correlations and weight vectors, pairs sorted by descending
/// correlation. Pairs with correlation below 1e-8 are kept but flagged
/// non-identified (their cepstral weights are not scaled).
struct CcaResult {
  Eigen::VectorXd correlations;      // Q, in [0,1] descending
  Eigen::MatrixXd cepstral_weights;  // Q x K, rows a_q
  Eigen::MatrixXd outcome_weights;   // Q x P, rows B_q
  Eigen::VectorXd eigenvalues;       // Q, raw eta_q before clipping
  Eigen::MatrixXd eigenvectors;      // P x Q, columns v_q (sign-adjusted)
  int pairs = 0;                     // Q
  std::vector<bool> identified;
  std::vector<bool> near_multiplicity;  // eigenvalue gap below 1e-10
};

namespace detail {

inline void require_square(const Eigen::MatrixXd& m, const char* what) {
  if (m.rows() != m.cols()) throw DimensionError(std::string(what) + " must be square");
}

inline void require_symmetric(const Eigen::MatrixXd& m, double tol, const char* what) {
  require_square(m, what);
  const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  if (asym > tol * std::max(1.0, m.cwiseAbs().maxCoeff())) {
    throw MatrixError(std::string(what) + " is not symmetric (asymmetry " + std::to_string(asym) +
                      ")");
  }
}

inline Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& m) {
  return 0.5 * (m + m.transpose());
}

}  // namespace detail

/// Sample covariance bundle of fitted cepstra and outcomes.
/// gamma_z must be well conditioned; a condition number above 1e12 signals
/// collinear outcomes and raises SingularOutcomeError.
inline CovarianceBundle covariances(const Eigen::MatrixXd& fhat, const OutcomeMatrix& z,
                                    double rank_tol = 1e-10) {
  const int n = static_cast<int>(fhat.rows());
  const int p = z.variable_count();
  if (z.subject_count() != n) throw DimensionError("cepstra and outcomes disagree on N");
  if (n < 2) throw DimensionError("need at least 2 subjects");
  if (n < p + 1) throw DimensionError("need N >= P+1 subjects for the outcome covariance");

  CovarianceBundle b;
  b.mean_f = fhat.colwise().mean().transpose();
  b.mean_z = z.values.colwise().mean().transpose();
  const Eigen::MatrixXd fc = fhat.rowwise() - b.mean_f.transpose();
  const Eigen::MatrixXd zc = z.values.rowwise() - b.mean_z.transpose();
  const double denom = n - 1.0;
  b.gamma_f = detail::symmetrize((fc.transpose() * fc) / denom);
  b.gamma_fz = (fc.transpose() * zc) / denom;
  b.gamma_z = detail::symmetrize((zc.transpose() * zc) / denom);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> zeig(b.gamma_z);
  if (zeig.info() != Eigen::Success) throw MatrixError("outcome covariance eigensolve failed");
  const double zmax = zeig.eigenvalues().maxCoeff();
  const double zmin = zeig.eigenvalues().minCoeff();
  if (!(zmin > 0.0) || zmax / zmin > 1e12) {
    throw SingularOutcomeError(
        "outcome covariance is numerically singular; consider standardizing or removing "
        "collinear outcome variables");
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> feig(b.gamma_f);
  if (feig.info() != Eigen::Success) throw MatrixError("cepstral covariance eigensolve failed");
  const double fmax = feig.eigenvalues().maxCoeff();
  b.rank_f = 0;
  if (fmax > 0.0) {
    for (Eigen::Index i = 0; i < feig.eigenvalues().size(); ++i) {
      if (feig.eigenvalues()(i) >= rank_tol * fmax) ++b.rank_f;
    }
  }
  return b;
}

/// Symmetric inverse square root of an SPD matrix: R with R m R = I.
inline Eigen::MatrixXd sym_inverse_sqrt(const Eigen::MatrixXd& m) {
  detail::require_symmetric(m, 1e-10, "matrix");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(detail::symmetrize(m));
  if (eig.info() != Eigen::Success) throw MatrixError("eigensolve failed");
  if (!(eig.eigenvalues().minCoeff() > 0.0)) {
    throw MatrixError("matrix is not positive definite");
  }
  const Eigen::ArrayXd inv_root = eig.eigenvalues().array().sqrt().inverse();
  return detail::symmetrize(eig.eigenvectors() * inv_root.matrix().asDiagonal() *
                            eig.eigenvectors().transpose());
}

/// Moore-Penrose inverse of a symmetric PSD matrix; eigenvalues below
/// rel_tol * lambda_max count as zero. Returns the inverse and the rank.
inline std::pair<Eigen::MatrixXd, int> pseudo_inverse(const Eigen::MatrixXd& m,
                                                      double rel_tol = 1e-10) {
  detail::require_symmetric(m, 1e-10, "matrix");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(detail::symmetrize(m));
  if (eig.info() != Eigen::Success) throw MatrixError("eigensolve failed");
  const double lmax = eig.eigenvalues().maxCoeff();
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(m.rows());
  int rank = 0;
  if (lmax > 0.0) {
    for (Eigen::Index i = 0; i < inv.size(); ++i) {
      if (eig.eigenvalues()(i) >= rel_tol * lmax) {
        inv(i) = 1.0 / eig.eigenvalues()(i);
        ++rank;
      }
    }
  }
  Eigen::MatrixXd result = detail::symmetrize(eig.eigenvectors() * inv.asDiagonal() *
                                              eig.eigenvectors().transpose());
  return {std::move(result), rank};
}

/// Plug-in CCA: eta_q and v_q are the eigenpairs of the P x P matrix
///   Gz^{-1/2} Gfz' Gf^- Gfz Gz^{-1/2},
/// rho_q = sqrt(eta_q), a_q = rho_q^{-1} Gf^- Gfz Gz^{-1/2} v_q, and
/// B_q = Gz^{-1/2} v_q. Each pair's sign is fixed so the largest-magnitude
/// coordinate of B_q is positive.
inline CcaResult cepstral_cca(const CovarianceBundle& bundle, double rank_tol = 1e-10) {
  const int K = static_cast<int>(bundle.gamma_f.rows());
  const int P = static_cast<int>(bundle.gamma_z.rows());
  if (bundle.gamma_fz.rows() != K || bundle.gamma_fz.cols() != P) {
    throw DimensionError("cross-covariance shape does not match gamma_f / gamma_z");
  }

  const Eigen::MatrixXd z_root = sym_inverse_sqrt(bundle.gamma_z);
  auto [f_pinv, rank_f] = pseudo_inverse(bundle.gamma_f, rank_tol);
  const int Q = std::min(P, rank_f);
  if (Q < 1) throw DegenerateCcaError("cepstral covariance has rank zero; no canonical pair");

  const Eigen::MatrixXd cross = bundle.gamma_fz * z_root;  // K x P
  const Eigen::MatrixXd target = detail::symmetrize(cross.transpose() * f_pinv * cross);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(target);
  if (eig.info() != Eigen::Success) throw MatrixError("canonical eigensolve failed");

  // Descending order; diagnostics reject eigenvalues escaping [0,1] by > 1e-6.
  Eigen::VectorXd eta(P);
  Eigen::MatrixXd vecs(P, P);
  for (int q = 0; q < P; ++q) {
    eta(q) = eig.eigenvalues()(P - 1 - q);
    vecs.col(q) = eig.eigenvectors().col(P - 1 - q);
    if (eta(q) < -1e-6 || eta(q) > 1.0 + 1e-6) {
      throw MatrixError("canonical eigenvalue " + std::to_string(eta(q)) +
                        " escapes [0,1] beyond tolerance");
    }
  }

  CcaResult res;
  res.pairs = Q;
  res.correlations.resize(Q);
  res.eigenvalues = eta.head(Q);
  res.eigenvectors.resize(P, Q);
  res.cepstral_weights.resize(Q, K);
  res.outcome_weights.resize(Q, P);
  res.identified.resize(Q);
  res.near_multiplicity.resize(Q);

  const Eigen::MatrixXd a_core = f_pinv * cross;  // K x P
  for (int q = 0; q < Q; ++q) {
    const double clipped = std::clamp(eta(q), 0.0, 1.0);
    const double rho = std::sqrt(clipped);
    res.correlations(q) = rho;
    res.identified[q] = rho > 1e-8;

    Eigen::VectorXd v = vecs.col(q);
    Eigen::VectorXd b = z_root * v;
    Eigen::VectorXd a = a_core * v;
    if (res.identified[q]) a /= rho;

    // Joint sign flip keeps cov(a'f, B'Z) = +rho.
    Eigen::Index imax = 0;
    b.cwiseAbs().maxCoeff(&imax);
    if (b(imax) < 0.0) {
      b = -b;
      a = -a;
      v = -v;
    }
    res.eigenvectors.col(q) = v;
    res.outcome_weights.row(q) = b.transpose();
    res.cepstral_weights.row(q) = a.transpose();

    const bool gap_above = q > 0 && std::abs(eta(q - 1) - eta(q)) < 1e-10;
    const bool gap_below = q + 1 < P && std::abs(eta(q) - eta(q + 1)) < 1e-10;
    res.near_multiplicity[q] = gap_above || gap_below;
  }
  return res;
}

/// Log-spectral weight function A_q(omega) = a_q0 + sum a_qk sqrt(2) cos(2 pi omega k).
inline Eigen::VectorXd log_spectral_weight(const Eigen::VectorXd& cepstral_weight,
                                           const Eigen::VectorXd& grid) {
  return cosine_series(cepstral_weight, grid);
}

/// Per-subject canonical variables for each pair, computed on mean-centered data.
struct CanonicalScores {
  Eigen::MatrixXd cepstral;  // N x Q, a_q' (f_j - mean f)
  Eigen::MatrixXd outcome;   // N x Q, B_q' (Z_j - mean Z)
};

inline CanonicalScores canonical_scores(const CcaResult& result, const Eigen::MatrixXd& fhat,
                                        const OutcomeMatrix& z) {
  if (fhat.cols() != result.cepstral_weights.cols()) {
    throw DimensionError("cepstra width does not match CCA weights");
  }
  if (z.variable_count() != result.outcome_weights.cols()) {
    throw DimensionError("outcome width does not match CCA weights");
  }
  if (fhat.rows() != z.values.rows()) throw DimensionError("cepstra and outcomes disagree on N");

  const Eigen::MatrixXd fc = fhat.rowwise() - fhat.colwise().mean();
  const Eigen::MatrixXd zc = z.values.rowwise() - z.values.colwise().mean();
  CanonicalScores scores;
  scores.cepstral = fc * result.cepstral_weights.transpose();
  scores.outcome = zc * result.outcome_weights.transpose();
  return scores;
}

}  // namespace cepcca
