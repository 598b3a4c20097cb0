#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cepcca/csv.hpp"
#include "cepcca/errors.hpp"

namespace cepcca {

/// A panel of N subject time series, all of common length T.
/// Rows are subjects in the canonical ordering shared with OutcomeMatrix.
struct TimeSeriesPanel {
  std::vector<std::string> subjects;
  Eigen::MatrixXd series;  // N x T
  std::string sampling_note;

  int subject_count() const { return static_cast<int>(series.rows()); }
  int length() const { return static_cast<int>(series.cols()); }
};

/// N x P static outcomes aligned row-for-row with a TimeSeriesPanel.
struct OutcomeMatrix {
  std::vector<std::string> variable_names;
  Eigen::MatrixXd values;  // N x P
  bool standardized = false;

  int subject_count() const { return static_cast<int>(values.rows()); }
  int variable_count() const { return static_cast<int>(values.cols()); }
};

namespace detail {

inline void check_finite(const Eigen::MatrixXd& m, const std::string& what) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (!std::isfinite(m(r, c))) {
        throw ValueError(what + ": non-finite value at row " + std::to_string(r + 1) +
                         ", column " + std::to_string(c + 1));
      }
    }
  }
}

}  // namespace detail

/// Checks the TimeSeriesPanel invariants (N >= 2, T >= 4, finite samples).
inline void validate_panel(const TimeSeriesPanel& panel) {
  if (panel.subject_count() < 2) throw FormatError("panel needs at least 2 subjects");
  if (panel.length() < 4) throw FormatError("panel needs series length T >= 4");
  if (static_cast<int>(panel.subjects.size()) != panel.subject_count()) {
    throw DimensionError("panel subject names do not match row count");
  }
  detail::check_finite(panel.series, "series");
}

/// Checks the OutcomeMatrix invariants against its companion panel size.
inline void validate_outcomes(const OutcomeMatrix& z, int expected_subjects) {
  if (z.subject_count() != expected_subjects) {
    throw DimensionError("outcome rows do not match panel subjects");
  }
  if (z.variable_count() < 1) throw FormatError("outcomes need at least one variable");
  if (static_cast<int>(z.variable_names.size()) != z.variable_count()) {
    throw DimensionError("outcome names do not match column count");
  }
  detail::check_finite(z.values, "outcomes");
}

/// Loads a series CSV ("subject,t1,...,tT", one row per subject).
inline TimeSeriesPanel load_series_csv(const std::string& series_path) {
  const auto series_rows = csv::read_table(series_path);
  const auto& series_header = series_rows.front();
  if (series_header.size() < 2 || series_header[0] != "subject") {
    throw FormatError(series_path + ": expected header 'subject,t1,...,tT'");
  }
  const int T = static_cast<int>(series_header.size()) - 1;
  const int N = static_cast<int>(series_rows.size()) - 1;
  if (T < 4) throw FormatError(series_path + ": series length must be at least 4");
  if (N < 2) throw FormatError(series_path + ": need at least 2 subjects");

  TimeSeriesPanel panel;
  panel.series.resize(N, T);
  for (int r = 0; r < N; ++r) {
    const auto& row = series_rows[r + 1];
    if (static_cast<int>(row.size()) != T + 1) {
      throw FormatError(series_path + ": row " + std::to_string(r + 2) + " has " +
                        std::to_string(row.size() - 1) + " samples, expected " + std::to_string(T));
    }
    panel.subjects.push_back(row[0]);
    for (int c = 0; c < T; ++c) {
      const std::string where =
          series_path + " row " + std::to_string(r + 2) + " column " + std::to_string(c + 2);
      const double v = csv::parse_double(row[c + 1], where);
      if (!std::isfinite(v)) throw ValueError("non-finite value at " + where);
      panel.series(r, c) = v;
    }
  }
  std::unordered_map<std::string, int> ids;
  for (int r = 0; r < N; ++r) {
    if (!ids.emplace(panel.subjects[r], r).second) {
      throw JoinError(series_path + ": duplicated subject id '" + panel.subjects[r] + "'");
    }
  }
  validate_panel(panel);
  return panel;
}

/// Loads series and outcome CSVs together. Subject ordering is taken from
/// the series file; outcome rows are re-sorted to match it.
inline std::pair<TimeSeriesPanel, OutcomeMatrix> load_panel(const std::string& series_path,
                                                            const std::string& outcomes_path) {
  TimeSeriesPanel panel = load_series_csv(series_path);
  const int N = panel.subject_count();

  std::unordered_map<std::string, int> order;
  for (int r = 0; r < N; ++r) order.emplace(panel.subjects[r], r);

  const auto outcome_rows = csv::read_table(outcomes_path);
  const auto& outcome_header = outcome_rows.front();
  if (outcome_header.size() < 2 || outcome_header[0] != "subject") {
    throw FormatError(outcomes_path + ": expected header 'subject,<name1>,...'");
  }
  const int P = static_cast<int>(outcome_header.size()) - 1;
  if (static_cast<int>(outcome_rows.size()) - 1 != N) {
    throw JoinError(outcomes_path + ": has " + std::to_string(outcome_rows.size() - 1) +
                    " subjects, series file has " + std::to_string(N));
  }

  OutcomeMatrix z;
  z.variable_names.assign(outcome_header.begin() + 1, outcome_header.end());
  z.values.resize(N, P);
  std::vector<bool> seen(N, false);
  for (int r = 0; r < N; ++r) {
    const auto& row = outcome_rows[r + 1];
    if (static_cast<int>(row.size()) != P + 1) {
      throw FormatError(outcomes_path + ": row " + std::to_string(r + 2) + " has " +
                        std::to_string(row.size() - 1) + " values, expected " + std::to_string(P));
    }
    auto it = order.find(row[0]);
    if (it == order.end()) {
      throw JoinError(outcomes_path + ": subject '" + row[0] + "' is absent from the series file");
    }
    if (seen[it->second]) {
      throw JoinError(outcomes_path + ": duplicated subject id '" + row[0] + "'");
    }
    seen[it->second] = true;
    for (int c = 0; c < P; ++c) {
      const std::string where =
          outcomes_path + " row " + std::to_string(r + 2) + " column " + std::to_string(c + 2);
      const double v = csv::parse_double(row[c + 1], where);
      if (!std::isfinite(v)) throw ValueError("non-finite value at " + where);
      z.values(it->second, c) = v;
    }
  }

  validate_outcomes(z, N);
  return {std::move(panel), std::move(z)};
}

/// Writes the series CSV layout accepted by load_panel, bit-for-bit reproducibly.
inline void write_series_csv(const TimeSeriesPanel& panel, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write file: " + path);
  out << "subject";
  for (int t = 1; t <= panel.length(); ++t) out << ",t" << t;
  out << "\n";
  for (int r = 0; r < panel.subject_count(); ++r) {
    out << panel.subjects[r];
    for (int c = 0; c < panel.length(); ++c) out << ',' << csv::format(panel.series(r, c));
    out << "\n";
  }
}

/// Writes the outcome CSV layout accepted by load_panel.
inline void write_outcomes_csv(const OutcomeMatrix& z, const std::vector<std::string>& subjects,
                               const std::string& path) {
  if (static_cast<int>(subjects.size()) != z.subject_count()) {
    throw DimensionError("subject list does not match outcome rows");
  }
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write file: " + path);
  out << "subject";
  for (const auto& name : z.variable_names) out << ',' << name;
  out << "\n";
  for (int r = 0; r < z.subject_count(); ++r) {
    out << subjects[r];
    for (int c = 0; c < z.variable_count(); ++c) out << ',' << csv::format(z.values(r, c));
    out << "\n";
  }
}

/// Centers each outcome column and scales it to unit sample variance
/// (N-1 denominator). Idempotent up to rounding.
inline OutcomeMatrix standardize_outcomes(const OutcomeMatrix& z) {
  const int n = z.subject_count();
  const int p = z.variable_count();
  if (n < 2) throw DimensionError("standardization needs at least 2 subjects");
  OutcomeMatrix out = z;
  for (int c = 0; c < p; ++c) {
    const double mean = z.values.col(c).mean();
    const double var = (z.values.col(c).array() - mean).square().sum() / (n - 1);
    if (!(var > 0.0)) {
      throw DegenerateColumnError("outcome '" + z.variable_names[c] + "' has zero sample variance");
    }
    out.values.col(c) = (z.values.col(c).array() - mean) / std::sqrt(var);
  }
  out.standardized = true;
  return out;
}

}  // namespace cepcca
