#pragma once

#include <ostream>
#include <vector>

#include <json.hpp>

#include "cepcca/cca.hpp"
#include "cepcca/csv.hpp"
#include "cepcca/simulate.hpp"

namespace cepcca {

inline nlohmann::json to_json(const Eigen::VectorXd& v) {
  nlohmann::json arr = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

inline nlohmann::json to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

inline nlohmann::json cca_result_to_json(const CcaResult& res) {
  nlohmann::json j;
  j["pairs"] = res.pairs;
  j["correlations"] = to_json(res.correlations);
  j["eigenvalues"] = to_json(res.eigenvalues);
  j["cepstral_weights"] = to_json(res.cepstral_weights);
  j["outcome_weights"] = to_json(res.outcome_weights);
  j["identified"] = res.identified;
  j["near_multiplicity"] = res.near_multiplicity;
  return j;
}

inline nlohmann::json design_to_json(const SimulationDesign& d) {
  nlohmann::json j;
  j["subjects"] = d.subjects;
  j["series_length"] = d.series_length;
  j["replicates"] = d.replicates;
  j["base_cepstrum"] = to_json(d.base_cepstrum);
  j["latent_sd"] = d.latent_sd;
  j["outcome_variances"] = to_json(d.outcome_variances);
  nlohmann::json cross = nlohmann::json::array();
  for (const auto& cc : d.cross_correlations) {
    cross.push_back({{"cepstral_index", cc.cepstral_index},
                     {"outcome_index", cc.outcome_index},
                     {"correlation", cc.correlation}});
  }
  j["cross_correlations"] = cross;
  j["seed"] = d.seed;
  j["oversample"] = d.oversample;
  return j;
}

inline nlohmann::json report_to_json(const SimulationReport& r) {
  nlohmann::json j;
  j["design"] = design_to_json(r.design);
  j["order_mode"] = r.order_mode;
  if (r.order_mode == "fixed") j["fixed_order"] = r.fixed_order;
  j["k_min"] = r.k_min;
  j["k_max"] = r.k_max;
  j["replicates_requested"] = r.replicates_requested;
  j["replicates_completed"] = r.replicates_completed;
  nlohmann::json failures = nlohmann::json::array();
  for (const auto& f : r.failures) {
    failures.push_back({{"replicate", f.replicate}, {"reason", f.reason}});
  }
  j["failures"] = failures;
  nlohmann::json counts = nlohmann::json::object();
  for (const auto& [k, c] : r.selected_order_counts) counts[std::to_string(k)] = c;
  j["selected_order_counts"] = counts;
  nlohmann::json metrics = nlohmann::json::object();
  for (const auto& m : r.metrics) {
    metrics[m.name] = {{"mean_x100", m.mean_x100}, {"sd_x100", m.sd_x100}};
  }
  j["metrics"] = metrics;
  return j;
}

/// Error-study summary table: one row per metric, mean and sd of the squared
/// error scaled by 100.
inline void write_report_csv(const SimulationReport& r, std::ostream& out) {
  out << "metric,mean_x100,sd_x100\n";
  for (const auto& m : r.metrics) {
    out << m.name << ',' << csv::format(m.mean_x100) << ',' << csv::format(m.sd_x100) << "\n";
  }
}

inline void write_raw_errors_csv(const SimulationReport& r, std::ostream& out) {
  out << "replicate";
  for (const char* name : SquaredErrors::names()) out << ',' << name;
  out << "\n";
  for (std::size_t i = 0; i < r.raw.size(); ++i) {
    out << r.raw_replicates[i];
    for (double v : r.raw[i]) out << ',' << csv::format(v);
    out << "\n";
  }
}

}  // namespace cepcca
