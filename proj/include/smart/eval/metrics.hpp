#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "smart/scene/lane_graph.hpp"

namespace smart::eval {

struct MetricConfig {
  std::vector<double> frechet_thresholds = {1.0, 2.0, 3.0};  // meters, ascending
  double topology_gate = 1.5;  // meters, lane pairing gate for topology

  void validate() const;
  json to_json() const;
  static MetricConfig from_json(const json& j);
};

// Coupling-based discrete Fréchet distance over 3-D points.
double discrete_frechet(const std::vector<std::array<double, 3>>& a,
                        const std::vector<std::array<double, 3>>& b);

// Lane-detection mAP: per threshold, confidence-descending greedy one-to-one
// matching per scene, pooled PR curve with all-point interpolation; the
// returned percent averages the per-threshold APs.
double det_l(const std::vector<scene::LaneGraph>& predictions,
             const std::vector<scene::LaneGraph>& gts, const MetricConfig& cfg);

struct TopResult {
  double value = 0.0;  // percent
  std::vector<std::string> warnings;
  long lanes_scored = 0;
};

// Lane-to-lane topology score: predictions projected onto GT through the
// topology-gate Fréchet match; per GT lane with successors, AP of its
// matched prediction's outgoing edge ranking.
TopResult top_ll(const std::vector<scene::LaneGraph>& predictions,
                 const std::vector<scene::LaneGraph>& gts,
                 const MetricConfig& cfg);

// Eq: 100 * (1/4)(d_l + d_t + sqrt(t_ll) + sqrt(t_lt)), inputs percent.
double ols(double det_l_pct, double det_t_pct, double top_ll_pct,
           double top_lt_pct);

struct EvalReport {
  double det_l = 0.0;
  double top_ll = 0.0;
  std::optional<double> det_t, top_lt;  // externally supplied only
  std::optional<double> ols;            // present iff all four components are
  MetricConfig config;
  json per_scene = json::array();
  std::vector<std::string> warnings;

  json to_json() const;
};

EvalReport evaluate_dataset(const std::vector<scene::LaneGraph>& predictions,
                            const std::vector<scene::LaneGraph>& gts,
                            const MetricConfig& cfg,
                            std::optional<double> det_t = std::nullopt,
                            std::optional<double> top_lt = std::nullopt);

// report json (atomic) and, when csv_path is non-empty, a per-scene CSV
void write_report(const EvalReport& report, const std::string& json_path,
                  const std::string& csv_path = "");

}  // namespace smart::eval
