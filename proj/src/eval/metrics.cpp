#include "smart/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

namespace smart::eval {

void MetricConfig::validate() const {
  if (frechet_thresholds.empty())
    throw InputError("MetricConfig: no thresholds");
  double prev = 0.0;
  for (double t : frechet_thresholds) {
    if (t <= prev) throw InputError("MetricConfig: thresholds must be positive ascending");
    prev = t;
  }
  if (topology_gate <= 0.0) throw InputError("MetricConfig: topology gate must be positive");
}

json MetricConfig::to_json() const {
  return json{{"frechet_thresholds", frechet_thresholds},
              {"topology_gate", topology_gate}};
}

MetricConfig MetricConfig::from_json(const json& j) {
  MetricConfig c;
  if (j.contains("frechet_thresholds"))
    c.frechet_thresholds = j.at("frechet_thresholds").get<std::vector<double>>();
  c.topology_gate = j.value("topology_gate", c.topology_gate);
  c.validate();
  return c;
}

double discrete_frechet(const std::vector<std::array<double, 3>>& a,
                        const std::vector<std::array<double, 3>>& b) {
  if (a.empty() || b.empty())
    throw InputError("discrete_frechet: empty polyline");
  const std::size_t n = a.size(), m = b.size();
  auto dist = [&](std::size_t i, std::size_t j) {
    const double dx = a[i][0] - b[j][0], dy = a[i][1] - b[j][1], dz = a[i][2] - b[j][2];
    return std::sqrt(dx * dx + dy * dy + dz * dz);
  };
  std::vector<double> prev(m, 0.0), cur(m, 0.0);
  for (std::size_t j = 0; j < m; ++j)
    prev[j] = std::max(j == 0 ? 0.0 : prev[j - 1], dist(0, j));
  for (std::size_t i = 1; i < n; ++i) {
    cur[0] = std::max(prev[0], dist(i, 0));
    for (std::size_t j = 1; j < m; ++j)
      cur[j] = std::max(std::min({prev[j], cur[j - 1], prev[j - 1]}), dist(i, j));
    std::swap(prev, cur);
  }
  return prev[m - 1];
}

namespace {

// pairwise Fréchet distances, [n_pred][n_gt]
std::vector<std::vector<double>> frechet_matrix(const scene::LaneGraph& pred,
                                                const scene::LaneGraph& gt) {
  std::vector<std::vector<double>> d(std::size_t(pred.size()));
  for (long i = 0; i < pred.size(); ++i) {
    d[std::size_t(i)].resize(std::size_t(gt.size()));
    for (long j = 0; j < gt.size(); ++j)
      d[std::size_t(i)][std::size_t(j)] = discrete_frechet(
          pred.lanes[std::size_t(i)].points, gt.lanes[std::size_t(j)].points);
  }
  return d;
}

// predictions in confidence-descending order (ties: lower index)
std::vector<long> confidence_order(const scene::LaneGraph& pred) {
  std::vector<long> order;
  for (long i = 0; i < pred.size(); ++i) order.push_back(i);
  std::stable_sort(order.begin(), order.end(), [&](long a, long b) {
    return pred.lanes[std::size_t(a)].confidence > pred.lanes[std::size_t(b)].confidence;
  });
  return order;
}

// one-to-one greedy match within tau; returns pred -> gt (-1 unmatched)
std::vector<long> greedy_match(const scene::LaneGraph& pred,
                               const scene::LaneGraph& gt,
                               const std::vector<std::vector<double>>& d,
                               double tau) {
  std::vector<long> pred_to_gt(std::size_t(pred.size()), -1);
  std::vector<char> gt_used(std::size_t(gt.size()), 0);
  for (long i : confidence_order(pred)) {
    long best = -1;
    double best_d = tau;
    for (long j = 0; j < gt.size(); ++j) {
      if (gt_used[std::size_t(j)]) continue;
      const double dj = d[std::size_t(i)][std::size_t(j)];
      if (dj <= best_d && (best == -1 || dj < best_d)) {
        best = j;
        best_d = dj;
      }
    }
    if (best >= 0) {
      pred_to_gt[std::size_t(i)] = best;
      gt_used[std::size_t(best)] = 1;
    }
  }
  return pred_to_gt;
}

// all-point-interpolated AP over a ranked (already sorted) TP/FP list
double average_precision(const std::vector<char>& tp_ranked, long total_positives) {
  if (total_positives <= 0) return 0.0;
  const std::size_t n = tp_ranked.size();
  std::vector<double> precision(n, 0.0);
  long tp = 0;
  for (std::size_t k = 0; k < n; ++k) {
    if (tp_ranked[k]) ++tp;
    precision[k] = double(tp) / double(k + 1);
  }
  // running max from the right = interpolated precision
  for (std::size_t k = n; k-- > 1;)
    precision[k - 1] = std::max(precision[k - 1], precision[k]);
  double ap = 0.0;
  for (std::size_t k = 0; k < n; ++k)
    if (tp_ranked[k]) ap += precision[k] / double(total_positives);
  return ap;
}

}  // namespace

double det_l(const std::vector<scene::LaneGraph>& predictions,
             const std::vector<scene::LaneGraph>& gts, const MetricConfig& cfg) {
  cfg.validate();
  if (predictions.size() != gts.size())
    throw InputError("det_l: scene count mismatch");
  std::vector<std::vector<std::vector<double>>> dists;
  long total_gt = 0;
  for (std::size_t s = 0; s < gts.size(); ++s) {
    dists.push_back(frechet_matrix(predictions[s], gts[s]));
    total_gt += gts[s].size();
  }
  double ap_sum = 0.0;
  for (double tau : cfg.frechet_thresholds) {
    struct Det {
      double conf;
      long scene, idx;
      char tp;
    };
    std::vector<Det> pool;
    for (std::size_t s = 0; s < gts.size(); ++s) {
      auto p2g = greedy_match(predictions[s], gts[s], dists[s], tau);
      for (long i = 0; i < predictions[s].size(); ++i)
        pool.push_back({predictions[s].lanes[std::size_t(i)].confidence, long(s), i,
                        char(p2g[std::size_t(i)] >= 0)});
    }
    std::sort(pool.begin(), pool.end(), [](const Det& a, const Det& b) {
      if (a.conf != b.conf) return a.conf > b.conf;
      if (a.scene != b.scene) return a.scene < b.scene;
      return a.idx < b.idx;
    });
    std::vector<char> ranked;
    for (const auto& d : pool) ranked.push_back(d.tp);
    ap_sum += average_precision(ranked, total_gt);
  }
  return 100.0 * ap_sum / double(cfg.frechet_thresholds.size());
}

TopResult top_ll(const std::vector<scene::LaneGraph>& predictions,
                 const std::vector<scene::LaneGraph>& gts,
                 const MetricConfig& cfg) {
  cfg.validate();
  if (predictions.size() != gts.size())
    throw InputError("top_ll: scene count mismatch");
  TopResult out;
  double ap_sum = 0.0;
  for (std::size_t s = 0; s < gts.size(); ++s) {
    const auto& gt = gts[s];
    const auto& pred = predictions[s];
    long gt_edges = 0;
    for (auto v : gt.adjacency) gt_edges += v;
    if (gt_edges == 0) {
      out.warnings.push_back("scene " + std::to_string(s) +
                             " has no ground-truth edges; excluded from TOP_ll");
      continue;
    }
    auto d = frechet_matrix(pred, gt);
    auto p2g = greedy_match(pred, gt, d, cfg.topology_gate);
    std::vector<long> g2p(std::size_t(gt.size()), -1);
    for (long i = 0; i < pred.size(); ++i)
      if (p2g[std::size_t(i)] >= 0) g2p[std::size_t(p2g[std::size_t(i)])] = i;

    for (long g = 0; g < gt.size(); ++g) {
      long successors = 0;
      for (long g2 = 0; g2 < gt.size(); ++g2) successors += gt.adj(g, g2);
      if (successors == 0) continue;
      ++out.lanes_scored;
      const long p = g2p[std::size_t(g)];
      if (p < 0) continue;  // unmatched GT lane scores zero AP
      struct Edge {
        double conf;
        long to;
        char tp;
      };
      std::vector<Edge> edges;
      for (long q = 0; q < pred.size(); ++q) {
        if (q == p || pred.adj(p, q) == 0) continue;
        const long gq = p2g[std::size_t(q)];
        if (gq < 0) continue;  // edges into unmatched predictions are ignored
        edges.push_back({pred.edge_confidence(p, q), q, char(gt.adj(g, gq))});
      }
      std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
        if (a.conf != b.conf) return a.conf > b.conf;
        return a.to < b.to;
      });
      std::vector<char> ranked;
      for (const auto& e : edges) ranked.push_back(e.tp);
      ap_sum += average_precision(ranked, successors);
    }
  }
  out.value = out.lanes_scored > 0 ? 100.0 * ap_sum / double(out.lanes_scored) : 0.0;
  return out;
}

double ols(double det_l_pct, double det_t_pct, double top_ll_pct,
           double top_lt_pct) {
  for (double v : {det_l_pct, det_t_pct, top_ll_pct, top_lt_pct})
    if (!(v >= 0.0 && v <= 100.0))
      throw InputError("ols: inputs must be percentages in [0, 100]");
  const double dl = det_l_pct / 100.0, dt = det_t_pct / 100.0;
  const double tll = top_ll_pct / 100.0, tlt = top_lt_pct / 100.0;
  return 100.0 * 0.25 * (dl + dt + std::sqrt(tll) + std::sqrt(tlt));
}

json EvalReport::to_json() const {
  json j{{"det_l", det_l},
         {"top_ll", top_ll},
         {"config", config.to_json()},
         {"per_scene", per_scene},
         {"warnings", warnings}};
  if (det_t) j["det_t"] = *det_t;
  if (top_lt) j["top_lt"] = *top_lt;
  if (ols) j["ols"] = *ols;
  return j;
}

EvalReport evaluate_dataset(const std::vector<scene::LaneGraph>& predictions,
                            const std::vector<scene::LaneGraph>& gts,
                            const MetricConfig& cfg,
                            std::optional<double> det_t,
                            std::optional<double> top_lt) {
  cfg.validate();
  if (predictions.size() != gts.size())
    throw InputError("evaluate_dataset: " + std::to_string(predictions.size()) +
                     " predictions vs " + std::to_string(gts.size()) +
                     " ground-truth scenes");
  EvalReport rep;
  rep.config = cfg;
  rep.det_l = det_l(predictions, gts, cfg);
  auto top = top_ll(predictions, gts, cfg);
  rep.top_ll = top.value;
  rep.warnings = top.warnings;
  rep.det_t = det_t;
  rep.top_lt = top_lt;
  if (det_t && top_lt) rep.ols = ols(rep.det_l, *det_t, rep.top_ll, *top_lt);
  for (std::size_t s = 0; s < gts.size(); ++s) {
    long gt_edges = 0;
    for (auto v : gts[s].adjacency) gt_edges += v;
    rep.per_scene.push_back(json{{"index", s},
                                 {"n_pred", predictions[s].size()},
                                 {"n_gt", gts[s].size()},
                                 {"n_gt_edges", gt_edges}});
  }
  return rep;
}

void write_report(const EvalReport& report, const std::string& json_path,
                  const std::string& csv_path) {
  {
    const std::string tmp = json_path + ".tmp";
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    os << report.to_json().dump(2) << "\n";
    if (!os) throw FetchError("cannot write " + tmp);
    os.close();
    std::filesystem::rename(tmp, json_path);
  }
  if (!csv_path.empty()) {
    const std::string tmp = csv_path + ".tmp";
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    os << "index,n_pred,n_gt,n_gt_edges\n";
    for (const auto& row : report.per_scene)
      os << row.at("index").get<long>() << "," << row.at("n_pred").get<long>()
         << "," << row.at("n_gt").get<long>() << ","
         << row.at("n_gt_edges").get<long>() << "\n";
    if (!os) throw FetchError("cannot write " + tmp);
    os.close();
    std::filesystem::rename(tmp, csv_path);
  }
}

}  // namespace smart::eval
