#include "smart/train/matcher.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace smart::train {

GtTargets make_targets(const scene::LaneGraph& gt, const geo::Extent& extent,
                       double z_min, double z_max) {
  GtTargets t;
  t.n_gt = gt.size();
  t.adjacency = gt.adjacency;
  const long np = gt.n_points;
  t.points_norm = nn::Tensor({t.n_gt, np * 3});
  const double fx = extent.forward_m, fy = extent.lateral_m;
  const double m = model::kRegMargin, span = 1.0 - 2.0 * model::kRegMargin;
  auto norm = [&](double frac) { return std::clamp(m + span * frac, 0.0, 1.0); };
  for (long i = 0; i < t.n_gt; ++i)
    for (long k = 0; k < np; ++k) {
      const auto& p = gt.lanes[std::size_t(i)].points[std::size_t(k)];
      t.points_norm.at(i, k * 3 + 0) = norm((p[0] + fx / 2.0) / fx);
      t.points_norm.at(i, k * 3 + 1) = norm((p[1] + fy / 2.0) / fy);
      t.points_norm.at(i, k * 3 + 2) = norm((p[2] - z_min) / (z_max - z_min));
    }
  return t;
}

namespace {

// Shortest-augmenting-path assignment with potentials; rows <= cols.
std::vector<long> assign_rows(const nn::Tensor& a) {
  const long n = a.rows(), m = a.cols();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(std::size_t(n + 1), 0.0), v(std::size_t(m + 1), 0.0);
  std::vector<long> p(std::size_t(m + 1), 0), way(std::size_t(m + 1), 0);
  for (long i = 1; i <= n; ++i) {
    p[0] = i;
    long j0 = 0;
    std::vector<double> minv(std::size_t(m + 1), inf);
    std::vector<char> used(std::size_t(m + 1), 0);
    do {
      used[std::size_t(j0)] = 1;
      const long i0 = p[std::size_t(j0)];
      double delta = inf;
      long j1 = -1;
      for (long j = 1; j <= m; ++j) {
        if (used[std::size_t(j)]) continue;
        const double cur = a.at(i0 - 1, j - 1) - u[std::size_t(i0)] - v[std::size_t(j)];
        if (cur < minv[std::size_t(j)]) {
          minv[std::size_t(j)] = cur;
          way[std::size_t(j)] = j0;
        }
        if (minv[std::size_t(j)] < delta) {
          delta = minv[std::size_t(j)];
          j1 = j;
        }
      }
      for (long j = 0; j <= m; ++j) {
        if (used[std::size_t(j)]) {
          u[std::size_t(p[std::size_t(j)])] += delta;
          v[std::size_t(j)] -= delta;
        } else {
          minv[std::size_t(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[std::size_t(j0)] != 0);
    do {
      const long j1 = way[std::size_t(j0)];
      p[std::size_t(j0)] = p[std::size_t(j1)];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<long> row_to_col(std::size_t(n), -1);
  for (long j = 1; j <= m; ++j)
    if (p[std::size_t(j)] != 0) row_to_col[std::size_t(p[std::size_t(j)] - 1)] = j - 1;
  return row_to_col;
}

}  // namespace

std::vector<std::pair<long, long>> solve_assignment(const nn::Tensor& cost) {
  const long n = cost.rows(), m = cost.cols();
  std::vector<std::pair<long, long>> pairs;
  if (n == 0 || m == 0) return pairs;
  if (n <= m) {
    auto rc = assign_rows(cost);
    for (long i = 0; i < n; ++i) pairs.emplace_back(i, rc[std::size_t(i)]);
  } else {
    nn::Tensor t({m, n});
    for (long i = 0; i < n; ++i)
      for (long j = 0; j < m; ++j) t.at(j, i) = cost.at(i, j);
    auto rc = assign_rows(t);
    for (long j = 0; j < m; ++j) pairs.emplace_back(rc[std::size_t(j)], j);
    std::sort(pairs.begin(), pairs.end());
  }
  return pairs;
}

MatchResult match(const nn::Tensor& cls_logits, const nn::Tensor& reg_norm,
                  const GtTargets& gt, double w_cls, double w_reg) {
  const long n = reg_norm.rows();
  const long p3 = reg_norm.cols();
  MatchResult res;
  if (gt.n_gt == 0) {
    for (long i = 0; i < n; ++i) res.unmatched_predictions.push_back(i);
    return res;
  }
  if (gt.points_norm.cols() != p3)
    throw InputError("match: prediction and ground-truth point widths differ");
  nn::Tensor cost({n, gt.n_gt});
  for (long i = 0; i < n; ++i) {
    const double conf = 1.0 / (1.0 + std::exp(-cls_logits[i]));
    for (long j = 0; j < gt.n_gt; ++j) {
      double l1 = 0.0;
      for (long k = 0; k < p3; ++k)
        l1 += std::fabs(reg_norm.at(i, k) - gt.points_norm.at(j, k));
      // tiny index term implements the documented lower-index tie-break
      cost.at(i, j) = w_cls * (-conf) + w_reg * (l1 / double(p3)) + 1e-12 * double(i);
    }
  }
  res.pairs = solve_assignment(cost);
  std::vector<char> matched(std::size_t(n), 0);
  for (auto [i, j] : res.pairs) matched[std::size_t(i)] = 1;
  for (long i = 0; i < n; ++i)
    if (!matched[std::size_t(i)]) res.unmatched_predictions.push_back(i);
  return res;
}

}  // namespace smart::train
