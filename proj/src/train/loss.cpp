#include "smart/train/loss.hpp"

#include <cmath>

namespace smart::train {

using nn::Var;

Var focal_loss(const Var& logits, const nn::Tensor& targets, double alpha,
               double gamma) {
  if (!logits->value.same_shape(targets))
    throw InputError("focal_loss: logits/targets shape mismatch");
  Var p = nn::sigmoid(logits);
  Var one_m_p = nn::add_const(nn::scale(p, -1.0), 1.0);
  Var pos = nn::scale(nn::mul(nn::pow_const(one_m_p, gamma),
                              nn::scale(nn::log_op(p), -1.0)),
                      alpha);
  Var neg = nn::scale(nn::mul(nn::pow_const(p, gamma),
                              nn::scale(nn::log_op(one_m_p), -1.0)),
                      1.0 - alpha);
  nn::Tensor inv = targets;
  for (auto& v : inv.data) v = 1.0 - v;
  return nn::add(nn::mul(nn::constant(targets), pos),
                 nn::mul(nn::constant(inv), neg));
}

LossResult compute_losses(const std::vector<model::LayerOutput>& layers,
                          const GtTargets& gt, const LossWeights& w) {
  if (layers.empty()) throw InputError("compute_losses: no decoder layers");
  LossResult out;
  out.report.weights = w;
  Var total_acc;
  for (std::size_t li = 0; li < layers.size(); ++li) {
    const auto& lay = layers[li];
    for (const Var* v : {&lay.cls_logits, &lay.reg_norm, &lay.topo_logits})
      for (double x : (*v)->value.data)
        if (!std::isfinite(x))
          throw IntegrityError("non-finite decoder output in loss computation");

    const long n = lay.cls_logits->value.rows();
    auto m = match(lay.cls_logits->value, lay.reg_norm->value, gt, w.w_cls, w.w_reg);
    const long n_pairs = long(m.pairs.size());

    // classification: matched queries are positives
    nn::Tensor cls_t({n, 1});
    for (auto [i, j] : m.pairs) cls_t.at(i, 0) = 1.0;
    Var l_cls = nn::scale(
        nn::sum(focal_loss(lay.cls_logits, cls_t, w.focal_alpha, w.focal_gamma)),
        1.0 / double(std::max(1l, n_pairs)));

    // regression: mean L1 over matched normalized point sets
    Var l_reg;
    if (n_pairs == 0) {
      l_reg = nn::constant(nn::Tensor::scalar(0.0));
    } else {
      std::vector<Var> pred_rows;
      nn::Tensor gt_rows({n_pairs, gt.points_norm.cols()});
      for (long k = 0; k < n_pairs; ++k) {
        pred_rows.push_back(nn::slice_rows(lay.reg_norm, m.pairs[std::size_t(k)].first, 1));
        for (long c = 0; c < gt.points_norm.cols(); ++c)
          gt_rows.at(k, c) = gt.points_norm.at(m.pairs[std::size_t(k)].second, c);
      }
      l_reg = nn::mean(
          nn::abs_op(nn::sub(nn::concat_rows(pred_rows), nn::constant(gt_rows))));
    }

    // topology: matched-pair adjacency as positives, everything else negative
    nn::Tensor topo_t({n, n});
    std::vector<long> pred_to_gt(std::size_t(n), -1);
    for (auto [i, j] : m.pairs) pred_to_gt[std::size_t(i)] = j;
    long positives = 0;
    for (long i = 0; i < n; ++i)
      for (long j = 0; j < n; ++j) {
        const long gi = pred_to_gt[std::size_t(i)], gj = pred_to_gt[std::size_t(j)];
        if (gi >= 0 && gj >= 0 &&
            gt.adjacency[std::size_t(gi * gt.n_gt + gj)] != 0) {
          topo_t.at(i, j) = 1.0;
          ++positives;
        }
      }
    Var l_top = nn::scale(
        nn::sum(focal_loss(lay.topo_logits, topo_t, w.focal_alpha, w.focal_gamma)),
        1.0 / double(std::max(1l, positives)));

    Var layer_total = nn::add(
        nn::add(nn::scale(l_cls, w.w_cls), nn::scale(l_reg, w.w_reg)),
        nn::scale(l_top, w.w_top));
    total_acc = total_acc ? nn::add(total_acc, layer_total) : layer_total;
    out.report.cls += l_cls->value[0];
    out.report.reg += l_reg->value[0];
    out.report.top += l_top->value[0];
    if (li + 1 == layers.size()) out.final_match = m;
  }
  const double inv_layers = 1.0 / double(layers.size());
  out.total = nn::scale(total_acc, inv_layers);
  out.report.cls *= inv_layers;
  out.report.reg *= inv_layers;
  out.report.top *= inv_layers;
  out.report.total = w.w_cls * out.report.cls + w.w_reg * out.report.reg +
                     w.w_top * out.report.top;
  return out;
}

}  // namespace smart::train
