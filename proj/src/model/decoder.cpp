#include "smart/model/decoder.hpp"

#include <cmath>

namespace smart::model {

using nn::Var;

void DecoderConfig::validate() const {
  if (layers <= 0 || heads <= 0 || sampling_points <= 0 || gcn_layers <= 0 ||
      n_queries <= 0 || n_points < 2)
    throw InputError("DecoderConfig: all counts must be positive");
  if (confidence_threshold <= 0.0 || confidence_threshold >= 1.0 ||
      edge_threshold <= 0.0 || edge_threshold >= 1.0)
    throw InputError("DecoderConfig: thresholds must be in (0,1)");
  if (z_max <= z_min) throw InputError("DecoderConfig: z_max must exceed z_min");
}

json DecoderConfig::to_json() const {
  return json{{"layers", layers},
              {"heads", heads},
              {"sampling_points", sampling_points},
              {"gcn_layers", gcn_layers},
              {"n_queries", n_queries},
              {"n_points", n_points},
              {"confidence_threshold", confidence_threshold},
              {"edge_threshold", edge_threshold},
              {"z_min", z_min},
              {"z_max", z_max},
              {"ffn_hidden", ffn_hidden}};
}

DecoderConfig DecoderConfig::from_json(const json& j) {
  DecoderConfig c;
  c.layers = j.value("layers", c.layers);
  c.heads = j.value("heads", c.heads);
  c.sampling_points = j.value("sampling_points", c.sampling_points);
  c.gcn_layers = j.value("gcn_layers", c.gcn_layers);
  c.n_queries = j.value("n_queries", c.n_queries);
  c.n_points = j.value("n_points", c.n_points);
  c.confidence_threshold = j.value("confidence_threshold", c.confidence_threshold);
  c.edge_threshold = j.value("edge_threshold", c.edge_threshold);
  c.z_min = j.value("z_min", c.z_min);
  c.z_max = j.value("z_max", c.z_max);
  c.ffn_hidden = j.value("ffn_hidden", c.ffn_hidden);
  c.validate();
  return c;
}

namespace {

// exact clamp to [0,1] with pass-through gradient inside the interval
Var clamp01(const Var& x) {
  return nn::sub(nn::relu(x), nn::relu(nn::add_const(x, -1.0)));
}

}  // namespace

Var gcn_step(const Var& q, const Var& topo_logits, const Var& w,
             const nn::LayerNorm& ln) {
  const long n = q->value.rows();
  nn::Tensor eye({n, n});
  for (long i = 0; i < n; ++i) eye.at(i, i) = 1.0;
  Var a = nn::add(nn::sigmoid(topo_logits), nn::constant(eye));
  Var ones_col = nn::constant(nn::Tensor({n, 1}, 1.0));
  Var ones_row = nn::constant(nn::Tensor({1, n}, 1.0));
  Var inv_rowsum = nn::pow_const(nn::matmul(a, ones_col), -1.0);  // [N,1]
  Var a_norm = nn::mul(a, nn::matmul(inv_rowsum, ones_row));
  return ln.forward(nn::add(q, nn::matmul(a_norm, nn::matmul(q, w))));
}

Var deformable_attention(const Var& value_grid, const Var& query,
                         const Var& ref_px, const nn::Linear& offset_lin,
                         const nn::Linear& weight_lin, long heads, long points) {
  const long c = value_grid->value.shape[2];
  const long dh = c / heads;
  const long n = query->value.rows();
  Var off = offset_lin.forward(query);   // [N, heads*points*2]
  Var wgt = weight_lin.forward(query);   // [N, heads*points]
  Var ones_dh = nn::constant(nn::Tensor({1, dh}, 1.0));
  std::vector<Var> head_outs;
  for (long h = 0; h < heads; ++h) {
    Var w_h = nn::softmax_rows(nn::slice_cols(wgt, h * points, points));  // [N, P]
    Var acc;
    for (long p = 0; p < points; ++p) {
      Var locs = nn::add(ref_px, nn::slice_cols(off, (h * points + p) * 2, 2));
      Var samp = nn::slice_cols(nn::bilinear_sample(value_grid, locs), h * dh, dh);
      Var weighted =
          nn::mul(samp, nn::matmul(nn::slice_cols(w_h, p, 1), ones_dh));
      acc = acc ? nn::add(acc, weighted) : weighted;
    }
    head_outs.push_back(acc);
  }
  Var out = head_outs[0];
  for (std::size_t h = 1; h < head_outs.size(); ++h)
    out = nn::concat_cols(out, head_outs[h]);
  (void)n;
  return out;
}

LaneDecoder::LaneDecoder(const DecoderConfig& cfg, long channels,
                         nn::ParamStore& ps, Rng& rng)
    : cfg_(cfg), channels_(channels) {
  cfg_.validate();
  if (channels <= 0 || channels % cfg_.heads != 0 || channels % 2 != 0)
    throw InputError("LaneDecoder: channels must be divisible by heads and by 2");
  const long ffn = cfg_.ffn_hidden > 0 ? cfg_.ffn_hidden : 2 * channels;
  query_emb_ = ps.create("dec.query", {cfg_.n_queries, channels}, rng, 0.02);
  ref_logits_ = ps.create("dec.ref", {cfg_.n_queries, 2}, rng, 1.0);
  for (long l = 0; l < cfg_.layers; ++l) {
    const std::string p = "dec.l" + std::to_string(l);
    Layer lay;
    lay.self_attn = nn::AttentionBlock(ps, p + ".self", channels, cfg_.heads, ffn, rng);
    lay.value = nn::Linear(ps, p + ".val", channels, channels, rng);
    lay.offsets = nn::Linear(ps, p + ".off", channels,
                             cfg_.heads * cfg_.sampling_points * 2, rng);
    lay.weights = nn::Linear(ps, p + ".wgt", channels,
                             cfg_.heads * cfg_.sampling_points, rng);
    lay.out = nn::Linear(ps, p + ".out", channels, channels, rng);
    lay.ln_cross = nn::LayerNorm(ps, p + ".lnc", channels);
    lay.ffn = nn::FeedForward(ps, p + ".ffn", channels, ffn, rng);
    lay.ln_ffn = nn::LayerNorm(ps, p + ".lnf", channels);
    lay.gcn_w = ps.create(p + ".gcnw", {channels, channels}, rng);
    lay.gcn_ln = nn::LayerNorm(ps, p + ".gcnln", channels);
    lay.ref_delta = nn::Linear(ps, p + ".refd", channels, 2, rng);
    layers_.push_back(std::move(lay));
  }
  mlp_cls_ = nn::Mlp3(ps, "head.cls", channels, channels, 1, rng);
  mlp_reg_ = nn::Mlp3(ps, "head.reg", channels, channels, cfg_.n_points * 3, rng);
  topo_q1_ = nn::Mlp3(ps, "head.topo1", channels, channels, channels / 2, rng);
  topo_q2_ = nn::Mlp3(ps, "head.topo2", channels, channels, channels / 2, rng);
  edge1_ = nn::Linear(ps, "head.edge1", channels, channels, rng);
  edge2_ = nn::Linear(ps, "head.edge2", channels, 1, rng);
}

Var LaneDecoder::topo_logits_of(const Var& q) const {
  const long n = q->value.rows();
  Var q1 = topo_q1_.forward(q);  // [N, C/2]
  Var q2 = topo_q2_.forward(q);
  // Theta[i,j] = concat(q1[i], q2[j]): rows repeated along a new axis
  Var theta = nn::concat_cols(nn::repeat_interleave_rows(q1, n),
                              nn::repeat_rows(q2, n));  // [N*N, C]
  Var t = edge2_.forward(nn::relu(edge1_.forward(theta)));
  return nn::reshape(t, {n, n});
}

LayerOutput LaneDecoder::heads(const Var& q, const Var& ref) const {
  LayerOutput out;
  out.cls_logits = mlp_cls_.forward(q);
  // inverse-sigmoid anchor of the reference point added to every x/y logit
  Var one_minus = nn::add_const(nn::scale(ref, -1.0), 1.0);
  Var anchor = nn::sub(nn::log_op(ref), nn::log_op(one_minus));  // [N,2]
  nn::Tensor spread({2, cfg_.n_points * 3});
  for (long k = 0; k < cfg_.n_points; ++k) {
    spread.at(0, k * 3 + 0) = 1.0;
    spread.at(1, k * 3 + 1) = 1.0;
  }
  Var anchor_full = nn::matmul(anchor, nn::constant(spread));  // [N, P3]
  out.reg_norm = nn::sigmoid(nn::add(mlp_reg_.forward(q), anchor_full));
  out.topo_logits = topo_logits_of(q);
  return out;
}

DecodeResult LaneDecoder::decode(const Var& prior_grid, long grid_rows,
                                 long grid_cols) const {
  if (prior_grid->value.rows() != grid_rows * grid_cols ||
      prior_grid->value.cols() != channels_)
    throw InputError("decode: prior grid shape mismatch");
  const long n = cfg_.n_queries;
  nn::Tensor px_scale({n, 2});
  for (long i = 0; i < n; ++i) {
    px_scale.at(i, 0) = double(grid_rows - 1);
    px_scale.at(i, 1) = double(grid_cols - 1);
  }
  Var px_scale_c = nn::constant(px_scale);
  DecodeResult res;
  Var q = query_emb_;
  Var ref = nn::sigmoid(ref_logits_);  // [N,2] in (0,1)
  for (const auto& lay : layers_) {
    q = lay.self_attn.forward_self(q);
    Var vgrid = nn::reshape(lay.value.forward(prior_grid),
                            {grid_rows, grid_cols, channels_});
    Var cross = deformable_attention(vgrid, q, nn::mul(ref, px_scale_c),
                                     lay.offsets, lay.weights, cfg_.heads,
                                     cfg_.sampling_points);
    q = lay.ln_cross.forward(nn::add(q, lay.out.forward(cross)));
    q = lay.ln_ffn.forward(nn::add(q, lay.ffn.forward(q)));
    for (long g = 0; g < cfg_.gcn_layers; ++g)
      q = gcn_step(q, topo_logits_of(q), lay.gcn_w, lay.gcn_ln);
    res.layers.push_back(heads(q, ref));
    Var delta = nn::scale(
        nn::add_const(nn::sigmoid(lay.ref_delta.forward(q)), -0.5), 0.2);
    Var moved = nn::add(ref, delta);
    for (double v : moved->value.data)
      if (v < 0.0 || v > 1.0) ++res.clamped_refs;
    ref = clamp01(moved);
  }
  res.q_hat = q;
  return res;
}

DecodedLanes LaneDecoder::to_decoded(const DecodeResult& res,
                                     const geo::Extent& extent) const {
  const auto& last = res.layers.back();
  const long n = cfg_.n_queries, np = cfg_.n_points;
  DecodedLanes d;
  d.logits = last.cls_logits->value;
  d.logits.shape = {n};
  d.topo_logits = last.topo_logits->value;
  d.points = nn::Tensor({n, np, 3});
  const double fx = extent.forward_m, fy = extent.lateral_m;
  const double span = 1.0 - 2.0 * kRegMargin;
  auto frac = [&](double u) { return (u - kRegMargin) / span; };
  for (long i = 0; i < n; ++i)
    for (long k = 0; k < np; ++k) {
      const double* v = &last.reg_norm->value.data[std::size_t(i * np * 3 + k * 3)];
      double* o = &d.points.data[std::size_t((i * np + k) * 3)];
      o[0] = frac(v[0]) * fx - fx / 2.0;
      o[1] = frac(v[1]) * fy - fy / 2.0;
      o[2] = cfg_.z_min + frac(v[2]) * (cfg_.z_max - cfg_.z_min);
    }
  return d;
}

scene::LaneGraph assemble_graph(const DecodedLanes& decoded,
                                const DecoderConfig& cfg) {
  const long n = decoded.logits.numel();
  const long np = decoded.points.shape[1];
  auto sig = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
  std::vector<long> kept;
  for (long i = 0; i < n; ++i)
    if (sig(decoded.logits[i]) >= cfg.confidence_threshold) kept.push_back(i);

  scene::LaneGraph g;
  g.n_points = np;
  for (long i : kept) {
    scene::LaneGraph::Lane lane;
    lane.confidence = sig(decoded.logits[i]);
    for (long k = 0; k < np; ++k) {
      const double* p = &decoded.points.data[std::size_t((i * np + k) * 3)];
      lane.points.push_back({p[0], p[1], p[2]});
    }
    g.lanes.push_back(std::move(lane));
  }
  const long m = g.size();
  g.adjacency.assign(std::size_t(m * m), 0);
  std::vector<double> probs(std::size_t(m * m), 0.0);
  for (long a = 0; a < m; ++a)
    for (long b = 0; b < m; ++b) {
      if (a == b) continue;  // diagonal forced 0
      const double p = sig(decoded.topo_logits.at(kept[std::size_t(a)],
                                                  kept[std::size_t(b)]));
      probs[std::size_t(a * m + b)] = p;
      if (p >= cfg.edge_threshold) g.set_adj(a, b, 1);
    }
  g.edge_probs = std::move(probs);
  return g;
}

}  // namespace smart::model
