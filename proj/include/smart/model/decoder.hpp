#pragma once

#include "smart/model/encoder.hpp"
#include "smart/scene/lane_graph.hpp"

namespace smart::model {

struct DecoderConfig {
  long layers = 6;
  long heads = 8;
  long sampling_points = 4;  // per head
  long gcn_layers = 1;       // propagation steps per decoder layer
  long n_queries = 200;      // N_L
  long n_points = 11;        // N_P per predicted lane
  double confidence_threshold = 0.3;
  double edge_threshold = 0.5;
  double z_min = -10.0, z_max = 10.0;
  long ffn_hidden = 0;  // 0 -> 2*C

  void validate() const;
  json to_json() const;
  static DecoderConfig from_json(const json& j);
};

// Multi-head multi-point deformable sampling of a value grid, before the
// output projection: per head, softmax-weighted bilinear samples at the
// reference point plus learned offsets. Returns [n_queries, C].
nn::Var deformable_attention(const nn::Var& value_grid,  // [H, W, C]
                             const nn::Var& query,       // [N, C]
                             const nn::Var& ref_px,      // [N, 2] pixel (row,col)
                             const nn::Linear& offset_lin,
                             const nn::Linear& weight_lin, long heads,
                             long points);

// One relational propagation step: q <- LN(q + A_hat q W) with
// A_hat = row-normalized(sigmoid(topo_logits) + I).
nn::Var gcn_step(const nn::Var& q, const nn::Var& topo_logits, const nn::Var& w,
                 const nn::LayerNorm& ln);

// Final (or per-layer) head outputs kept in normalized form for training.
struct LayerOutput {
  nn::Var cls_logits;   // [N_L, 1]
  nn::Var reg_norm;     // [N_L, N_P*3], sigmoid outputs in [0,1]
  nn::Var topo_logits;  // [N_L, N_L]
};

struct DecodeResult {
  std::vector<LayerOutput> layers;  // one per decoder layer, last = final
  nn::Var q_hat;                    // [N_L, C]
  long clamped_refs = 0;            // reference points pushed back into [0,1]^2
};

// Boundary margin of the normalized point frame: the ego extent maps to
// [margin, 1 - margin] so sigmoid outputs reach extent-boundary points at
// finite logits instead of saturating.
constexpr double kRegMargin = 0.1;

// Inference-form predictions in ego meters.
struct DecodedLanes {
  nn::Tensor logits;       // [N_L]
  nn::Tensor points;       // [N_L, N_P, 3]
  nn::Tensor topo_logits;  // [N_L, N_L]
};

class LaneDecoder {
 public:
  LaneDecoder(const DecoderConfig& cfg, long channels, nn::ParamStore& ps,
              Rng& rng);

  DecodeResult decode(const nn::Var& prior_grid, long grid_rows,
                      long grid_cols) const;

  // Maps the final layer's normalized outputs to ego meters.
  DecodedLanes to_decoded(const DecodeResult& res,
                          const geo::Extent& extent) const;

  const DecoderConfig& config() const { return cfg_; }

 private:
  // ref anchors the point regression: x/y logits are offsets from the
  // query's reference point, so spatially distinct queries decouple
  LayerOutput heads(const nn::Var& q, const nn::Var& ref) const;
  nn::Var topo_logits_of(const nn::Var& q) const;

  DecoderConfig cfg_;
  long channels_ = 0;
  nn::Var query_emb_;  // [N_L, C]
  nn::Var ref_logits_;  // [N_L, 2]
  struct Layer {
    nn::AttentionBlock self_attn;
    nn::Linear value, offsets, weights, out;
    nn::LayerNorm ln_cross;
    nn::FeedForward ffn;
    nn::LayerNorm ln_ffn;
    nn::Var gcn_w;
    nn::LayerNorm gcn_ln;
    nn::Linear ref_delta;
  };
  std::vector<Layer> layers_;
  nn::Mlp3 mlp_cls_, mlp_reg_, topo_q1_, topo_q2_;
  nn::Linear edge1_, edge2_;
};

// Confidence filtering into a LaneGraph: keep sigmoid(logit) >= threshold,
// edge (i,j) iff both kept and sigmoid(topo) >= edge threshold, diagonal 0.
scene::LaneGraph assemble_graph(const DecodedLanes& decoded,
                                const DecoderConfig& cfg);

}  // namespace smart::model
