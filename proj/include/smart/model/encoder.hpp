#pragma once

#include <array>
#include <string>
#include <vector>

#include "smart/geo/image.hpp"
#include "smart/geo/sdmap.hpp"
#include "smart/nn/modules.hpp"

namespace smart::model {

struct EncoderConfig {
  long channels = 256;       // C
  long max_polylines = 64;   // m'
  long n_points = 11;        // N
  long sin_dims = 32;        // d per scalar coordinate, even
  long encoder_layers = 6;
  long heads = 8;
  std::vector<long> backbone_widths = {32, 64, 128, 256};  // 4 stages
  double freq_base = 10000.0;
  long grid_rows = 200;  // H_B
  long grid_cols = 100;  // W_B
  long sat_rows = 500;
  long sat_cols = 250;
  long ffn_hidden = 0;  // 0 -> 2*channels

  void validate() const;
  long ffn() const { return ffn_hidden > 0 ? ffn_hidden : 2 * channels; }
  json to_json() const;
  static EncoderConfig from_json(const json& j);
};

// d values per scalar: pairs [sin(v w_k), cos(v w_k)], w_k = base^(-2k/d).
std::vector<double> sinusoidal_embed(double v, long d, double base);

// Fused BEV prior feature map with frame metadata; the export unit.
struct PriorGrid {
  nn::Tensor grid;  // [grid_rows*grid_cols, channels], row-major over (row, col)
  long rows = 0, cols = 0;
  geo::GeoPose pose;
  geo::Extent extent;
  bool sd_skipped = false;

  void save(const std::string& path) const;  // binary + "<path>.json" sidecar
  static PriorGrid load(const std::string& path);
};

// Rounds every entry through IEEE float32. Applied at the export/inference
// boundary so a decoded export matches direct inference bit for bit.
void quantize_f32(nn::Tensor& t);

class PriorEncoder {
 public:
  PriorEncoder(const EncoderConfig& cfg, nn::ParamStore& ps, Rng& rng);

  struct SDEncoding {
    nn::Var features;  // [m', C]
    nn::Tensor mask;   // [m'] 0/1 validity
    std::vector<std::string> warnings;
  };
  SDEncoding encode_sd(const geo::SDMap& sd) const;

  struct SatEncoding {
    nn::Var features;  // [sum H_f*W_f, C], levels concatenated coarse->fine
    std::vector<std::array<long, 2>> level_shapes;  // coarse->fine
  };
  SatEncoding encode_satellite(const geo::SatelliteImage& sat) const;

  struct BevPrior {
    nn::Var grid;  // [grid_rows*grid_cols, C]
    bool sd_skipped = false;
  };
  BevPrior fuse_bev(const SDEncoding& sd, const SatEncoding& sat) const;

  const EncoderConfig& config() const { return cfg_; }

 private:
  EncoderConfig cfg_;
  nn::Linear sd_in_;
  std::vector<nn::AttentionBlock> sd_blocks_;
  nn::Conv stem_;
  std::vector<nn::Conv> down_, res_;
  std::vector<nn::Linear> level_proj_;  // coarse->fine
  nn::Var level_emb_;                   // [3, C]
  nn::Var bev_emb_;                     // [grid_rows*grid_cols, C]
  nn::Var pos_row_, pos_col_;           // [grid_rows, C/2], [grid_cols, C/2]
  nn::AttentionBlock fuse_sd_, fuse_sat_;
};

}  // namespace smart::model
