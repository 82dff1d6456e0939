#include "smart/model/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "smart/model/resample.hpp"

namespace smart::model {

using nn::Var;

void EncoderConfig::validate() const {
  if (channels <= 0 || max_polylines <= 0 || n_points < 2 || sin_dims <= 0 ||
      encoder_layers <= 0 || heads <= 0 || grid_rows <= 0 || grid_cols <= 0 ||
      sat_rows <= 0 || sat_cols <= 0 || freq_base <= 1.0)
    throw InputError("EncoderConfig: all sizes must be positive");
  if (sin_dims % 2 != 0) throw InputError("EncoderConfig.sin_dims must be even");
  if (channels % 2 != 0 || channels % heads != 0)
    throw InputError("EncoderConfig.channels must be divisible by 2 and by heads");
  if (backbone_widths.size() != 4)
    throw InputError("EncoderConfig.backbone_widths needs exactly 4 stages");
  for (long w : backbone_widths)
    if (w <= 0) throw InputError("EncoderConfig.backbone_widths must be positive");
}

json EncoderConfig::to_json() const {
  return json{{"channels", channels},
              {"max_polylines", max_polylines},
              {"n_points", n_points},
              {"sin_dims", sin_dims},
              {"encoder_layers", encoder_layers},
              {"heads", heads},
              {"backbone_widths", backbone_widths},
              {"freq_base", freq_base},
              {"grid_rows", grid_rows},
              {"grid_cols", grid_cols},
              {"sat_rows", sat_rows},
              {"sat_cols", sat_cols},
              {"ffn_hidden", ffn_hidden}};
}

EncoderConfig EncoderConfig::from_json(const json& j) {
  EncoderConfig c;
  c.channels = j.value("channels", c.channels);
  c.max_polylines = j.value("max_polylines", c.max_polylines);
  c.n_points = j.value("n_points", c.n_points);
  c.sin_dims = j.value("sin_dims", c.sin_dims);
  c.encoder_layers = j.value("encoder_layers", c.encoder_layers);
  c.heads = j.value("heads", c.heads);
  if (j.contains("backbone_widths"))
    c.backbone_widths = j.at("backbone_widths").get<std::vector<long>>();
  c.freq_base = j.value("freq_base", c.freq_base);
  c.grid_rows = j.value("grid_rows", c.grid_rows);
  c.grid_cols = j.value("grid_cols", c.grid_cols);
  c.sat_rows = j.value("sat_rows", c.sat_rows);
  c.sat_cols = j.value("sat_cols", c.sat_cols);
  c.ffn_hidden = j.value("ffn_hidden", c.ffn_hidden);
  c.validate();
  return c;
}

std::vector<double> sinusoidal_embed(double v, long d, double base) {
  std::vector<double> out(std::size_t(d), 0.0);
  for (long k = 0; k < d / 2; ++k) {
    const double omega = std::pow(base, -2.0 * double(k) / double(d));
    out[std::size_t(2 * k)] = std::sin(v * omega);
    out[std::size_t(2 * k + 1)] = std::cos(v * omega);
  }
  return out;
}

void quantize_f32(nn::Tensor& t) {
  for (double& v : t.data) v = double(float(v));
}

// ---- SMPG export ----

namespace {

constexpr char kMagic[4] = {'S', 'M', 'P', 'G'};
constexpr std::uint32_t kSmpgVersion = 1;
constexpr std::uint32_t kDtypeF32 = 0;

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v),
                        static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 |
         std::uint32_t(b[2]) << 16 | std::uint32_t(b[3]) << 24;
}

}  // namespace

void PriorGrid::save(const std::string& path) const {
  const long c = grid.cols();
  if (grid.rows() != rows * cols)
    throw InputError("PriorGrid: grid rows do not match rows*cols");
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    os.write(kMagic, 4);
    put_u32(os, kSmpgVersion);
    put_u32(os, std::uint32_t(rows));
    put_u32(os, std::uint32_t(cols));
    put_u32(os, std::uint32_t(c));
    put_u32(os, kDtypeF32);
    std::vector<float> payload(grid.data.begin(), grid.data.end());
    os.write(reinterpret_cast<const char*>(payload.data()),
             std::streamsize(payload.size() * sizeof(float)));
    if (!os) throw FetchError("cannot write " + tmp);
  }
  std::filesystem::rename(tmp, path);
  const json sidecar{{"pose", pose.to_json()},
                     {"extent", extent.to_json()},
                     {"sd_skipped", sd_skipped}};
  const std::string stmp = path + ".json.tmp";
  {
    std::ofstream os(stmp, std::ios::binary | std::ios::trunc);
    os << sidecar.dump(2) << "\n";
    if (!os) throw FetchError("cannot write " + stmp);
  }
  std::filesystem::rename(stmp, path + ".json");
}

PriorGrid PriorGrid::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IntegrityError("missing prior grid file: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw IntegrityError("bad magic in " + path);
  const std::uint32_t ver = get_u32(is);
  if (ver != kSmpgVersion)
    throw VersionError("prior grid version " + std::to_string(ver) +
                       ", expected " + std::to_string(kSmpgVersion));
  PriorGrid g;
  g.rows = long(get_u32(is));
  g.cols = long(get_u32(is));
  const long c = long(get_u32(is));
  const std::uint32_t dtype = get_u32(is);
  if (dtype != kDtypeF32) throw VersionError("unsupported prior grid dtype");
  std::vector<float> payload(std::size_t(g.rows) * std::size_t(g.cols) * std::size_t(c));
  is.read(reinterpret_cast<char*>(payload.data()),
          std::streamsize(payload.size() * sizeof(float)));
  if (!is) throw IntegrityError("truncated prior grid file: " + path);
  g.grid.shape = {g.rows * g.cols, c};
  g.grid.data.assign(payload.begin(), payload.end());
  std::ifstream side(path + ".json", std::ios::binary);
  if (!side) throw IntegrityError("missing prior grid sidecar: " + path + ".json");
  const json sc = json::parse(side);
  g.pose = geo::GeoPose::from_json(sc.at("pose"));
  g.extent = geo::Extent::from_json(sc.at("extent"));
  g.sd_skipped = sc.value("sd_skipped", false);
  return g;
}

// ---- encoder ----

PriorEncoder::PriorEncoder(const EncoderConfig& cfg, nn::ParamStore& ps, Rng& rng)
    : cfg_(cfg) {
  cfg_.validate();
  const long raw = cfg_.n_points * 2 * cfg_.sin_dims + geo::kAttributeDim;
  sd_in_ = nn::Linear(ps, "sd.in", raw, cfg_.channels, rng);
  for (long i = 0; i < cfg_.encoder_layers; ++i)
    sd_blocks_.emplace_back(ps, "sd.block" + std::to_string(i), cfg_.channels,
                            cfg_.heads, cfg_.ffn(), rng);
  const auto& w = cfg_.backbone_widths;
  stem_ = nn::Conv(ps, "sat.stem", 3, w[0], 3, 2, 1, rng);
  for (int i = 0; i < 4; ++i) {
    const long cin = i == 0 ? w[0] : w[i - 1];
    down_.emplace_back(ps, "sat.down" + std::to_string(i), cin, w[i], 3, 2, 1, rng);
    res_.emplace_back(ps, "sat.res" + std::to_string(i), w[i], w[i], 3, 1, 1, rng);
  }
  // projections ordered coarse->fine: stage 3 (stride 32), 2, 1
  for (int lvl = 0; lvl < 3; ++lvl)
    level_proj_.emplace_back(ps, "sat.lvl" + std::to_string(lvl), w[3 - lvl],
                             cfg_.channels, rng);
  level_emb_ = ps.create("sat.level_emb", {3, cfg_.channels}, rng, 0.02);
  bev_emb_ = ps.create("fuse.bev", {cfg_.grid_rows * cfg_.grid_cols, cfg_.channels},
                       rng, 0.02);
  pos_row_ = ps.create("fuse.pos_row", {cfg_.grid_rows, cfg_.channels / 2}, rng, 0.02);
  pos_col_ = ps.create("fuse.pos_col", {cfg_.grid_cols, cfg_.channels / 2}, rng, 0.02);
  fuse_sd_ = nn::AttentionBlock(ps, "fuse.sd", cfg_.channels, cfg_.heads, cfg_.ffn(), rng);
  fuse_sat_ = nn::AttentionBlock(ps, "fuse.sat", cfg_.channels, cfg_.heads, cfg_.ffn(), rng);
}

PriorEncoder::SDEncoding PriorEncoder::encode_sd(const geo::SDMap& sd) const {
  SDEncoding out;
  for (const auto& p : sd.polylines)
    for (const auto& pt : p.points)
      if (!std::isfinite(pt[0]) || !std::isfinite(pt[1]))
        throw InputError("encode_sd: non-finite polyline coordinate");

  std::vector<std::size_t> keep(sd.polylines.size());
  for (std::size_t i = 0; i < keep.size(); ++i) keep[i] = i;
  if (long(keep.size()) > cfg_.max_polylines) {
    auto min_dist = [&](std::size_t i) {
      double best = 1e300;
      for (const auto& pt : sd.polylines[i].points)
        best = std::min(best, std::hypot(pt[0], pt[1]));
      return best;
    };
    std::stable_sort(keep.begin(), keep.end(), [&](std::size_t a, std::size_t b) {
      return min_dist(a) < min_dist(b);
    });
    out.warnings.push_back("dropping " +
                           std::to_string(keep.size() - std::size_t(cfg_.max_polylines)) +
                           " polylines farthest from ego");
    keep.resize(std::size_t(cfg_.max_polylines));
    std::sort(keep.begin(), keep.end());
  }

  const double fx = sd.extent.forward_m / 2.0, fy = sd.extent.lateral_m / 2.0;
  const long d = cfg_.sin_dims;
  const long raw_w = cfg_.n_points * 2 * d + geo::kAttributeDim;
  nn::Tensor raw = nn::Tensor({cfg_.max_polylines, raw_w});
  out.mask = nn::Tensor({cfg_.max_polylines});
  for (std::size_t row = 0; row < keep.size(); ++row) {
    const auto& poly = sd.polylines[keep[row]];
    const auto pts = resample_polyline<2>(poly.points, cfg_.n_points);
    long col = 0;
    for (const auto& pt : pts) {
      // min-max normalize each coordinate to [0, 2pi] over the extent
      const double norms[2] = {
          std::clamp((pt[0] + fx) / (2.0 * fx), 0.0, 1.0) * 2.0 * M_PI,
          std::clamp((pt[1] + fy) / (2.0 * fy), 0.0, 1.0) * 2.0 * M_PI};
      for (double v : norms)
        for (double e : sinusoidal_embed(v, d, cfg_.freq_base))
          raw.data[std::size_t(long(row) * raw_w + col++)] = e;
    }
    for (double a : poly.attributes())
      raw.data[std::size_t(long(row) * raw_w + col++)] = a;
    out.mask.data[row] = 1.0;
  }

  Var x = sd_in_.forward(nn::constant(std::move(raw)));
  x = nn::mul_rows(x, out.mask);  // padded rows exactly zero despite the bias
  for (const auto& block : sd_blocks_) x = block.forward_self(x, &out.mask);
  out.features = x;
  return out;
}

PriorEncoder::SatEncoding PriorEncoder::encode_satellite(
    const geo::SatelliteImage& sat) const {
  if (sat.image.empty()) throw InputError("encode_satellite: empty raster");
  const geo::Image img = sat.image.resize_bilinear(cfg_.sat_rows, cfg_.sat_cols);
  nn::Tensor in = nn::Tensor({3, cfg_.sat_rows, cfg_.sat_cols});
  const std::size_t plane = std::size_t(cfg_.sat_rows * cfg_.sat_cols);
  for (long r = 0; r < cfg_.sat_rows; ++r)
    for (long c = 0; c < cfg_.sat_cols; ++c)
      for (long ch = 0; ch < 3; ++ch)
        in.data[std::size_t(ch) * plane + std::size_t(r * cfg_.sat_cols + c)] =
            img.at(r, c, ch) / 255.0;

  Var x = nn::relu(stem_.forward(nn::constant(std::move(in))));
  std::vector<Var> stages;
  for (int i = 0; i < 4; ++i) {
    x = nn::relu(down_[i].forward(x));
    x = nn::relu(nn::add(x, res_[i].forward(x)));
    stages.push_back(x);
  }

  SatEncoding out;
  std::vector<Var> levels;
  for (int lvl = 0; lvl < 3; ++lvl) {
    const Var& s = stages[std::size_t(3 - lvl)];  // coarse->fine
    const long ch = s->value.shape[0], h = s->value.shape[1], w = s->value.shape[2];
    Var flat = nn::transpose(nn::reshape(s, {ch, h * w}));  // [h*w, ch]
    Var proj = level_proj_[std::size_t(lvl)].forward(flat);
    Var emb = nn::reshape(nn::slice_rows(level_emb_, lvl, 1), {cfg_.channels});
    levels.push_back(nn::add_rowvec(proj, emb));
    out.level_shapes.push_back({h, w});
  }
  out.features = nn::concat_rows(levels);
  return out;
}

PriorEncoder::BevPrior PriorEncoder::fuse_bev(const SDEncoding& sd,
                                              const SatEncoding& sat) const {
  // learned content embedding + 2-D positional embedding (row half, col half)
  Var pos = nn::concat_cols(nn::repeat_interleave_rows(pos_row_, cfg_.grid_cols),
                            nn::repeat_rows(pos_col_, cfg_.grid_rows));
  Var b = nn::add(bev_emb_, pos);

  BevPrior out;
  bool any_valid = false;
  for (double m : sd.mask.data) any_valid = any_valid || m != 0.0;
  if (any_valid) {
    b = fuse_sd_.forward_cross(b, sd.features, &sd.mask);
  } else {
    out.sd_skipped = true;
  }
  out.grid = fuse_sat_.forward_cross(b, sat.features);
  return out;
}

}  // namespace smart::model
