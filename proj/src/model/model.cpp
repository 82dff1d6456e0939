#include "smart/model/model.hpp"

namespace smart::model {

void ModelConfig::validate() const {
  encoder.validate();
  decoder.validate();
  if (encoder.channels % decoder.heads != 0)
    throw InputError("ModelConfig: channels must be divisible by decoder heads");
}

json ModelConfig::to_json() const {
  return json{{"encoder", encoder.to_json()}, {"decoder", decoder.to_json()}};
}

ModelConfig ModelConfig::from_json(const json& j) {
  ModelConfig c;
  if (j.contains("encoder")) c.encoder = EncoderConfig::from_json(j.at("encoder"));
  if (j.contains("decoder")) c.decoder = DecoderConfig::from_json(j.at("decoder"));
  c.validate();
  return c;
}

SmartModel::SmartModel(const ModelConfig& cfg, std::uint64_t init_seed) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(init_seed);
  encoder_ = std::make_unique<PriorEncoder>(cfg_.encoder, params_, rng);
  decoder_ = std::make_unique<LaneDecoder>(cfg_.decoder, cfg_.encoder.channels,
                                           params_, rng);
}

SmartModel::ForwardResult SmartModel::forward(const scene::SceneBundle& scene) const {
  ForwardResult out;
  auto sd = encoder_->encode_sd(scene.sd_map);
  out.warnings = sd.warnings;
  auto sat = encoder_->encode_satellite(scene.satellite);
  auto prior = encoder_->fuse_bev(sd, sat);
  out.sd_skipped = prior.sd_skipped;
  out.decoded = decoder_->decode(prior.grid, cfg_.encoder.grid_rows,
                                 cfg_.encoder.grid_cols);
  return out;
}

PriorGrid SmartModel::encode_prior(const scene::SceneBundle& scene) const {
  nn::NoGradGuard ng;
  auto sd = encoder_->encode_sd(scene.sd_map);
  auto sat = encoder_->encode_satellite(scene.satellite);
  auto fused = encoder_->fuse_bev(sd, sat);
  PriorGrid g;
  g.grid = fused.grid->value;
  quantize_f32(g.grid);
  g.rows = cfg_.encoder.grid_rows;
  g.cols = cfg_.encoder.grid_cols;
  g.pose = scene.pose;
  g.extent = scene.extent;
  g.sd_skipped = fused.sd_skipped;
  return g;
}

scene::LaneGraph SmartModel::decode_prior(const PriorGrid& prior) const {
  nn::NoGradGuard ng;
  if (prior.rows != cfg_.encoder.grid_rows || prior.cols != cfg_.encoder.grid_cols)
    throw InputError("decode_prior: grid shape does not match the model config");
  auto res = decoder_->decode(nn::constant(prior.grid), prior.rows, prior.cols);
  auto decoded = decoder_->to_decoded(res, prior.extent);
  return assemble_graph(decoded, cfg_.decoder);
}

scene::LaneGraph SmartModel::infer(const scene::SceneBundle& scene) const {
  return decode_prior(encode_prior(scene));
}

}  // namespace smart::model
