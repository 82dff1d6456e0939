#pragma once

#include "smart/model/decoder.hpp"
#include "smart/model/encoder.hpp"
#include "smart/nn/checkpoint.hpp"
#include "smart/scene/bundle.hpp"

namespace smart::model {

struct ModelConfig {
  EncoderConfig encoder;
  DecoderConfig decoder;

  void validate() const;
  json to_json() const;
  static ModelConfig from_json(const json& j);
  std::string hash() const { return nn::config_hash_of(to_json().dump()); }
};

// Encoder + decoder over one parameter store.
class SmartModel {
 public:
  SmartModel(const ModelConfig& cfg, std::uint64_t init_seed);

  struct ForwardResult {
    DecodeResult decoded;
    bool sd_skipped = false;
    std::vector<std::string> warnings;
  };
  // Training-path forward; builds the autograd graph when grads are enabled.
  ForwardResult forward(const scene::SceneBundle& scene) const;

  // Inference boundary: the fused grid is rounded through float32 so that
  // decoding an exported grid matches direct inference exactly.
  PriorGrid encode_prior(const scene::SceneBundle& scene) const;
  scene::LaneGraph decode_prior(const PriorGrid& prior) const;
  scene::LaneGraph infer(const scene::SceneBundle& scene) const;

  const ModelConfig& config() const { return cfg_; }
  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }
  const PriorEncoder& encoder() const { return *encoder_; }
  const LaneDecoder& decoder() const { return *decoder_; }

 private:
  ModelConfig cfg_;
  nn::ParamStore params_;
  std::unique_ptr<PriorEncoder> encoder_;
  std::unique_ptr<LaneDecoder> decoder_;
};

}  // namespace smart::model
