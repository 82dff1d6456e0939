#pragma once

#include <optional>
#include <string>

#include "smart/nn/optim.hpp"

namespace smart::nn {

// Single-file binary checkpoint. Refuses to load across schema versions or
// config hashes. Writes go through a temp file + rename.
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  std::string config_hash;
  long step = 0;

  static void save(const std::string& path, const ParamStore& params,
                   const std::string& config_hash, long step,
                   AdamW* opt = nullptr);
  // Loads parameter values into an already-constructed store with identical
  // layout. Returns the stored step count.
  static long load(const std::string& path, ParamStore& params,
                   const std::string& expected_config_hash, AdamW* opt = nullptr,
                   bool check_hash = true);
  static std::string peek_config_hash(const std::string& path);
};

// Stable FNV-1a hash of a config's JSON dump, hex-encoded.
std::string config_hash_of(const std::string& config_dump);

}  // namespace smart::nn
