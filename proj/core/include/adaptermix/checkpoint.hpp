#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "adaptermix/model.hpp"

namespace adaptermix {

/// Which seeds produced a checkpoint: model init plus every training phase
/// that touched it since, in order.
struct SeedProvenance {
  std::uint64_t init_seed = 0;
  std::vector<std::uint64_t> train_seeds;
};

/*
 * Self-describing JSON container: config, adapter topology, seed
 * provenance, and every named parameter tensor (shape, trainable flag,
 * row-major values). Numbers round-trip exactly, so save -> load -> save
 * is byte-stable on one platform.
 */
std::string checkpoint_to_string(const BackboneModel& model,
                                 const SeedProvenance& seeds);

BackboneModel checkpoint_from_string(const std::string& text,
                                     SeedProvenance* seeds_out = nullptr);

void save_checkpoint(const BackboneModel& model, const SeedProvenance& seeds,
                     const std::string& path);

BackboneModel load_checkpoint(const std::string& path,
                              SeedProvenance* seeds_out = nullptr);

/// Deep copy through the serialized form; bit-exact.
BackboneModel clone_model(const BackboneModel& model);

}  // namespace adaptermix
