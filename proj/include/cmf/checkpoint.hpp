#pragma once

#include <cstdint>
#include <string>

#include "cmf/hmh.hpp"
#include "cmf/model.hpp"

namespace cmf {

// Checkpoint directory: metadata.json (schema hash, k, families, priors,
// standardization constants, seed) plus one little-endian row-major double
// file per factor.
void save_checkpoint(const std::string& dir, const Dataset& ds,
                     const ModelState& state, uint64_t seed);
ModelState load_checkpoint(const std::string& dir);

// Chain checkpoint: one checkpoint subdirectory per retained sample plus
// chain.json with epochs, acceptance stats, and the seed.
void save_chain(const std::string& dir, const Dataset& ds,
                const PosteriorChain& chain, uint64_t seed);
PosteriorChain load_chain(const std::string& dir);

// Stable hash of the schema's structure, recorded in checkpoints so a
// checkpoint is never silently applied to a different dataset.
uint64_t schema_fingerprint(const Dataset& ds);

}  // namespace cmf
