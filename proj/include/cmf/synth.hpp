#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cmf/model.hpp"

namespace cmf {

struct SynthRelationSpec {
  std::string id;
  int row_type = 1;  // entity-type ids, 1-based
  int col_type = 2;
  Family family = Family::Gaussian;
  double density = 1.0;
};

struct SynthSpec {
  std::vector<std::pair<std::string, long>> entity_types;  // (name, count)
  int k_true = 5;
  std::vector<SynthRelationSpec> relations;
  double noise_scale = 1.0;  // Gaussian relations only
  uint64_t seed = 0;
};

struct SynthOutput {
  RelationalSchema schema;
  ModelState truth;  // planted factors and the sampled (μ_e, Σ_e)
};

// Hierarchical generative process: (μ_e, Σ_e) from the default NIW
// hyperprior, rows from N(μ_e, Σ_e), entries from each relation's family at
// the planted natural parameters, kept independently at the given density.
SynthOutput generate(const SynthSpec& spec);

// The standard test dataset: word(400) x stimulus(60) Bernoulli at density
// 0.3, stimulus(60) x voxel(100) Gaussian at y_density, standardized;
// planted rank 5.
SynthOutput three_type_fixture(uint64_t seed, double y_density = 0.3,
                               double noise_scale = 2.0);

}  // namespace cmf
