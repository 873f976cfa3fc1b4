#pragma once

#include <cstdint>
#include <vector>

#include "cmf/model.hpp"

namespace cmf {

struct MapConfig {
  int k = 25;
  int max_sweeps = 200;
  double rel_tol = 1e-6;
  bool hierarchical = true;
  int max_newton_halvings = 20;
  uint64_t seed = 0;
  int threads = 1;
};

// Factor rows ~ N(0, I), priors set to (0, I).
ModelState init_factors(const Dataset& ds, int k, uint64_t seed);

// One damped Newton update: full step, halved until L does not increase.
void map_row_update(const RowContext& ctx, const double* u, double* u_out,
                    int max_halvings);

struct FitResult {
  ModelState state;
  std::vector<double> trace;  // objective after every factor sweep
  bool converged = false;
};

// Alternating factor sweeps in entity-type order. With hierarchical priors,
// each sweep is followed by setting (μ_e, Σ_e) to the NIW posterior mode; with
// fixed priors the given (or (0, I)) values are kept throughout.
FitResult fit_map(const Dataset& ds, const MapConfig& cfg,
                  const std::vector<NiwHyperprior>* hyper = nullptr,
                  const std::vector<FactorPrior>* fixed_priors = nullptr);

// Per type: μ = 0, Σ diagonal from the reference state's factor column
// variances (floored at 1e-6).
std::vector<FactorPrior> psychic_priors(const ModelState& reference);

}  // namespace cmf
