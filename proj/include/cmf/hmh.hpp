#pragma once

#include <cstdint>
#include <vector>

#include "cmf/model.hpp"

namespace cmf {

// Proposal statistics cached from the last Newton step at a row's current
// point: the stepped mean and the lower Cholesky factor of the conditional
// Hessian there (proposal precision).
struct RowProposalCache {
  Eigen::VectorXd mean;
  MatRM chol;
};

struct ChainConfig {
  int k = 25;
  int epochs = 300;
  int burn_in = 50;
  int thin = 5;
  int target_samples = 20;
  uint64_t seed = 0;
  int threads = 1;
  // Step lengths are Uniform[0,1]; tests can pin them to 1, which makes the
  // proposal exact for Gaussian-only models.
  bool eta_fixed_one = false;
};

struct EpochStats {
  std::vector<long> accepted;   // per entity type
  std::vector<long> proposed;
  std::vector<long> non_finite;
};

struct PosteriorChain {
  std::vector<ModelState> samples;  // retained at burn_in + thin*s
  std::vector<int> sample_epochs;   // 1-based epoch of each retained sample
  std::vector<EpochStats> acceptance;
  std::vector<double> energy;       // full objective after each epoch
};

enum class StepOutcome { Accepted, Rejected, RejectedNonFinite };

// Factor rows ~ N(0, I); priors (0, I); one Newton step of random length per
// row seeds the proposal cache.
void hmh_init(const Dataset& ds, int k, uint64_t seed, ModelState& state,
              std::vector<std::vector<RowProposalCache>>& caches);

// One Metropolis-Hastings step for a single row. Proposes from the cached
// Gaussian, recomputes mean/Hessian at the proposal with a fresh step length,
// and accepts by the ratio of conditional posteriors times proposal densities.
// On acceptance the cache moves to the proposal's statistics; on rejection it
// is kept unchanged.
StepOutcome hmh_row_step(const RowContext& ctx, double* u, RowProposalCache& cache,
                         PhiloxStream& rng, bool eta_fixed_one);

// Cyclic block sampling: every row of every factor by HMH, then (μ_e, Σ_e)
// by exact NIW Gibbs, each epoch.
PosteriorChain run_chain(const Dataset& ds, const ChainConfig& cfg,
                         const std::vector<NiwHyperprior>& hyper);

}  // namespace cmf
