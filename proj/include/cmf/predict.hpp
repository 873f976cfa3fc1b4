#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cmf/hmh.hpp"
#include "cmf/model.hpp"

namespace cmf {

struct PredictionRequest {
  int relation_index = 0;
  std::vector<std::pair<long, long>> targets;  // (row, col), 0-based
};

// Predictive mean f(U_i · V_j) per target, de-standardized for Gaussian
// relations via the transform stored on the relation.
std::vector<double> predict_point(const Dataset& ds, const ModelState& state,
                                  const PredictionRequest& req);

// Posterior-predictive mean: the average of predict_point over retained
// samples.
std::vector<double> predict_bayes(const Dataset& ds, const PosteriorChain& chain,
                                  const PredictionRequest& req);

struct FoldinConfig {
  int samples_per_state = 5;
  int burn_in = 20;
  int thin = 2;
  double observed_fraction = 2.0 / 3.0;
  int posterior_states_used = 10;
  uint64_t seed = 0;
};

// A brand-new entity extending one side of one relation: its observations
// reference trained counterpart entities.
struct NewEntityObs {
  int relation_index = 0;
  bool as_row = true;  // new entity indexes the row side
  std::vector<long> counterpart;
  std::vector<double> value;
};

struct FoldinResult {
  std::vector<long> eval_counterpart;   // held targets
  std::vector<double> predicted;        // de-standardized predictive means
  std::vector<double> actual;           // held values (as given)
};

// Splits the entity's observations into conditioning and evaluation parts,
// then: Bayesian path, per retained state, HMH over the new row only;
// MAP path, damped Newton to convergence on the new row.
FoldinResult fold_in_bayes(const Dataset& ds, const PosteriorChain& chain,
                           const NewEntityObs& entity, const FoldinConfig& cfg,
                           uint32_t entity_ordinal);
FoldinResult fold_in_map(const Dataset& ds, const ModelState& state,
                         const NewEntityObs& entity, const FoldinConfig& cfg,
                         uint32_t entity_ordinal);

// Mean squared error in standardized units (divide by the relation's stddev
// so that chance level is 1 for standardized Gaussian data).
double evaluate_mse(const std::vector<double>& predictions,
                    const std::vector<double>& truth, double std_stddev = 1.0);

// Seeded uniform split of observed entries; each entry lands in the test set
// independently with probability test_fraction.
std::pair<ObservedMatrix, ObservedMatrix> split_holdout(const ObservedMatrix& m,
                                                        double test_fraction,
                                                        uint64_t seed);

}  // namespace cmf
