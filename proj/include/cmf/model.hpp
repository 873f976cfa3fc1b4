#pragma once

#include <Eigen/Dense>
#include <vector>

#include "cmf/niw.hpp"
#include "cmf/row_glm.hpp"
#include "cmf/schema.hpp"

namespace cmf {

using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct FactorPrior {
  Eigen::VectorXd mu;
  Eigen::MatrixXd sigma;
};

// All low-rank factors plus the per-type Gaussian prior parameters.
struct ModelState {
  int k = 0;
  std::vector<MatRM> factors;       // per entity type, counts[e] x k
  std::vector<FactorPrior> priors;  // per entity type
};

// Precomputed prior pieces shared by every row of one type.
struct PriorCache {
  MatRM precision;               // Σ⁻¹
  double half_logdet_2pi = 0.0;  // ½ log det(2π Σ)
};

PriorCache make_prior_cache(const FactorPrior& prior);

// Per-thread buffers for gathering one row's observation blocks.
struct RowWorkspace {
  std::vector<double> V;
  std::vector<double> x;
};

// Assembles the RowContext for row `row` of entity type `entity_pos`,
// gathering counterpart factor rows into the workspace.
RowContext build_row_context(const Dataset& ds, const std::vector<MatRM>& factors,
                             int entity_pos, long row, const FactorPrior& prior,
                             const PriorCache& cache, RowWorkspace& ws);

// Full negative log joint: data terms + factor prior terms, plus the
// hyperprior density of each (μ_e, Σ_e) when hierarchical. Training
// minimizes this, and chains report it as the energy trace.
double model_objective(const Dataset& ds, const ModelState& st,
                       const std::vector<NiwHyperprior>& hyper, bool hierarchical);

std::vector<NiwHyperprior> default_hyperpriors(const Dataset& ds, int k);

}  // namespace cmf
