#pragma once

#include <vector>

#include "cmf/expfam.hpp"

namespace cmf {

// One relation's slice through a single factor row: the gathered counterpart
// rows (dense n x k, row-major) and the observed values.
struct ObsBlock {
  const double* V = nullptr;
  const double* x = nullptr;
  long n = 0;
  Family family = Family::Gaussian;
};

// Everything needed to evaluate the conditional negative log-posterior of one
// factor row with the rest of the model frozen.
struct RowContext {
  int k = 0;
  long row_id = -1;  // diagnostics only
  const double* prior_mean = nullptr;       // k
  const double* prior_precision = nullptr;  // k x k row-major, symmetric PD
  double half_logdet_2pi_sigma = 0.0;       // ½ log det(2π Σ)
  std::vector<ObsBlock> blocks;
};

// L(u) = Σ_blocks Σ_j [b(u·v_j) − x_j u·v_j] + ½(u−μ)ᵀΣ⁻¹(u−μ) + ½logdet(2πΣ).
// Base-measure terms are constant in u and live in expfam::log_density.
double row_negloglik(const RowContext& ctx, const double* u);

// ∇L(u) = Σ_blocks Σ_j (f(u·v_j) − x_j) v_j + Σ⁻¹(u−μ)
void row_gradient(const RowContext& ctx, const double* u, double* g);

// ∇²L(u) = Σ_blocks Σ_j b″(u·v_j) v_j v_jᵀ + Σ⁻¹; row-major k x k
void row_hessian(const RowContext& ctx, const double* u, double* H);

// u_new = u − step_length · H(u)⁻¹ ∇L(u), solved by Cholesky with escalating
// jitter on failure. H receives the (possibly jittered) Hessian that was
// factorized; chol_lower, if given, receives its lower Cholesky factor.
void newton_step(const RowContext& ctx, const double* u, double step_length,
                 double* u_new, double* H, double* chol_lower = nullptr);

}  // namespace cmf
