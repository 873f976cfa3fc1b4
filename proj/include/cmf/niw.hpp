#pragma once

#include <Eigen/Dense>

#include "cmf/rng.hpp"

namespace cmf {

// Fixed hyperprior over a factor's Gaussian prior (μ, Σ):
// Σ ~ Inverse-Wishart(ν, Ψ), μ | Σ ~ N(ξ, Σ/β).
struct NiwHyperprior {
  double nu = 0.0;
  Eigen::MatrixXd psi;
  Eigen::VectorXd xi;
  double beta = 1.0;
};

struct NiwPosterior {
  double nu = 0.0;
  Eigen::MatrixXd psi;
  Eigen::VectorXd xi;
  double beta = 1.0;
};

NiwHyperprior default_hyperprior(int k);  // ν = k, Ψ = I, ξ = 0, β = 1

// Conjugate update given Gaussian rows (n x k, any storage order).
NiwPosterior niw_posterior(const NiwHyperprior& prior,
                           const Eigen::Ref<const Eigen::MatrixXd>& rows);

// Joint density mode: μ = ξ*, Σ = Ψ*/(ν* + k + 2).
void niw_mode(const NiwPosterior& post, Eigen::VectorXd& mu, Eigen::MatrixXd& sigma);

// One Wishart(ν, scale) draw by Bartlett decomposition.
Eigen::MatrixXd sample_wishart(double nu, const Eigen::MatrixXd& scale,
                               PhiloxStream& rng);

// Σ ~ Inverse-Wishart(ν*, Ψ*), then μ ~ N(ξ*, Σ/β*).
void sample_niw(const NiwPosterior& post, PhiloxStream& rng, Eigen::VectorXd& mu,
                Eigen::MatrixXd& sigma);

// log NIW((μ, Σ) | prior), fully normalized.
double niw_log_density(const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma,
                       const NiwHyperprior& prior);

}  // namespace cmf
