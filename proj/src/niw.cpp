#include "cmf/niw.hpp"

#include <cmath>
#include <stdexcept>

namespace cmf {

namespace {

double log_multigamma(int k, double a) {
  double s = 0.25 * k * (k - 1) * std::log(M_PI);
  for (int i = 0; i < k; ++i) s += std::lgamma(a - 0.5 * i);
  return s;
}

Eigen::LLT<Eigen::MatrixXd> checked_llt(const Eigen::MatrixXd& m, const char* what) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error(std::string(what) + ": matrix is not positive-definite");
  return llt;
}

}  // namespace

NiwHyperprior default_hyperprior(int k) {
  NiwHyperprior h;
  h.nu = k;
  h.psi = Eigen::MatrixXd::Identity(k, k);
  h.xi = Eigen::VectorXd::Zero(k);
  h.beta = 1.0;
  return h;
}

NiwPosterior niw_posterior(const NiwHyperprior& prior,
                           const Eigen::Ref<const Eigen::MatrixXd>& rows) {
  const long n = rows.rows();
  const long k = prior.xi.size();
  NiwPosterior post;
  post.nu = prior.nu + n;
  post.beta = prior.beta + n;
  if (n == 0) {
    post.psi = prior.psi;
    post.xi = prior.xi;
    return post;
  }
  Eigen::VectorXd mean = rows.colwise().mean();
  Eigen::MatrixXd centered = rows.rowwise() - mean.transpose();
  Eigen::MatrixXd scatter = centered.transpose() * centered;
  Eigen::VectorXd d = mean - prior.xi;
  post.xi = (n * mean + prior.beta * prior.xi) / (prior.beta + n);
  post.psi = prior.psi + scatter +
             (prior.beta * n / (prior.beta + n)) * (d * d.transpose());
  post.psi = 0.5 * (post.psi + post.psi.transpose()).eval();
  (void)k;
  return post;
}

void niw_mode(const NiwPosterior& post, Eigen::VectorXd& mu, Eigen::MatrixXd& sigma) {
  const long k = post.xi.size();
  mu = post.xi;
  sigma = post.psi / (post.nu + k + 2.0);
}

Eigen::MatrixXd sample_wishart(double nu, const Eigen::MatrixXd& scale,
                               PhiloxStream& rng) {
  const long k = scale.rows();
  if (nu < k) throw std::invalid_argument("wishart: nu < dimension");
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(k, k);
  for (long i = 0; i < k; ++i) {
    A(i, i) = std::sqrt(rng.chisquare(nu - i));
    for (long j = 0; j < i; ++j) A(i, j) = rng.normal();
  }
  Eigen::MatrixXd L = checked_llt(scale, "wishart scale").matrixL();
  Eigen::MatrixXd LA = L * A;
  Eigen::MatrixXd W = LA * LA.transpose();
  return 0.5 * (W + W.transpose());
}

void sample_niw(const NiwPosterior& post, PhiloxStream& rng, Eigen::VectorXd& mu,
                Eigen::MatrixXd& sigma) {
  const long k = post.xi.size();
  // Σ⁻¹ ~ W(ν*, (Ψ*)⁻¹) gives Σ ~ IW(ν*, Ψ*)
  Eigen::MatrixXd psi_inv = checked_llt(post.psi, "niw psi")
                                .solve(Eigen::MatrixXd::Identity(k, k));
  psi_inv = 0.5 * (psi_inv + psi_inv.transpose()).eval();
  Eigen::MatrixXd prec = sample_wishart(post.nu, psi_inv, rng);
  sigma = checked_llt(prec, "sampled precision")
              .solve(Eigen::MatrixXd::Identity(k, k));
  sigma = 0.5 * (sigma + sigma.transpose()).eval();
  Eigen::VectorXd z(k);
  rng.normal_fill(z.data(), k);
  Eigen::MatrixXd L = checked_llt(sigma, "sampled sigma").matrixL();
  mu = post.xi + (L * z) / std::sqrt(post.beta);
}

double niw_log_density(const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma,
                       const NiwHyperprior& prior) {
  const long k = mu.size();
  auto llt_sigma = checked_llt(sigma, "niw sigma");
  double logdet_sigma =
      2.0 * Eigen::MatrixXd(llt_sigma.matrixL()).diagonal().array().log().sum();
  double logdet_psi =
      2.0 * Eigen::MatrixXd(checked_llt(prior.psi, "niw prior psi").matrixL())
                .diagonal().array().log().sum();

  // Inverse-Wishart(ν, Ψ) at Σ
  double iw = 0.5 * prior.nu * logdet_psi - 0.5 * prior.nu * k * std::log(2.0) -
              log_multigamma(k, 0.5 * prior.nu) -
              0.5 * (prior.nu + k + 1.0) * logdet_sigma -
              0.5 * llt_sigma.solve(prior.psi).trace();
  // N(ξ, Σ/β) at μ
  Eigen::VectorXd d = mu - prior.xi;
  double quad = prior.beta * d.dot(llt_sigma.solve(d));
  double norm = -0.5 * k * std::log(2.0 * M_PI) + 0.5 * k * std::log(prior.beta) -
                0.5 * logdet_sigma - 0.5 * quad;
  return iw + norm;
}

}  // namespace cmf
