#include "cmf/row_glm.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "cmf/kernels.hpp"

namespace cmf {

namespace {

thread_local std::vector<double> tl_theta;
thread_local std::vector<double> tl_coef;

double* scratch(std::vector<double>& v, long n) {
  if (static_cast<long>(v.size()) < n) v.resize(n);
  return v.data();
}

}  // namespace

double row_negloglik(const RowContext& ctx, const double* u) {
  const int k = ctx.k;
  double nll = 0.0;
  for (const auto& blk : ctx.blocks) {
    double* theta = scratch(tl_theta, blk.n);
    kern::ops().theta_batch(blk.V, u, blk.n, k, theta);
    for (long j = 0; j < blk.n; ++j)
      nll += log_partition(blk.family, theta[j]) - blk.x[j] * theta[j];
  }
  Eigen::Map<const Eigen::VectorXd> mu(ctx.prior_mean, k);
  Eigen::Map<const Eigen::MatrixXd> P(ctx.prior_precision, k, k);
  Eigen::Map<const Eigen::VectorXd> uv(u, k);
  Eigen::VectorXd d = uv - mu;
  nll += 0.5 * d.dot(P * d) + ctx.half_logdet_2pi_sigma;
  return nll;
}

void row_gradient(const RowContext& ctx, const double* u, double* g) {
  const int k = ctx.k;
  Eigen::Map<const Eigen::VectorXd> mu(ctx.prior_mean, k);
  Eigen::Map<const Eigen::MatrixXd> P(ctx.prior_precision, k, k);
  Eigen::Map<const Eigen::VectorXd> uv(u, k);
  Eigen::Map<Eigen::VectorXd> gv(g, k);
  gv = P * (uv - mu);
  for (const auto& blk : ctx.blocks) {
    double* theta = scratch(tl_theta, blk.n);
    kern::ops().theta_batch(blk.V, u, blk.n, k, theta);
    double* w = scratch(tl_coef, blk.n);
    for (long j = 0; j < blk.n; ++j)
      w[j] = mean_link(blk.family, theta[j]) - blk.x[j];
    kern::ops().weighted_sum(blk.V, w, blk.n, k, g);
  }
}

void row_hessian(const RowContext& ctx, const double* u, double* H) {
  const int k = ctx.k;
  for (int a = 0; a < k; ++a)
    for (int b = 0; b < k; ++b) H[a * k + b] = ctx.prior_precision[a * k + b];
  for (const auto& blk : ctx.blocks) {
    double* theta = scratch(tl_theta, blk.n);
    kern::ops().theta_batch(blk.V, u, blk.n, k, theta);
    double* c = scratch(tl_coef, blk.n);
    for (long j = 0; j < blk.n; ++j)
      c[j] = link_derivative(blk.family, theta[j]);
    kern::ops().weighted_gram(blk.V, c, blk.n, k, H);
  }
}

void newton_step(const RowContext& ctx, const double* u, double step_length,
                 double* u_new, double* H, double* chol_lower) {
  const int k = ctx.k;
  Eigen::VectorXd g(k);
  row_gradient(ctx, u, g.data());
  row_hessian(ctx, u, H);
  Eigen::Map<Eigen::MatrixXd> Hm(H, k, k);  // symmetric, so layout is moot

  Eigen::LLT<Eigen::MatrixXd> llt(Hm);
  if (llt.info() != Eigen::Success) {
    double jitter = 1e-8 * Hm.trace() / k;
    int tries = 0;
    while (llt.info() != Eigen::Success && tries < 3) {
      Hm.diagonal().array() += jitter;
      llt.compute(Hm);
      jitter *= 10.0;
      ++tries;
    }
    if (llt.info() != Eigen::Success)
      throw std::runtime_error("row " + std::to_string(ctx.row_id) +
                               ": conditional Hessian is not positive-definite");
  }
  Eigen::Map<const Eigen::VectorXd> uv(u, k);
  Eigen::Map<Eigen::VectorXd> out(u_new, k);
  out = uv - step_length * llt.solve(g);
  if (chol_lower != nullptr) {
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
        L(chol_lower, k, k);
    L = llt.matrixL();
  }
}

}  // namespace cmf
