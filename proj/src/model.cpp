#include "cmf/model.hpp"

#include <cmath>
#include <stdexcept>

namespace cmf {

PriorCache make_prior_cache(const FactorPrior& prior) {
  const long k = prior.mu.size();
  Eigen::LLT<Eigen::MatrixXd> llt(prior.sigma);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("prior covariance is not positive-definite");
  PriorCache cache;
  cache.precision = llt.solve(Eigen::MatrixXd::Identity(k, k));
  cache.precision = (0.5 * (cache.precision + cache.precision.transpose())).eval();
  double logdet =
      2.0 * Eigen::MatrixXd(llt.matrixL()).diagonal().array().log().sum();
  cache.half_logdet_2pi = 0.5 * (k * std::log(2.0 * M_PI) + logdet);
  return cache;
}

RowContext build_row_context(const Dataset& ds, const std::vector<MatRM>& factors,
                             int entity_pos, long row, const FactorPrior& prior,
                             const PriorCache& cache, RowWorkspace& ws) {
  RowContext ctx;
  const int k = static_cast<int>(factors[entity_pos].cols());
  ctx.k = k;
  ctx.row_id = row;
  ctx.prior_mean = prior.mu.data();
  ctx.prior_precision = cache.precision.data();
  ctx.half_logdet_2pi_sigma = cache.half_logdet_2pi;

  long total = 0;
  for (const auto& rd : ds.rels) {
    if (rd.row_type_pos == entity_pos)
      total += rd.row_ptr[row + 1] - rd.row_ptr[row];
    if (rd.col_type_pos == entity_pos)
      total += rd.col_ptr[row + 1] - rd.col_ptr[row];
  }
  if (static_cast<long>(ws.V.size()) < total * k) ws.V.resize(total * k);
  if (static_cast<long>(ws.x.size()) < total) ws.x.resize(total);

  long off = 0;
  for (const auto& rd : ds.rels) {
    if (rd.row_type_pos == entity_pos) {
      long lo = rd.row_ptr[row], hi = rd.row_ptr[row + 1];
      if (lo == hi) continue;
      const MatRM& C = factors[rd.col_type_pos];
      for (long t = lo; t < hi; ++t) {
        const double* src = C.data() + rd.row_col[t] * k;
        double* dst = ws.V.data() + (off + (t - lo)) * k;
        for (int a = 0; a < k; ++a) dst[a] = src[a];
        ws.x[off + (t - lo)] = rd.row_val[t];
      }
      ctx.blocks.push_back({ws.V.data() + off * k, ws.x.data() + off, hi - lo,
                            rd.family});
      off += hi - lo;
    }
    if (rd.col_type_pos == entity_pos) {
      long lo = rd.col_ptr[row], hi = rd.col_ptr[row + 1];
      if (lo == hi) continue;
      const MatRM& C = factors[rd.row_type_pos];
      for (long t = lo; t < hi; ++t) {
        const double* src = C.data() + rd.col_row[t] * k;
        double* dst = ws.V.data() + (off + (t - lo)) * k;
        for (int a = 0; a < k; ++a) dst[a] = src[a];
        ws.x[off + (t - lo)] = rd.col_val[t];
      }
      ctx.blocks.push_back({ws.V.data() + off * k, ws.x.data() + off, hi - lo,
                            rd.family});
      off += hi - lo;
    }
  }
  return ctx;
}

double model_objective(const Dataset& ds, const ModelState& st,
                       const std::vector<NiwHyperprior>& hyper, bool hierarchical) {
  const int k = st.k;
  double obj = 0.0;
  // data terms, each observed entry once
  for (const auto& rd : ds.rels) {
    const MatRM& R = st.factors[rd.row_type_pos];
    const MatRM& C = st.factors[rd.col_type_pos];
    const long nr = R.rows();
    for (long i = 0; i < nr; ++i) {
      const double* u = R.data() + i * k;
      for (long t = rd.row_ptr[i]; t < rd.row_ptr[i + 1]; ++t) {
        const double* v = C.data() + rd.row_col[t] * k;
        double theta = 0.0;
        for (int a = 0; a < k; ++a) theta += u[a] * v[a];
        obj += log_partition(rd.family, theta) - rd.row_val[t] * theta;
      }
    }
  }
  // factor prior terms
  for (size_t e = 0; e < st.factors.size(); ++e) {
    PriorCache cache = make_prior_cache(st.priors[e]);
    const MatRM& F = st.factors[e];
    const Eigen::VectorXd& mu = st.priors[e].mu;
    for (long i = 0; i < F.rows(); ++i) {
      Eigen::Map<const Eigen::VectorXd> u(F.data() + i * k, k);
      Eigen::VectorXd d = u - mu;
      obj += 0.5 * d.dot(cache.precision * d);
    }
    obj += F.rows() * cache.half_logdet_2pi;
    if (hierarchical)
      obj -= niw_log_density(st.priors[e].mu, st.priors[e].sigma, hyper[e]);
  }
  return obj;
}

std::vector<NiwHyperprior> default_hyperpriors(const Dataset& ds, int k) {
  std::vector<NiwHyperprior> out;
  out.reserve(ds.counts.size());
  for (size_t e = 0; e < ds.counts.size(); ++e) out.push_back(default_hyperprior(k));
  return out;
}

}  // namespace cmf
