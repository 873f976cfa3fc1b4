#include "cmf/map_engine.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace cmf {

ModelState init_factors(const Dataset& ds, int k, uint64_t seed) {
  ModelState st;
  st.k = k;
  const int E = static_cast<int>(ds.counts.size());
  st.factors.reserve(E);
  st.priors.reserve(E);
  for (int e = 0; e < E; ++e) {
    MatRM F(ds.counts[e], k);
    for (long i = 0; i < ds.counts[e]; ++i) {
      PhiloxStream rs(seed, StreamDomain::FactorInit, 0, e, i);
      rs.normal_fill(F.data() + i * static_cast<long>(k), k);
    }
    st.factors.push_back(std::move(F));
    st.priors.push_back({Eigen::VectorXd::Zero(k), Eigen::MatrixXd::Identity(k, k)});
  }
  return st;
}

void map_row_update(const RowContext& ctx, const double* u, double* u_out,
                    int max_halvings) {
  const int k = ctx.k;
  double L0 = row_negloglik(ctx, u);
  Eigen::VectorXd full(k);
  Eigen::VectorXd H(k * k);
  newton_step(ctx, u, 1.0, full.data(), H.data());

  Eigen::Map<const Eigen::VectorXd> uv(u, k);
  Eigen::Map<Eigen::VectorXd> out(u_out, k);
  double step = 1.0;
  for (int h = 0; h <= max_halvings; ++h) {
    out = (1.0 - step) * uv + step * full;
    if (row_negloglik(ctx, u_out) <= L0) return;
    step *= 0.5;
  }
  out = uv;  // no improving step found; keep the row (objective cannot rise)
}

FitResult fit_map(const Dataset& ds, const MapConfig& cfg,
                  const std::vector<NiwHyperprior>* hyper,
                  const std::vector<FactorPrior>* fixed_priors) {
  const int E = static_cast<int>(ds.counts.size());
  FitResult res;
  res.state = init_factors(ds, cfg.k, cfg.seed);
  std::vector<NiwHyperprior> hp =
      hyper != nullptr ? *hyper : default_hyperpriors(ds, cfg.k);

  if (!cfg.hierarchical && fixed_priors != nullptr) {
    if (static_cast<int>(fixed_priors->size()) != E)
      throw std::invalid_argument("fixed_priors: need one entry per entity type");
    res.state.priors = *fixed_priors;
  }

  double prev = std::numeric_limits<double>::infinity();
  for (int sweep = 0; sweep < cfg.max_sweeps; ++sweep) {
    int e = sweep % E;
    PriorCache cache = make_prior_cache(res.state.priors[e]);
    MatRM& F = res.state.factors[e];
    const long n = ds.counts[e];
#pragma omp parallel num_threads(cfg.threads)
    {
      RowWorkspace ws;
      Eigen::VectorXd unew(cfg.k);
#pragma omp for schedule(static)
      for (long i = 0; i < n; ++i) {
        RowContext ctx = build_row_context(ds, res.state.factors, e, i,
                                           res.state.priors[e], cache, ws);
        double* u = F.data() + i * static_cast<long>(cfg.k);
        map_row_update(ctx, u, unew.data(), cfg.max_newton_halvings);
        for (int a = 0; a < cfg.k; ++a) u[a] = unew[a];
      }
    }
    if (cfg.hierarchical) {
      NiwPosterior post = niw_posterior(hp[e], res.state.factors[e]);
      niw_mode(post, res.state.priors[e].mu, res.state.priors[e].sigma);
    }
    double obj = model_objective(ds, res.state, hp, cfg.hierarchical);
    if (!std::isfinite(obj))
      throw std::runtime_error("objective diverged at sweep " +
                               std::to_string(sweep + 1));
    res.trace.push_back(obj);
    if (sweep > 0) {
      double rel = (prev - obj) / std::max(1.0, std::fabs(prev));
      if (rel < cfg.rel_tol) {
        res.converged = true;
        break;
      }
    }
    prev = obj;
  }
  return res;
}

std::vector<FactorPrior> psychic_priors(const ModelState& reference) {
  std::vector<FactorPrior> out;
  const int k = reference.k;
  for (const auto& F : reference.factors) {
    Eigen::VectorXd mean = F.colwise().mean();
    Eigen::VectorXd var(k);
    for (int a = 0; a < k; ++a) {
      double s = (F.col(a).array() - mean[a]).square().sum() / F.rows();
      var[a] = std::max(s, 1e-6);
    }
    out.push_back({Eigen::VectorXd::Zero(k), var.asDiagonal().toDenseMatrix()});
  }
  return out;
}

}  // namespace cmf
