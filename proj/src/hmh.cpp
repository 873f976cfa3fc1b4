#include "cmf/hmh.hpp"

#include <cmath>
#include <stdexcept>

namespace cmf {

namespace {

// log N(x | m, (L Lᵀ)⁻¹) with L the lower Cholesky factor of the precision
double log_gaussian_prec(const Eigen::VectorXd& x, const Eigen::VectorXd& m,
                         const MatRM& L) {
  const long k = x.size();
  Eigen::VectorXd w = L.transpose() * (x - m);
  double logdet_half = L.diagonal().array().log().sum();
  return -0.5 * k * std::log(2.0 * M_PI) + logdet_half - 0.5 * w.squaredNorm();
}

}  // namespace

void hmh_init(const Dataset& ds, int k, uint64_t seed, ModelState& state,
              std::vector<std::vector<RowProposalCache>>& caches) {
  const int E = static_cast<int>(ds.counts.size());
  state = ModelState{};
  state.k = k;
  for (int e = 0; e < E; ++e) {
    MatRM F(ds.counts[e], k);
    for (long i = 0; i < ds.counts[e]; ++i) {
      PhiloxStream rs(seed, StreamDomain::FactorInit, 0, e, i);
      rs.normal_fill(F.data() + i * static_cast<long>(k), k);
    }
    state.factors.push_back(std::move(F));
    state.priors.push_back({Eigen::VectorXd::Zero(k), Eigen::MatrixXd::Identity(k, k)});
  }
  caches.assign(E, {});
  for (int e = 0; e < E; ++e) {
    caches[e].resize(ds.counts[e]);
    PriorCache pc = make_prior_cache(state.priors[e]);
    RowWorkspace ws;
    Eigen::VectorXd mean(k);
    MatRM H(k, k), L(k, k);
    for (long i = 0; i < ds.counts[e]; ++i) {
      RowContext ctx =
          build_row_context(ds, state.factors, e, i, state.priors[e], pc, ws);
      PhiloxStream rs(seed, StreamDomain::RowStep, 0, e, i);
      double eta = rs.uniform();
      const double* u = state.factors[e].data() + i * static_cast<long>(k);
      newton_step(ctx, u, eta, mean.data(), H.data(), L.data());
      caches[e][i].mean = mean;
      caches[e][i].chol = L;
    }
  }
}

StepOutcome hmh_row_step(const RowContext& ctx, double* u, RowProposalCache& cache,
                         PhiloxStream& rng, bool eta_fixed_one) {
  const int k = ctx.k;
  // fixed draw order so rng consumption never depends on the outcome
  Eigen::VectorXd z(k);
  rng.normal_fill(z.data(), k);
  double eta = eta_fixed_one ? 1.0 : rng.uniform();
  double u_accept = rng.uniform();

  Eigen::Map<Eigen::VectorXd> cur(u, k);
  Eigen::VectorXd prop =
      cache.mean + cache.chol.transpose().triangularView<Eigen::Upper>().solve(z);

  double L_cur = row_negloglik(ctx, cur.data());
  double L_prop;
  try {
    L_prop = row_negloglik(ctx, prop.data());
  } catch (const std::overflow_error&) {
    return StepOutcome::RejectedNonFinite;
  }
  if (!std::isfinite(L_prop)) return StepOutcome::RejectedNonFinite;

  Eigen::VectorXd back_mean(k);
  MatRM H(k, k), L_chol(k, k);
  try {
    newton_step(ctx, prop.data(), eta, back_mean.data(), H.data(), L_chol.data());
  } catch (const std::exception&) {
    return StepOutcome::RejectedNonFinite;
  }

  double log_rho = (L_cur - L_prop) + log_gaussian_prec(cur, back_mean, L_chol) -
                   log_gaussian_prec(prop, cache.mean, cache.chol);
  if (!std::isfinite(log_rho)) return StepOutcome::RejectedNonFinite;

  if (std::log(u_accept) < log_rho) {
    cur = prop;
    cache.mean = back_mean;
    cache.chol = L_chol;
    return StepOutcome::Accepted;
  }
  return StepOutcome::Rejected;
}

PosteriorChain run_chain(const Dataset& ds, const ChainConfig& cfg,
                         const std::vector<NiwHyperprior>& hyper) {
  if (cfg.burn_in >= cfg.epochs)
    throw std::invalid_argument("chain: burn_in must be < epochs");
  if (cfg.thin < 1 || cfg.target_samples < 1)
    throw std::invalid_argument("chain: thin and target_samples must be >= 1");

  const int E = static_cast<int>(ds.counts.size());
  ModelState state;
  std::vector<std::vector<RowProposalCache>> caches;
  hmh_init(ds, cfg.k, cfg.seed, state, caches);

  PosteriorChain chain;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    EpochStats stats;
    stats.accepted.assign(E, 0);
    stats.proposed.assign(E, 0);
    stats.non_finite.assign(E, 0);
    for (int e = 0; e < E; ++e) {
      PriorCache pc = make_prior_cache(state.priors[e]);
      const long n = ds.counts[e];
      std::vector<uint8_t> acc(n, 0), nonfin(n, 0);
#pragma omp parallel num_threads(cfg.threads)
      {
        RowWorkspace ws;
#pragma omp for schedule(static)
        for (long i = 0; i < n; ++i) {
          RowContext ctx =
              build_row_context(ds, state.factors, e, i, state.priors[e], pc, ws);
          PhiloxStream rs(cfg.seed, StreamDomain::RowStep, epoch, e, i);
          double* u = state.factors[e].data() + i * static_cast<long>(state.k);
          StepOutcome out = hmh_row_step(ctx, u, caches[e][i], rs, cfg.eta_fixed_one);
          if (out == StepOutcome::Accepted) acc[i] = 1;
          if (out == StepOutcome::RejectedNonFinite) nonfin[i] = 1;
        }
      }
      for (long i = 0; i < n; ++i) {
        stats.accepted[e] += acc[i];
        stats.non_finite[e] += nonfin[i];
      }
      stats.proposed[e] = n;

      PhiloxStream hs(cfg.seed, StreamDomain::HyperGibbs, epoch, e, 0);
      NiwPosterior post = niw_posterior(hyper[e], state.factors[e]);
      sample_niw(post, hs, state.priors[e].mu, state.priors[e].sigma);
    }
    chain.acceptance.push_back(std::move(stats));
    double energy = model_objective(ds, state, hyper, true);
    if (!std::isfinite(energy))
      throw std::runtime_error("chain diverged at epoch " + std::to_string(epoch));
    chain.energy.push_back(energy);

    int since_burn = epoch - cfg.burn_in;
    if (since_burn > 0 && since_burn % cfg.thin == 0 &&
        static_cast<int>(chain.samples.size()) < cfg.target_samples) {
      chain.samples.push_back(state);
      chain.sample_epochs.push_back(epoch);
    }
  }
  return chain;
}

}  // namespace cmf
