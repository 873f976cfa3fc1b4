#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "cmf/hmh.hpp"
#include "cmf/model.hpp"
#include "cmf/rng.hpp"
#include "cmf/row_glm.hpp"
#include "cmf/synth.hpp"

using namespace cmf;

namespace {

Dataset synth_dataset(long n_a, long n_b, Family family, double density,
                      uint64_t seed) {
  SynthSpec spec;
  spec.entity_types = {{"a", n_a}, {"b", n_b}};
  spec.k_true = 2;
  spec.relations = {{"r", 1, 2, family, density}};
  spec.noise_scale = 0.5;
  spec.seed = seed;
  return compile(generate(spec).schema);
}

struct OwnedCtx {
  std::vector<double> V, x, mu, prec;
  RowContext ctx;
};

// A standalone single-block row problem with prior (0, I).
OwnedCtx make_ctx(int k, long n, Family family, uint64_t tag) {
  OwnedCtx o;
  o.V.resize(size_t(n) * k);
  o.x.resize(size_t(n));
  o.mu.assign(size_t(k), 0.0);
  o.prec.assign(size_t(k) * k, 0.0);
  for (int a = 0; a < k; ++a) o.prec[size_t(a) * k + a] = 1.0;
  PhiloxStream rs(tag, StreamDomain::Synth, 0, 0, 0);
  rs.normal_fill(o.V.data(), int(n) * k);
  for (long j = 0; j < n; ++j) {
    if (family == Family::Gaussian)
      o.x[size_t(j)] = rs.normal();
    else
      o.x[size_t(j)] = rs.uniform() < 0.5 ? 0.0 : 1.0;
  }
  o.ctx.k = k;
  o.ctx.prior_mean = o.mu.data();
  o.ctx.prior_precision = o.prec.data();
  o.ctx.half_logdet_2pi_sigma = 0.5 * k * std::log(2 * M_PI);
  o.ctx.blocks.push_back({o.V.data(), o.x.data(), n, family});
  return o;
}

RowProposalCache cache_at(const RowContext& ctx, const double* u, double eta) {
  const int k = ctx.k;
  RowProposalCache c;
  c.mean.resize(k);
  c.chol.resize(k, k);
  Eigen::VectorXd H(k * k);
  newton_step(ctx, u, eta, c.mean.data(), H.data(), c.chol.data());
  return c;
}

}  // namespace

TEST_CASE("hmh_init caches the constant gaussian hessian and is deterministic") {
  const Dataset ds = synth_dataset(4, 3, Family::Gaussian, 1.0, 1);
  ModelState st;
  std::vector<std::vector<RowProposalCache>> caches;
  hmh_init(ds, 2, 42, st, caches);
  REQUIRE(caches.size() == 2);
  REQUIRE(caches[0].size() == 4);
  REQUIRE(caches[1].size() == 3);

  RowWorkspace ws;
  for (int e = 0; e < 2; ++e) {
    const PriorCache pc = make_prior_cache(st.priors[size_t(e)]);
    for (long i = 0; i < ds.counts[size_t(e)]; ++i) {
      const RowContext ctx =
          build_row_context(ds, st.factors, e, i, st.priors[size_t(e)], pc, ws);
      MatRM H(2, 2);
      row_hessian(ctx, st.factors[size_t(e)].row(i).data(), H.data());
      const MatRM& L = caches[size_t(e)][size_t(i)].chol;
      CHECK((L * L.transpose() - H).cwiseAbs().maxCoeff() < 1e-12);
    }
  }

  ModelState st2;
  std::vector<std::vector<RowProposalCache>> caches2;
  hmh_init(ds, 2, 42, st2, caches2);
  for (size_t e = 0; e < 2; ++e) {
    CHECK((st.factors[e] - st2.factors[e]).cwiseAbs().maxCoeff() == 0.0);
    for (size_t i = 0; i < caches[e].size(); ++i) {
      CHECK((caches[e][i].mean - caches2[e][i].mean).cwiseAbs().maxCoeff() == 0.0);
      CHECK((caches[e][i].chol - caches2[e][i].chol).cwiseAbs().maxCoeff() == 0.0);
    }
  }
}

TEST_CASE("unit step length makes the gaussian proposal exact: every step accepts") {
  const int k = 3;
  const auto o = make_ctx(k, 10, Family::Gaussian, 7);
  std::vector<double> u(k, 1.5);
  RowProposalCache cache = cache_at(o.ctx, u.data(), 1.0);

  PhiloxStream rng(3, StreamDomain::RowStep, 1, 0, 0);
  int accepted = 0;
  for (int s = 0; s < 1000; ++s) {
    if (hmh_row_step(o.ctx, u.data(), cache, rng, true) == StepOutcome::Accepted)
      ++accepted;
  }
  CHECK(accepted == 1000);
}

TEST_CASE("accepted steps move the cache to the proposal's newton statistics") {
  const int k = 2;
  const auto o = make_ctx(k, 15, Family::Bernoulli, 9);
  std::vector<double> u(k, 0.3);
  RowProposalCache cache = cache_at(o.ctx, u.data(), 1.0);

  PhiloxStream rng(5, StreamDomain::RowStep, 1, 0, 0);
  bool saw_accept = false;
  for (int s = 0; s < 200 && !saw_accept; ++s) {
    if (hmh_row_step(o.ctx, u.data(), cache, rng, true) == StepOutcome::Accepted) {
      saw_accept = true;
      // With the step length pinned at 1 the refreshed cache is exactly the
      // Newton statistics recomputed at the accepted point.
      const RowProposalCache expect = cache_at(o.ctx, u.data(), 1.0);
      CHECK((cache.mean - expect.mean).cwiseAbs().maxCoeff() < 1e-12);
      CHECK((cache.chol - expect.chol).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
  CHECK(saw_accept);

  // A sabotaged cache proposes tightly around a terrible point; the step is
  // rejected and must leave both the row and the cache untouched.
  RowProposalCache bad = cache_at(o.ctx, u.data(), 1.0);
  bad.mean.array() += 50.0;
  bad.chol *= 10.0;
  const std::vector<double> before = u;
  const RowProposalCache snap = bad;
  const StepOutcome out = hmh_row_step(o.ctx, u.data(), bad, rng, true);
  CHECK(out != StepOutcome::Accepted);
  CHECK(u == before);
  CHECK((bad.mean - snap.mean).cwiseAbs().maxCoeff() == 0.0);
  CHECK((bad.chol - snap.chol).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("run_chain keeps the thinning schedule and per-epoch accounting") {
  const Dataset ds = synth_dataset(8, 6, Family::Bernoulli, 0.8, 3);
  ChainConfig cfg;
  cfg.k = 2;
  cfg.epochs = 30;
  cfg.burn_in = 10;
  cfg.thin = 2;
  cfg.target_samples = 5;
  cfg.seed = 17;
  const auto hyper = default_hyperpriors(ds, cfg.k);
  const PosteriorChain chain = run_chain(ds, cfg, hyper);

  REQUIRE(chain.samples.size() == 5);
  CHECK(chain.sample_epochs == std::vector<int>{12, 14, 16, 18, 20});
  REQUIRE(chain.acceptance.size() == 30);
  REQUIRE(chain.energy.size() == 30);
  for (const EpochStats& st : chain.acceptance) {
    REQUIRE(st.proposed.size() == 2);
    CHECK(st.proposed[0] == 8);
    CHECK(st.proposed[1] == 6);
    for (size_t e = 0; e < 2; ++e) {
      CHECK(st.accepted[e] >= 0);
      CHECK(st.accepted[e] <= st.proposed[e]);
      CHECK(st.non_finite[e] <= st.proposed[e] - st.accepted[e]);
    }
  }
  for (double en : chain.energy) CHECK(std::isfinite(en));

  long acc = 0, prop = 0;
  for (const EpochStats& st : chain.acceptance)
    for (size_t e = 0; e < 2; ++e) {
      acc += st.accepted[e];
      prop += st.proposed[e];
    }
  CHECK(double(acc) / double(prop) > 0.05);

  const PosteriorChain again = run_chain(ds, cfg, hyper);
  REQUIRE(again.samples.size() == chain.samples.size());
  for (size_t s = 0; s < chain.samples.size(); ++s)
    for (size_t e = 0; e < 2; ++e)
      CHECK((chain.samples[s].factors[e] - again.samples[s].factors[e])
                .cwiseAbs()
                .maxCoeff() == 0.0);
  CHECK(chain.energy == again.energy);
}

TEST_CASE("run_chain truncates retention when the chain is too short") {
  const Dataset ds = synth_dataset(5, 4, Family::Gaussian, 1.0, 4);
  ChainConfig cfg;
  cfg.k = 2;
  cfg.epochs = 20;
  cfg.burn_in = 10;
  cfg.thin = 5;
  cfg.target_samples = 20;
  cfg.seed = 8;
  const PosteriorChain chain = run_chain(ds, cfg, default_hyperpriors(ds, cfg.k));
  CHECK(chain.samples.size() == 2);
  CHECK(chain.sample_epochs == std::vector<int>{15, 20});
}

TEST_CASE("run_chain rejects impossible schedules") {
  const Dataset ds = synth_dataset(3, 3, Family::Gaussian, 1.0, 5);
  const auto hyper = default_hyperpriors(ds, 2);
  ChainConfig cfg;
  cfg.k = 2;
  cfg.epochs = 10;
  cfg.burn_in = 10;
  CHECK_THROWS_AS(run_chain(ds, cfg, hyper), std::invalid_argument);
  cfg.burn_in = 2;
  cfg.thin = 0;
  CHECK_THROWS_AS(run_chain(ds, cfg, hyper), std::invalid_argument);
}

TEST_CASE("all-gaussian chain with unit step lengths stays finite") {
  // Unit-length steps make the proposal exact for a frozen gaussian
  // conditional (covered by the standalone row test above). Inside a chain
  // the prior resample between epochs de-tunes the cached proposals, so
  // acceptance drops below 1; what must still hold is that no proposal ever
  // goes non-finite and the chain keeps moving.
  const Dataset ds = synth_dataset(10, 7, Family::Gaussian, 0.9, 6);
  ChainConfig cfg;
  cfg.k = 3;
  cfg.epochs = 25;
  cfg.burn_in = 5;
  cfg.thin = 1;
  cfg.target_samples = 20;
  cfg.seed = 11;
  cfg.eta_fixed_one = true;
  const PosteriorChain chain = run_chain(ds, cfg, default_hyperpriors(ds, cfg.k));
  long acc = 0, prop = 0, bad = 0;
  for (const EpochStats& st : chain.acceptance)
    for (size_t e = 0; e < st.proposed.size(); ++e) {
      acc += st.accepted[e];
      prop += st.proposed[e];
      bad += st.non_finite[e];
    }
  CHECK(bad == 0);
  CHECK(acc > 0);
  CHECK(acc <= prop);
  for (double en : chain.energy) CHECK(std::isfinite(en));
}

TEST_CASE("two chains agree on posterior mean predictions of a small matrix") {
  const Dataset ds = synth_dataset(5, 5, Family::Bernoulli, 1.0, 12);

  const auto posterior_mean = [&](uint64_t seed, int epochs, int burn, int thin) {
    ChainConfig cfg;
    cfg.k = 2;
    cfg.epochs = epochs;
    cfg.burn_in = burn;
    cfg.thin = thin;
    cfg.target_samples = 50;
    cfg.seed = seed;
    const PosteriorChain chain = run_chain(ds, cfg, default_hyperpriors(ds, cfg.k));
    REQUIRE(chain.samples.size() == 50);
    Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(5, 5);
    for (const ModelState& st : chain.samples) {
      for (long i = 0; i < 5; ++i)
        for (long j = 0; j < 5; ++j) {
          const double theta = st.factors[0].row(i).dot(st.factors[1].row(j));
          mean(i, j) += 1.0 / (1.0 + std::exp(-theta));
        }
    }
    return (mean / 50.0).eval();
  };

  const Eigen::MatrixXd quick = posterior_mean(1, 600, 100, 10);
  const Eigen::MatrixXd slow = posterior_mean(2, 6000, 1000, 100);
  CHECK((quick - slow).cwiseAbs().mean() < 0.05);
}
