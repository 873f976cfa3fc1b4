#include "cmf/predict.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "cmf/map_engine.hpp"

namespace cmf {

namespace {

double destandardize(const RelationData& rd, double mean_value) {
  if (rd.family == Family::Gaussian)
    return mean_value * rd.std_stddev + rd.std_mean;
  return mean_value;
}

// Splits a new entity's observations; conditioning part first.
void split_new_entity(const NewEntityObs& ne, const FoldinConfig& cfg,
                      uint32_t ordinal, std::vector<size_t>& cond,
                      std::vector<size_t>& eval) {
  const size_t n = ne.counterpart.size();
  if (n == 0) throw std::invalid_argument("fold-in: entity has no observations");
  std::vector<size_t> perm(n);
  std::iota(perm.begin(), perm.end(), size_t{0});
  PhiloxStream rs(cfg.seed, StreamDomain::Split, 0, ne.relation_index, ordinal);
  for (size_t i = n - 1; i > 0; --i) {
    size_t j = static_cast<size_t>(rs.uniform() * (i + 1));
    if (j > i) j = i;
    std::swap(perm[i], perm[j]);
  }
  size_t n_cond = static_cast<size_t>(std::lround(cfg.observed_fraction * n));
  n_cond = std::min(std::max<size_t>(n_cond, 1), n - 1);
  if (n < 2)
    throw std::invalid_argument("fold-in: need at least 2 observations to split");
  cond.assign(perm.begin(), perm.begin() + n_cond);
  eval.assign(perm.begin() + n_cond, perm.end());
  if (cond.empty())
    throw std::invalid_argument("fold-in: empty conditioning split");
}

// RowContext over the conditioning observations of a new entity, with the
// counterpart factor rows gathered from the given state.
RowContext new_entity_context(const Dataset& ds, const std::vector<MatRM>& factors,
                              const NewEntityObs& ne,
                              const std::vector<size_t>& cond,
                              const FactorPrior& prior, const PriorCache& cache,
                              RowWorkspace& ws) {
  const RelationData& rd = ds.rels[ne.relation_index];
  int counterpart_type = ne.as_row ? rd.col_type_pos : rd.row_type_pos;
  const MatRM& C = factors[counterpart_type];
  const int k = static_cast<int>(C.cols());
  if (static_cast<long>(ws.V.size()) < static_cast<long>(cond.size()) * k)
    ws.V.resize(cond.size() * k);
  if (ws.x.size() < cond.size()) ws.x.resize(cond.size());
  for (size_t t = 0; t < cond.size(); ++t) {
    long j = ne.counterpart[cond[t]];
    const double* src = C.data() + j * k;
    std::copy(src, src + k, ws.V.data() + t * k);
    ws.x[t] = ne.value[cond[t]];
  }
  RowContext ctx;
  ctx.k = k;
  ctx.row_id = -1;
  ctx.prior_mean = prior.mu.data();
  ctx.prior_precision = cache.precision.data();
  ctx.half_logdet_2pi_sigma = cache.half_logdet_2pi;
  ctx.blocks.push_back(
      {ws.V.data(), ws.x.data(), static_cast<long>(cond.size()), rd.family});
  return ctx;
}

FoldinResult finish_foldin(const Dataset& ds, const NewEntityObs& ne,
                           const std::vector<size_t>& eval,
                           const std::vector<double>& mean_link_sums,
                           double denom) {
  const RelationData& rd = ds.rels[ne.relation_index];
  FoldinResult res;
  for (size_t t = 0; t < eval.size(); ++t) {
    res.eval_counterpart.push_back(ne.counterpart[eval[t]]);
    res.predicted.push_back(destandardize(rd, mean_link_sums[t] / denom));
    res.actual.push_back(ne.value[eval[t]]);
  }
  return res;
}

}  // namespace

std::vector<double> predict_point(const Dataset& ds, const ModelState& state,
                                  const PredictionRequest& req) {
  if (req.relation_index < 0 ||
      req.relation_index >= static_cast<int>(ds.rels.size()))
    throw std::invalid_argument("predict: unknown relation");
  const RelationData& rd = ds.rels[req.relation_index];
  const MatRM& R = state.factors[rd.row_type_pos];
  const MatRM& C = state.factors[rd.col_type_pos];
  std::vector<double> out;
  out.reserve(req.targets.size());
  for (auto [i, j] : req.targets) {
    if (i < 0 || i >= R.rows() || j < 0 || j >= C.rows())
      throw std::invalid_argument("predict: target out of range");
    double theta = R.row(i).dot(C.row(j));
    out.push_back(destandardize(rd, mean_link(rd.family, theta)));
  }
  return out;
}

std::vector<double> predict_bayes(const Dataset& ds, const PosteriorChain& chain,
                                  const PredictionRequest& req) {
  if (chain.samples.empty()) throw std::runtime_error("predict: empty chain");
  std::vector<double> acc(req.targets.size(), 0.0);
  for (const auto& st : chain.samples) {
    std::vector<double> p = predict_point(ds, st, req);
    for (size_t t = 0; t < p.size(); ++t) acc[t] += p[t];
  }
  for (double& v : acc) v /= static_cast<double>(chain.samples.size());
  return acc;
}

FoldinResult fold_in_bayes(const Dataset& ds, const PosteriorChain& chain,
                           const NewEntityObs& ne, const FoldinConfig& cfg,
                           uint32_t entity_ordinal) {
  if (chain.samples.empty()) throw std::runtime_error("fold-in: empty chain");
  std::vector<size_t> cond, eval;
  split_new_entity(ne, cfg, entity_ordinal, cond, eval);
  const RelationData& rd = ds.rels[ne.relation_index];
  int new_type = ne.as_row ? rd.row_type_pos : rd.col_type_pos;
  int counterpart_type = ne.as_row ? rd.col_type_pos : rd.row_type_pos;

  int used = std::min<int>(cfg.posterior_states_used,
                           static_cast<int>(chain.samples.size()));
  size_t first_state = chain.samples.size() - used;

  const int k = chain.samples[0].k;
  std::vector<double> sums(eval.size(), 0.0);
  long total_samples = 0;
  RowWorkspace ws;
  Eigen::VectorXd u(k), mean(k);
  MatRM H(k, k), L(k, k);
  for (int s = 0; s < used; ++s) {
    const ModelState& st = chain.samples[first_state + s];
    PriorCache pc = make_prior_cache(st.priors[new_type]);
    RowContext ctx = new_entity_context(ds, st.factors, ne, cond,
                                        st.priors[new_type], pc, ws);
    PhiloxStream rs(cfg.seed, StreamDomain::FoldIn, s, new_type, entity_ordinal);
    // start from a prior draw, then seed the proposal cache with one Newton step
    Eigen::VectorXd z(k);
    rs.normal_fill(z.data(), k);
    Eigen::LLT<Eigen::MatrixXd> llt(st.priors[new_type].sigma);
    u = st.priors[new_type].mu + Eigen::MatrixXd(llt.matrixL()) * z;
    RowProposalCache cache;
    double eta0 = rs.uniform();
    newton_step(ctx, u.data(), eta0, mean.data(), H.data(), L.data());
    cache.mean = mean;
    cache.chol = L;

    const MatRM& C = st.factors[counterpart_type];
    int kept = 0;
    for (int step = 1; kept < cfg.samples_per_state; ++step) {
      hmh_row_step(ctx, u.data(), cache, rs, false);
      if (step > cfg.burn_in && (step - cfg.burn_in) % cfg.thin == 0) {
        for (size_t t = 0; t < eval.size(); ++t) {
          double theta = u.dot(C.row(ne.counterpart[eval[t]]));
          sums[t] += mean_link(rd.family, theta);
        }
        ++kept;
        ++total_samples;
      }
    }
  }
  return finish_foldin(ds, ne, eval, sums, static_cast<double>(total_samples));
}

FoldinResult fold_in_map(const Dataset& ds, const ModelState& state,
                         const NewEntityObs& ne, const FoldinConfig& cfg,
                         uint32_t entity_ordinal) {
  std::vector<size_t> cond, eval;
  split_new_entity(ne, cfg, entity_ordinal, cond, eval);
  const RelationData& rd = ds.rels[ne.relation_index];
  int new_type = ne.as_row ? rd.row_type_pos : rd.col_type_pos;
  int counterpart_type = ne.as_row ? rd.col_type_pos : rd.row_type_pos;

  const int k = state.k;
  PriorCache pc = make_prior_cache(state.priors[new_type]);
  RowWorkspace ws;
  RowContext ctx =
      new_entity_context(ds, state.factors, ne, cond, state.priors[new_type], pc, ws);
  Eigen::VectorXd u = state.priors[new_type].mu;
  Eigen::VectorXd unew(k), g(k);
  for (int it = 0; it < 200; ++it) {
    row_gradient(ctx, u.data(), g.data());
    if (g.norm() < 1e-8) break;
    map_row_update(ctx, u.data(), unew.data(), 30);
    u = unew;
  }
  const MatRM& C = state.factors[counterpart_type];
  std::vector<double> sums(eval.size(), 0.0);
  for (size_t t = 0; t < eval.size(); ++t)
    sums[t] = mean_link(rd.family, u.dot(C.row(ne.counterpart[eval[t]])));
  return finish_foldin(ds, ne, eval, sums, 1.0);
}

double evaluate_mse(const std::vector<double>& predictions,
                    const std::vector<double>& truth, double std_stddev) {
  if (predictions.size() != truth.size() || predictions.empty())
    throw std::invalid_argument("evaluate_mse: length mismatch or empty");
  double s = 0.0;
  for (size_t i = 0; i < predictions.size(); ++i) {
    double d = (predictions[i] - truth[i]) / std_stddev;
    s += d * d;
  }
  return s / static_cast<double>(predictions.size());
}

std::pair<ObservedMatrix, ObservedMatrix> split_holdout(const ObservedMatrix& m,
                                                        double test_fraction,
                                                        uint64_t seed) {
  ObservedMatrix train, test;
  train.relation = test.relation = m.relation;
  train.std_mean = test.std_mean = m.std_mean;
  train.std_stddev = test.std_stddev = m.std_stddev;
  PhiloxStream rs(seed, StreamDomain::Split, 0, 0, 0);
  for (size_t t = 0; t < m.size(); ++t) {
    ObservedMatrix& dst = rs.uniform() < test_fraction ? test : train;
    dst.rows.push_back(m.rows[t]);
    dst.cols.push_back(m.cols[t]);
    dst.vals.push_back(m.vals[t]);
  }
  return {std::move(train), std::move(test)};
}

}  // namespace cmf
