#include "cmf/synth.hpp"

#include <cmath>
#include <stdexcept>

namespace cmf {

namespace {

double sample_entry(Family f, double theta, double noise_scale, PhiloxStream& rs) {
  switch (f) {
    case Family::Bernoulli:
      return rs.uniform() < mean_link(Family::Bernoulli, theta) ? 1.0 : 0.0;
    case Family::Gaussian:
      return theta + noise_scale * rs.normal();
    case Family::Poisson: {
      double lambda = std::exp(std::min(theta, 30.0));
      if (lambda < 30.0) {
        double limit = std::exp(-lambda), prod = rs.uniform();
        long n = 0;
        while (prod > limit) {
          prod *= rs.uniform();
          ++n;
        }
        return static_cast<double>(n);
      }
      return std::max(0.0, std::round(lambda + std::sqrt(lambda) * rs.normal()));
    }
  }
  __builtin_unreachable();
}

}  // namespace

SynthOutput generate(const SynthSpec& spec) {
  if (spec.k_true < 1) throw std::invalid_argument("synth: k_true must be >= 1");
  for (const auto& r : spec.relations)
    if (r.density <= 0.0 || r.density > 1.0)
      throw std::invalid_argument("synth: density must be in (0,1]");

  const int k = spec.k_true;
  const int E = static_cast<int>(spec.entity_types.size());
  SynthOutput out;
  out.truth.k = k;

  NiwHyperprior hp = default_hyperprior(k);
  NiwPosterior prior_as_post{hp.nu, hp.psi, hp.xi, hp.beta};
  for (int e = 0; e < E; ++e) {
    const auto& [name, count] = spec.entity_types[e];
    out.schema.entity_types.push_back({e + 1, name, count});
    PhiloxStream rs(spec.seed, StreamDomain::Synth, 0, e, 0);
    FactorPrior prior;
    sample_niw(prior_as_post, rs, prior.mu, prior.sigma);
    Eigen::MatrixXd L =
        Eigen::LLT<Eigen::MatrixXd>(prior.sigma).matrixL();
    MatRM F(count, k);
    Eigen::VectorXd z(k);
    for (long i = 0; i < count; ++i) {
      rs.normal_fill(z.data(), k);
      F.row(i) = (prior.mu + L * z).transpose();
    }
    out.truth.factors.push_back(std::move(F));
    out.truth.priors.push_back(std::move(prior));
  }

  for (size_t r = 0; r < spec.relations.size(); ++r) {
    const auto& rel = spec.relations[r];
    out.schema.relations.push_back({rel.id, rel.row_type, rel.col_type, rel.family});
    const MatRM& R = out.truth.factors[rel.row_type - 1];
    const MatRM& C = out.truth.factors[rel.col_type - 1];
    ObservedMatrix m;
    m.relation = rel.id;
    PhiloxStream rs(spec.seed, StreamDomain::Synth, 1, static_cast<uint32_t>(r), 0);
    for (long i = 0; i < R.rows(); ++i)
      for (long j = 0; j < C.rows(); ++j) {
        double keep = rs.uniform();
        double theta = R.row(i).dot(C.row(j));
        double v = sample_entry(rel.family, theta, spec.noise_scale, rs);
        if (keep < rel.density) {
          m.rows.push_back(i);
          m.cols.push_back(j);
          m.vals.push_back(v);
        }
      }
    out.schema.matrices.push_back(std::move(m));
  }
  return out;
}

SynthOutput three_type_fixture(uint64_t seed, double y_density, double noise_scale) {
  SynthSpec spec;
  spec.entity_types = {{"word", 400}, {"stimulus", 60}, {"voxel", 100}};
  spec.k_true = 5;
  spec.relations = {
      {"cooccurs", 1, 2, Family::Bernoulli, 0.3},
      {"response", 2, 3, Family::Gaussian, y_density},
  };
  spec.noise_scale = noise_scale;
  spec.seed = seed;
  SynthOutput out = generate(spec);
  out.schema.matrices[1] = standardize_gaussian(out.schema.matrices[1]);
  return out;
}

}  // namespace cmf
