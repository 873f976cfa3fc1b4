#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "cmf/niw.hpp"
#include "cmf/rng.hpp"

using namespace cmf;

TEST_CASE("posterior with no rows is the prior") {
  const auto prior = default_hyperprior(3);
  Eigen::MatrixXd rows(0, 3);
  const auto post = niw_posterior(prior, rows);
  CHECK(post.nu == prior.nu);
  CHECK(post.beta == prior.beta);
  CHECK((post.psi - prior.psi).cwiseAbs().maxCoeff() == 0.0);
  CHECK((post.xi - prior.xi).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("k=1 hand example of the conjugate update") {
  NiwHyperprior prior;
  prior.nu = 1.0;
  prior.psi = Eigen::MatrixXd::Identity(1, 1);
  prior.xi = Eigen::VectorXd::Zero(1);
  prior.beta = 1.0;
  Eigen::MatrixXd rows(1, 1);
  rows << 2.0;

  const auto post = niw_posterior(prior, rows);
  CHECK(post.xi(0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(post.psi(0, 0) == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(post.nu == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(post.beta == doctest::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("posterior mean location is swamped by data") {
  const int k = 4;
  const auto prior = default_hyperprior(k);
  const long n = 100000;
  PhiloxStream rs(3, StreamDomain::HyperGibbs, 0, 0, 0);
  Eigen::MatrixXd rows(n, k);
  for (long i = 0; i < n; ++i)
    for (int j = 0; j < k; ++j) rows(i, j) = 1.5 + 0.7 * rs.normal();
  const Eigen::VectorXd mean = rows.colwise().mean();
  const auto post = niw_posterior(prior, rows);
  CHECK((post.xi - mean).norm() < 1e-4 * mean.norm());
}

TEST_CASE("joint mode formula") {
  NiwPosterior post;
  post.nu = 2.0;
  post.psi = Eigen::MatrixXd::Identity(1, 1) * 3.0;
  post.xi = Eigen::VectorXd::Constant(1, 0.25);
  post.beta = 2.0;
  Eigen::VectorXd mu;
  Eigen::MatrixXd sigma;
  niw_mode(post, mu, sigma);
  CHECK(mu(0) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(sigma(0, 0) == doctest::Approx(0.6).epsilon(1e-15));  // 3/(2+1+2)

  // Prior-as-posterior with the defaults: sigma = I/(2k+2).
  for (int k : {2, 5}) {
    const auto prior = default_hyperprior(k);
    NiwPosterior p2;
    p2.nu = prior.nu;
    p2.psi = prior.psi;
    p2.xi = prior.xi;
    p2.beta = prior.beta;
    niw_mode(p2, mu, sigma);
    CHECK((sigma - Eigen::MatrixXd::Identity(k, k) / (2.0 * k + 2.0))
              .cwiseAbs()
              .maxCoeff() < 1e-14);
    CHECK(Eigen::LLT<Eigen::MatrixXd>(sigma).info() == Eigen::Success);
  }
}

TEST_CASE("wishart mean at k=2") {
  PhiloxStream rs(17, StreamDomain::HyperGibbs, 1, 0, 0);
  const Eigen::MatrixXd I2 = Eigen::MatrixXd::Identity(2, 2);
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(2, 2);
  const int n = 100000;
  for (int i = 0; i < n; ++i) acc += sample_wishart(5.0, I2, rs);
  acc /= double(n);
  // E[W(5, I)] = 5 I; off-diagonals 0 with se ~ sqrt(5/n).
  CHECK(acc(0, 0) == doctest::Approx(5.0).epsilon(0.02));
  CHECK(acc(1, 1) == doctest::Approx(5.0).epsilon(0.02));
  CHECK(std::abs(acc(0, 1)) < 0.05);
  CHECK(std::abs(acc(0, 1) - acc(1, 0)) == 0.0);  // draws are symmetric
}

TEST_CASE("wishart draws are positive definite at the minimal nu") {
  const int k = 3;
  PhiloxStream rs(23, StreamDomain::HyperGibbs, 2, 0, 0);
  Eigen::MatrixXd S(k, k);
  S << 2.0, 0.3, 0.0, 0.3, 1.0, -0.2, 0.0, -0.2, 0.5;
  for (int i = 0; i < 10000; ++i) {
    const Eigen::MatrixXd W = sample_wishart(double(k), S, rs);
    CHECK(Eigen::LLT<Eigen::MatrixXd>(W).info() == Eigen::Success);
  }
}

TEST_CASE("k=1 wishart is chi-square") {
  PhiloxStream rs(29, StreamDomain::HyperGibbs, 3, 0, 0);
  const Eigen::MatrixXd one = Eigen::MatrixXd::Identity(1, 1);
  const double nu = 7.0;
  const int n = 100000;
  double sum = 0, sumsq = 0;
  for (int i = 0; i < n; ++i) {
    const double w = sample_wishart(nu, one, rs)(0, 0);
    sum += w;
    sumsq += w * w;
  }
  const double mean = sum / n;
  const double var = sumsq / n - mean * mean;
  CHECK(mean == doctest::Approx(nu).epsilon(0.02));
  CHECK(var == doctest::Approx(2 * nu).epsilon(0.05));
}

TEST_CASE("niw sample moments") {
  NiwPosterior post;
  const int k = 2;
  post.nu = 10.0;
  post.psi = Eigen::MatrixXd::Identity(k, k);
  post.xi = Eigen::VectorXd::Constant(k, -0.75);
  post.beta = 4.0;

  PhiloxStream rs(31, StreamDomain::HyperGibbs, 4, 0, 0);
  const int n = 100000;
  Eigen::MatrixXd sig_acc = Eigen::MatrixXd::Zero(k, k);
  Eigen::VectorXd mu_acc = Eigen::VectorXd::Zero(k);
  Eigen::VectorXd mu, mu_var = Eigen::VectorXd::Zero(k);
  Eigen::MatrixXd sigma;
  for (int i = 0; i < n; ++i) {
    sample_niw(post, rs, mu, sigma);
    sig_acc += sigma;
    mu_acc += mu;
    mu_var.array() += (mu.array() + 0.75).square();
  }
  sig_acc /= double(n);
  mu_acc /= double(n);
  mu_var /= double(n);

  // E[Sigma] = Psi/(nu - k - 1) = I/7.
  CHECK(sig_acc(0, 0) == doctest::Approx(1.0 / 7.0).epsilon(0.03));
  CHECK(sig_acc(1, 1) == doctest::Approx(1.0 / 7.0).epsilon(0.03));
  CHECK(std::abs(sig_acc(0, 1)) < 0.01);

  // E[mu] = xi within 3 standard errors: Var(mu_i) = E[Sigma_ii]/beta.
  const double se = std::sqrt(1.0 / 7.0 / 4.0 / double(n));
  CHECK(std::abs(mu_acc(0) + 0.75) < 3 * se);
  CHECK(std::abs(mu_acc(1) + 0.75) < 3 * se);

  // Unconditional Var(mu) = E[Sigma]/beta (law of total variance; the
  // E[mu|Sigma] term vanishes because the conditional mean is constant).
  CHECK(mu_var(0) == doctest::Approx(1.0 / 28.0).epsilon(0.05));
  CHECK(mu_var(1) == doctest::Approx(1.0 / 28.0).epsilon(0.05));
}

TEST_CASE("conditional variance of mu given a pinned sigma") {
  // Concentrate the Inverse-Wishart so Sigma is effectively constant, then
  // the spread of mu isolates the N(xi, Sigma/beta) stage.
  NiwPosterior post;
  const int k = 2;
  const double nu = 2e6;
  Eigen::MatrixXd target(k, k);
  target << 0.8, 0.2, 0.2, 0.5;
  post.nu = nu;
  post.psi = target * (nu - k - 1);
  post.xi = Eigen::VectorXd::Zero(k);
  post.beta = 3.0;

  PhiloxStream rs(37, StreamDomain::HyperGibbs, 5, 0, 0);
  const int n = 100000;
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(k, k);
  Eigen::VectorXd mu;
  Eigen::MatrixXd sigma;
  for (int i = 0; i < n; ++i) {
    sample_niw(post, rs, mu, sigma);
    cov += mu * mu.transpose();
  }
  cov /= double(n);
  const Eigen::MatrixXd expect = target / post.beta;
  for (int a = 0; a < k; ++a)
    for (int b = 0; b < k; ++b)
      CHECK(cov(a, b) == doctest::Approx(expect(a, b)).epsilon(0.05));
}

TEST_CASE("posterior concentrates as data grows") {
  const int k = 3;
  Eigen::VectorXd mu0(k);
  mu0 << 1.0, -2.0, 0.5;
  Eigen::MatrixXd Sigma0(k, k);
  Sigma0 << 1.0, 0.3, 0.0, 0.3, 2.0, -0.4, 0.0, -0.4, 0.7;
  const Eigen::MatrixXd L = Sigma0.llt().matrixL();

  const auto prior = default_hyperprior(k);
  double avg_err[3] = {0, 0, 0};
  const long sizes[3] = {10, 100, 1000};
  for (int rep = 0; rep < 20; ++rep) {
    PhiloxStream rs(41, StreamDomain::HyperGibbs, 6, uint32_t(rep), 0);
    for (int s = 0; s < 3; ++s) {
      Eigen::MatrixXd rows(sizes[s], k);
      Eigen::VectorXd z(k);
      for (long i = 0; i < sizes[s]; ++i) {
        rs.normal_fill(z.data(), k);
        rows.row(i) = (mu0 + L * z).transpose();
      }
      const auto post = niw_posterior(prior, rows);
      avg_err[s] += (post.xi - mu0).norm() / 20.0;
    }
  }
  CHECK(avg_err[0] > avg_err[1]);
  CHECK(avg_err[1] > avg_err[2]);
}

TEST_CASE("mode and monte carlo mean of mu agree in the large-data limit") {
  const int k = 2;
  const auto prior = default_hyperprior(k);
  PhiloxStream gen(43, StreamDomain::HyperGibbs, 7, 0, 0);
  const long n = 10000;
  Eigen::MatrixXd rows(n, k);
  for (long i = 0; i < n; ++i)
    for (int j = 0; j < k; ++j) rows(i, j) = (j ? -1.0 : 2.0) + gen.normal();
  const auto post = niw_posterior(prior, rows);

  Eigen::VectorXd mode_mu;
  Eigen::MatrixXd mode_sigma;
  niw_mode(post, mode_mu, mode_sigma);

  PhiloxStream rs(47, StreamDomain::HyperGibbs, 8, 0, 0);
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(k), mu;
  Eigen::MatrixXd sigma;
  const int draws = 2000;
  for (int i = 0; i < draws; ++i) {
    sample_niw(post, rs, mu, sigma);
    acc += mu;
  }
  acc /= double(draws);
  CHECK((mode_mu - acc).norm() < 0.02);
}

TEST_CASE("sampling is deterministic in the stream coordinates") {
  const auto prior = default_hyperprior(3);
  NiwPosterior post;
  post.nu = prior.nu + 5;
  post.psi = prior.psi * 2.0;
  post.xi = Eigen::VectorXd::Constant(3, 0.1);
  post.beta = 6.0;

  PhiloxStream a(51, StreamDomain::HyperGibbs, 9, 2, 0);
  PhiloxStream b(51, StreamDomain::HyperGibbs, 9, 2, 0);
  Eigen::VectorXd mu1, mu2;
  Eigen::MatrixXd s1, s2;
  for (int i = 0; i < 5; ++i) {
    sample_niw(post, a, mu1, s1);
    sample_niw(post, b, mu2, s2);
    CHECK((mu1 - mu2).cwiseAbs().maxCoeff() == 0.0);
    CHECK((s1 - s2).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("niw log density against a scalar inverse-gamma oracle") {
  // k=1: IW(nu, psi) is Inv-Gamma(nu/2, psi/2) on sigma2, and mu | sigma2 is
  // N(xi, sigma2/beta). Assemble both by hand and compare.
  NiwHyperprior prior;
  prior.nu = 3.0;
  prior.psi = Eigen::MatrixXd::Constant(1, 1, 1.7);
  prior.xi = Eigen::VectorXd::Constant(1, 0.4);
  prior.beta = 2.5;

  for (double s2 : {0.3, 1.0, 2.2}) {
    for (double m : {-1.0, 0.4, 2.0}) {
      const double a = prior.nu / 2, b = prior.psi(0, 0) / 2;
      const double log_ig =
          a * std::log(b) - std::lgamma(a) - (a + 1) * std::log(s2) - b / s2;
      const double log_n = -0.5 * std::log(2 * M_PI * s2 / prior.beta) -
                           prior.beta * (m - prior.xi(0)) * (m - prior.xi(0)) /
                               (2 * s2);
      const double got = niw_log_density(Eigen::VectorXd::Constant(1, m),
                                         Eigen::MatrixXd::Constant(1, 1, s2), prior);
      CHECK(got == doctest::Approx(log_ig + log_n).epsilon(1e-12));
    }
  }
}

TEST_CASE("niw log density at a hand-computed k=2 point") {
  // IW(nu=3, Psi=I) at Sigma=I: (nu/2)log|Psi| - (nu k/2)log 2 - log Gamma_2(1.5)
  //   - ((nu+k+1)/2)log|Sigma| - tr(Psi Sigma^-1)/2
  // with Gamma_2(1.5) = sqrt(pi) Gamma(1.5) Gamma(1) = pi/2.
  NiwHyperprior prior;
  prior.nu = 3.0;
  prior.psi = Eigen::MatrixXd::Identity(2, 2);
  prior.xi = Eigen::VectorXd::Zero(2);
  prior.beta = 4.0;

  const double log_iw = -3.0 * std::log(2.0) - std::log(M_PI / 2.0) - 1.0;
  // N(mu = xi | xi, Sigma/beta) with Sigma = I: -(k/2)log(2 pi / beta).
  const double log_n = -std::log(2 * M_PI / prior.beta);
  const double got = niw_log_density(Eigen::VectorXd::Zero(2),
                                     Eigen::MatrixXd::Identity(2, 2), prior);
  CHECK(got == doctest::Approx(log_iw + log_n).epsilon(1e-12));
}
