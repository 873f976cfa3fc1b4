#include "cmf/expfam.hpp"

#include <cmath>
#include <stdexcept>

namespace cmf {

namespace {

constexpr double kPoissonThetaCap = 700.0;

[[noreturn]] void poisson_overflow(double theta) {
  throw std::overflow_error("poisson natural parameter " + std::to_string(theta) +
                            " exceeds supported range (700)");
}

double half_log_2pi() { return 0.5 * std::log(2.0 * M_PI); }

}  // namespace

double log_partition(Family f, double theta) {
  switch (f) {
    case Family::Bernoulli:
      // max(t,0) + log1p(exp(-|t|)) is overflow-free on both branches
      return std::fmax(theta, 0.0) + std::log1p(std::exp(-std::fabs(theta)));
    case Family::Gaussian:
      return 0.5 * theta * theta;
    case Family::Poisson:
      if (theta > kPoissonThetaCap) poisson_overflow(theta);
      return std::exp(theta);
  }
  __builtin_unreachable();
}

double mean_link(Family f, double theta) {
  switch (f) {
    case Family::Bernoulli:
      return theta >= 0.0 ? 1.0 / (1.0 + std::exp(-theta))
                          : std::exp(theta) / (1.0 + std::exp(theta));
    case Family::Gaussian:
      return theta;
    case Family::Poisson:
      if (theta > kPoissonThetaCap) poisson_overflow(theta);
      return std::exp(theta);
  }
  __builtin_unreachable();
}

double link_derivative(Family f, double theta) {
  switch (f) {
    case Family::Bernoulli: {
      double s = mean_link(Family::Bernoulli, theta);
      return s * (1.0 - s);
    }
    case Family::Gaussian:
      return 1.0;
    case Family::Poisson:
      if (theta > kPoissonThetaCap) poisson_overflow(theta);
      return std::exp(theta);
  }
  __builtin_unreachable();
}

double log_density(Family f, double x, double theta) {
  if (!value_admissible(f, x))
    throw std::domain_error("value " + std::to_string(x) + " not admissible for " +
                            family_name(f));
  double base = 0.0;  // log h(x)
  switch (f) {
    case Family::Bernoulli:
      break;
    case Family::Gaussian:
      base = -half_log_2pi() - 0.5 * x * x;
      break;
    case Family::Poisson:
      base = -std::lgamma(x + 1.0);
      break;
  }
  return theta * x - log_partition(f, theta) + base;
}

bool value_admissible(Family f, double x) {
  switch (f) {
    case Family::Bernoulli:
      return x == 0.0 || x == 1.0;
    case Family::Gaussian:
      return std::isfinite(x);
    case Family::Poisson:
      return std::isfinite(x) && x >= 0.0 && x == std::floor(x);
  }
  __builtin_unreachable();
}

Family family_from_string(const std::string& name) {
  std::string s;
  s.reserve(name.size());
  for (char c : name) s.push_back(static_cast<char>(std::tolower(c)));
  if (s == "bernoulli") return Family::Bernoulli;
  if (s == "gaussian") return Family::Gaussian;
  if (s == "poisson") return Family::Poisson;
  throw std::invalid_argument("unknown family: " + name);
}

const char* family_name(Family f) {
  switch (f) {
    case Family::Bernoulli: return "bernoulli";
    case Family::Gaussian: return "gaussian";
    case Family::Poisson: return "poisson";
  }
  __builtin_unreachable();
}

}  // namespace cmf
