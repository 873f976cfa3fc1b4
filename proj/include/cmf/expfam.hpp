#pragma once

#include <string>

namespace cmf {

// One-parameter exponential families over the natural parameter theta.
// Gaussian is unit-variance; matrix scale is handled by standardization.
enum class Family { Bernoulli, Gaussian, Poisson };

double log_partition(Family f, double theta);   // b(theta)
double mean_link(Family f, double theta);       // f(theta) = b'(theta)
double link_derivative(Family f, double theta); // b''(theta), >= 0
// Fully normalized log p(x | theta) = theta*x - b(theta) + log h(x).
double log_density(Family f, double x, double theta);

// True iff x is a legal observation for the family (Bernoulli {0,1},
// Gaussian finite, Poisson non-negative integer).
bool value_admissible(Family f, double x);

Family family_from_string(const std::string& name);
const char* family_name(Family f);

}  // namespace cmf
