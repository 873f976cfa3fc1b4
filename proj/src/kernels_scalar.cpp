#include "cmf/kernels.hpp"

namespace cmf::kern {

namespace {

void theta_batch_scalar(const double* V, const double* u, int n, int k,
                        double* theta) {
  for (int j = 0; j < n; ++j) {
    const double* v = V + static_cast<long>(j) * k;
    double s = 0.0;
    for (int a = 0; a < k; ++a) s += v[a] * u[a];
    theta[j] = s;
  }
}

void weighted_sum_scalar(const double* V, const double* w, int n, int k,
                         double* g) {
  for (int j = 0; j < n; ++j) {
    const double* v = V + static_cast<long>(j) * k;
    double wj = w[j];
    for (int a = 0; a < k; ++a) g[a] += wj * v[a];
  }
}

void weighted_gram_scalar(const double* V, const double* c, int n, int k,
                          double* H) {
  for (int j = 0; j < n; ++j) {
    const double* v = V + static_cast<long>(j) * k;
    double cj = c[j];
    for (int a = 0; a < k; ++a) {
      double ca = cj * v[a];
      double* Ha = H + static_cast<long>(a) * k;
      for (int b = 0; b < k; ++b) Ha[b] += ca * v[b];
    }
  }
}

double dot_scalar(const double* a, const double* b, int k) {
  double s = 0.0;
  for (int i = 0; i < k; ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

const Ops& scalar_ops() {
  static const Ops ops{theta_batch_scalar, weighted_sum_scalar,
                       weighted_gram_scalar, dot_scalar, "scalar"};
  return ops;
}

}  // namespace cmf::kern
