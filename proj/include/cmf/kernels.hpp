#pragma once

namespace cmf::kern {

// Dense inner loops under the per-row GLM evaluations. V is the gathered
// counterpart block, row-major n x k. Two implementations ship: a scalar
// reference and an AVX2/FMA variant; dispatch() picks one at startup from
// CPU capabilities, overridable with CMF_KERNELS=scalar|avx2.
struct Ops {
  // theta[j] = V[j,:] . u
  void (*theta_batch)(const double* V, const double* u, int n, int k,
                      double* theta);
  // g[a] += sum_j w[j] * V[j,a]
  void (*weighted_sum)(const double* V, const double* w, int n, int k,
                       double* g);
  // H[a,b] += sum_j c[j] * V[j,a] * V[j,b], H row-major k x k, full fill
  void (*weighted_gram)(const double* V, const double* c, int n, int k,
                        double* H);
  double (*dot)(const double* a, const double* b, int k);
  const char* name;
};

const Ops& ops();

// Test hooks.
const Ops& scalar_ops();
const Ops& avx2_ops();   // valid only if avx2_supported()
bool avx2_supported();
void force(const char* which);  // "scalar", "avx2", or nullptr for auto

}  // namespace cmf::kern
