#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "cmf/kernels.hpp"
#include "cmf/rng.hpp"

using namespace cmf;

namespace {

// Deterministic random blocks of every awkward size: odd k, k below and
// above the 4-lane vector width, and n values that leave tails.
struct Block {
  int n, k;
  std::vector<double> V, u, w, c;
};

Block make_block(int n, int k, uint32_t tag) {
  PhiloxStream rs(42, StreamDomain::Synth, 9, tag, 0);
  Block b{n, k, {}, {}, {}, {}};
  b.V.resize(size_t(n) * k);
  b.u.resize(k);
  b.w.resize(n);
  b.c.resize(n);
  rs.normal_fill(b.V.data(), n * k);
  rs.normal_fill(b.u.data(), k);
  rs.normal_fill(b.w.data(), n);
  for (auto& x : b.c) x = rs.uniform();  // curvature weights are nonnegative
  return b;
}

// Long-double accumulation as the independent reference.
std::vector<double> theta_ref(const Block& b) {
  std::vector<double> t(b.n);
  for (int j = 0; j < b.n; ++j) {
    long double acc = 0;
    for (int a = 0; a < b.k; ++a) acc += (long double)b.V[size_t(j) * b.k + a] * b.u[a];
    t[j] = double(acc);
  }
  return t;
}

}  // namespace

TEST_CASE("scalar kernels match long-double references") {
  for (auto [n, k] : std::vector<std::pair<int, int>>{
           {1, 1}, {3, 2}, {5, 4}, {7, 5}, {16, 8}, {33, 11}, {100, 25}}) {
    const Block b = make_block(n, k, uint32_t(n * 100 + k));
    const auto& ops = kern::scalar_ops();

    std::vector<double> theta(n);
    ops.theta_batch(b.V.data(), b.u.data(), n, k, theta.data());
    const auto ref = theta_ref(b);
    for (int j = 0; j < n; ++j)
      CHECK(theta[j] == doctest::Approx(ref[j]).epsilon(1e-12));

    std::vector<double> g(k, 0.0);
    ops.weighted_sum(b.V.data(), b.w.data(), n, k, g.data());
    for (int a = 0; a < k; ++a) {
      long double acc = 0;
      for (int j = 0; j < n; ++j) acc += (long double)b.w[j] * b.V[size_t(j) * k + a];
      CHECK(g[a] == doctest::Approx(double(acc)).epsilon(1e-11));
    }

    std::vector<double> H(size_t(k) * k, 0.0);
    ops.weighted_gram(b.V.data(), b.c.data(), n, k, H.data());
    for (int a = 0; a < k; ++a)
      for (int bb = 0; bb < k; ++bb) {
        long double acc = 0;
        for (int j = 0; j < n; ++j)
          acc += (long double)b.c[j] * b.V[size_t(j) * k + a] * b.V[size_t(j) * k + bb];
        CHECK(H[size_t(a) * k + bb] == doctest::Approx(double(acc)).epsilon(1e-11));
      }

    CHECK(ops.dot(b.u.data(), b.u.data(), k) >= 0.0);
  }
}

TEST_CASE("avx2 kernels agree with scalar kernels bit-for-bit tolerances") {
  if (!kern::avx2_supported()) {
    MESSAGE("AVX2 not available on this host; skipping equivalence");
    return;
  }
  const auto& sc = kern::scalar_ops();
  const auto& vx = kern::avx2_ops();
  for (auto [n, k] : std::vector<std::pair<int, int>>{
           {1, 1}, {2, 3}, {4, 4}, {9, 5}, {17, 8}, {64, 12}, {301, 25}, {1000, 31}}) {
    const Block b = make_block(n, k, uint32_t(n * 1000 + k));

    std::vector<double> t1(n), t2(n);
    sc.theta_batch(b.V.data(), b.u.data(), n, k, t1.data());
    vx.theta_batch(b.V.data(), b.u.data(), n, k, t2.data());
    for (int j = 0; j < n; ++j)
      CHECK(t1[j] == doctest::Approx(t2[j]).epsilon(1e-13));

    std::vector<double> g1(k, 0.0), g2(k, 0.0);
    sc.weighted_sum(b.V.data(), b.w.data(), n, k, g1.data());
    vx.weighted_sum(b.V.data(), b.w.data(), n, k, g2.data());
    for (int a = 0; a < k; ++a) CHECK(g1[a] == doctest::Approx(g2[a]).epsilon(1e-12));

    std::vector<double> H1(size_t(k) * k, 0.0), H2(size_t(k) * k, 0.0);
    sc.weighted_gram(b.V.data(), b.c.data(), n, k, H1.data());
    vx.weighted_gram(b.V.data(), b.c.data(), n, k, H2.data());
    for (size_t i = 0; i < H1.size(); ++i)
      CHECK(H1[i] == doctest::Approx(H2[i]).epsilon(1e-12));

    CHECK(sc.dot(b.u.data(), b.w.data(), std::min(n, k)) ==
          doctest::Approx(vx.dot(b.u.data(), b.w.data(), std::min(n, k)))
              .epsilon(1e-13));
  }
}

TEST_CASE("weighted_gram accumulates instead of overwriting") {
  const Block b = make_block(6, 3, 5);
  const auto& ops = kern::ops();
  std::vector<double> H(9, 1.0), H0(9, 0.0);
  ops.weighted_gram(b.V.data(), b.c.data(), 6, 3, H0.data());
  ops.weighted_gram(b.V.data(), b.c.data(), 6, 3, H.data());
  for (int i = 0; i < 9; ++i) CHECK(H[i] == doctest::Approx(1.0 + H0[i]).epsilon(1e-12));
}

TEST_CASE("force toggles the active implementation") {
  kern::force("scalar");
  CHECK(std::string(kern::ops().name) == "scalar");
  if (kern::avx2_supported()) {
    kern::force("avx2");
    CHECK(std::string(kern::ops().name) == "avx2");
  }
  kern::force(nullptr);  // back to auto for the rest of the process
}
