#include "cmf/rng.hpp"

#include <cmath>

namespace cmf {

namespace {

constexpr uint32_t kMult0 = 0xD2511F53u;
constexpr uint32_t kMult1 = 0xCD9E8D57u;
constexpr uint32_t kWeyl0 = 0x9E3779B9u;
constexpr uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(uint32_t a, uint32_t b, uint32_t& hi, uint32_t& lo) {
  uint64_t p = static_cast<uint64_t>(a) * b;
  hi = static_cast<uint32_t>(p >> 32);
  lo = static_cast<uint32_t>(p);
}

}  // namespace

std::array<uint32_t, 4> PhiloxStream::block(
    const std::array<uint32_t, 4>& counter, const std::array<uint32_t, 2>& key) {
  uint32_t c0 = counter[0], c1 = counter[1], c2 = counter[2], c3 = counter[3];
  uint32_t k0 = key[0], k1 = key[1];
  for (int round = 0; round < 10; ++round) {
    uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kMult0, c0, hi0, lo0);
    mulhilo(kMult1, c2, hi1, lo1);
    c0 = hi1 ^ c1 ^ k0;
    c1 = lo1;
    c2 = hi0 ^ c3 ^ k1;
    c3 = lo0;
    k0 += kWeyl0;
    k1 += kWeyl1;
  }
  return {c0, c1, c2, c3};
}

PhiloxStream::PhiloxStream(uint64_t seed, StreamDomain domain, uint32_t epoch,
                           uint32_t entity, uint32_t row) {
  key_ = {static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32)};
  prefix_ = {0u, row, (static_cast<uint32_t>(domain) << 24) | (entity & 0xFFFFFFu),
             epoch};
}

void PhiloxStream::refill() {
  std::array<uint32_t, 4> ctr = prefix_;
  // 64-bit block index split across the two low words; the stream identity
  // lives in the two high words so distinct streams can never collide.
  ctr[0] = static_cast<uint32_t>(block_index_);
  uint32_t hi = static_cast<uint32_t>(block_index_ >> 32);
  ctr[1] = prefix_[1] ^ hi;
  buf_ = block(ctr, key_);
  buf_pos_ = 0;
  ++block_index_;
}

uint32_t PhiloxStream::next_u32() {
  if (buf_pos_ == 4) refill();
  return buf_[buf_pos_++];
}

double PhiloxStream::uniform() {
  uint64_t hi = next_u32();
  uint64_t bits = (hi << 32) | next_u32();
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

double PhiloxStream::normal() {
  double u1 = uniform();
  double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
}

void PhiloxStream::normal_fill(double* out, int n) {
  int i = 0;
  while (i + 1 < n) {
    double u1 = uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    out[i++] = r * std::cos(6.283185307179586476925287 * u2);
    out[i++] = r * std::sin(6.283185307179586476925287 * u2);
  }
  if (i < n) out[i] = normal();
}

double PhiloxStream::gamma(double alpha) {
  // Marsaglia-Tsang squeeze; the alpha<1 case boosts through alpha+1.
  if (alpha < 1.0) {
    double g = gamma(alpha + 1.0);
    return g * std::pow(uniform(), 1.0 / alpha);
  }
  double d = alpha - 1.0 / 3.0;
  double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    double u = uniform();
    double x2 = x * x;
    if (u < 1.0 - 0.0331 * x2 * x2) return d * v;
    if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v;
  }
}

double PhiloxStream::chisquare(double nu) { return 2.0 * gamma(0.5 * nu); }

}  // namespace cmf
