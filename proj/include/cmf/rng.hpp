#pragma once

#include <array>
#include <cstdint>

namespace cmf {

// Counter-based RNG (Philox4x32-10). Every logical stream is addressed by
// (seed, domain, epoch, entity, row), so any worker thread can reproduce any
// row's draws without touching shared state. This is what makes training
// results independent of the thread count.
enum class StreamDomain : uint32_t {
  FactorInit = 1,
  RowStep = 2,
  HyperGibbs = 3,
  Synth = 4,
  Split = 5,
  FoldIn = 6,
};

class PhiloxStream {
 public:
  PhiloxStream(uint64_t seed, StreamDomain domain, uint32_t epoch,
               uint32_t entity, uint32_t row);

  // One 4x32 block at the given block index; exposed for known-answer tests.
  static std::array<uint32_t, 4> block(const std::array<uint32_t, 4>& counter,
                                       const std::array<uint32_t, 2>& key);

  uint32_t next_u32();
  double uniform();  // (0,1), 53-bit resolution
  double normal();
  void normal_fill(double* out, int n);
  double gamma(double alpha);  // shape alpha, unit scale
  double chisquare(double nu);

 private:
  void refill();

  std::array<uint32_t, 2> key_;
  std::array<uint32_t, 4> prefix_;  // (unused, row, domain|entity, epoch)
  uint64_t block_index_ = 0;
  std::array<uint32_t, 4> buf_{};
  int buf_pos_ = 4;
};

}  // namespace cmf
