#include "cmf/kernels.hpp"

#include <cstdlib>
#include <cstring>

namespace cmf::kern {

bool avx2_supported() {
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
}

namespace {

const Ops* select(const char* which) {
  if (which != nullptr) {
    if (std::strcmp(which, "scalar") == 0) return &scalar_ops();
    if (std::strcmp(which, "avx2") == 0 && avx2_supported()) return &avx2_ops();
  }
  return avx2_supported() ? &avx2_ops() : &scalar_ops();
}

const Ops*& active_slot() {
  static const Ops* active = select(std::getenv("CMF_KERNELS"));
  return active;
}

}  // namespace

const Ops& ops() { return *active_slot(); }

void force(const char* which) { active_slot() = select(which); }

}  // namespace cmf::kern
