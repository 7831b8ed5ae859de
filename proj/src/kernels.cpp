#include "evtol/kernels.hpp"

#include <cstdlib>
#include <cstring>
#include <stdexcept>

namespace evtol::kern {
namespace {

bool cpu_has_avx2() {
#if defined(__GNUC__) && (defined(__x86_64__) || defined(_M_X64))
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

const Ops& select() {
  const char* force = std::getenv("EVTOL_SIMD");
  if (force != nullptr && std::strlen(force) > 0) {
    if (std::strcmp(force, "scalar") == 0) return scalar_ops();
    if (std::strcmp(force, "avx2") == 0) {
      const Ops* v = avx2_ops();
      if (v == nullptr || !cpu_has_avx2())
        throw std::runtime_error("EVTOL_SIMD=avx2 requested but AVX2 is unavailable");
      return *v;
    }
    if (std::strcmp(force, "auto") != 0)
      throw std::runtime_error("EVTOL_SIMD must be scalar, avx2, or auto");
  }
  const Ops* v = avx2_ops();
  if (v != nullptr && cpu_has_avx2()) return *v;
  return scalar_ops();
}

}  // namespace

const Ops& active() {
  static const Ops& ops = select();
  return ops;
}

}  // namespace evtol::kern
