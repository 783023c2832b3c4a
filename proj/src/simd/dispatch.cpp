#include <cstdlib>
#include <string_view>

#include "mad/simd/kernels.hpp"

namespace mad::simd {

#if defined(MAD_HAVE_AVX2)
const KernelTable& avx2_kernels();
#endif

namespace {

bool cpu_has_avx2() {
#if defined(MAD_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable& select() {
  const char* env = std::getenv("MAD_SIMD");
  const std::string_view wanted = env ? env : "";
  if (wanted == "scalar") return scalar_kernels();
  if (const KernelTable* t = kernels_for(Isa::kAvx2)) return *t;
  return scalar_kernels();
}

}  // namespace

const KernelTable* kernels_for(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return &scalar_kernels();
    case Isa::kAvx2:
#if defined(MAD_HAVE_AVX2)
      if (cpu_has_avx2()) return &avx2_kernels();
#endif
      return nullptr;
  }
  return nullptr;
}

const KernelTable& active() {
  static const KernelTable& table = select();
  return table;
}

}  // namespace mad::simd
