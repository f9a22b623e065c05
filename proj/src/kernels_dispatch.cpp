#include "pmlgan/kernels.hpp"

#include <cstdio>
#include <cstdlib>
#include <cstring>

namespace pmlgan::kernels {
namespace {

const Ops* g_active = nullptr;
Backend g_backend = Backend::scalar;

Backend default_backend() {
  const char* env = std::getenv("PMLGAN_KERNELS");
  if (env != nullptr && std::strlen(env) > 0 && std::strcmp(env, "auto") != 0) {
    if (std::strcmp(env, "scalar") == 0) {
      return Backend::scalar;
    }
    if (std::strcmp(env, "avx2") == 0) {
      if (avx2_ops() != nullptr && cpu_supports_avx2()) {
        return Backend::avx2;
      }
      std::fprintf(stderr,
                   "PMLGAN_KERNELS=avx2 requested but AVX2 is unavailable; "
                   "using scalar kernels\n");
      return Backend::scalar;
    }
    std::fprintf(stderr, "unknown PMLGAN_KERNELS value '%s'; using auto\n",
                 env);
  }
  if (avx2_ops() != nullptr && cpu_supports_avx2()) {
    return Backend::avx2;
  }
  return Backend::scalar;
}

void ensure_selected() {
  if (g_active == nullptr) {
    select(default_backend());
  }
}

}  // namespace

#if !defined(PMLGAN_HAVE_AVX2)
const Ops* avx2_ops() { return nullptr; }
#endif

bool cpu_supports_avx2() {
#if defined(__x86_64__) || defined(_M_X64)
  return __builtin_cpu_supports("avx2") != 0;
#else
  return false;
#endif
}

void select(Backend b) {
  if (b == Backend::avx2) {
    const Ops* ops = avx2_ops();
    if (ops == nullptr || !cpu_supports_avx2()) {
      std::fprintf(stderr, "AVX2 backend unavailable; keeping scalar\n");
      b = Backend::scalar;
      ops = &scalar_ops();
    }
    g_active = ops;
  } else {
    g_active = &scalar_ops();
  }
  g_backend = b;
}

const Ops& active() {
  ensure_selected();
  return *g_active;
}

Backend active_backend() {
  ensure_selected();
  return g_backend;
}

}  // namespace pmlgan::kernels
