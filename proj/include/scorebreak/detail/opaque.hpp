#pragma once

#include <cstdint>

// Optimization barriers for the measurement kernels. A value passed through
// opaque() is no longer a compile-time constant, and keep() forces a live
// register value at that program point, so per-iteration operations cannot be
// folded, strength-reduced, or vectorized away.

#if defined(__GNUC__) || defined(__clang__)
#define SCOREBREAK_HAS_ASM_BARRIER 1
#else
#define SCOREBREAK_HAS_ASM_BARRIER 0
#endif

#if defined(__x86_64__) || defined(__i386__)
#define SCOREBREAK_FP_CONSTRAINT "+x"
#elif defined(__aarch64__) || defined(__arm__)
#define SCOREBREAK_FP_CONSTRAINT "+w"
#else
#define SCOREBREAK_FP_CONSTRAINT "+m"
#endif

#if defined(__GNUC__) || defined(__clang__)
#define SCOREBREAK_UNROLL_DISABLE _Pragma("GCC unroll 1")
#else
#define SCOREBREAK_UNROLL_DISABLE
#endif

namespace scorebreak::detail {

#if SCOREBREAK_HAS_ASM_BARRIER

inline void keep(std::uint64_t& v) { asm volatile("" : "+r"(v)); }
inline void keep(double& v) { asm volatile("" : SCOREBREAK_FP_CONSTRAINT(v)); }

#else

inline void keep(std::uint64_t& v) {
    volatile std::uint64_t sink = v;
    v = sink;
}
inline void keep(double& v) {
    volatile double sink = v;
    v = sink;
}

#endif

template <class T>
inline T opaque(T v) {
    keep(v);
    return v;
}

}  // namespace scorebreak::detail
