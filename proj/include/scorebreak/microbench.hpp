#pragma once

#include <array>
#include <bit>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "scorebreak/detail/opaque.hpp"
#include "scorebreak/errors.hpp"

// Microbenchmark kernels. Each kernel family runs a loop of 2^n iterations
// whose body performs k operations of one class, and reports a checksum that
// a plain scalar interpreter over the same operands must reproduce bit for
// bit. Kernels compile optimized; elision is defeated with register barriers
// (arithmetic kinds) and a volatile memory cell (store/load kinds), never by
// turning optimization off.
//
// Operation semantics shared with the reference interpreter:
//   - lane_count(k) = the largest divisor of k not exceeding 8. The k
//     operations of one iteration are spread round-robin over that many
//     independent lanes, so lane j receives k / lane_count(k) sequentially
//     dependent operations per iteration.
//   - Loop: one integer add (an iteration counter) per iteration, beside the
//     loop's own compare and branch. Checksum is the final counter.
//   - IntAdd / IntMul / FpAdd / FpMul / FpDiv: lane[j] op= operand[j].
//   - IntDiv: lane[j] = lane[j] / divisor[j] + rebase[j]; the rebase keeps
//     dividends large so every division stays nontrivial.
//   - IntAddMul / interleaved kinds: each slot carries one operation of each
//     class back to back.
//   - IntStore / FpStore: a walking value is written k times per iteration to
//     one volatile cell; checksum is the final cell content.
//   - IntStoreLoad / FpStoreLoad: k store+load round trips through the cell
//     per iteration on a walking value; checksum is the final value.
// Checksums fold lane values (FP lanes by bit pattern) with an FNV-style mix.

namespace scorebreak {

enum class KernelKind {
    Loop,
    IntAdd,
    IntMul,
    IntAddMul,
    IntDiv,
    IntStore,
    IntStoreLoad,
    FpAdd,
    FpMul,
    FpDiv,
    FpStore,
    FpStoreLoad,
};

inline constexpr std::array<KernelKind, 12> kAllKernelKinds = {
    KernelKind::Loop,       KernelKind::IntAdd,  KernelKind::IntMul,
    KernelKind::IntAddMul,  KernelKind::IntDiv,  KernelKind::IntStore,
    KernelKind::IntStoreLoad, KernelKind::FpAdd, KernelKind::FpMul,
    KernelKind::FpDiv,      KernelKind::FpStore, KernelKind::FpStoreLoad,
};

inline const char* kernel_kind_name(KernelKind kind) {
    switch (kind) {
        case KernelKind::Loop: return "loop";
        case KernelKind::IntAdd: return "INTadd";
        case KernelKind::IntMul: return "INTmul";
        case KernelKind::IntAddMul: return "INTaddmul";
        case KernelKind::IntDiv: return "INTdiv";
        case KernelKind::IntStore: return "INTstore";
        case KernelKind::IntStoreLoad: return "INTstoreload";
        case KernelKind::FpAdd: return "FPadd";
        case KernelKind::FpMul: return "FPmul";
        case KernelKind::FpDiv: return "FPdiv";
        case KernelKind::FpStore: return "FPstore";
        case KernelKind::FpStoreLoad: return "FPstoreload";
    }
    return "?";
}

inline std::optional<KernelKind> kernel_kind_from_name(std::string_view name) {
    for (KernelKind k : kAllKernelKinds)
        if (name == kernel_kind_name(k)) return k;
    return std::nullopt;
}

/// Unroll budget for the per-iteration operation count.
inline constexpr unsigned kMaxOpsPerIteration = 32;
inline constexpr unsigned kMaxIterExponent = 40;

struct KernelConfig {
    KernelKind kind = KernelKind::Loop;
    unsigned k = 0;  // operations per iteration; fixed at 0 for Loop
    unsigned n = 0;  // iteration count is 2^n

    bool operator==(const KernelConfig&) const = default;

    void validate() const {
        if (n > kMaxIterExponent)
            throw Error(ErrorKind::ConfigInvalid,
                        std::string(kernel_kind_name(kind)) + ": n=" + std::to_string(n) +
                            " outside [0, " + std::to_string(kMaxIterExponent) + "]");
        if (kind == KernelKind::Loop) {
            if (k != 0)
                throw Error(ErrorKind::ConfigInvalid, "loop: k must be 0, got " + std::to_string(k));
            return;
        }
        if (k < 1 || k > kMaxOpsPerIteration)
            throw Error(ErrorKind::ConfigInvalid,
                        std::string(kernel_kind_name(kind)) + ": k=" + std::to_string(k) +
                            " outside [1, " + std::to_string(kMaxOpsPerIteration) + "]");
    }

    std::string describe() const {
        std::string s = kernel_kind_name(kind);
        s += "(";
        if (kind != KernelKind::Loop) s += std::to_string(k) + ", ";
        s += std::to_string(n) + ")";
        return s;
    }
};

struct MicrobenchResult {
    KernelConfig config;
    std::vector<double> trials;  // seconds, in execution order
    std::uint64_t checksum = 0;
    std::string clock_source;
};

/// Largest divisor of k not exceeding 8: how many independent lanes the k
/// per-iteration operations are spread over.
inline constexpr std::size_t kernel_lane_count(unsigned k) {
    for (unsigned d = 8; d >= 2; --d)
        if (k % d == 0 && d <= k) return d;
    return 1;
}

// ---------------------------------------------------------------------------
// Operand derivation. Fixed per-kind seeds so checksums are reproducible.
// FP operands stay near 1.0 so no overflow or subnormal appears within the
// 2^40 iteration bound.

namespace detail {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

struct ChecksumFold {
    std::uint64_t h = 0xcbf29ce484222325ull;
    void add(std::uint64_t v) {
        h ^= v;
        h *= 0x100000001b3ull;
    }
    void add(double v) { add(std::bit_cast<std::uint64_t>(v)); }
};

}  // namespace detail

struct IntLaneOperands {
    std::vector<std::uint64_t> init;
    std::vector<std::uint64_t> operand;
};

struct IntDivOperands {
    std::vector<std::uint64_t> init;
    std::vector<std::uint64_t> divisor;
    std::vector<std::uint64_t> rebase;
};

struct FpLaneOperands {
    std::vector<double> init;
    std::vector<double> operand;
};

inline IntLaneOperands int_add_operands(std::size_t lanes) {
    IntLaneOperands ops;
    for (std::size_t j = 0; j < lanes; ++j) {
        ops.init.push_back(detail::splitmix64(0x100 + j));
        ops.operand.push_back(detail::splitmix64(0x200 + j));
    }
    return ops;
}

inline IntLaneOperands int_mul_operands(std::size_t lanes) {
    IntLaneOperands ops;
    for (std::size_t j = 0; j < lanes; ++j) {
        ops.init.push_back(detail::splitmix64(0x300 + j) | 1);
        ops.operand.push_back(detail::splitmix64(0x400 + j) | 1);
    }
    return ops;
}

inline IntDivOperands int_div_operands(std::size_t lanes) {
    IntDivOperands ops;
    for (std::size_t j = 0; j < lanes; ++j) {
        ops.init.push_back((1ull << 40) + (detail::splitmix64(0x500 + j) >> 24));
        ops.divisor.push_back(3 + 2 * (detail::splitmix64(0x600 + j) % 8));
        ops.rebase.push_back((1ull << 32) + (detail::splitmix64(0x700 + j) >> 32));
    }
    return ops;
}

inline FpLaneOperands fp_add_operands(std::size_t lanes) {
    FpLaneOperands ops;
    for (std::size_t j = 0; j < lanes; ++j) {
        ops.init.push_back(1.0 + 0.25 * static_cast<double>(j));
        ops.operand.push_back(0.001 * static_cast<double>(j + 1));
    }
    return ops;
}

inline FpLaneOperands fp_mul_operands(std::size_t lanes) {
    FpLaneOperands ops;
    const double ulp40 = 0x1.0p-40;
    for (std::size_t j = 0; j < lanes; ++j) {
        ops.init.push_back(1.0 + 0.125 * static_cast<double>(j));
        ops.operand.push_back(1.0 + static_cast<double>(j + 1) * ulp40);
    }
    return ops;
}

inline FpLaneOperands fp_div_operands(std::size_t lanes) {
    FpLaneOperands ops;
    const double ulp40 = 0x1.0p-40;
    for (std::size_t j = 0; j < lanes; ++j) {
        ops.init.push_back(1.0 + 0.125 * static_cast<double>(j));
        ops.operand.push_back(1.0 + static_cast<double>(j + 1) * ulp40);
    }
    return ops;
}

inline constexpr std::uint64_t int_store_init() { return detail::splitmix64(0x800); }
inline constexpr std::uint64_t int_storeload_init() { return detail::splitmix64(0x900); }
inline constexpr double fp_store_init() { return 1.5; }
inline constexpr double fp_storeload_init() { return 2.5; }

// ---------------------------------------------------------------------------
// Kernel loops. Lanes and Reps are compile-time so the k operations are
// genuinely unrolled in the loop body; keep() pins every result to a register
// so neither iteration folding nor vectorization can remove them.

namespace detail {

template <std::size_t N, class F>
inline void unroll(F&& f) {
    [&]<std::size_t... I>(std::index_sequence<I...>) {
        (f.template operator()<I>(), ...);
    }(std::make_index_sequence<N>{});
}

struct AddOp {
    static void apply(std::uint64_t& a, std::uint64_t s) { a += s; }
    static void apply(double& a, double s) { a += s; }
};
struct MulOp {
    static void apply(std::uint64_t& a, std::uint64_t m) { a *= m; }
    static void apply(double& a, double m) { a *= m; }
};
struct FpDivOp {
    static void apply(double& a, double d) { a /= d; }
};

template <std::size_t Lanes, std::size_t Reps, class T, class Op>
inline void arith_loop(std::uint64_t iters, std::array<T, Lanes>& lane,
                       const std::array<T, Lanes>& operand) {
    SCOREBREAK_UNROLL_DISABLE
    for (std::uint64_t i = 0; i < iters; ++i) {
        unroll<Reps>([&]<std::size_t>() {
            unroll<Lanes>([&]<std::size_t J>() {
                Op::apply(lane[J], operand[J]);
                keep(lane[J]);
            });
        });
    }
}

template <std::size_t Lanes, std::size_t Reps>
inline void addmul_loop(std::uint64_t iters, std::array<std::uint64_t, Lanes>& add_lane,
                        const std::array<std::uint64_t, Lanes>& step,
                        std::array<std::uint64_t, Lanes>& mul_lane,
                        const std::array<std::uint64_t, Lanes>& mul) {
    SCOREBREAK_UNROLL_DISABLE
    for (std::uint64_t i = 0; i < iters; ++i) {
        unroll<Reps>([&]<std::size_t>() {
            unroll<Lanes>([&]<std::size_t J>() {
                add_lane[J] += step[J];
                keep(add_lane[J]);
                mul_lane[J] *= mul[J];
                keep(mul_lane[J]);
            });
        });
    }
}

template <std::size_t Lanes, std::size_t Reps>
inline void intdiv_loop(std::uint64_t iters, std::array<std::uint64_t, Lanes>& lane,
                        const std::array<std::uint64_t, Lanes>& divisor,
                        const std::array<std::uint64_t, Lanes>& rebase) {
    SCOREBREAK_UNROLL_DISABLE
    for (std::uint64_t i = 0; i < iters; ++i) {
        unroll<Reps>([&]<std::size_t>() {
            unroll<Lanes>([&]<std::size_t J>() {
                lane[J] = lane[J] / divisor[J] + rebase[J];
                keep(lane[J]);
            });
        });
    }
}

template <std::size_t K, class T>
inline void store_loop(std::uint64_t iters, volatile T& cell, T& w, T inc) {
    SCOREBREAK_UNROLL_DISABLE
    for (std::uint64_t i = 0; i < iters; ++i) {
        w += inc;
        unroll<K>([&]<std::size_t>() { cell = w; });
    }
}

template <std::size_t K, class T>
inline void storeload_loop(std::uint64_t iters, volatile T& cell, T& x, T inc) {
    SCOREBREAK_UNROLL_DISABLE
    for (std::uint64_t i = 0; i < iters; ++i) {
        x += inc;
        unroll<K>([&]<std::size_t>() {
            cell = x;
            x = cell;
        });
    }
}

inline std::uint64_t loop_kernel(std::uint64_t iters) {
    std::uint64_t counter = 0;
    SCOREBREAK_UNROLL_DISABLE
    for (std::uint64_t i = 0; i < iters; ++i) {
        counter += 1;
        keep(counter);
    }
    return counter;
}

struct KernelRun {
    double seconds = 0.0;
    std::uint64_t checksum = 0;
};

using MonotonicClock = std::chrono::steady_clock;

inline double elapsed_seconds(MonotonicClock::time_point t0, MonotonicClock::time_point t1) {
    double s = std::chrono::duration<double>(t1 - t0).count();
    // Floor at one clock tick so a sub-resolution run still records a
    // positive duration.
    const double tick =
        static_cast<double>(MonotonicClock::period::num) / MonotonicClock::period::den;
    return s > tick ? s : tick;
}

template <std::size_t Lanes, std::size_t Reps, class T, class Op, class Ops>
inline KernelRun run_arith(std::uint64_t iters, const Ops& ops) {
    std::array<T, Lanes> lane{};
    std::array<T, Lanes> operand{};
    for (std::size_t j = 0; j < Lanes; ++j) {
        lane[j] = opaque(static_cast<T>(ops.init[j]));
        operand[j] = opaque(static_cast<T>(ops.operand[j]));
    }
    auto t0 = MonotonicClock::now();
    arith_loop<Lanes, Reps, T, Op>(iters, lane, operand);
    auto t1 = MonotonicClock::now();
    ChecksumFold f;
    for (std::size_t j = 0; j < Lanes; ++j) f.add(lane[j]);
    return {elapsed_seconds(t0, t1), f.h};
}

template <std::size_t Lanes, std::size_t Reps>
inline KernelRun run_addmul(std::uint64_t iters) {
    auto add_ops = int_add_operands(Lanes);
    auto mul_ops = int_mul_operands(Lanes);
    std::array<std::uint64_t, Lanes> add_lane{}, step{}, mul_lane{}, mul{};
    for (std::size_t j = 0; j < Lanes; ++j) {
        add_lane[j] = opaque(add_ops.init[j]);
        step[j] = opaque(add_ops.operand[j]);
        mul_lane[j] = opaque(mul_ops.init[j]);
        mul[j] = opaque(mul_ops.operand[j]);
    }
    auto t0 = MonotonicClock::now();
    addmul_loop<Lanes, Reps>(iters, add_lane, step, mul_lane, mul);
    auto t1 = MonotonicClock::now();
    ChecksumFold f;
    for (std::size_t j = 0; j < Lanes; ++j) f.add(add_lane[j]);
    for (std::size_t j = 0; j < Lanes; ++j) f.add(mul_lane[j]);
    return {elapsed_seconds(t0, t1), f.h};
}

template <std::size_t Lanes, std::size_t Reps>
inline KernelRun run_intdiv(std::uint64_t iters) {
    auto ops = int_div_operands(Lanes);
    std::array<std::uint64_t, Lanes> lane{}, divisor{}, rebase{};
    for (std::size_t j = 0; j < Lanes; ++j) {
        lane[j] = opaque(ops.init[j]);
        divisor[j] = opaque(ops.divisor[j]);
        rebase[j] = opaque(ops.rebase[j]);
    }
    auto t0 = MonotonicClock::now();
    intdiv_loop<Lanes, Reps>(iters, lane, divisor, rebase);
    auto t1 = MonotonicClock::now();
    ChecksumFold f;
    for (std::size_t j = 0; j < Lanes; ++j) f.add(lane[j]);
    return {elapsed_seconds(t0, t1), f.h};
}

template <std::size_t K, class T>
inline KernelRun run_store(std::uint64_t iters, T init, T inc) {
    volatile T cell = opaque(init);
    T w = opaque(init);
    auto t0 = MonotonicClock::now();
    store_loop<K, T>(iters, cell, w, inc);
    auto t1 = MonotonicClock::now();
    ChecksumFold f;
    f.add(static_cast<T>(cell));
    return {elapsed_seconds(t0, t1), f.h};
}

template <std::size_t K, class T>
inline KernelRun run_storeload(std::uint64_t iters, T init, T inc) {
    volatile T cell = opaque(init);
    T x = opaque(init);
    auto t0 = MonotonicClock::now();
    storeload_loop<K, T>(iters, cell, x, inc);
    auto t1 = MonotonicClock::now();
    ChecksumFold f;
    f.add(x);
    return {elapsed_seconds(t0, t1), f.h};
}

template <unsigned K>
inline KernelRun run_kind_with_k(KernelKind kind, std::uint64_t iters) {
    constexpr std::size_t L = kernel_lane_count(K);
    constexpr std::size_t R = K / L;
    switch (kind) {
        case KernelKind::IntAdd:
            return run_arith<L, R, std::uint64_t, AddOp>(iters, int_add_operands(L));
        case KernelKind::IntMul:
            return run_arith<L, R, std::uint64_t, MulOp>(iters, int_mul_operands(L));
        case KernelKind::IntAddMul:
            return run_addmul<L, R>(iters);
        case KernelKind::IntDiv:
            return run_intdiv<L, R>(iters);
        case KernelKind::IntStore:
            return run_store<K, std::uint64_t>(iters, int_store_init(), 1);
        case KernelKind::IntStoreLoad:
            return run_storeload<K, std::uint64_t>(iters, int_storeload_init(), 1);
        case KernelKind::FpAdd:
            return run_arith<L, R, double, AddOp>(iters, fp_add_operands(L));
        case KernelKind::FpMul:
            return run_arith<L, R, double, MulOp>(iters, fp_mul_operands(L));
        case KernelKind::FpDiv:
            return run_arith<L, R, double, FpDivOp>(iters, fp_div_operands(L));
        case KernelKind::FpStore:
            return run_store<K, double>(iters, fp_store_init(), 1.0);
        case KernelKind::FpStoreLoad:
            return run_storeload<K, double>(iters, fp_storeload_init(), 1.0);
        case KernelKind::Loop:
            break;  // handled by the caller
    }
    throw Error(ErrorKind::ConfigInvalid, "unreachable kernel dispatch");
}

inline KernelRun dispatch_kernel(KernelKind kind, unsigned k, std::uint64_t iters) {
    if (kind == KernelKind::Loop) {
        auto t0 = MonotonicClock::now();
        std::uint64_t counter = loop_kernel(iters);
        auto t1 = MonotonicClock::now();
        return {elapsed_seconds(t0, t1), counter};
    }
    using Runner = KernelRun (*)(KernelKind, std::uint64_t);
    constexpr auto table = []<std::size_t... I>(std::index_sequence<I...>) {
        return std::array<Runner, sizeof...(I)>{&run_kind_with_k<I + 1>...};
    }(std::make_index_sequence<kMaxOpsPerIteration>{});
    return table[k - 1](kind, iters);
}

}  // namespace detail

// ---------------------------------------------------------------------------

/// One timed kernel execution. Setup is excluded from the timed window; the
/// checksum is deterministic for a fixed config.
inline std::pair<double, std::uint64_t> run_kernel(const KernelConfig& config) {
    config.validate();
    if constexpr (!detail::MonotonicClock::is_steady)
        throw Error(ErrorKind::TimerUnavailable, "no monotonic clock on this platform");
    const std::uint64_t iters = 1ull << config.n;
    auto run = detail::dispatch_kernel(config.kind, config.k, iters);
    return {run.seconds, run.checksum};
}

inline const char* kernel_clock_source() { return "steady_clock(monotonic)"; }

/// Trial count override honored by run_suite.
inline std::optional<unsigned> trials_env_override() {
    const char* env = std::getenv("SCOREBREAK_TRIALS");
    if (!env || !*env) return std::nullopt;
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1 || v > 1000000)
        throw Error(ErrorKind::ConfigInvalid,
                    std::string("SCOREBREAK_TRIALS must be a positive integer, got \"") + env +
                        "\"");
    return static_cast<unsigned>(v);
}

/// Runs each config trials_per_config times, in plan order, preceded by one
/// untimed warm-up execution per config. Never runs kernels concurrently.
inline std::vector<MicrobenchResult> run_suite(const std::vector<KernelConfig>& plan,
                                               unsigned trials_per_config = 5) {
    if (plan.empty()) throw Error(ErrorKind::EmptyPlan, "measurement plan has no configurations");
    if (auto env = trials_env_override()) trials_per_config = *env;
    if (trials_per_config < 1)
        throw Error(ErrorKind::ConfigInvalid, "trials_per_config must be >= 1");

    std::vector<MicrobenchResult> results;
    results.reserve(plan.size());
    for (const KernelConfig& config : plan) {
        try {
            config.validate();
            MicrobenchResult r;
            r.config = config;
            r.clock_source = kernel_clock_source();
            run_kernel(config);  // warm-up, discarded
            for (unsigned t = 0; t < trials_per_config; ++t) {
                auto [seconds, checksum] = run_kernel(config);
                r.trials.push_back(seconds);
                r.checksum = checksum;
            }
            results.push_back(std::move(r));
        } catch (const Error& e) {
            throw Error::wrap(e, config.describe());
        }
    }
    return results;
}

/// The 23 configurations the compound scores consume, plus nothing else:
/// two unroll factors per family and the bare loop at n=31.
inline std::vector<KernelConfig> default_plan() {
    using KK = KernelKind;
    return {
        {KK::IntAdd, 24, 27},      {KK::IntAdd, 6, 27},
        {KK::IntMul, 16, 27},      {KK::IntMul, 4, 27},
        {KK::IntAddMul, 24, 26},   {KK::IntAddMul, 6, 26},
        {KK::IntDiv, 24, 26},      {KK::IntDiv, 6, 26},
        {KK::IntStore, 24, 29},    {KK::IntStore, 6, 29},
        {KK::IntStoreLoad, 16, 27},{KK::IntStoreLoad, 4, 27},
        {KK::FpAdd, 16, 27},       {KK::FpAdd, 4, 27},
        {KK::FpMul, 16, 27},       {KK::FpMul, 4, 27},
        {KK::FpDiv, 16, 24},       {KK::FpDiv, 4, 24},
        {KK::FpStore, 16, 29},     {KK::FpStore, 4, 29},
        {KK::FpStoreLoad, 16, 27}, {KK::FpStoreLoad, 4, 27},
        {KK::Loop, 0, 31},
    };
}

/// default_plan with every n reduced by shift, for machines where the full
/// plan is too slow. Compound scores are unaffected because they normalize
/// by 2^n.
inline std::vector<KernelConfig> scaled_plan(int shift) {
    if (shift < 0)
        throw Error(ErrorKind::ConfigInvalid, "plan shift must be nonnegative");
    auto plan = default_plan();
    for (KernelConfig& c : plan) {
        if (static_cast<int>(c.n) - shift < 1)
            throw Error(ErrorKind::ShiftTooLarge,
                        "shift " + std::to_string(shift) + " drives " + c.describe() +
                            " below n=1");
        c.n -= static_cast<unsigned>(shift);
    }
    return plan;
}

}  // namespace scorebreak
