#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "scorebreak/errors.hpp"
#include "scorebreak/microbench.hpp"

// Compound benchmark scores. Each score differences one kernel family at two
// unroll factors, so the loop's own overhead cancels and what remains is the
// marginal cost per operation, scaled to the time for 2^31 operations.

namespace scorebreak {

enum class CompoundName { C_Ia, C_Im, C_Iam, C_Id, C_Is, C_Isl, C_Fa, C_Fm, C_Fd, C_Fs, C_Fsl };

inline constexpr std::array<CompoundName, 11> kAllCompoundNames = {
    CompoundName::C_Ia, CompoundName::C_Im, CompoundName::C_Iam, CompoundName::C_Id,
    CompoundName::C_Is, CompoundName::C_Isl, CompoundName::C_Fa, CompoundName::C_Fm,
    CompoundName::C_Fd, CompoundName::C_Fs, CompoundName::C_Fsl,
};

inline const char* compound_name_str(CompoundName name) {
    switch (name) {
        case CompoundName::C_Ia: return "C_Ia";
        case CompoundName::C_Im: return "C_Im";
        case CompoundName::C_Iam: return "C_Iam";
        case CompoundName::C_Id: return "C_Id";
        case CompoundName::C_Is: return "C_Is";
        case CompoundName::C_Isl: return "C_Isl";
        case CompoundName::C_Fa: return "C_Fa";
        case CompoundName::C_Fm: return "C_Fm";
        case CompoundName::C_Fd: return "C_Fd";
        case CompoundName::C_Fs: return "C_Fs";
        case CompoundName::C_Fsl: return "C_Fsl";
    }
    return "?";
}

inline std::optional<CompoundName> compound_name_from_str(std::string_view s) {
    for (CompoundName n : kAllCompoundNames)
        if (s == compound_name_str(n)) return n;
    return std::nullopt;
}

/// Recipe of one compound score: which kernel family at which two unroll
/// factors and iteration exponent.
struct CompoundFormula {
    CompoundName name;
    KernelKind kind;
    unsigned k_hi;
    unsigned k_lo;
    unsigned n;
};

inline constexpr std::array<CompoundFormula, 11> kCompoundFormulas = {{
    {CompoundName::C_Ia, KernelKind::IntAdd, 24, 6, 27},
    {CompoundName::C_Im, KernelKind::IntMul, 16, 4, 27},
    {CompoundName::C_Iam, KernelKind::IntAddMul, 24, 6, 26},
    {CompoundName::C_Id, KernelKind::IntDiv, 24, 6, 26},
    {CompoundName::C_Is, KernelKind::IntStore, 24, 6, 29},
    {CompoundName::C_Isl, KernelKind::IntStoreLoad, 16, 4, 27},
    {CompoundName::C_Fa, KernelKind::FpAdd, 16, 4, 27},
    {CompoundName::C_Fm, KernelKind::FpMul, 16, 4, 27},
    {CompoundName::C_Fd, KernelKind::FpDiv, 16, 4, 24},
    {CompoundName::C_Fs, KernelKind::FpStore, 16, 4, 29},
    {CompoundName::C_Fsl, KernelKind::FpStoreLoad, 16, 4, 27},
}};

/// The 11 compound scores plus the bare-loop score for one system.
struct CompoundScores {
    std::map<CompoundName, double> values;
    double loop31 = 0.0;  // bare-loop time at n = 31 - plan_shift
    int plan_shift = 0;

    bool complete() const { return values.size() == kAllCompoundNames.size(); }
};

enum class NonPositivePolicy { Strict, ClampToZero };

/// Marginal time per operation scaled to 2^31 operations:
/// ((t_hi - t_lo) / (k_hi - k_lo)) * 2^31 / 2^n.
inline double compound_one(double t_hi, double t_lo, unsigned k_hi, unsigned k_lo, unsigned n,
                           NonPositivePolicy policy = NonPositivePolicy::Strict) {
    if (k_lo < 1 || k_hi <= k_lo)
        throw Error(ErrorKind::ConfigInvalid, "compound requires k_hi > k_lo >= 1");
    if (n < 1) throw Error(ErrorKind::ConfigInvalid, "compound requires n >= 1");
    if (!(t_hi > 0.0) || !(t_lo > 0.0))
        throw Error(ErrorKind::ConfigInvalid, "compound requires positive durations");
    if (t_hi <= t_lo) {
        if (policy == NonPositivePolicy::Strict)
            throw Error(ErrorKind::NonPositiveDelta,
                        "t_hi=" + std::to_string(t_hi) + " <= t_lo=" + std::to_string(t_lo));
        return 0.0;
    }
    return (t_hi - t_lo) / static_cast<double>(k_hi - k_lo) *
           std::exp2(31.0 - static_cast<double>(n));
}

enum class TrialSummarizer { Min, Median, Mean };

inline const char* summarizer_name(TrialSummarizer s) {
    switch (s) {
        case TrialSummarizer::Min: return "min";
        case TrialSummarizer::Median: return "median";
        case TrialSummarizer::Mean: return "mean";
    }
    return "?";
}

inline std::optional<TrialSummarizer> summarizer_from_name(std::string_view s) {
    if (s == "min") return TrialSummarizer::Min;
    if (s == "median") return TrialSummarizer::Median;
    if (s == "mean") return TrialSummarizer::Mean;
    return std::nullopt;
}

/// Collapses repeated trial measurements into one score. Minimum is the
/// default: timing error only ever adds time, so the smallest sample carries
/// the least of it.
inline double summarize_trials(const std::vector<double>& trials,
                               TrialSummarizer method = TrialSummarizer::Min) {
    if (trials.empty()) throw Error(ErrorKind::EmptyTrials, "no trials to summarize");
    switch (method) {
        case TrialSummarizer::Min:
            return *std::min_element(trials.begin(), trials.end());
        case TrialSummarizer::Mean: {
            double s = 0.0;
            for (double t : trials) s += t;
            return s / static_cast<double>(trials.size());
        }
        case TrialSummarizer::Median: {
            std::vector<double> sorted = trials;
            std::sort(sorted.begin(), sorted.end());
            std::size_t mid = sorted.size() / 2;
            if (sorted.size() % 2 == 1) return sorted[mid];
            return 0.5 * (sorted[mid - 1] + sorted[mid]);
        }
    }
    throw Error(ErrorKind::ConfigInvalid, "unknown summarizer");
}

struct CompoundOutcome {
    CompoundScores scores;
    /// Names whose delta was non-positive and got clamped to zero (only under
    /// NonPositivePolicy::ClampToZero).
    std::set<CompoundName> suspects;
};

/// Evaluates all 11 compound formulas over a measured suite. The suite must
/// contain the full default plan, possibly shifted uniformly; the shift is
/// inferred from the bare-loop config.
inline CompoundOutcome compound_all(const std::vector<MicrobenchResult>& suite,
                                    TrialSummarizer summarizer = TrialSummarizer::Min,
                                    NonPositivePolicy policy = NonPositivePolicy::Strict) {
    struct Key {
        KernelKind kind;
        unsigned k;
        unsigned n;
        auto operator<=>(const Key&) const = default;
    };
    std::map<Key, double> summarized;
    std::optional<unsigned> loop_n;
    double loop_time = 0.0;
    for (const MicrobenchResult& r : suite) {
        double s = summarize_trials(r.trials, summarizer);
        summarized[{r.config.kind, r.config.k, r.config.n}] = s;
        if (r.config.kind == KernelKind::Loop) {
            loop_n = r.config.n;
            loop_time = s;
        }
    }
    if (!loop_n)
        throw Error(ErrorKind::MissingConfig, "suite lacks the bare-loop configuration");
    if (*loop_n > 31)
        throw Error(ErrorKind::MissingConfig,
                    "bare-loop n=" + std::to_string(*loop_n) + " exceeds the unshifted plan");
    const int shift = 31 - static_cast<int>(*loop_n);

    CompoundOutcome out;
    out.scores.plan_shift = shift;
    out.scores.loop31 = loop_time;
    for (const CompoundFormula& f : kCompoundFormulas) {
        const unsigned n = f.n - static_cast<unsigned>(shift);
        auto hi = summarized.find({f.kind, f.k_hi, n});
        auto lo = summarized.find({f.kind, f.k_lo, n});
        if (hi == summarized.end() || lo == summarized.end())
            throw Error(ErrorKind::MissingConfig,
                        std::string(compound_name_str(f.name)) + " needs " +
                            kernel_kind_name(f.kind) + "(" + std::to_string(f.k_hi) + "|" +
                            std::to_string(f.k_lo) + ", " + std::to_string(n) + ")");
        double value;
        try {
            value = compound_one(hi->second, lo->second, f.k_hi, f.k_lo, n, policy);
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::NonPositiveDelta) throw;
            throw Error::wrap(e, compound_name_str(f.name));
        }
        if (value == 0.0 && policy == NonPositivePolicy::ClampToZero &&
            hi->second <= lo->second)
            out.suspects.insert(f.name);
        out.scores.values[f.name] = value;
    }
    return out;
}

/// Shift of a uniformly shifted plan implied by one formula's configs, used
/// when validating foreign suites. Returns nullopt when inconsistent.
inline std::optional<int> plan_shift_of(const std::vector<KernelConfig>& plan) {
    std::optional<int> shift;
    auto def = default_plan();
    if (plan.size() != def.size()) return std::nullopt;
    for (std::size_t i = 0; i < plan.size(); ++i) {
        if (plan[i].kind != def[i].kind || plan[i].k != def[i].k) return std::nullopt;
        int s = static_cast<int>(def[i].n) - static_cast<int>(plan[i].n);
        if (shift && *shift != s) return std::nullopt;
        shift = s;
    }
    return shift;
}

}  // namespace scorebreak
