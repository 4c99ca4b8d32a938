#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "scorebreak/breakdown.hpp"
#include "scorebreak/dataset.hpp"
#include "scorebreak/detail/format.hpp"
#include "scorebreak/detail/toml.hpp"
#include "scorebreak/errors.hpp"
#include "scorebreak/linalg.hpp"

// Synthetic fleets with known ground truth. Factor values are drawn from
// per-regressor ranges through a Gaussian copula (so pairwise correlations can
// be dialed in), targets are exact linear combinations y = sum_j beta_j x_j,
// and noise is applied on top. Everything downstream of the seed is
// hand-rolled (uniforms, Box-Muller, normal CDF) because the distributions in
// <random> are not required to produce identical streams across standard
// library implementations, and the fixtures here feed byte-identical golden
// files.

namespace scorebreak {

enum class NoiseKind { None, Multiplicative, PositiveSkew };

struct NoiseSpec {
    NoiseKind kind = NoiseKind::None;
    double sigma = 0.0;
};

struct CorrelationPair {
    std::string a;
    std::string b;
    double rho = 0.0;
};

using TrueCoefficients = std::map<std::string, std::map<std::string, double>>;

struct SynthSpec {
    std::size_t n_systems = 0;
    /// Range per regressor; unlisted regressors use the default 0.1 to 1.0 s
    /// per 2^31 operations (about one order of magnitude, an arbitrary but
    /// plausible spread).
    std::map<std::string, std::pair<double, double>> factor_cost_ranges;
    TrueCoefficients true_coefficients;  // target -> regressor -> beta
    NoiseSpec noise;
    std::vector<CorrelationPair> correlation;
    std::uint64_t seed = 0;

    void validate() const {
        if (n_systems < 1) throw Error(ErrorKind::InvalidSpec, "n_systems must be >= 1");
        const auto& regs = regressor_names();
        auto known = [&](const std::string& name) {
            return std::find(regs.begin(), regs.end(), name) != regs.end();
        };
        for (const auto& [name, range] : factor_cost_ranges) {
            if (!known(name))
                throw Error(ErrorKind::InvalidSpec, "unknown regressor '" + name + "'");
            if (!(range.first > 0.0) || !(range.second >= range.first))
                throw Error(ErrorKind::InvalidSpec,
                            name + " range must satisfy 0 < low <= high");
        }
        if (true_coefficients.empty())
            throw Error(ErrorKind::InvalidSpec, "at least one target is required");
        for (const auto& [target, betas] : true_coefficients) {
            if (target.empty()) throw Error(ErrorKind::InvalidSpec, "empty target name");
            for (const auto& [name, beta] : betas) {
                if (!known(name))
                    throw Error(ErrorKind::InvalidSpec,
                                target + ": unknown regressor '" + name + "'");
                if (!(beta >= 0.0) || !std::isfinite(beta))
                    throw Error(ErrorKind::InvalidSpec,
                                target + ": coefficient for " + name + " must be >= 0");
            }
        }
        if (noise.sigma < 0.0) throw Error(ErrorKind::InvalidSpec, "sigma must be >= 0");
        for (const CorrelationPair& c : correlation) {
            if (!known(c.a) || !known(c.b))
                throw Error(ErrorKind::InvalidSpec,
                            "correlation names unknown: " + c.a + ", " + c.b);
            if (c.a == c.b)
                throw Error(ErrorKind::InvalidSpec, "correlation pair repeats " + c.a);
            if (!(c.rho >= -1.0 && c.rho <= 1.0))
                throw Error(ErrorKind::InvalidSpec, "rho must lie in [-1, 1]");
        }
    }
};

namespace detail {

/// Uniform in (0,1): 53 random bits centered in the cell so neither endpoint
/// can appear (log in Box-Muller must never see 0).
inline double uniform01(std::mt19937_64& rng) {
    return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

/// One standard normal per call via Box-Muller, consuming two uniforms every
/// other call. No caching across instances: deterministic stream positions.
class NormalSource {
  public:
    explicit NormalSource(std::mt19937_64& rng) : rng_(rng) {}

    double next() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform01(rng_);
        double u2 = uniform01(rng_);
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

  private:
    std::mt19937_64& rng_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

inline Matrix correlation_matrix(const SynthSpec& spec) {
    const auto& regs = regressor_names();
    Matrix C(regs.size(), regs.size());
    for (std::size_t j = 0; j < regs.size(); ++j) C(j, j) = 1.0;
    for (const CorrelationPair& c : spec.correlation) {
        std::size_t ia = std::find(regs.begin(), regs.end(), c.a) - regs.begin();
        std::size_t ib = std::find(regs.begin(), regs.end(), c.b) - regs.begin();
        C(ia, ib) = c.rho;
        C(ib, ia) = c.rho;
    }
    return C;
}

/// Factor values for every system: n_systems rows of 12 regressor values in
/// canonical order. Shared by generate() and the raw emitter so both see the
/// same fleet for the same seed.
inline std::vector<Vector> draw_factors(const SynthSpec& spec, std::mt19937_64& rng) {
    const auto& regs = regressor_names();
    const std::size_t p = regs.size();
    Matrix L = cholesky_psd(correlation_matrix(spec));
    std::vector<std::pair<double, double>> ranges(p, {0.1, 1.0});
    for (std::size_t j = 0; j < p; ++j) {
        auto it = spec.factor_cost_ranges.find(regs[j]);
        if (it != spec.factor_cost_ranges.end()) ranges[j] = it->second;
    }

    NormalSource normals(rng);
    std::vector<Vector> systems;
    systems.reserve(spec.n_systems);
    for (std::size_t i = 0; i < spec.n_systems; ++i) {
        Vector z(p);
        for (std::size_t j = 0; j < p; ++j) z[j] = normals.next();
        Vector x(p);
        for (std::size_t j = 0; j < p; ++j) {
            double zj = 0.0;
            for (std::size_t c = 0; c <= j; ++c) zj += L(j, c) * z[c];
            double u = normal_cdf(zj);
            x[j] = ranges[j].first + u * (ranges[j].second - ranges[j].first);
        }
        systems.push_back(std::move(x));
    }
    return systems;
}

inline double apply_noise(double clean, const NoiseSpec& noise, NormalSource& normals) {
    switch (noise.kind) {
        case NoiseKind::None: return clean;
        case NoiseKind::Multiplicative: return clean * std::exp(noise.sigma * normals.next());
        case NoiseKind::PositiveSkew:
            // never below the clean value: timing error only adds time
            return clean * (1.0 + noise.sigma * std::fabs(normals.next()));
    }
    return clean;
}

inline std::string synth_system_id(std::size_t index, std::size_t total) {
    std::size_t width = 2;
    for (std::size_t t = total; t >= 100; t /= 10) ++width;
    std::string digits = std::to_string(index + 1);
    return "sys" + std::string(width - std::min(width, digits.size()), '0') + digits;
}

}  // namespace detail

struct SynthResult {
    Dataset dataset;
    TrueCoefficients truth;
};

/// Draws the fleet and computes targets y = sum_j beta_j x_j, noised per the
/// spec (noise touches targets only; the factor columns stay clean).
/// Zero-coefficient targets are legal here and produce y = 0 even though the
/// ingest path rejects non-positive scores: the generator's output is
/// constructed, not measured, and the degenerate case is worth testing.
inline SynthResult generate(const SynthSpec& spec) {
    spec.validate();
    std::mt19937_64 rng(spec.seed);
    std::vector<Vector> factors = detail::draw_factors(spec, rng);
    detail::NormalSource noise_normals(rng);

    const auto& regs = regressor_names();
    SynthResult out;
    out.truth = spec.true_coefficients;

    Dataset& ds = out.dataset;
    ds.design = Matrix(spec.n_systems, regs.size());
    for (std::size_t i = 0; i < spec.n_systems; ++i) {
        SystemRecord rec;
        rec.system_id = detail::synth_system_id(i, spec.n_systems);
        rec.compound.plan_shift = 0;
        rec.compound.loop31 = factors[i][0];
        for (std::size_t j = 1; j < regs.size(); ++j)
            rec.compound.values[kAllCompoundNames[j - 1]] = factors[i][j];
        for (const auto& [target, betas] : spec.true_coefficients) {
            double y = 0.0;
            for (std::size_t j = 0; j < regs.size(); ++j) {
                auto it = betas.find(regs[j]);
                if (it != betas.end()) y += it->second * factors[i][j];
            }
            rec.targets[target] = detail::apply_noise(y, spec.noise, noise_normals);
        }
        for (std::size_t j = 0; j < regs.size(); ++j) ds.design(i, j) = factors[i][j];
        ds.records.push_back(std::move(rec));
    }
    for (const auto& [target, betas] : spec.true_coefficients) ds.target_names.push_back(target);
    return out;
}

/// Raw trial rows for the same fleet: every config of the default plan costs
/// overhead + k ops, each op at the system's per-2^31-op factor cost, scaled
/// by iteration count. Noise perturbs each trial independently. Exercises the
/// compound stage end-to-end: compounding these rows reproduces the factor
/// values (exactly when noise is none).
inline std::string emit_raw_csv(const SynthSpec& spec, std::size_t micro_trials = 5,
                                std::size_t target_trials = 3) {
    spec.validate();
    if (micro_trials < 1 || target_trials < 1)
        throw Error(ErrorKind::InvalidSpec, "trial counts must be >= 1");
    std::mt19937_64 rng(spec.seed);
    std::vector<Vector> factors = detail::draw_factors(spec, rng);
    detail::NormalSource noise_normals(rng);

    const auto& regs = regressor_names();
    auto cost_of = [&](const Vector& x, KernelKind kind) {
        for (const CompoundFormula& f : kCompoundFormulas)
            if (f.kind == kind)
                return x[1 + static_cast<std::size_t>(
                                 std::find(kAllCompoundNames.begin(), kAllCompoundNames.end(),
                                           f.name) -
                                 kAllCompoundNames.begin())];
        throw Error(ErrorKind::InvalidSpec, "no cost for kernel kind");
    };

    std::ostringstream out;
    out << "system_id,kind,name,k,n,trial_index,seconds\n";
    std::vector<KernelConfig> plan = default_plan();
    for (std::size_t i = 0; i < spec.n_systems; ++i) {
        const Vector& x = factors[i];
        const std::string id = detail::synth_system_id(i, spec.n_systems);
        const double overhead = x[0];  // loop31: bare-loop seconds at 2^31 iterations
        for (const KernelConfig& cfg : plan) {
            double per_iter_ops = cfg.kind == KernelKind::Loop ? 0.0 : cfg.k;
            double cost = cfg.kind == KernelKind::Loop ? 0.0 : cost_of(x, cfg.kind);
            double clean = (overhead + per_iter_ops * cost) * std::exp2(cfg.n - 31.0);
            for (std::size_t t = 0; t < micro_trials; ++t) {
                double v = detail::apply_noise(clean, spec.noise, noise_normals);
                out << id << ",micro," << kernel_kind_name(cfg.kind) << "," << cfg.k << ","
                    << cfg.n << "," << t << "," << detail::format_double(v) << "\n";
            }
        }
        for (const auto& [target, betas] : spec.true_coefficients) {
            double y = 0.0;
            for (std::size_t j = 0; j < regs.size(); ++j) {
                auto it = betas.find(regs[j]);
                if (it != betas.end()) y += it->second * x[j];
            }
            for (std::size_t t = 0; t < target_trials; ++t) {
                double v = detail::apply_noise(y, spec.noise, noise_normals);
                out << id << ",target," << target << ",,," << t << ","
                    << detail::format_double(v) << "\n";
            }
        }
    }
    return out.str();
}

// --- recovery metrics ---------------------------------------------------------

struct TargetRecovery {
    std::string target;
    double coefficient_rmse = 0.0;
    double max_contribution_rel_error = 0.0;
    double max_fitted_rel_error = 0.0;
    bool active_set_match = true;
};

struct RecoveryReport {
    double coefficient_rmse = 0.0;           // worst target
    double max_contribution_rel_error = 0.0;  // worst target
    double max_fitted_rel_error = 0.0;        // worst target
    bool active_set_match = true;             // all targets
    std::vector<TargetRecovery> per_target;
};

/// Compares one fitted model against the generator's coefficients for that
/// target. Contribution errors are normalized by the system's clean total
/// score sum_j beta_j x_j; fitted errors by the dataset's (possibly noisy)
/// target value.
inline TargetRecovery evaluate_recovery_target(const BreakdownModel& model,
                                               const std::map<std::string, double>& beta,
                                               const Dataset& dataset) {
    const auto& regs = regressor_names();
    TargetRecovery rep;
    rep.target = model.target;

    double max_coeff = 0.0;
    double sq_sum = 0.0;
    std::vector<double> truth(regs.size(), 0.0), fitted_beta(regs.size(), 0.0);
    for (std::size_t j = 0; j < regs.size(); ++j) {
        auto it = beta.find(regs[j]);
        truth[j] = it != beta.end() ? it->second : 0.0;
        auto fit_it = model.coefficients.find(regs[j]);
        fitted_beta[j] = fit_it != model.coefficients.end() ? fit_it->second : 0.0;
        max_coeff = std::max({max_coeff, truth[j], fitted_beta[j]});
        double d = fitted_beta[j] - truth[j];
        sq_sum += d * d;
    }
    rep.coefficient_rmse = std::sqrt(sq_sum / static_cast<double>(regs.size()));

    const double active_threshold = 1e-9 * max_coeff;
    for (std::size_t j = 0; j < regs.size(); ++j) {
        bool truth_active = truth[j] > active_threshold;
        bool fit_active = fitted_beta[j] > active_threshold;
        if (truth_active != fit_active) rep.active_set_match = false;
    }

    for (std::size_t i = 0; i < dataset.records.size(); ++i) {
        const SystemRecord& rec = dataset.records[i];
        double clean_total = 0.0;
        for (std::size_t j = 0; j < regs.size(); ++j)
            clean_total += truth[j] * dataset.design(i, j);
        for (std::size_t j = 0; j < regs.size(); ++j) {
            double want = truth[j] * dataset.design(i, j);
            double got = fitted_beta[j] * dataset.design(i, j);
            double err = std::fabs(got - want);
            if (clean_total > 0.0)
                rep.max_contribution_rel_error =
                    std::max(rep.max_contribution_rel_error, err / clean_total);
            else if (err > 0.0)
                rep.max_contribution_rel_error = std::numeric_limits<double>::infinity();
        }
        auto t = rec.targets.find(model.target);
        auto f = model.fitted.find(rec.system_id);
        if (t != rec.targets.end() && f != model.fitted.end() && t->second > 0.0)
            rep.max_fitted_rel_error =
                std::max(rep.max_fitted_rel_error,
                         std::fabs(f->second - t->second) / t->second);
    }
    return rep;
}

inline RecoveryReport evaluate_recovery(const std::vector<BreakdownModel>& models,
                                        const TrueCoefficients& truth, const Dataset& dataset) {
    RecoveryReport rep;
    for (const BreakdownModel& model : models) {
        auto it = truth.find(model.target);
        if (it == truth.end())
            throw Error(ErrorKind::MissingTarget, "no ground truth for " + model.target);
        TargetRecovery tr = evaluate_recovery_target(model, it->second, dataset);
        rep.coefficient_rmse = std::max(rep.coefficient_rmse, tr.coefficient_rmse);
        rep.max_contribution_rel_error =
            std::max(rep.max_contribution_rel_error, tr.max_contribution_rel_error);
        rep.max_fitted_rel_error = std::max(rep.max_fitted_rel_error, tr.max_fitted_rel_error);
        rep.active_set_match = rep.active_set_match && tr.active_set_match;
        rep.per_target.push_back(std::move(tr));
    }
    return rep;
}

// --- spec files ----------------------------------------------------------------

/// Pass/fail thresholds for `check`, read from the spec file's [check] table.
/// Negative values mean "not gated".
struct CheckGates {
    std::size_t seeds = 1;  // consecutive seeds starting at spec.seed
    double rmse_tol = -1.0;
    double median_contribution_tol = -1.0;
    double fitted_rel_tol = -1.0;
    double min_active_mismatch_fraction = -1.0;
    bool require_active_set_match = false;
};

struct LoadedSpec {
    SynthSpec spec;
    CheckGates gates;
};

inline LoadedSpec spec_from_toml(const toml::Value& root) {
    LoadedSpec out;
    SynthSpec& spec = out.spec;
    for (const auto& [key, value] : root.table) {
        if (key == "n_systems") {
            std::int64_t n = value.as_integer("n_systems");
            if (n < 1) throw Error(ErrorKind::InvalidSpec, "n_systems must be >= 1");
            spec.n_systems = static_cast<std::size_t>(n);
        } else if (key == "seed") {
            spec.seed = static_cast<std::uint64_t>(value.as_integer("seed"));
        } else if (key == "factor_cost_ranges") {
            for (const auto& [name, range] : value.table) {
                const auto& arr = range.as_array("factor_cost_ranges." + name);
                if (arr.size() != 2)
                    throw Error(ErrorKind::InvalidSpec, name + " range needs [low, high]");
                spec.factor_cost_ranges[name] = {arr[0].as_number(name + " low"),
                                                 arr[1].as_number(name + " high")};
            }
        } else if (key == "true_coefficients") {
            for (const auto& [target, betas] : value.table) {
                std::map<std::string, double> bm;
                for (const auto& [reg, beta] : betas.table)
                    bm[reg] = beta.as_number(target + "." + reg);
                spec.true_coefficients[target] = std::move(bm);
            }
        } else if (key == "noise") {
            for (const auto& [nk, nv] : value.table) {
                if (nk == "kind") {
                    std::string kind = nv.as_string("noise.kind");
                    if (kind == "none") spec.noise.kind = NoiseKind::None;
                    else if (kind == "multiplicative") spec.noise.kind = NoiseKind::Multiplicative;
                    else if (kind == "positive_skew") spec.noise.kind = NoiseKind::PositiveSkew;
                    else throw Error(ErrorKind::InvalidSpec, "unknown noise kind '" + kind + "'");
                } else if (nk == "sigma") {
                    spec.noise.sigma = nv.as_number("noise.sigma");
                } else {
                    throw Error(ErrorKind::InvalidSpec, "unknown noise key '" + nk + "'");
                }
            }
        } else if (key == "correlation") {
            for (const toml::Value& c : value.as_array("correlation")) {
                CorrelationPair pair;
                pair.a = c.at("a").as_string("correlation.a");
                pair.b = c.at("b").as_string("correlation.b");
                pair.rho = c.at("rho").as_number("correlation.rho");
                spec.correlation.push_back(std::move(pair));
            }
        } else if (key == "check") {
            CheckGates& g = out.gates;
            for (const auto& [ck, cv] : value.table) {
                if (ck == "seeds") {
                    std::int64_t s = cv.as_integer("check.seeds");
                    if (s < 1) throw Error(ErrorKind::InvalidSpec, "check.seeds must be >= 1");
                    g.seeds = static_cast<std::size_t>(s);
                } else if (ck == "rmse_tol") {
                    g.rmse_tol = cv.as_number("check.rmse_tol");
                } else if (ck == "median_contribution_tol") {
                    g.median_contribution_tol = cv.as_number("check.median_contribution_tol");
                } else if (ck == "fitted_rel_tol") {
                    g.fitted_rel_tol = cv.as_number("check.fitted_rel_tol");
                } else if (ck == "min_active_mismatch_fraction") {
                    g.min_active_mismatch_fraction =
                        cv.as_number("check.min_active_mismatch_fraction");
                } else if (ck == "require_active_set_match") {
                    g.require_active_set_match = cv.as_bool("check.require_active_set_match");
                } else {
                    throw Error(ErrorKind::InvalidSpec, "unknown check key '" + ck + "'");
                }
            }
        } else {
            throw Error(ErrorKind::InvalidSpec, "unknown top-level key '" + key + "'");
        }
    }
    spec.validate();
    return out;
}

inline LoadedSpec load_spec_file(const std::string& path) {
    try {
        return spec_from_toml(toml::parse_file(path));
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::IoError) throw;
        throw Error::wrap(e, path);
    }
}

// --- the check pipeline ---------------------------------------------------------

struct CheckOutcome {
    bool passed = true;
    double worst_rmse = 0.0;
    double median_contribution_err = 0.0;
    double worst_fitted_rel_error = 0.0;
    double mismatch_fraction = 0.0;  // seeds with any active-set mismatch
    std::vector<std::string> lines;  // human-readable summary, one gate per line
};

/// Runs generate -> fit -> evaluate over `gates.seeds` consecutive seeds and
/// applies every configured gate. The repo's one-command self-validation.
inline CheckOutcome run_check(const SynthSpec& base_spec, const CheckGates& gates,
                              const FitOptions& fit_options = {}) {
    std::vector<double> per_seed_contribution;
    std::size_t mismatched_seeds = 0;
    CheckOutcome out;

    for (std::size_t s = 0; s < gates.seeds; ++s) {
        SynthSpec spec = base_spec;
        spec.seed = base_spec.seed + s;
        SynthResult gen = generate(spec);
        std::vector<BreakdownModel> models;
        for (const auto& [target, _] : gen.truth)
            models.push_back(fit(gen.dataset, target, fit_options));
        RecoveryReport rep = evaluate_recovery(models, gen.truth, gen.dataset);
        out.worst_rmse = std::max(out.worst_rmse, rep.coefficient_rmse);
        out.worst_fitted_rel_error =
            std::max(out.worst_fitted_rel_error, rep.max_fitted_rel_error);
        per_seed_contribution.push_back(rep.max_contribution_rel_error);
        if (!rep.active_set_match) ++mismatched_seeds;
    }

    std::sort(per_seed_contribution.begin(), per_seed_contribution.end());
    std::size_t mid = per_seed_contribution.size() / 2;
    out.median_contribution_err =
        per_seed_contribution.size() % 2 == 1
            ? per_seed_contribution[mid]
            : 0.5 * (per_seed_contribution[mid - 1] + per_seed_contribution[mid]);
    out.mismatch_fraction =
        static_cast<double>(mismatched_seeds) / static_cast<double>(gates.seeds);

    auto gate = [&](bool ok, const std::string& text) {
        out.lines.push_back(std::string(ok ? "pass" : "FAIL") + "  " + text);
        if (!ok) out.passed = false;
    };
    using detail::format_double;
    if (gates.rmse_tol >= 0.0)
        gate(out.worst_rmse <= gates.rmse_tol,
             "coefficient rmse " + format_double(out.worst_rmse) + " <= " +
                 format_double(gates.rmse_tol));
    if (gates.median_contribution_tol >= 0.0)
        gate(out.median_contribution_err <= gates.median_contribution_tol,
             "median contribution error " + format_double(out.median_contribution_err) +
                 " <= " + format_double(gates.median_contribution_tol));
    if (gates.fitted_rel_tol >= 0.0)
        gate(out.worst_fitted_rel_error <= gates.fitted_rel_tol,
             "fitted relative error " + format_double(out.worst_fitted_rel_error) + " <= " +
                 format_double(gates.fitted_rel_tol));
    if (gates.require_active_set_match)
        gate(mismatched_seeds == 0, "active set matches the ground truth on every seed");
    if (gates.min_active_mismatch_fraction >= 0.0)
        gate(out.mismatch_fraction >= gates.min_active_mismatch_fraction,
             "active-set mismatch fraction " + format_double(out.mismatch_fraction) + " >= " +
                 format_double(gates.min_active_mismatch_fraction) +
                 " (misattribution reproduced)");
    if (out.lines.empty()) out.lines.push_back("pass  (no gates configured)");
    return out;
}

}  // namespace scorebreak
