#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>

#include "scorebreak/compound.hpp"

using namespace scorebreak;

namespace {

// Builds a full default-plan suite with synthetic times: every config costs
// overhead + k * cost(kind) per 2^31 operations, scaled to its 2^n.
std::vector<MicrobenchResult> synthetic_suite(double overhead,
                                              const std::map<KernelKind, double>& costs,
                                              int shift = 0) {
    std::vector<MicrobenchResult> suite;
    for (KernelConfig cfg : scaled_plan(shift)) {
        double cost = cfg.kind == KernelKind::Loop ? 0.0 : costs.at(cfg.kind);
        double t = (overhead + cfg.k * cost) * std::exp2(static_cast<double>(cfg.n) - 31.0);
        MicrobenchResult r;
        r.config = cfg;
        r.trials = {t * 1.25, t, t * 1.5};  // min summarization must pick the clean one
        suite.push_back(r);
    }
    return suite;
}

std::map<KernelKind, double> example_costs() {
    return {
        {KernelKind::IntAdd, 0.20},  {KernelKind::IntMul, 0.45},
        {KernelKind::IntAddMul, 0.33}, {KernelKind::IntDiv, 0.90},
        {KernelKind::IntStore, 0.55}, {KernelKind::IntStoreLoad, 0.60},
        {KernelKind::FpAdd, 0.25},   {KernelKind::FpMul, 0.28},
        {KernelKind::FpDiv, 0.75},   {KernelKind::FpStore, 0.50},
        {KernelKind::FpStoreLoad, 0.65},
    };
}

}  // namespace

TEST_CASE("hand-computed compound value") {
    // ((1.80 - 0.90) / (24 - 6)) * 2^31 / 2^27 = (0.90 / 18) * 16 = 0.80
    double v = compound_one(1.80, 0.90, 24, 6, 27);
    REQUIRE_THAT(v, Catch::Matchers::WithinRel(0.80, 1e-12));
}

TEST_CASE("overhead cancels out of the difference") {
    for (double overhead : {0.0, 0.1, 0.5, 3.0}) {
        const double cost = 0.42;
        const unsigned k_hi = 24, k_lo = 6, n = 26;
        double scale = std::exp2(static_cast<double>(n) - 31.0);
        double t_hi = (overhead + k_hi * cost) * scale;
        double t_lo = (overhead + k_lo * cost) * scale;
        REQUIRE_THAT(compound_one(t_hi, t_lo, k_hi, k_lo, n),
                     Catch::Matchers::WithinRel(cost, 1e-12));
    }
}

TEST_CASE("compound input validation") {
    REQUIRE_THROWS_AS(compound_one(2.0, 1.0, 6, 6, 27), Error);   // k_hi == k_lo
    REQUIRE_THROWS_AS(compound_one(2.0, 1.0, 6, 24, 27), Error);  // reversed
    REQUIRE_THROWS_AS(compound_one(2.0, 1.0, 24, 0, 27), Error);  // k_lo < 1
    REQUIRE_THROWS_AS(compound_one(2.0, -1.0, 24, 6, 27), Error); // negative time
    REQUIRE_THROWS_AS(compound_one(2.0, 1.0, 24, 6, 0), Error);   // n < 1
}

TEST_CASE("non-positive delta policy") {
    REQUIRE_THROWS_MATCHES(
        compound_one(0.90, 0.90, 24, 6, 27), Error,
        Catch::Matchers::Predicate<Error>(
            [](const Error& e) { return e.kind() == ErrorKind::NonPositiveDelta; }));
    REQUIRE(compound_one(0.90, 0.90, 24, 6, 27, NonPositivePolicy::ClampToZero) == 0.0);
    REQUIRE(compound_one(0.80, 0.90, 24, 6, 27, NonPositivePolicy::ClampToZero) == 0.0);
}

TEST_CASE("trial summarization") {
    REQUIRE(summarize_trials({1.2, 1.1, 1.3}) == 1.1);
    REQUIRE(summarize_trials({2.0}) == 2.0);
    REQUIRE(summarize_trials({3.0, 1.0, 2.0}, TrialSummarizer::Median) == 2.0);
    REQUIRE(summarize_trials({1.0, 2.0, 3.0, 4.0}, TrialSummarizer::Median) == 2.5);
    REQUIRE(summarize_trials({1.0, 2.0, 3.0}, TrialSummarizer::Mean) == 2.0);
    REQUIRE_THROWS_MATCHES(summarize_trials({}), Error, Catch::Matchers::Predicate<Error>([](
                               const Error& e) { return e.kind() == ErrorKind::EmptyTrials; }));
}

TEST_CASE("all eleven formulas recover their per-op costs") {
    auto costs = example_costs();
    CompoundOutcome out = compound_all(synthetic_suite(0.35, costs));
    REQUIRE(out.scores.complete());
    REQUIRE(out.scores.plan_shift == 0);
    REQUIRE_THAT(out.scores.loop31, Catch::Matchers::WithinRel(0.35, 1e-12));
    REQUIRE(out.suspects.empty());
    for (const CompoundFormula& f : kCompoundFormulas) {
        INFO(compound_name_str(f.name));
        REQUIRE_THAT(out.scores.values.at(f.name),
                     Catch::Matchers::WithinRel(costs.at(f.kind), 1e-12));
    }
}

TEST_CASE("shifted suites are detected and evaluated at the shifted exponents") {
    auto costs = example_costs();
    CompoundOutcome out = compound_all(synthetic_suite(0.35, costs, 16));
    REQUIRE(out.scores.plan_shift == 16);
    for (const CompoundFormula& f : kCompoundFormulas)
        REQUIRE_THAT(out.scores.values.at(f.name),
                     Catch::Matchers::WithinRel(costs.at(f.kind), 1e-12));
    // The bare-loop score now reflects 2^15 iterations, not 2^31.
    REQUIRE_THAT(out.scores.loop31,
                 Catch::Matchers::WithinRel(0.35 * std::exp2(-16.0), 1e-12));
}

TEST_CASE("missing configs are reported by compound name") {
    auto suite = synthetic_suite(0.35, example_costs());
    suite.erase(suite.begin());  // drops INTadd k=24
    try {
        compound_all(suite);
        FAIL("expected MissingConfig");
    } catch (const Error& e) {
        REQUIRE(e.kind() == ErrorKind::MissingConfig);
        REQUIRE(std::string(e.what()).find("C_Ia") != std::string::npos);
    }
}

TEST_CASE("suite without the bare loop is rejected") {
    auto suite = synthetic_suite(0.35, example_costs());
    suite.pop_back();
    REQUIRE_THROWS_MATCHES(compound_all(suite), Error, Catch::Matchers::Predicate<Error>([](
                               const Error& e) { return e.kind() == ErrorKind::MissingConfig; }));
}

TEST_CASE("inverted timings clamp to zero only under the lenient policy") {
    auto suite = synthetic_suite(0.35, example_costs());
    // Swap the FPdiv pair's times so t_hi < t_lo.
    for (MicrobenchResult& r : suite)
        if (r.config.kind == KernelKind::FpDiv)
            for (double& t : r.trials) t = r.config.k == 16 ? 0.01 : 0.02;

    REQUIRE_THROWS_MATCHES(compound_all(suite), Error, Catch::Matchers::Predicate<Error>([](
                               const Error& e) { return e.kind() == ErrorKind::NonPositiveDelta; }));

    CompoundOutcome out =
        compound_all(suite, TrialSummarizer::Min, NonPositivePolicy::ClampToZero);
    REQUIRE(out.scores.values.at(CompoundName::C_Fd) == 0.0);
    REQUIRE(out.suspects == std::set<CompoundName>{CompoundName::C_Fd});
}

TEST_CASE("compound names round-trip") {
    for (CompoundName n : kAllCompoundNames) {
        auto back = compound_name_from_str(compound_name_str(n));
        REQUIRE(back.has_value());
        REQUIRE(*back == n);
    }
    REQUIRE_FALSE(compound_name_from_str("C_xx").has_value());
}
