#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "scorebreak/dataset.hpp"
#include "scorebreak/detail/format.hpp"
#include "scorebreak/errors.hpp"
#include "scorebreak/nnls.hpp"

// End-to-end score breakdown: fit one target's scores across systems on the
// 12 regressors with nonnegative least squares, then split each system's
// fitted score into per-factor contributions coefficient_j * regressor_j(s).

namespace scorebreak {

struct FitOptions {
    double tol = 0.0;           // 0 = solver default
    std::size_t max_iter = 0;   // 0 = solver default
    /// Adds a constant column named "intercept". Off by default: execution
    /// time is modeled as a nonnegative combination of component times, and
    /// the bare-loop regressor already absorbs fixed overhead.
    bool intercept = false;
};

struct BreakdownModel {
    std::string target;
    std::vector<std::string> coefficient_names;   // regressors, intercept last when present
    std::map<std::string, double> coefficients;   // all >= 0
    std::map<std::string, double> fitted;         // system_id -> seconds
    std::map<std::string, double> residuals;      // system_id -> true - fitted
    double r_squared = 0.0;
    std::vector<std::string> warnings;
    std::vector<std::string> collinearity_warnings;
};

inline BreakdownModel fit(const Dataset& dataset, const std::string& target,
                          const FitOptions& options = {}) {
    AssembledRegression reg = assemble(dataset.records, target);
    const std::size_t n = reg.design.rows();
    std::size_t p = reg.design.cols();

    Matrix design = reg.design;
    std::vector<std::string> names = reg.names;
    if (options.intercept) {
        Matrix with_icpt(n, p + 1);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < p; ++j) with_icpt(i, j) = design(i, j);
            with_icpt(i, p) = 1.0;
        }
        design = std::move(with_icpt);
        names.push_back("intercept");
        ++p;
    }

    NnlsProblem problem;
    problem.A = design;
    problem.b = reg.y;
    problem.tol = options.tol;
    problem.max_iter = options.max_iter;
    NnlsSolution sol = nnls_solve(problem);

    BreakdownModel model;
    model.target = target;
    model.coefficient_names = names;
    for (std::size_t j = 0; j < p; ++j) model.coefficients[names[j]] = sol.x[j];

    double ss_res = 0.0, ss_tot = 0.0, mean = 0.0;
    for (double v : reg.y) mean += v;
    mean /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        double f = 0.0;
        for (std::size_t j = 0; j < p; ++j) f += sol.x[j] * design(i, j);
        model.fitted[reg.system_ids[i]] = f;
        double r = reg.y[i] - f;
        model.residuals[reg.system_ids[i]] = r;
        ss_res += r * r;
        ss_tot += (reg.y[i] - mean) * (reg.y[i] - mean);
    }
    model.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : (ss_res == 0.0 ? 1.0 : 0.0);

    if (n < regressor_names().size())
        model.warnings.push_back("under-determined fit: " + std::to_string(n) +
                                 " systems for " + std::to_string(p) +
                                 " regressors; coefficients are not unique");
    if (!sol.converged)
        model.warnings.push_back("solver stopped after " + std::to_string(sol.iterations) +
                                 " iterations without meeting the optimality tolerance");
    if (sol.collinearity_warning) {
        std::string w = "collinear regressors: passive-set condition number " +
                        detail::format_double(sol.passive_condition);
        if (!sol.dependent_columns.empty()) {
            w += "; dependent columns:";
            for (std::size_t j : sol.dependent_columns) w += " " + names[j];
        }
        w += "; coefficient attribution is not unique";
        model.collinearity_warnings.push_back(w);
    }
    return model;
}

struct ContributionEntry {
    std::string name;
    double seconds = 0.0;
    double share = 0.0;  // meaningless when fitted_score == 0, see zero_fit
};

struct SystemContributions {
    std::string system_id;
    std::vector<ContributionEntry> entries;  // canonical regressor order
    double true_score = 0.0;
    double fitted_score = 0.0;
    bool zero_fit = false;  // fitted == 0: shares are undefined and omitted
};

struct ContributionTable {
    std::string target;
    std::vector<SystemContributions> systems;  // sorted by system_id
    std::vector<std::string> warnings;
};

inline ContributionTable contributions(const BreakdownModel& model, const Dataset& dataset) {
    ContributionTable table;
    table.target = model.target;
    for (const SystemRecord& rec : dataset.records) {
        auto fit_it = model.fitted.find(rec.system_id);
        if (fit_it == model.fitted.end())
            throw Error(ErrorKind::MissingConfig,
                        "model was not fitted on system " + rec.system_id);
        SystemContributions sc;
        sc.system_id = rec.system_id;
        sc.fitted_score = fit_it->second;
        auto tgt = rec.targets.find(model.target);
        if (tgt == rec.targets.end())
            throw Error(ErrorKind::MissingTarget, rec.system_id + " lacks " + model.target);
        sc.true_score = tgt->second;
        sc.zero_fit = !(sc.fitted_score > 0.0);
        if (sc.zero_fit)
            table.warnings.push_back(rec.system_id + ": fitted score is zero, shares omitted");

        Vector row = rec.regressor_vector();
        for (std::size_t j = 0; j < model.coefficient_names.size(); ++j) {
            const std::string& name = model.coefficient_names[j];
            double x = name == "intercept" ? 1.0 : row[j];
            double c = model.coefficients.at(name) * x;
            ContributionEntry e;
            e.name = name;
            e.seconds = c;
            e.share = sc.zero_fit ? 0.0 : c / sc.fitted_score;
            sc.entries.push_back(e);
        }
        table.systems.push_back(std::move(sc));
    }
    return table;
}

// --- reports -----------------------------------------------------------------

/// CSV: one row per system, true and fitted scores then the contribution of
/// every regressor in canonical order.
inline std::string report_csv_string(const BreakdownModel& model, const ContributionTable& table) {
    std::ostringstream out;
    out << "system_id,true,fitted";
    for (const std::string& name : model.coefficient_names) out << "," << name;
    out << "\n";
    for (const SystemContributions& sc : table.systems) {
        out << sc.system_id << "," << detail::format_double(sc.true_score) << ","
            << detail::format_double(sc.fitted_score);
        for (const ContributionEntry& e : sc.entries) out << "," << detail::format_double(e.seconds);
        out << "\n";
    }
    return out.str();
}

inline nlohmann::json breakdown_to_json(const BreakdownModel& model,
                                        const ContributionTable& table) {
    nlohmann::json j;
    j["schema"] = 1;
    j["target"] = model.target;
    j["coefficient_order"] = model.coefficient_names;
    j["coefficients"] = model.coefficients;
    j["r_squared"] = model.r_squared;
    j["warnings"] = model.warnings;
    j["collinearity_warnings"] = model.collinearity_warnings;
    nlohmann::json systems = nlohmann::json::array();
    for (const SystemContributions& sc : table.systems) {
        nlohmann::json s;
        s["system_id"] = sc.system_id;
        s["true"] = sc.true_score;
        s["fitted"] = sc.fitted_score;
        s["residual"] = model.residuals.at(sc.system_id);
        nlohmann::json contrib, shares;
        for (const ContributionEntry& e : sc.entries) {
            contrib[e.name] = e.seconds;
            if (!sc.zero_fit) shares[e.name] = e.share;
        }
        s["contributions"] = contrib;
        if (!sc.zero_fit) s["shares"] = shares;
        systems.push_back(s);
    }
    j["systems"] = systems;
    nlohmann::json cw = nlohmann::json::array();
    for (const std::string& w : table.warnings) cw.push_back(w);
    j["table_warnings"] = cw;
    return j;
}

/// Rebuilds the model/table pair from a breakdown.json, so reports can be
/// re-rendered without refitting.
inline std::pair<BreakdownModel, ContributionTable> breakdown_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("schema") || j.at("schema") != 1)
        throw Error(ErrorKind::SchemaError, "breakdown.json must declare \"schema\": 1");
    BreakdownModel model;
    ContributionTable table;
    try {
        model.target = j.at("target").get<std::string>();
        model.coefficient_names = j.at("coefficient_order").get<std::vector<std::string>>();
        model.coefficients = j.at("coefficients").get<std::map<std::string, double>>();
        model.r_squared = j.at("r_squared").get<double>();
        model.warnings = j.at("warnings").get<std::vector<std::string>>();
        model.collinearity_warnings =
            j.at("collinearity_warnings").get<std::vector<std::string>>();
        table.target = model.target;
        if (j.contains("table_warnings"))
            table.warnings = j.at("table_warnings").get<std::vector<std::string>>();
        for (const auto& s : j.at("systems")) {
            SystemContributions sc;
            sc.system_id = s.at("system_id").get<std::string>();
            sc.true_score = s.at("true").get<double>();
            sc.fitted_score = s.at("fitted").get<double>();
            sc.zero_fit = !s.contains("shares");
            model.fitted[sc.system_id] = sc.fitted_score;
            model.residuals[sc.system_id] = s.at("residual").get<double>();
            auto contrib = s.at("contributions");
            for (const std::string& name : model.coefficient_names) {
                ContributionEntry e;
                e.name = name;
                e.seconds = contrib.at(name).get<double>();
                e.share = sc.zero_fit ? 0.0 : s.at("shares").at(name).get<double>();
                sc.entries.push_back(e);
            }
            table.systems.push_back(std::move(sc));
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::SchemaError, std::string("breakdown.json: ") + e.what());
    }
    return {std::move(model), std::move(table)};
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::IoError, "cannot write " + path);
    out << content;
}

}  // namespace scorebreak
