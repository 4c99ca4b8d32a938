// Command-line front end: measure kernels on this machine, fit breakdowns
// from score files, generate synthetic fleets, and self-check recovery
// quality. Human-readable tables go to standard output and warnings to
// standard error; files carry the machine formats.
//
// Exit codes: 0 success, 1 validation or data error (including failed check
// gates), 2 internal error.

#include <sys/utsname.h>

#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "scorebreak/scorebreak.hpp"

namespace sb = scorebreak;

namespace {

std::vector<sb::KernelConfig> parse_plan(const std::string& text) {
    if (text == "default") return sb::default_plan();
    const std::string prefix = "shift=";
    if (text.rfind(prefix, 0) == 0) {
        const std::string num = text.substr(prefix.size());
        char* end = nullptr;
        long shift = std::strtol(num.c_str(), &end, 10);
        if (num.empty() || end != num.c_str() + num.size())
            throw sb::Error(sb::ErrorKind::ConfigInvalid, "bad plan shift '" + num + "'");
        return sb::scaled_plan(static_cast<int>(shift));
    }
    throw sb::Error(sb::ErrorKind::ConfigInvalid,
                    "plan must be 'default' or 'shift=N', got '" + text + "'");
}

sb::TrialSummarizer parse_summarizer(const std::string& text) {
    auto s = sb::summarizer_from_name(text);
    if (!s)
        throw sb::Error(sb::ErrorKind::ConfigInvalid,
                        "summarizer must be min, median, or mean, got '" + text + "'");
    return *s;
}

int cmd_measure(const std::string& plan_text, std::size_t trials, const std::string& out_path,
                const std::string& system_id) {
    std::vector<sb::KernelConfig> plan = parse_plan(plan_text);
    if (trials < 1) throw sb::Error(sb::ErrorKind::ConfigInvalid, "--trials must be >= 1");

    std::cerr << "measuring " << plan.size() << " configs x " << trials << " trials on '"
              << system_id << "'" << std::endl;
    std::vector<sb::MicrobenchResult> suite = sb::run_suite(plan, trials);

    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw sb::Error(sb::ErrorKind::IoError, "cannot write " + out_path);
    struct utsname un {};
    if (uname(&un) == 0) {
        out << "# meta " << system_id << " os=" << un.sysname << " " << un.release << "\n";
        out << "# meta " << system_id << " machine=" << un.machine << "\n";
    }
    out << "# meta " << system_id << " cpus=" << std::thread::hardware_concurrency() << "\n";
    out << "# meta " << system_id << " clock=" << sb::kernel_clock_source() << "\n";
    out << "system_id,kind,name,k,n,trial_index,seconds\n";
    for (const sb::MicrobenchResult& r : suite)
        for (std::size_t t = 0; t < r.trials.size(); ++t)
            out << system_id << ",micro," << sb::kernel_kind_name(r.config.kind) << ","
                << r.config.k << "," << r.config.n << "," << t << ","
                << sb::detail::format_double(r.trials[t]) << "\n";
    std::cout << "wrote " << out_path << " (" << plan.size() << " configs)" << std::endl;
    return 0;
}

void write_report(const sb::BreakdownModel& model, const sb::ContributionTable& table,
                  const std::string& path, const sb::SvgOptions& svg_opt) {
    std::string ext = std::filesystem::path(path).extension().string();
    if (ext == ".csv") {
        sb::write_text_file(path, sb::report_csv_string(model, table));
    } else if (ext == ".json") {
        sb::write_text_file(path, sb::breakdown_to_json(model, table).dump(2) + "\n");
    } else if (ext == ".svg") {
        sb::write_text_file(path, sb::render_svg(model, table, svg_opt));
    } else {
        throw sb::Error(sb::ErrorKind::ConfigInvalid,
                        "report path must end in .csv, .json, or .svg: " + path);
    }
    std::cout << "wrote " << path << std::endl;
}

void print_model(const sb::BreakdownModel& model, const sb::ContributionTable& table) {
    std::cout << "target: " << model.target << "\n";
    std::cout << "r_squared: " << sb::detail::format_double(model.r_squared) << "\n";
    std::cout << "coefficients:\n";
    for (const std::string& name : model.coefficient_names)
        std::cout << "  " << name << " = "
                  << sb::detail::format_double(model.coefficients.at(name)) << "\n";
    std::cout << "systems: " << table.systems.size() << "\n";
    for (const std::string& w : model.warnings) std::cerr << "warning: " << w << std::endl;
    for (const std::string& w : model.collinearity_warnings)
        std::cerr << "warning: " << w << std::endl;
    for (const std::string& w : table.warnings) std::cerr << "warning: " << w << std::endl;
}

int cmd_fit(const std::vector<std::string>& data_paths, const std::string& target,
            const std::vector<std::string>& report_paths, bool allow_nonpositive,
            bool intercept, const std::string& summarizer_text, const std::string& records_out,
            const sb::SvgOptions& svg_opt) {
    sb::TrialSummarizer summarizer = parse_summarizer(summarizer_text);
    sb::NonPositivePolicy policy = allow_nonpositive ? sb::NonPositivePolicy::ClampToZero
                                                     : sb::NonPositivePolicy::Strict;
    std::vector<sb::SystemRecord> records;
    for (const std::string& path : data_paths) {
        std::vector<sb::SystemRecord> part =
            std::filesystem::path(path).extension() == ".json"
                ? sb::load_records(path)
                : sb::ingest_csv(path, summarizer, policy);
        records.insert(records.end(), part.begin(), part.end());
    }
    sb::Dataset dataset = sb::Dataset::from_records(std::move(records));

    sb::FitOptions options;
    options.intercept = intercept;
    sb::BreakdownModel model = sb::fit(dataset, target, options);
    sb::ContributionTable table = sb::contributions(model, dataset);
    print_model(model, table);
    for (const std::string& path : report_paths) write_report(model, table, path, svg_opt);
    if (!records_out.empty()) {
        sb::save_records(dataset.records, records_out);
        std::cout << "wrote " << records_out << std::endl;
    }
    return 0;
}

int cmd_synth(const std::string& spec_path, const std::string& out_dir, bool emit_raw) {
    sb::LoadedSpec loaded = sb::load_spec_file(spec_path);
    sb::SynthResult result = sb::generate(loaded.spec);

    std::filesystem::create_directories(out_dir);
    const std::string csv_path = out_dir + "/dataset.csv";
    sb::export_csv(result.dataset.records, csv_path);
    sb::save_records(result.dataset.records, out_dir + "/records.json");

    nlohmann::json truth;
    truth["schema"] = 1;
    truth["true_coefficients"] = result.truth;
    sb::write_text_file(out_dir + "/truth.json", truth.dump(2) + "\n");
    if (emit_raw) sb::write_text_file(out_dir + "/raw.csv", sb::emit_raw_csv(loaded.spec));

    std::cout << "wrote " << out_dir << "/dataset.csv, records.json, truth.json"
              << (emit_raw ? ", raw.csv" : "") << " (" << result.dataset.records.size()
              << " systems)" << std::endl;
    return 0;
}

int cmd_check(const std::string& spec_path, double rmse_tol, double contribution_tol,
              double fitted_tol) {
    sb::LoadedSpec loaded = sb::load_spec_file(spec_path);
    if (rmse_tol >= 0.0) loaded.gates.rmse_tol = rmse_tol;
    if (contribution_tol >= 0.0) loaded.gates.median_contribution_tol = contribution_tol;
    if (fitted_tol >= 0.0) loaded.gates.fitted_rel_tol = fitted_tol;

    sb::CheckOutcome outcome = sb::run_check(loaded.spec, loaded.gates);
    std::cout << spec_path << ": " << loaded.gates.seeds << " seed(s)\n";
    for (const std::string& line : outcome.lines) std::cout << line << "\n";
    std::cout << (outcome.passed ? "CHECK PASSED" : "CHECK FAILED") << std::endl;
    return outcome.passed ? 0 : 1;
}

int cmd_report(const std::string& from_path, const std::vector<std::string>& report_paths,
               const sb::SvgOptions& svg_opt) {
    std::ifstream in(from_path);
    if (!in) throw sb::Error(sb::ErrorKind::IoError, "cannot open " + from_path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw sb::Error(sb::ErrorKind::SchemaError, from_path + ": " + e.what());
    }
    auto [model, table] = sb::breakdown_from_json(j);
    for (const std::string& path : report_paths) write_report(model, table, path, svg_opt);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"benchmark score breakdown via cross-system regression"};
    app.require_subcommand(1);

    // measure
    auto* measure = app.add_subcommand("measure", "run the microbenchmark suite on this machine");
    std::string plan_text = "default";
    std::size_t trials = 5;
    std::string out_path = "scores.csv";
    std::string system_id;
    measure->add_option("--plan", plan_text, "default or shift=N (subtract N from every 2^n)");
    measure->add_option("--trials", trials, "trials per config (SCOREBREAK_TRIALS overrides)");
    measure->add_option("--out", out_path, "output CSV of raw trial rows");
    measure->add_option("--system-id", system_id, "label for this machine")->required();

    // fit
    auto* fit_cmd = app.add_subcommand("fit", "fit one target and break its score down");
    std::vector<std::string> data_paths;
    std::string target;
    std::vector<std::string> report_paths;
    bool allow_nonpositive = false;
    bool intercept = false;
    std::string summ_text = "min";
    std::string records_out;
    double svg_width = 960.0, svg_height = 480.0;
    fit_cmd->add_option("--data", data_paths, "score files (.csv raw or wide, .json records)")
        ->required()
        ->expected(-1);
    fit_cmd->add_option("--target", target, "target benchmark name")->required();
    fit_cmd->add_option("--report", report_paths, "report outputs (.csv, .json, .svg)");
    fit_cmd->add_flag("--allow-nonpositive", allow_nonpositive,
                      "clamp non-positive compound deltas to 0 and flag them instead of erroring");
    fit_cmd->add_flag("--intercept", intercept, "add a free nonnegative intercept column");
    fit_cmd->add_option("--summarizer", summ_text, "trial summarizer: min, median, mean");
    fit_cmd->add_option("--out-records", records_out, "also write merged records.json");
    fit_cmd->add_option("--svg-width", svg_width, "svg width in px");
    fit_cmd->add_option("--svg-height", svg_height, "svg height in px");

    // synth
    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic fleet from a spec");
    std::string spec_path;
    std::string out_dir = "synth_out";
    bool emit_raw = false;
    synth_cmd->add_option("--spec", spec_path, "generator spec (.toml)")->required();
    synth_cmd->add_option("--out", out_dir, "output directory");
    synth_cmd->add_flag("--raw", emit_raw, "also emit raw per-trial durations (raw.csv)");

    // check
    auto* check_cmd = app.add_subcommand("check", "generate, fit, and gate recovery quality");
    std::string check_spec;
    double rmse_tol = -1.0, contribution_tol = -1.0, fitted_tol = -1.0;
    check_cmd->add_option("--spec", check_spec, "generator spec (.toml) with a [check] table")
        ->required();
    check_cmd->add_option("--rmse-tol", rmse_tol, "override the coefficient RMSE gate");
    check_cmd->add_option("--contribution-tol", contribution_tol,
                          "override the median contribution error gate");
    check_cmd->add_option("--fitted-tol", fitted_tol, "override the fitted relative error gate");

    // report
    auto* report_cmd = app.add_subcommand("report", "re-render reports from a breakdown.json");
    std::string from_path;
    std::vector<std::string> report_out;
    double r_svg_width = 960.0, r_svg_height = 480.0;
    report_cmd->add_option("--from", from_path, "breakdown.json produced by fit")->required();
    report_cmd->add_option("--out", report_out, "outputs (.csv, .json, .svg)")
        ->required()
        ->expected(-1);
    report_cmd->add_option("--svg-width", r_svg_width, "svg width in px");
    report_cmd->add_option("--svg-height", r_svg_height, "svg height in px");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 1;
    }

    try {
        if (measure->parsed()) return cmd_measure(plan_text, trials, out_path, system_id);
        if (fit_cmd->parsed())
            return cmd_fit(data_paths, target, report_paths, allow_nonpositive, intercept,
                           summ_text, records_out, {svg_width, svg_height});
        if (synth_cmd->parsed()) return cmd_synth(spec_path, out_dir, emit_raw);
        if (check_cmd->parsed())
            return cmd_check(check_spec, rmse_tol, contribution_tol, fitted_tol);
        if (report_cmd->parsed())
            return cmd_report(from_path, report_out, {r_svg_width, r_svg_height});
        std::cerr << "error: no subcommand" << std::endl;
        return 1;
    } catch (const sb::Error& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << std::endl;
        return 2;
    }
}
