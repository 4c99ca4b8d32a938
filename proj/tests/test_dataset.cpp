#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <sstream>
#include <unistd.h>

#include "scorebreak/dataset.hpp"

using namespace scorebreak;

namespace {

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

// Raw measurement CSV for one system over the full default plan: 3 trials per
// config (trial 0 clean, the rest inflated so min summarization matters) plus
// target rows.
std::string raw_csv_for(const std::string& sys, double overhead,
                        const std::map<KernelKind, double>& costs,
                        const std::map<std::string, double>& targets,
                        bool with_header = true) {
    std::ostringstream out;
    if (with_header) out << "system_id,kind,name,k,n,trial_index,seconds\n";
    for (KernelConfig cfg : default_plan()) {
        double cost = cfg.kind == KernelKind::Loop ? 0.0 : costs.at(cfg.kind);
        double t = (overhead + cfg.k * cost) * std::exp2(static_cast<double>(cfg.n) - 31.0);
        for (int trial = 0; trial < 3; ++trial) {
            out << sys << ",micro," << kernel_kind_name(cfg.kind) << ",";
            if (cfg.kind != KernelKind::Loop) out << cfg.k;
            out << "," << cfg.n << "," << trial << ","
                << detail::format_double(t * (1.0 + 0.1 * trial)) << "\n";
        }
    }
    for (const auto& [name, score] : targets)
        for (int trial = 0; trial < 2; ++trial)
            out << sys << ",target," << name << ",,," << trial << ","
                << detail::format_double(score * (1.0 + 0.05 * trial)) << "\n";
    return out.str();
}

SystemRecord sample_record(const std::string& id, double base) {
    SystemRecord rec;
    rec.system_id = id;
    rec.compound.loop31 = base;
    double v = base;
    for (CompoundName n : kAllCompoundNames) {
        v += 0.125;
        rec.compound.values[n] = v;
    }
    rec.targets["bench_a"] = 10.0 * base;
    rec.targets["bench_b"] = 20.0 * base;
    return rec;
}

struct TempFile {
    std::string path;
    explicit TempFile(const std::string& stem) {
        path = (std::filesystem::temp_directory_path() /
                (stem + "-" + std::to_string(::getpid()) + ".tmp"))
                   .string();
    }
    ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("raw ingest reconstructs compound scores") {
    auto costs = example_costs();
    std::istringstream in(
        raw_csv_for("alpha", 0.4, costs, {{"bench_a", 12.5}, {"bench_b", 3.25}}));
    auto records = ingest_csv_stream(in);
    REQUIRE(records.size() == 1);
    const SystemRecord& rec = records[0];
    REQUIRE(rec.system_id == "alpha");
    // Min summarization keeps the clean trial, so the overhead cancels exactly.
    REQUIRE_THAT(rec.compound.loop31, Catch::Matchers::WithinRel(0.4, 1e-12));
    for (const CompoundFormula& f : kCompoundFormulas)
        REQUIRE_THAT(rec.compound.values.at(f.name),
                     Catch::Matchers::WithinRel(costs.at(f.kind), 1e-12));
    REQUIRE_THAT(rec.targets.at("bench_a"), Catch::Matchers::WithinRel(12.5, 1e-12));
    REQUIRE_THAT(rec.targets.at("bench_b"), Catch::Matchers::WithinRel(3.25, 1e-12));
    REQUIRE(rec.suspect_flags.empty());
}

TEST_CASE("raw ingest rejects malformed rows") {
    const char* header = "system_id,kind,name,k,n,trial_index,seconds\n";
    auto expect_schema_error = [&](const std::string& row) {
        std::istringstream in(std::string(header) + row);
        REQUIRE_THROWS_MATCHES(
            ingest_csv_stream(in), Error,
            Catch::Matchers::Predicate<Error>(
                [](const Error& e) { return e.kind() == ErrorKind::SchemaError; }));
    };
    expect_schema_error("alpha,micro,INTadd,24,27,0\n");                // 6 cells
    expect_schema_error("alpha,micro,bogus,24,27,0,1.0\n");             // unknown kernel
    expect_schema_error("alpha,micro,INTadd,64,27,0,1.0\n");            // k over budget
    expect_schema_error("alpha,target,bench_a,24,,0,1.0\n");            // target with k
    expect_schema_error("alpha,widget,INTadd,24,27,0,1.0\n");           // bad kind

    std::istringstream neg(std::string(header) + "alpha,micro,INTadd,24,27,0,-1.0\n");
    REQUIRE_THROWS_MATCHES(ingest_csv_stream(neg), Error, Catch::Matchers::Predicate<Error>([](
                               const Error& e) { return e.kind() == ErrorKind::NonPositiveScore; }));
}

TEST_CASE("meta comment lines attach to their system") {
    auto costs = example_costs();
    std::string csv = "# meta alpha cpu=example-3200\n";
    csv += raw_csv_for("alpha", 0.4, costs, {{"bench_a", 5.0}});
    csv += "# meta alpha os=demo 1.2\n";
    csv += "# plain comment, ignored\n";
    std::istringstream in(csv);
    auto records = ingest_csv_stream(in);
    REQUIRE(records[0].metadata.at("cpu") == "example-3200");
    REQUIRE(records[0].metadata.at("os") == "demo 1.2");
    REQUIRE(records[0].metadata.size() == 2);
}

TEST_CASE("wide ingest honours suspect flags") {
    std::ostringstream wide;
    wide << "system_id";
    for (const std::string& r : regressor_names()) wide << "," << r;
    wide << ",bench_a,suspect_flags\n";
    wide << "beta,0.5,0.2,0.45,0.33,-0.1,0.55,0.6,0.25,0.28,0.75,0.5,0.65,7.5,C_Id\n";
    std::istringstream in(wide.str());
    auto records = ingest_csv_stream(in);
    REQUIRE(records.size() == 1);
    // A flagged negative clamps to zero, matching the compound stage.
    REQUIRE(records[0].compound.values.at(CompoundName::C_Id) == 0.0);
    REQUIRE(records[0].suspect_flags.count(CompoundName::C_Id) == 1);
    REQUIRE(records[0].targets.at("bench_a") == 7.5);
}

TEST_CASE("wide ingest rejects unflagged negatives and bad headers") {
    std::string cols;
    for (const std::string& r : regressor_names()) cols += "," + r;

    std::istringstream neg("system_id" + cols +
                           ",bench_a\nbeta,0.5,0.2,0.45,0.33,-0.1,0.55,0.6,0.25,0.28,0.75,0.5,0.65,7.5\n");
    REQUIRE_THROWS_MATCHES(ingest_csv_stream(neg), Error, Catch::Matchers::Predicate<Error>([](
                               const Error& e) { return e.kind() == ErrorKind::NonPositiveScore; }));

    std::istringstream bad_order("system_id,C_Ia,loop31\nbeta,1,1\n");
    REQUIRE_THROWS_AS(ingest_csv_stream(bad_order), Error);

    std::istringstream bad_flag("system_id" + cols +
                                ",suspect_flags\nbeta,0.5,0.2,0.45,0.33,0.1,0.55,0.6,0.25,0.28,0.75,0.5,0.65,C_zz\n");
    REQUIRE_THROWS_MATCHES(ingest_csv_stream(bad_flag), Error, Catch::Matchers::Predicate<Error>([](
                               const Error& e) { return e.kind() == ErrorKind::SchemaError; }));

    std::istringstream empty("\n  \n");
    REQUIRE_THROWS_MATCHES(ingest_csv_stream(empty), Error, Catch::Matchers::Predicate<Error>([](
                               const Error& e) { return e.kind() == ErrorKind::SchemaError; }));
}

TEST_CASE("export and re-ingest are byte stable") {
    std::vector<SystemRecord> records = {sample_record("gamma", 0.5),
                                         sample_record("alpha", 0.25)};
    records[0].metadata["cpu"] = "demo";
    records[1].suspect_flags.insert(CompoundName::C_Fd);
    records[1].compound.values[CompoundName::C_Fd] = 0.0;

    std::string first = export_csv_string(records);
    // Data rows come out sorted regardless of input order (meta lines precede
    // the header, so compare row starts, not first mention).
    REQUIRE(first.find("\nalpha,") < first.find("\ngamma,"));

    std::istringstream in(first);
    auto back = ingest_csv_stream(in);
    REQUIRE(back.size() == 2);
    REQUIRE(export_csv_string(back) == first);
    REQUIRE(back[1].metadata.at("cpu") == "demo");
    REQUIRE(back[0].suspect_flags.count(CompoundName::C_Fd) == 1);
}

TEST_CASE("records json round trip") {
    std::vector<SystemRecord> records = {sample_record("alpha", 0.25),
                                         sample_record("beta", 0.5)};
    records[0].compound.plan_shift = 16;
    records[0].metadata["note"] = "hand entered";

    TempFile tmp("scorebreak-records");
    save_records(records, tmp.path);
    auto back = load_records(tmp.path);
    REQUIRE(back.size() == 2);
    REQUIRE(back[0].system_id == "alpha");
    REQUIRE(back[0].compound.plan_shift == 16);
    REQUIRE(back[0].metadata.at("note") == "hand entered");
    REQUIRE(back[0].compound.values == records[0].compound.values);
    REQUIRE(back[1].targets == records[1].targets);

    REQUIRE_THROWS_MATCHES(load_records("/nonexistent/records.json"), Error,
                           Catch::Matchers::Predicate<Error>([](const Error& e) {
                               return e.kind() == ErrorKind::IoError;
                           }));
}

TEST_CASE("records json requires the schema marker") {
    REQUIRE_THROWS_MATCHES(records_from_json(nlohmann::json{{"records", nlohmann::json::array()}}),
                           Error, Catch::Matchers::Predicate<Error>([](const Error& e) {
                               return e.kind() == ErrorKind::SchemaError;
                           }));
    REQUIRE_THROWS_AS(records_from_json(nlohmann::json{{"schema", 2}}), Error);
}

TEST_CASE("dataset assembly sorts rows and checks targets") {
    std::vector<SystemRecord> records = {sample_record("zeta", 1.0),
                                         sample_record("alpha", 0.25),
                                         sample_record("mid", 0.5)};
    Dataset ds = Dataset::from_records(records);
    REQUIRE(ds.records[0].system_id == "alpha");
    REQUIRE(ds.records[2].system_id == "zeta");
    REQUIRE(ds.design.rows() == 3);
    REQUIRE(ds.design.cols() == regressor_names().size());
    REQUIRE(ds.design(0, 0) == 0.25);
    REQUIRE(ds.target_names == std::vector<std::string>{"bench_a", "bench_b"});

    AssembledRegression reg = assemble(records, "bench_a");
    REQUIRE(reg.system_ids == std::vector<std::string>{"alpha", "mid", "zeta"});
    REQUIRE(reg.y == Vector{2.5, 5.0, 10.0});
    // Shuffled input assembles identically.
    std::swap(records[0], records[2]);
    AssembledRegression reg2 = assemble(records, "bench_a");
    REQUIRE(reg2.y == reg.y);
    REQUIRE(reg2.system_ids == reg.system_ids);

    REQUIRE_THROWS_MATCHES(assemble(records, "bench_c"), Error,
                           Catch::Matchers::Predicate<Error>([](const Error& e) {
                               return e.kind() == ErrorKind::MissingTarget;
                           }));
}

TEST_CASE("partial targets are excluded from the fit list") {
    std::vector<SystemRecord> records = {sample_record("alpha", 0.25),
                                         sample_record("beta", 0.5)};
    records[1].targets.erase("bench_b");
    Dataset ds = Dataset::from_records(records);
    REQUIRE(ds.target_names == std::vector<std::string>{"bench_a"});
}

TEST_CASE("duplicate system ids are rejected") {
    std::vector<SystemRecord> records = {sample_record("alpha", 0.25),
                                         sample_record("alpha", 0.5)};
    REQUIRE_THROWS_MATCHES(Dataset::from_records(records), Error,
                           Catch::Matchers::Predicate<Error>([](const Error& e) {
                               return e.kind() == ErrorKind::DuplicateSystem;
                           }));
}

TEST_CASE("record validation catches bad values") {
    SystemRecord rec = sample_record("alpha", 0.25);
    REQUIRE_NOTHROW(validate_record(rec));

    SystemRecord no_id = rec;
    no_id.system_id.clear();
    REQUIRE_THROWS_AS(validate_record(no_id), Error);

    SystemRecord bad_loop = rec;
    bad_loop.compound.loop31 = 0.0;
    REQUIRE_THROWS_MATCHES(validate_record(bad_loop), Error,
                           Catch::Matchers::Predicate<Error>([](const Error& e) {
                               return e.kind() == ErrorKind::NonPositiveScore;
                           }));

    SystemRecord missing = rec;
    missing.compound.values.erase(CompoundName::C_Fm);
    REQUIRE_THROWS_MATCHES(validate_record(missing), Error,
                           Catch::Matchers::Predicate<Error>([](const Error& e) {
                               return e.kind() == ErrorKind::MissingConfig;
                           }));

    SystemRecord zero_unflagged = rec;
    zero_unflagged.compound.values[CompoundName::C_Ia] = 0.0;
    REQUIRE_THROWS_AS(validate_record(zero_unflagged), Error);
    zero_unflagged.suspect_flags.insert(CompoundName::C_Ia);
    REQUIRE_NOTHROW(validate_record(zero_unflagged));

    SystemRecord bad_target = rec;
    bad_target.targets["bench_a"] = 0.0;
    REQUIRE_THROWS_AS(validate_record(bad_target), Error);
}

TEST_CASE("two systems in one raw file stay separate") {
    auto costs = example_costs();
    std::string csv = raw_csv_for("beta", 0.3, costs, {{"bench_a", 4.0}});
    csv += raw_csv_for("alpha", 0.6, costs, {{"bench_a", 8.0}}, false);
    std::istringstream in(csv);
    auto records = ingest_csv_stream(in);
    REQUIRE(records.size() == 2);
    // Stream ingest preserves appearance order; Dataset sorts later.
    REQUIRE(records[0].system_id == "beta");
    REQUIRE_THAT(records[0].compound.loop31, Catch::Matchers::WithinRel(0.3, 1e-12));
    REQUIRE_THAT(records[1].compound.loop31, Catch::Matchers::WithinRel(0.6, 1e-12));
}
