#pragma once

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "scorebreak/compound.hpp"
#include "scorebreak/detail/csv.hpp"
#include "scorebreak/detail/format.hpp"
#include "scorebreak/errors.hpp"
#include "scorebreak/linalg.hpp"
#include "scorebreak/microbench.hpp"

// Cross-system score records and their assembly into the regression design
// matrix. Two file forms are understood, auto-detected by header:
//
//   raw:  system_id,kind,name,k,n,trial_index,seconds
//         one row per trial; kind is micro or target; k and n stay empty on
//         target rows. Trials are summarized and compounds evaluated during
//         ingest.
//   wide: system_id,loop31,C_Ia,...,C_Fsl,<target...>[,suspect_flags]
//         one row per system, already summarized. A negative compound cell is
//         only legal when its name appears in the row's suspect_flags cell
//         (semicolon separated); it is then clamped to zero, mirroring what
//         the compound stage does to non-positive deltas.
//
// Lines starting with '#' are comments, except `# meta <system> <key>=<value>`
// which attaches free-form metadata to a system. records.json carries the
// same content losslessly (including the plan shift, which the wide CSV
// cannot express).

namespace scorebreak {

inline const std::vector<std::string>& regressor_names() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> v{"loop31"};
        for (CompoundName n : kAllCompoundNames) v.push_back(compound_name_str(n));
        return v;
    }();
    return names;
}

struct SystemRecord {
    std::string system_id;
    std::map<std::string, std::string> metadata;
    CompoundScores compound;
    std::map<std::string, double> targets;
    std::set<CompoundName> suspect_flags;

    /// Regressors in canonical order: loop31 first, then the 11 compounds.
    Vector regressor_vector() const {
        Vector v;
        v.reserve(1 + kAllCompoundNames.size());
        v.push_back(compound.loop31);
        for (CompoundName n : kAllCompoundNames) {
            auto it = compound.values.find(n);
            if (it == compound.values.end())
                throw Error(ErrorKind::MissingConfig,
                            system_id + " lacks compound " + compound_name_str(n));
            v.push_back(it->second);
        }
        return v;
    }
};

inline void validate_record(const SystemRecord& rec) {
    if (rec.system_id.empty())
        throw Error(ErrorKind::SchemaError, "record with empty system_id");
    if (!(rec.compound.loop31 > 0.0))
        throw Error(ErrorKind::NonPositiveScore, rec.system_id + ": loop31 must be positive");
    if (!rec.compound.complete())
        throw Error(ErrorKind::MissingConfig, rec.system_id + ": compound scores incomplete");
    for (const auto& [name, value] : rec.compound.values) {
        if (value < 0.0)
            throw Error(ErrorKind::NonPositiveScore,
                        rec.system_id + ": " + compound_name_str(name) + " is negative");
        if (value == 0.0 && !rec.suspect_flags.count(name))
            throw Error(ErrorKind::NonPositiveScore,
                        rec.system_id + ": " + compound_name_str(name) +
                            " is zero but not flagged suspect");
    }
    for (const auto& [target, score] : rec.targets)
        if (!(score > 0.0))
            throw Error(ErrorKind::NonPositiveScore,
                        rec.system_id + ": target " + target + " must be positive");
}

/// Records sorted by system_id plus the N x 12 design matrix over them.
/// target_names lists only targets present on every record; partial targets
/// stay on the records but cannot be fitted.
struct Dataset {
    std::vector<SystemRecord> records;
    Matrix design;
    std::vector<std::string> target_names;

    static Dataset from_records(std::vector<SystemRecord> recs) {
        if (recs.empty())
            throw Error(ErrorKind::ConfigInvalid, "dataset needs at least one record");
        std::sort(recs.begin(), recs.end(),
                  [](const SystemRecord& a, const SystemRecord& b) {
                      return a.system_id < b.system_id;
                  });
        for (std::size_t i = 0; i + 1 < recs.size(); ++i)
            if (recs[i].system_id == recs[i + 1].system_id)
                throw Error(ErrorKind::DuplicateSystem, recs[i].system_id);
        for (const SystemRecord& r : recs) validate_record(r);

        Dataset ds;
        ds.design = Matrix(recs.size(), regressor_names().size());
        for (std::size_t i = 0; i < recs.size(); ++i) {
            Vector row = recs[i].regressor_vector();
            for (std::size_t j = 0; j < row.size(); ++j) ds.design(i, j) = row[j];
        }
        std::map<std::string, std::size_t> target_count;
        for (const SystemRecord& r : recs)
            for (const auto& [t, _] : r.targets) ++target_count[t];
        for (const auto& [t, c] : target_count)
            if (c == recs.size()) ds.target_names.push_back(t);
        ds.records = std::move(recs);
        return ds;
    }
};

struct AssembledRegression {
    Matrix design;
    Vector y;
    std::vector<std::string> names;       // column names, canonical order
    std::vector<std::string> system_ids;  // row order
};

/// Design matrix and response for one target, rows sorted by system_id.
inline AssembledRegression assemble(const std::vector<SystemRecord>& records,
                                    const std::string& target) {
    if (records.empty())
        throw Error(ErrorKind::ConfigInvalid, "assemble needs at least one record");
    std::vector<const SystemRecord*> sorted;
    sorted.reserve(records.size());
    for (const SystemRecord& r : records) sorted.push_back(&r);
    std::sort(sorted.begin(), sorted.end(), [](const SystemRecord* a, const SystemRecord* b) {
        return a->system_id < b->system_id;
    });

    AssembledRegression out;
    out.names = regressor_names();
    out.design = Matrix(sorted.size(), out.names.size());
    out.y.resize(sorted.size());
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        auto it = sorted[i]->targets.find(target);
        if (it == sorted[i]->targets.end())
            throw Error(ErrorKind::MissingTarget, sorted[i]->system_id + " lacks " + target);
        Vector row = sorted[i]->regressor_vector();
        for (std::size_t j = 0; j < row.size(); ++j) out.design(i, j) = row[j];
        out.y[i] = it->second;
        out.system_ids.push_back(sorted[i]->system_id);
    }
    return out;
}

// --- CSV ingest ------------------------------------------------------------

namespace detail {

inline double parse_cell_double(const std::string& cell, std::size_t line, std::size_t col) {
    const std::string t = trim(cell);
    if (t.empty())
        throw Error(ErrorKind::SchemaError,
                    "line " + std::to_string(line) + ", column " + std::to_string(col) +
                        ": empty numeric cell");
    char* end = nullptr;
    double v = std::strtod(t.c_str(), &end);
    if (end != t.c_str() + t.size())
        throw Error(ErrorKind::SchemaError, "line " + std::to_string(line) + ", column " +
                                                std::to_string(col) + ": bad number '" + t + "'");
    return v;
}

inline unsigned parse_cell_uint(const std::string& cell, std::size_t line, std::size_t col) {
    const std::string t = trim(cell);
    char* end = nullptr;
    long v = std::strtol(t.c_str(), &end, 10);
    if (t.empty() || end != t.c_str() + t.size() || v < 0)
        throw Error(ErrorKind::SchemaError, "line " + std::to_string(line) + ", column " +
                                                std::to_string(col) + ": bad count '" + t + "'");
    return static_cast<unsigned>(v);
}

struct MetaLine {
    std::string system_id;
    std::string key;
    std::string value;
};

inline std::optional<MetaLine> parse_meta(const std::string& line, std::size_t lineno) {
    // "# meta <system> <key>=<value>"; other comments return nullopt.
    std::istringstream in(line);
    std::string hash, word;
    in >> hash >> word;
    if (word != "meta") return std::nullopt;
    MetaLine m;
    if (!(in >> m.system_id))
        throw Error(ErrorKind::SchemaError,
                    "line " + std::to_string(lineno) + ": meta line without system id");
    std::string rest;
    std::getline(in, rest);
    rest = trim(rest);
    std::size_t eq = rest.find('=');
    if (eq == std::string::npos || eq == 0)
        throw Error(ErrorKind::SchemaError,
                    "line " + std::to_string(lineno) + ": meta line needs key=value");
    m.key = rest.substr(0, eq);
    m.value = rest.substr(eq + 1);
    return m;
}

inline std::vector<SystemRecord> ingest_wide(const std::vector<std::string>& header,
                                             std::istream& in, std::size_t lineno_base,
                                             const std::vector<MetaLine>& pre_meta) {
    const auto& regs = regressor_names();
    for (std::size_t j = 0; j < regs.size(); ++j)
        if (header.size() <= 1 + j || trim(header[1 + j]) != regs[j])
            throw Error(ErrorKind::SchemaError,
                        "wide header column " + std::to_string(j + 2) + " must be " + regs[j]);
    bool has_flags = !header.empty() && trim(header.back()) == "suspect_flags";
    std::vector<std::string> target_cols;
    for (std::size_t j = 1 + regs.size(); j + (has_flags ? 1 : 0) < header.size(); ++j) {
        std::string t = trim(header[j]);
        if (t.empty())
            throw Error(ErrorKind::SchemaError,
                        "wide header has an empty target column name");
        target_cols.push_back(t);
    }

    std::vector<SystemRecord> records;
    std::vector<MetaLine> meta = pre_meta;
    std::string line;
    std::size_t lineno = lineno_base;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty()) continue;
        if (t[0] == '#') {
            if (auto m = parse_meta(t, lineno)) meta.push_back(*m);
            continue;
        }
        auto cells = split_csv(t);
        if (cells.size() != header.size())
            throw Error(ErrorKind::SchemaError,
                        "line " + std::to_string(lineno) + ": expected " +
                            std::to_string(header.size()) + " cells, got " +
                            std::to_string(cells.size()));
        SystemRecord rec;
        rec.system_id = trim(cells[0]);
        if (rec.system_id.empty())
            throw Error(ErrorKind::SchemaError,
                        "line " + std::to_string(lineno) + ": empty system_id");
        if (has_flags) {
            std::istringstream fl(trim(cells.back()));
            std::string name;
            while (std::getline(fl, name, ';')) {
                name = trim(name);
                if (name.empty()) continue;
                auto cn = compound_name_from_str(name);
                if (!cn)
                    throw Error(ErrorKind::SchemaError, "line " + std::to_string(lineno) +
                                                            ": unknown suspect flag '" + name +
                                                            "'");
                rec.suspect_flags.insert(*cn);
            }
        }
        rec.compound.loop31 = parse_cell_double(cells[1], lineno, 2);
        if (!(rec.compound.loop31 > 0.0))
            throw Error(ErrorKind::NonPositiveScore,
                        "line " + std::to_string(lineno) + ": loop31 must be positive");
        for (std::size_t j = 0; j < kAllCompoundNames.size(); ++j) {
            CompoundName name = kAllCompoundNames[j];
            double v = parse_cell_double(cells[2 + j], lineno, 3 + j);
            if (v < 0.0) {
                if (!rec.suspect_flags.count(name))
                    throw Error(ErrorKind::NonPositiveScore,
                                "line " + std::to_string(lineno) + ": " +
                                    compound_name_str(name) +
                                    " is negative and not flagged suspect");
                v = 0.0;  // flagged: same clamp the compound stage applies
            }
            if (v == 0.0) rec.suspect_flags.insert(name);
            rec.compound.values[name] = v;
        }
        for (std::size_t j = 0; j < target_cols.size(); ++j) {
            double v = parse_cell_double(cells[1 + regs.size() + j], lineno,
                                         2 + regs.size() + j);
            if (!(v > 0.0))
                throw Error(ErrorKind::NonPositiveScore,
                            "line " + std::to_string(lineno) + ": target " + target_cols[j] +
                                " must be positive");
            rec.targets[target_cols[j]] = v;
        }
        records.push_back(std::move(rec));
    }
    for (const MetaLine& m : meta) {
        for (SystemRecord& r : records)
            if (r.system_id == m.system_id) r.metadata[m.key] = m.value;
    }
    return records;
}

inline std::vector<SystemRecord> ingest_raw(const std::vector<std::string>& header,
                                            std::istream& in, std::size_t lineno_base,
                                            const std::vector<MetaLine>& pre_meta,
                                            TrialSummarizer summarizer,
                                            NonPositivePolicy policy) {
    static const char* expect[] = {"system_id", "kind", "name", "k",
                                   "n",         "trial_index", "seconds"};
    if (header.size() != 7)
        throw Error(ErrorKind::SchemaError, "raw header must have 7 columns");
    for (std::size_t j = 0; j < 7; ++j)
        if (trim(header[j]) != expect[j])
            throw Error(ErrorKind::SchemaError, "raw header column " + std::to_string(j + 1) +
                                                    " must be " + expect[j]);

    struct PerSystem {
        std::map<std::tuple<KernelKind, unsigned, unsigned>, std::vector<double>> micro;
        std::map<std::string, std::vector<double>> targets;
    };
    std::map<std::string, PerSystem> systems;
    std::vector<std::string> order;  // first-appearance order, for error locality
    std::vector<MetaLine> meta = pre_meta;

    std::string line;
    std::size_t lineno = lineno_base;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty()) continue;
        if (t[0] == '#') {
            if (auto m = parse_meta(t, lineno)) meta.push_back(*m);
            continue;
        }
        auto cells = split_csv(t);
        if (cells.size() != 7)
            throw Error(ErrorKind::SchemaError,
                        "line " + std::to_string(lineno) + ": expected 7 cells, got " +
                            std::to_string(cells.size()));
        std::string sys = trim(cells[0]);
        std::string kind = trim(cells[1]);
        std::string name = trim(cells[2]);
        if (sys.empty() || name.empty())
            throw Error(ErrorKind::SchemaError,
                        "line " + std::to_string(lineno) + ": empty system_id or name");
        double seconds = parse_cell_double(cells[6], lineno, 7);
        if (!(seconds > 0.0))
            throw Error(ErrorKind::NonPositiveScore,
                        "line " + std::to_string(lineno) + ": seconds must be positive");
        if (!systems.count(sys)) order.push_back(sys);
        PerSystem& ps = systems[sys];
        if (kind == "micro") {
            auto kk = kernel_kind_from_name(name);
            if (!kk)
                throw Error(ErrorKind::SchemaError, "line " + std::to_string(lineno) +
                                                        ": unknown kernel '" + name + "'");
            unsigned k = trim(cells[3]).empty() ? 0 : parse_cell_uint(cells[3], lineno, 4);
            unsigned n = parse_cell_uint(cells[4], lineno, 5);
            KernelConfig cfg{*kk, k, n};
            try {
                cfg.validate();
            } catch (const Error& e) {
                throw Error(ErrorKind::SchemaError,
                            "line " + std::to_string(lineno) + ": " + e.detail());
            }
            ps.micro[{*kk, k, n}].push_back(seconds);
        } else if (kind == "target") {
            if (!trim(cells[3]).empty() || !trim(cells[4]).empty())
                throw Error(ErrorKind::SchemaError,
                            "line " + std::to_string(lineno) + ": target rows leave k,n empty");
            ps.targets[name].push_back(seconds);
        } else {
            throw Error(ErrorKind::SchemaError, "line " + std::to_string(lineno) +
                                                    ": kind must be micro or target, got '" +
                                                    kind + "'");
        }
    }

    std::vector<SystemRecord> records;
    for (const std::string& sys : order) {
        const PerSystem& ps = systems[sys];
        std::vector<MicrobenchResult> suite;
        for (const auto& [key, trials] : ps.micro) {
            MicrobenchResult r;
            r.config = {std::get<0>(key), std::get<1>(key), std::get<2>(key)};
            r.trials = trials;
            r.clock_source = "csv";
            suite.push_back(std::move(r));
        }
        CompoundOutcome out;
        try {
            out = compound_all(suite, summarizer, policy);
        } catch (const Error& e) {
            throw Error::wrap(e, sys);
        }
        SystemRecord rec;
        rec.system_id = sys;
        rec.compound = out.scores;
        rec.suspect_flags = out.suspects;
        for (const auto& [target, trials] : ps.targets) {
            double v = summarize_trials(trials, summarizer);
            if (!(v > 0.0))
                throw Error(ErrorKind::NonPositiveScore, sys + ": target " + target);
            rec.targets[target] = v;
        }
        records.push_back(std::move(rec));
    }
    for (const MetaLine& m : meta) {
        for (SystemRecord& r : records)
            if (r.system_id == m.system_id) r.metadata[m.key] = m.value;
    }
    return records;
}

}  // namespace detail

inline std::vector<SystemRecord> ingest_csv_stream(
    std::istream& in, TrialSummarizer summarizer = TrialSummarizer::Min,
    NonPositivePolicy policy = NonPositivePolicy::Strict) {
    std::string line;
    std::size_t lineno = 0;
    std::vector<detail::MetaLine> meta;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = detail::trim(line);
        if (t.empty()) continue;
        if (t[0] == '#') {
            if (auto m = detail::parse_meta(t, lineno)) meta.push_back(*m);
            continue;
        }
        auto header = detail::split_csv(t);
        if (header.size() >= 2 && detail::trim(header[0]) == "system_id" &&
            detail::trim(header[1]) == "kind")
            return detail::ingest_raw(header, in, lineno, meta, summarizer, policy);
        if (header.size() >= 2 && detail::trim(header[0]) == "system_id" &&
            detail::trim(header[1]) == "loop31")
            return detail::ingest_wide(header, in, lineno, meta);
        throw Error(ErrorKind::SchemaError,
                    "line " + std::to_string(lineno) + ": unrecognized header");
    }
    throw Error(ErrorKind::SchemaError, "file has no header row");
}

inline std::vector<SystemRecord> ingest_csv(const std::string& path,
                                            TrialSummarizer summarizer = TrialSummarizer::Min,
                                            NonPositivePolicy policy = NonPositivePolicy::Strict) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::IoError, "cannot open " + path);
    try {
        auto records = ingest_csv_stream(in, summarizer, policy);
        std::set<std::string> seen;
        for (const SystemRecord& r : records)
            if (!seen.insert(r.system_id).second)
                throw Error(ErrorKind::DuplicateSystem, r.system_id);
        for (const SystemRecord& r : records) validate_record(r);
        return records;
    } catch (const Error& e) {
        throw Error::wrap(e, path);
    }
}

// --- CSV export (canonical wide form) ---------------------------------------

inline std::string export_csv_string(const std::vector<SystemRecord>& records) {
    std::vector<const SystemRecord*> sorted;
    for (const SystemRecord& r : records) sorted.push_back(&r);
    std::sort(sorted.begin(), sorted.end(), [](const SystemRecord* a, const SystemRecord* b) {
        return a->system_id < b->system_id;
    });
    std::set<std::string> target_set;
    for (const SystemRecord* r : sorted)
        for (const auto& [t, _] : r->targets) target_set.insert(t);

    std::ostringstream out;
    for (const SystemRecord* r : sorted)
        for (const auto& [k, v] : r->metadata)
            out << "# meta " << r->system_id << " " << k << "=" << v << "\n";
    out << "system_id";
    for (const std::string& name : regressor_names()) out << "," << name;
    for (const std::string& t : target_set) out << "," << t;
    out << ",suspect_flags\n";
    for (const SystemRecord* r : sorted) {
        out << r->system_id;
        for (double v : r->regressor_vector()) out << "," << detail::format_double(v);
        for (const std::string& t : target_set) {
            auto it = r->targets.find(t);
            if (it == r->targets.end())
                throw Error(ErrorKind::MissingTarget, r->system_id + " lacks " + t);
            out << "," << detail::format_double(it->second);
        }
        out << ",";
        bool first = true;
        for (CompoundName n : r->suspect_flags) {
            if (!first) out << ";";
            out << compound_name_str(n);
            first = false;
        }
        out << "\n";
    }
    return out.str();
}

inline void export_csv(const std::vector<SystemRecord>& records, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::IoError, "cannot write " + path);
    out << export_csv_string(records);
}

// --- records.json ------------------------------------------------------------

inline nlohmann::json record_to_json(const SystemRecord& rec) {
    nlohmann::json j;
    j["system_id"] = rec.system_id;
    j["metadata"] = rec.metadata;
    j["plan_shift"] = rec.compound.plan_shift;
    j["loop31"] = rec.compound.loop31;
    nlohmann::json comp;
    for (const auto& [name, value] : rec.compound.values) comp[compound_name_str(name)] = value;
    j["compound"] = comp;
    j["targets"] = rec.targets;
    nlohmann::json flags = nlohmann::json::array();
    for (CompoundName n : rec.suspect_flags) flags.push_back(compound_name_str(n));
    j["suspect_flags"] = flags;
    return j;
}

inline SystemRecord record_from_json(const nlohmann::json& j) {
    SystemRecord rec;
    try {
        rec.system_id = j.at("system_id").get<std::string>();
        if (j.contains("metadata"))
            rec.metadata = j.at("metadata").get<std::map<std::string, std::string>>();
        rec.compound.plan_shift = j.value("plan_shift", 0);
        rec.compound.loop31 = j.at("loop31").get<double>();
        for (const auto& [key, value] : j.at("compound").items()) {
            auto cn = compound_name_from_str(key);
            if (!cn) throw Error(ErrorKind::SchemaError, "unknown compound '" + key + "'");
            rec.compound.values[*cn] = value.get<double>();
        }
        if (j.contains("targets"))
            rec.targets = j.at("targets").get<std::map<std::string, double>>();
        if (j.contains("suspect_flags"))
            for (const auto& name : j.at("suspect_flags")) {
                auto cn = compound_name_from_str(name.get<std::string>());
                if (!cn)
                    throw Error(ErrorKind::SchemaError,
                                "unknown suspect flag '" + name.get<std::string>() + "'");
                rec.suspect_flags.insert(*cn);
            }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::SchemaError, std::string("records.json: ") + e.what());
    }
    return rec;
}

inline nlohmann::json records_to_json(const std::vector<SystemRecord>& records) {
    nlohmann::json j;
    j["schema"] = 1;
    nlohmann::json arr = nlohmann::json::array();
    std::vector<const SystemRecord*> sorted;
    for (const SystemRecord& r : records) sorted.push_back(&r);
    std::sort(sorted.begin(), sorted.end(), [](const SystemRecord* a, const SystemRecord* b) {
        return a->system_id < b->system_id;
    });
    for (const SystemRecord* r : sorted) arr.push_back(record_to_json(*r));
    j["records"] = arr;
    return j;
}

inline std::vector<SystemRecord> records_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("schema") || j.at("schema") != 1)
        throw Error(ErrorKind::SchemaError, "records.json must declare \"schema\": 1");
    std::vector<SystemRecord> records;
    for (const auto& rj : j.at("records")) records.push_back(record_from_json(rj));
    std::set<std::string> seen;
    for (const SystemRecord& r : records) {
        if (!seen.insert(r.system_id).second) throw Error(ErrorKind::DuplicateSystem, r.system_id);
        validate_record(r);
    }
    return records;
}

inline void save_records(const std::vector<SystemRecord>& records, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::IoError, "cannot write " + path);
    out << records_to_json(records).dump(2) << "\n";
}

inline std::vector<SystemRecord> load_records(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::IoError, "cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::SchemaError, path + ": " + e.what());
    }
    try {
        return records_from_json(j);
    } catch (const Error& e) {
        throw Error::wrap(e, path);
    }
}

}  // namespace scorebreak
