#pragma once

#include <openssl/evp.h>

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "rost/artifacts.hpp"
#include "rost/disorder.hpp"
#include "rost/executor.hpp"
#include "rost/float_io.hpp"
#include "rost/gibbs/ensemble.hpp"
#include "rost/gibbs/free_energy.hpp"
#include "rost/harness/config.hpp"
#include "rost/lattice.hpp"
#include "rost/metastate.hpp"
#include "rost/overlap.hpp"
#include "rost/report.hpp"
#include "rost/rost_analysis.hpp"
#include "rost/stability.hpp"

namespace rost::harness {

namespace fs = std::filesystem;

inline std::string digest_hex(const EVP_MD* md, const std::string& bytes) {
    unsigned char out[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    require(EVP_Digest(bytes.data(), bytes.size(), out, &len, md, nullptr) == 1, "hash-failure", "digest failed");
    std::ostringstream os;
    for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(out[i]);
    return os.str();
}

inline std::string config_hash(const RunConfig& c) { return digest_hex(EVP_sha256(), canonical_json(c).dump()); }

inline std::string read_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    require(static_cast<bool>(is), "io-error", "cannot read " + path);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

// git blob id ("blob <size>\0" + bytes) over the canonical config followed by
// the bytes of every input file it names.
inline std::string content_id(const RunConfig& c) {
    std::string bytes = canonical_json(c).dump();
    for (const auto& path : {c.matrix, c.atoms})
        if (!path.empty() && fs::is_regular_file(path)) bytes += read_file(path);
    std::string blob = "blob " + std::to_string(bytes.size());
    blob.push_back('\0');
    return digest_hex(EVP_sha1(), blob + bytes);
}

struct ResultRecord {
    int schema_version = kReportSchemaVersion;
    std::string experiment;
    std::string config_hash;
    std::string content_id;
    std::vector<Report> reports;
    double wall_seconds = 0.0;
    std::size_t tasks = 0;
    std::size_t threads = 1;
    std::string verdict;
};

inline nlohmann::json to_json(const ResultRecord& r) {
    nlohmann::json reports = nlohmann::json::array();
    for (const auto& x : r.reports) reports.push_back(rost::to_json(x));
    return {{"schema_version", r.schema_version}, {"experiment", r.experiment}, {"config_hash", r.config_hash},
            {"content_id", r.content_id},         {"reports", reports},         {"wall_seconds", r.wall_seconds},
            {"tasks", r.tasks},                   {"threads", r.threads},       {"verdict", r.verdict}};
}

inline ResultRecord record_from_json(const nlohmann::json& j) {
    ResultRecord r;
    r.schema_version = j.at("schema_version").get<int>();
    require(r.schema_version == kReportSchemaVersion, "schema-mismatch", "unsupported result schema version");
    r.experiment = j.at("experiment").get<std::string>();
    r.config_hash = j.at("config_hash").get<std::string>();
    r.content_id = j.at("content_id").get<std::string>();
    for (const auto& x : j.at("reports")) r.reports.push_back(report_from_json(x));
    r.wall_seconds = j.at("wall_seconds").get<double>();
    r.tasks = j.at("tasks").get<std::size_t>();
    r.threads = j.at("threads").get<std::size_t>();
    r.verdict = j.at("verdict").get<std::string>();
    return r;
}

inline bool record_passed(const ResultRecord& r) { return r.verdict == "exact-pass" || r.verdict == "statistical-pass"; }

inline constexpr const char* kIncompleteMarker = "INCOMPLETE";
inline constexpr const char* kResultFile = "result.json";

inline void write_text(const fs::path& p, const std::string& text) {
    fs::create_directories(p.parent_path());
    std::ofstream os(p, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(os), "io-error", "cannot write " + p.string());
    os << text;
    require(static_cast<bool>(os), "io-error", "write failed for " + p.string());
}

// Writes report files for `format` ("json", "csv" or "all") and returns
// their paths.
inline std::vector<fs::path> emit_report(const ResultRecord& r, const std::string& format, const fs::path& dir) {
    require(format == "json" || format == "csv" || format == "all", "unknown-format",
            "format must be json, csv or all, got '" + format + "'");
    require(!r.reports.empty(), "incomplete-record", "record carries no report");
    std::vector<fs::path> out;
    if (format == "json" || format == "all") {
        const nlohmann::json j = r.reports.size() == 1 ? rost::to_json(r.reports.front()) : [&] {
            nlohmann::json a = nlohmann::json::array();
            for (const auto& x : r.reports) a.push_back(rost::to_json(x));
            return a;
        }();
        write_text(dir / "report.json", j.dump(2) + "\n");
        out.push_back(dir / "report.json");
    }
    if (format == "csv" || format == "all") {
        std::string csv = std::string(kCsvHeader) + "\n";
        for (const auto& x : r.reports) csv += to_csv(x, false);
        write_text(dir / "report.csv", csv);
        out.push_back(dir / "report.csv");
    }
    if (format == "all") {
        std::string text = "experiment " + r.experiment + "\nconfig " + r.config_hash + "\nverdict " + r.verdict + "\n\n";
        for (const auto& x : r.reports) text += summary_text(x);
        write_text(dir / "summary.txt", text);
        out.push_back(dir / "summary.txt");
    }
    return out;
}

inline void persist_artifacts(const Artifacts& a, const fs::path& dir) {
    for (const auto& set : a.couplings) {
        const fs::path stem = dir / "couplings" / set.name;
        fs::create_directories(stem.parent_path());
        if (set.fields.size() == 1) {
            save_couplings(set.fields.front(), stem.string());
            continue;
        }
        // Stacked draws: one float file, one sidecar listing every seed.
        std::vector<double> all;
        nlohmann::json seeds = nlohmann::json::array();
        for (const auto& f : set.fields) {
            all.insert(all.end(), f.values.begin(), f.values.end());
            seeds.push_back(f.seed);
        }
        write_float64_file(stem.string() + ".f64", all);
        nlohmann::json meta = set.fields.empty() ? nlohmann::json::object() : coupling_sidecar(set.fields.front());
        meta.erase("seed");
        meta["draws"] = set.fields.size();
        meta["seeds"] = seeds;
        write_text(stem.string() + ".json", meta.dump(2) + "\n");
    }
    for (const auto& [name, ens] : a.ensembles) {
        const fs::path p = dir / "ensembles" / (name + ".rens");
        fs::create_directories(p.parent_path());
        save_ensemble(ens, p.string());
    }
    for (const auto& [name, m] : a.matrices) {
        const fs::path stem = dir / "matrices" / name;
        fs::create_directories(stem.parent_path());
        save_overlap_csv(m, stem.string() + ".csv");
        save_overlap_binary(m, stem.string() + ".f64");
    }
    for (const auto& [name, doc] : a.documents) write_text(dir / (name + ".json"), doc.dump(2) + "\n");
}

inline Report free_energy_report(const Lattice& lat, const Window& win, const RunConfig& c, const Executor& exec,
                                 Artifacts* artifacts) {
    const auto dist = resolved_distribution(c);
    const double beta_w = resolved_beta_w(c);
    const auto res = window_free_energy(lat, win, dist, c.beta, beta_w, c.draws, c.seed, exec, c.n_se);
    Report r;
    r.test = "free-energy";
    r.parameters = {{"lattice", lat}, {"window", win}, {"beta", c.beta}, {"beta_w", beta_w}, {"draws", c.draws},
                    {"seed", c.seed}, {"sites", res.sites}, {"boundary_edges", res.boundary_edges}};
    r.measure("window", "f_lambda_w", res.f_lambda_w, res.f_lambda_w_se);
    r.measure("window", "f_w", res.f_w, res.f_w_se);
    r.measure("window", "gap", res.gap, res.gap_se);
    r.measure("window", "bound", res.bound, 0.0);
    r.checks.push_back({"gap-non-negative", res.lower_holds, true, res.gap, -c.n_se * res.gap_se,
                        "f_{Lambda,W} - f_W >= -n_se standard errors"});
    r.checks.push_back({"gap-below-bound", res.upper_holds, true, res.gap, res.bound + c.n_se * res.gap_se,
                        "f_{Lambda,W} - f_W <= (beta_W^2/2)|dW|/|W| + n_se standard errors"});
    if (artifacts) {
        Artifacts::CouplingSet set{"couplings", {}};
        for (std::size_t i = 0; i < c.draws; ++i)
            set.fields.push_back(sample_couplings(lat, dist, derive_seed(c.seed, "disorder", i)));
        artifacts->couplings.push_back(std::move(set));
    }
    r.finalize();
    return r;
}

inline Report factorize_report(const RunConfig& c, Artifacts* artifacts) {
    const Eigen::MatrixXd a = load_matrix_csv(c.matrix);
    Report r;
    r.test = "factorize";
    r.parameters = {{"matrix", fs::path(c.matrix).filename().string()}, {"size", a.rows()}, {"tol", c.tol},
                    {"congruence_tol", c.congruence_tol}, {"weights", c.weights}};
    SamplingAtoms atoms;
    Eigen::MatrixXd target = a;
    if (c.weights.empty()) {
        const auto g = gram_factorize(a, c.tol);
        atoms.dim = static_cast<std::size_t>(g.vectors.cols());
        for (Eigen::Index i = 0; i < g.vectors.rows(); ++i) {
            std::vector<double> v(atoms.dim);
            for (std::size_t k = 0; k < atoms.dim; ++k) v[k] = g.vectors(i, static_cast<Eigen::Index>(k));
            atoms.atoms.push_back({1.0 / static_cast<double>(a.rows()), std::move(v)});
        }
    } else {
        auto col = congruence_collapse(c.weights, a, c.congruence_tol);
        r.measure("collapse", "classes", static_cast<double>(col.classes.size()), 0.0);
        target = col.collapsed;
        atoms = std::move(col.atoms);
    }
    const Eigen::MatrixXd v = atoms.vectors();
    const double err = atoms.dim ? (v * v.transpose() - target).cwiseAbs().maxCoeff() : target.cwiseAbs().maxCoeff();
    const auto rank = effective_rank(target, c.tol);
    r.measure("gram", "rank", static_cast<double>(rank.rank), 0.0);
    r.measure("gram", "min-eigenvalue", rank.spectrum.back(), 0.0);
    r.measure("gram", "max-reconstruction-error", err, 0.0);
    r.checks.push_back({"reconstruction", err <= 1e-8, true, err, 1e-8, "max |v_i . v_j - A_ij|", true});
    if (rank.spectrum.back() < 0.0) r.flag("clipped-negative-eigenvalues");
    if (artifacts) artifacts->documents.emplace_back("atoms", rost::to_json(atoms));
    r.finalize();
    return r;
}

struct ExperimentOutput {
    Report report;
    Artifacts artifacts;
    std::size_t tasks = 0;
};

inline ExperimentOutput execute(const RunConfig& c, const Executor& exec) {
    ExperimentOutput out;
    const auto& x = c.experiment;
    const auto vols = resolved_volumes(c);
    const int d = static_cast<int>(c.d);
    const VerdictRule rule{c.exact_tol, c.n_se};
    Artifacts* art = &out.artifacts;
    if (x == "covariance") {
        const Lattice lat(d, vols.front());
        const Window win = resolved_window(c, vols.front());
        const auto betas = c.betas.empty() ? std::vector<double>{c.beta} : c.betas;
        if (c.deltas.empty()) {
            out.report = covariance_identity_suite(lat, win, resolved_distribution(c), betas, c.perturbations, c.seed,
                                                   c.s, exec, rule, art);
            out.tasks = betas.size() * c.perturbations;
        } else {
            const auto J = sample_couplings(lat, resolved_distribution(c), derive_seed(c.seed, "disorder", 0));
            art->couplings.push_back({"couplings", {J}});
            Report r;
            r.test = "covariance";
            r.parameters = {{"lattice", lat}, {"window", win}, {"betas", betas}, {"deltas", c.deltas},
                            {"s", c.s},       {"seed", c.seed}};
            if (!J.distribution.continuous()) r.flag(kDiscreteCouplingsFlag);
            double worst = 0.0;
            for (double b : betas)
                worst = std::max(worst, covariance_rows(r, "beta=" + rost::detail::csv_number(b), lat, J, b, win,
                                                        Perturbation{win, c.deltas}, c.s, rule));
            r.checks.push_back({"max-difference", worst <= rule.exact_tol, true, worst, rule.exact_tol, "", true});
            r.finalize();
            out.report = std::move(r);
            out.tasks = betas.size();
        }
    } else if (x == "local-stability") {
        LocalStabilityOptions o;
        o.d = d;
        o.volumes = vols;
        o.window = resolved_window(c, vols.front());
        o.deltas = c.deltas;
        o.dist = resolved_distribution(c);
        o.beta = c.beta;
        o.draws = c.draws;
        o.s = c.s;
        o.ensemble_size = c.ensemble_size;
        o.sampler = resolved_sampler(c);
        o.seed = c.seed;
        o.rule = rule;
        out.report = local_stability_test(o, exec, art);
        out.tasks = vols.size() * c.draws;
    } else if (x == "stochastic-stability") {
        const auto mu = sampling_atoms_from_json(nlohmann::json::parse(read_file(c.atoms)));
        StochasticStabilityOptions o;
        o.lambda = c.lambda;
        o.function = c.function;
        o.draws = c.field_draws;
        o.seed = c.seed;
        o.rule = rule;
        out.report = stochastic_stability_test(mu, o, exec);
        out.tasks = (o.draws + o.chunk - 1) / o.chunk;
    } else if (x == "beta-shift") {
        const Lattice lat(d, vols.front());
        BetaShiftOptions o;
        o.window = resolved_window(c, vols.front());
        o.dist = resolved_distribution(c);
        o.beta = c.beta;
        o.lambda = c.lambda;
        o.draws = c.draws;
        o.s = c.s;
        o.seed = c.seed;
        o.rule = rule;
        out.report = beta_shift_identity_test(lat, o, exec, art);
        out.tasks = c.draws;
    } else if (x == "metastate-sweep") {
        SweepOptions o;
        o.d = d;
        o.volumes = vols;
        o.window = resolved_window(c, vols.front());
        o.dist = resolved_distribution(c);
        o.beta = c.beta;
        o.s = c.s;
        o.ensemble_size = c.ensemble_size;
        o.sampler = resolved_sampler(c);
        o.seed = c.seed;
        out.report = metastate_sweep(o, exec, art);
        out.tasks = vols.size();
    } else if (x == "j-independence") {
        JIndependenceOptions o;
        o.d = d;
        o.volumes = vols;
        o.window = resolved_window(c, vols.front());
        o.dist = resolved_distribution(c);
        o.beta = c.beta;
        o.draws = c.draws;
        o.ensemble_size = c.ensemble_size;
        o.sampler = resolved_sampler(c);
        o.seed = c.seed;
        o.alpha = c.alpha;
        out.report = j_independence_test(o, exec, art);
        out.tasks = vols.size() * c.draws;
    } else if (x == "sk-equivalence") {
        SkEquivalenceOptions o;
        o.sizes = c.sizes;
        o.beta = c.beta;
        o.function = c.function;
        o.draws = c.draws;
        o.dist = resolved_distribution(c);
        o.seed = c.seed;
        o.slope_min = c.slope_min;
        o.slope_max = c.slope_max;
        o.rule = rule;
        out.report = sk_equivalence_test(o, exec, art);
        out.tasks = c.sizes.size() * c.draws;
    } else if (x == "free-energy") {
        const Lattice lat(d, vols.front());
        out.report = free_energy_report(lat, resolved_window(c, vols.front()), c, exec, art);
        out.tasks = c.draws;
    } else if (x == "factorize") {
        out.report = factorize_report(c, art);
        out.tasks = 1;
    } else {
        throw Error("unknown-experiment", x);
    }
    return out;
}

inline fs::path resolved_output_dir(const RunConfig& c) {
    if (!c.output_dir.empty()) return c.output_dir;
    return fs::path(default_output_root()) / (c.experiment + "-" + config_hash(c).substr(0, 12));
}

// A run directory is complete when result.json exists and no INCOMPLETE
// marker is left.
inline bool run_complete(const fs::path& dir) {
    return fs::is_regular_file(dir / kResultFile) && !fs::exists(dir / kIncompleteMarker);
}

// Validates, runs and persists one experiment. Nothing is written when the
// config is invalid; while the run is in progress the directory carries an
// INCOMPLETE marker, removed only after result.json is in place.
inline ResultRecord run_experiment(const RunConfig& c) {
    validate(c);
    const fs::path dir = resolved_output_dir(c);
    const auto start = std::chrono::steady_clock::now();
    fs::create_directories(dir);
    write_text(dir / kIncompleteMarker, config_hash(c) + "\n");
    fs::remove(dir / kResultFile);
    write_text(dir / "config.toml", toml_text(c));

    const Executor exec(static_cast<unsigned>(c.threads));
    auto out = execute(c, exec);
    persist_artifacts(out.artifacts, dir);

    ResultRecord rec;
    rec.experiment = c.experiment;
    rec.config_hash = config_hash(c);
    rec.content_id = content_id(c);
    rec.reports.push_back(std::move(out.report));
    rec.tasks = out.tasks;
    rec.threads = c.threads;
    rec.verdict = rec.reports.front().verdict;
    emit_report(rec, c.format, dir);
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    const fs::path tmp = dir / (std::string(kResultFile) + ".tmp");
    write_text(tmp, to_json(rec).dump(2) + "\n");
    fs::rename(tmp, dir / kResultFile);
    fs::remove(dir / kIncompleteMarker);
    return rec;
}

inline ResultRecord load_result(const fs::path& dir) {
    require(run_complete(dir), "incomplete-run", dir.string() + " does not hold a complete run");
    return record_from_json(nlohmann::json::parse(read_file((dir / kResultFile).string())));
}

}  // namespace rost::harness
