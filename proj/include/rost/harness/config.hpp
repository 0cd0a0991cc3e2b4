#pragma once

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "toml.hpp"
#include "rost/disorder.hpp"
#include "rost/error.hpp"
#include "rost/gibbs/ensemble.hpp"
#include "rost/gibbs/exact.hpp"
#include "rost/lattice.hpp"
#include "rost/monomial.hpp"
#include "rost/report.hpp"
#include "rost/stability.hpp"

namespace rost::harness {

inline const std::vector<std::string>& experiment_kinds() {
    static const std::vector<std::string> kinds{"covariance",      "local-stability", "stochastic-stability",
                                                "beta-shift",      "metastate-sweep", "j-independence",
                                                "sk-equivalence",  "free-energy",     "factorize"};
    return kinds;
}

// Flat experiment configuration. Every key is both a TOML key and a CLI
// flag of the same name.
struct RunConfig {
    std::string experiment;
    std::uint64_t seed = 1;
    std::size_t threads = 1;
    std::string output_dir;
    std::int64_t schema_version = kReportSchemaVersion;
    std::string format = "all";

    std::int64_t d = 1;
    std::vector<int> sides;
    std::vector<std::vector<int>> volumes;  // empty: the single volume `sides`
    double beta = 0.5;
    std::vector<double> betas;  // covariance only; empty: {beta}
    double beta_w = -1.0;       // negative: same as beta
    double lambda = 0.5;
    std::string distribution = "gaussian";
    double scale = 1.0;
    std::vector<int> window_anchor;  // empty: origin
    std::vector<int> window_sides;   // empty: whole lattice

    std::vector<double> deltas;  // one per interior window edge
    std::size_t perturbations = 20;
    std::size_t s = 2;
    std::size_t ensemble_size = 64;
    std::size_t draws = 100;
    std::size_t field_draws = 100000;
    std::string sampler = "exact";
    std::size_t pilot_sweeps = 2000;
    std::size_t max_sweeps = 200000;
    double pt_beta_min = 0.1;
    std::size_t pt_max_rungs = 32;
    std::vector<std::size_t> sizes;  // SK N values
    std::string function = "q12^2";

    double exact_tol = 1e-10;
    double n_se = 3.0;
    double slope_min = -1.5;
    double slope_max = -0.6;
    double alpha = 0.01;

    std::string matrix;  // factorize: CSV overlap matrix
    std::vector<double> weights;
    std::string atoms;  // stochastic-stability: sampling measure JSON
    double tol = 1e-8;
    double congruence_tol = 1e-9;
};

// Seeds and counts share one alternative; they are the same type on LP64.
static_assert(std::is_same_v<std::size_t, std::uint64_t>);
using FieldRef = std::variant<double*, std::int64_t*, std::size_t*, std::string*, std::vector<int>*,
                              std::vector<double>*, std::vector<std::size_t>*, std::vector<std::vector<int>>*>;

struct Field {
    const char* key;
    FieldRef ref;
    const char* help;
};

inline std::vector<Field> fields(RunConfig& c) {
    return {
        {"experiment", &c.experiment, "experiment kind"},
        {"seed", &c.seed, "64-bit master seed"},
        {"threads", &c.threads, "worker threads (results do not depend on it)"},
        {"output_dir", &c.output_dir, "run directory"},
        {"schema_version", &c.schema_version, "report schema version"},
        {"format", &c.format, "report format: json, csv or all"},
        {"d", &c.d, "lattice dimension"},
        {"sides", &c.sides, "lattice side lengths"},
        {"volumes", &c.volumes, "lattice sequence, e.g. 8 12 or 4x4 6x6"},
        {"beta", &c.beta, "inverse temperature"},
        {"betas", &c.betas, "inverse temperatures (covariance)"},
        {"beta_w", &c.beta_w, "window inverse temperature (negative: beta)"},
        {"lambda", &c.lambda, "tilt strength"},
        {"distribution", &c.distribution, "coupling law: gaussian, uniform, rademacher"},
        {"scale", &c.scale, "standard deviation or half-width"},
        {"window_anchor", &c.window_anchor, "window anchor coordinates"},
        {"window_sides", &c.window_sides, "window side lengths"},
        {"deltas", &c.deltas, "perturbation per interior window edge"},
        {"perturbations", &c.perturbations, "random perturbations (covariance)"},
        {"s", &c.s, "replicas per moment"},
        {"ensemble_size", &c.ensemble_size, "replicas sampled per coupling draw"},
        {"draws", &c.draws, "disorder draws"},
        {"field_draws", &c.field_draws, "Gaussian field draws (stochastic-stability)"},
        {"sampler", &c.sampler, "exact, metropolis or parallel-tempering"},
        {"pilot_sweeps", &c.pilot_sweeps, "MCMC pilot sweeps"},
        {"max_sweeps", &c.max_sweeps, "MCMC burn-in budget"},
        {"pt_beta_min", &c.pt_beta_min, "lowest tempering inverse temperature"},
        {"pt_max_rungs", &c.pt_max_rungs, "largest tempering ladder"},
        {"sizes", &c.sizes, "SK sizes N"},
        {"function", &c.function, "overlap function, e.g. q12^2 or 1{q12=1}"},
        {"exact_tol", &c.exact_tol, "exact-pass threshold"},
        {"n_se", &c.n_se, "statistical-pass threshold in standard errors"},
        {"slope_min", &c.slope_min, "lower end of the SK slope band"},
        {"slope_max", &c.slope_max, "upper end of the SK slope band"},
        {"alpha", &c.alpha, "level of the J-independence null band"},
        {"matrix", &c.matrix, "overlap matrix CSV (factorize)"},
        {"weights", &c.weights, "pure-state weights (factorize)"},
        {"atoms", &c.atoms, "sampling measure JSON (stochastic-stability)"},
        {"tol", &c.tol, "Gram eigenvalue tolerance"},
        {"congruence_tol", &c.congruence_tol, "row-equality tolerance for congruence classes"},
    };
}

inline std::vector<int> parse_volume(const std::string& text) {
    std::vector<int> out;
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, 'x')) {
        std::size_t used = 0;
        int v = 0;
        try {
            v = std::stoi(part, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        require(used == part.size() && !part.empty(), "bad-volume", "cannot parse volume '" + text + "'");
        out.push_back(v);
    }
    return out;
}

inline std::string volume_text(const std::vector<int>& v) {
    std::string out;
    for (std::size_t k = 0; k < v.size(); ++k) out += (k ? "x" : "") + std::to_string(v[k]);
    return out;
}

namespace detail {

template <class T>
T toml_scalar(const toml::node& n, const std::string& key) {
    if constexpr (std::is_same_v<T, std::string>) {
        auto v = n.value<std::string>();
        require(v.has_value(), "bad-config-type", key + " must be a string");
        return *v;
    } else if constexpr (std::is_floating_point_v<T>) {
        auto v = n.value<double>();
        require(v.has_value(), "bad-config-type", key + " must be a number");
        return *v;
    } else {
        auto v = n.value<std::int64_t>();
        // The seed is written as its two's-complement int64 and read back the same way.
        if constexpr (std::is_same_v<T, std::uint64_t>)
            if (key == "seed" && v) return static_cast<T>(*v);
        require(v.has_value() && (std::is_signed_v<T> || *v >= 0), "bad-config-type",
                key + " must be a" + std::string(std::is_signed_v<T> ? "n" : " non-negative") + " integer");
        return static_cast<T>(*v);
    }
}

template <class T>
std::vector<T> toml_list(const toml::node& n, const std::string& key) {
    const auto* arr = n.as_array();
    require(arr != nullptr, "bad-config-type", key + " must be an array");
    std::vector<T> out;
    for (const auto& el : *arr) out.push_back(toml_scalar<T>(el, key));
    return out;
}

inline std::vector<std::vector<int>> toml_volumes(const toml::node& n) {
    const auto* arr = n.as_array();
    require(arr != nullptr, "bad-config-type", "volumes must be an array");
    std::vector<std::vector<int>> out;
    for (const auto& el : *arr) {
        if (el.is_array())
            out.push_back(toml_list<int>(el, "volumes"));
        else if (el.is_string())
            out.push_back(parse_volume(*el.value<std::string>()));
        else
            out.push_back({toml_scalar<int>(el, "volumes")});
    }
    return out;
}

}  // namespace detail

// Reads a TOML file into `c`. Keys in `skip` (typically the flags given on
// the command line) keep their current value.
inline void apply_toml(RunConfig& c, const toml::table& t, const std::function<bool(const std::string&)>& skip = {}) {
    auto fs = fields(c);
    for (const auto& [k, node] : t) {
        const std::string key(k.str());
        auto it = std::find_if(fs.begin(), fs.end(), [&](const Field& f) { return key == f.key; });
        require(it != fs.end(), "unknown-key", "unknown config key '" + key + "'");
        if (skip && skip(key)) continue;
        std::visit(
            [&](auto* p) {
                using T = std::remove_pointer_t<decltype(p)>;
                if constexpr (std::is_same_v<T, std::vector<std::vector<int>>>)
                    *p = detail::toml_volumes(node);
                else if constexpr (std::is_same_v<T, std::vector<int>> || std::is_same_v<T, std::vector<double>> ||
                                   std::is_same_v<T, std::vector<std::size_t>>)
                    *p = detail::toml_list<typename T::value_type>(node, key);
                else
                    *p = detail::toml_scalar<T>(node, key);
            },
            it->ref);
    }
}

inline void load_toml_file(RunConfig& c, const std::string& path,
                           const std::function<bool(const std::string&)>& skip = {}) {
    toml::table t;
    try {
        t = toml::parse_file(path);
    } catch (const toml::parse_error& e) {
        std::ostringstream os;
        os << path << ": " << e.description() << " at " << e.source().begin;
        throw Error("bad-config", os.str());
    }
    apply_toml(c, t, skip);
}

inline toml::table to_toml(const RunConfig& cfg) {
    RunConfig c = cfg;
    toml::table t;
    for (const auto& f : fields(c))
        std::visit(
            [&](auto* p) {
                using T = std::remove_pointer_t<decltype(p)>;
                if constexpr (std::is_same_v<T, std::vector<std::vector<int>>>) {
                    toml::array a;
                    for (const auto& v : *p) a.push_back(volume_text(v));
                    t.insert(f.key, std::move(a));
                } else if constexpr (std::is_same_v<T, std::vector<int>> || std::is_same_v<T, std::vector<double>>) {
                    toml::array a;
                    for (auto x : *p) a.push_back(x);
                    t.insert(f.key, std::move(a));
                } else if constexpr (std::is_same_v<T, std::vector<std::size_t>>) {
                    toml::array a;
                    for (auto x : *p) a.push_back(static_cast<std::int64_t>(x));
                    t.insert(f.key, std::move(a));
                } else if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, std::uint64_t>) {
                    // TOML integers are signed 64-bit; seeds from 2^63 up are stored as their two's complement.
                    t.insert(f.key, static_cast<std::int64_t>(*p));
                } else {
                    t.insert(f.key, *p);
                }
            },
            f.ref);
    return t;
}

inline std::string toml_text(const RunConfig& c) {
    std::ostringstream os;
    os << to_toml(c) << '\n';
    return os.str();
}

// Canonical JSON of everything that determines the numbers: thread count,
// output location and report format are excluded.
inline nlohmann::json canonical_json(const RunConfig& cfg) {
    RunConfig c = cfg;
    nlohmann::json j = nlohmann::json::object();
    for (const auto& f : fields(c)) {
        const std::string key = f.key;
        if (key == "threads" || key == "output_dir" || key == "format") continue;
        std::visit([&](auto* p) { j[key] = *p; }, f.ref);
    }
    return j;
}

inline std::vector<std::vector<int>> resolved_volumes(const RunConfig& c) {
    return c.volumes.empty() ? std::vector<std::vector<int>>{c.sides} : c.volumes;
}

inline Window resolved_window(const RunConfig& c, const std::vector<int>& sides) {
    Window w;
    w.anchor = c.window_anchor.empty() ? std::vector<int>(sides.size(), 0) : c.window_anchor;
    w.sides = c.window_sides.empty() ? sides : c.window_sides;
    return w;
}

inline Distribution resolved_distribution(const RunConfig& c) {
    return {distribution_kind_from_string(c.distribution), c.scale};
}

inline SamplerConfig resolved_sampler(const RunConfig& c) {
    SamplerConfig s;
    s.kind = sampler_kind_from_string(c.sampler);
    s.pilot_sweeps = c.pilot_sweeps;
    s.max_sweeps = c.max_sweeps;
    s.pt_beta_min = c.pt_beta_min;
    s.pt_max_rungs = c.pt_max_rungs;
    return s;
}

inline double resolved_beta_w(const RunConfig& c) { return c.beta_w < 0.0 ? c.beta : c.beta_w; }

// Every violated precondition, as "code: detail" strings. Empty when valid.
inline std::vector<std::string> violations(const RunConfig& c) {
    std::vector<std::string> out;
    auto check = [&](auto&& fn) {
        try {
            fn();
        } catch (const Error& e) {
            out.emplace_back(e.what());
        } catch (const std::exception& e) {
            out.emplace_back(std::string("invalid: ") + e.what());
        }
    };
    const auto& kinds = experiment_kinds();
    const std::string& x = c.experiment;
    check([&] {
        require(std::find(kinds.begin(), kinds.end(), x) != kinds.end(), "unknown-experiment",
                "experiment '" + x + "' is not one of the known kinds");
    });
    check([&] {
        require(c.schema_version == kReportSchemaVersion, "schema-mismatch",
                "schema_version must be " + std::to_string(kReportSchemaVersion));
    });
    check([&] {
        require(c.format == "json" || c.format == "csv" || c.format == "all", "unknown-format",
                "format must be json, csv or all");
    });
    check([&] { require(c.threads >= 1, "bad-threads", "threads must be at least 1"); });
    check([&] { require(std::isfinite(c.beta) && c.beta >= 0.0, "bad-beta", "beta must be finite and >= 0"); });
    for (double b : c.betas)
        check([&] { require(std::isfinite(b) && b >= 0.0, "bad-beta", "betas must be finite and >= 0"); });
    check([&] { require(std::isfinite(c.lambda) && c.lambda >= 0.0, "bad-lambda", "lambda must be >= 0"); });
    check([&] { validate(resolved_distribution(c)); });
    check([&] { validate(resolved_sampler(c)); });
    check([&] { require(c.exact_tol >= 0.0 && c.n_se > 0.0, "bad-threshold", "thresholds must be positive"); });

    const bool lattice_kind = x == "covariance" || x == "local-stability" || x == "beta-shift" ||
                              x == "metastate-sweep" || x == "j-independence" || x == "free-energy";
    const bool enumerates = x == "covariance" || x == "beta-shift" || x == "free-energy" ||
                            ((x == "local-stability") && c.sampler == "exact");
    if (lattice_kind) {
        const auto vols = resolved_volumes(c);
        check([&] { require(!vols.empty() && !vols.front().empty(), "missing-sides", "set sides or volumes"); });
        for (const auto& v : vols) {
            check([&] {
                require(static_cast<std::int64_t>(v.size()) == c.d, "geometry-mismatch",
                        "volume " + volume_text(v) + " does not have d=" + std::to_string(c.d) + " sides");
                const Lattice lat(static_cast<int>(c.d), v);
                if (enumerates) require_enumerable(lat.vertex_count());
                const auto we = window_edges(lat, resolved_window(c, v));
                if (x == "local-stability" || (x == "covariance" && !c.deltas.empty()))
                    require(c.deltas.size() == we.interior.size(), "geometry-mismatch",
                            "deltas needs " + std::to_string(we.interior.size()) + " values, one per interior edge");
            });
        }
    }
    if (x == "beta-shift")
        check([&] {
            require(c.distribution == "gaussian", "assumption-violated", "requires gaussian ν");
        });
    if (x == "free-energy")
        check([&] {
            require(c.distribution == "gaussian", "bound-requires-gaussian", "the boundary bound needs gaussian couplings");
            require(resolved_beta_w(c) >= 0.0 && std::isfinite(c.beta_w), "bad-beta", "beta_w must be finite");
        });
    if (x == "local-stability" || x == "beta-shift" || x == "j-independence" || x == "free-energy" ||
        x == "sk-equivalence")
        check([&] { require(c.draws >= 2, "bad-draw-count", "draws must be at least 2"); });
    if (x == "local-stability" || x == "metastate-sweep" || x == "beta-shift")
        check([&] { require(c.s >= 2 && c.s <= 3, "bad-replica-count", "s must be 2 or 3"); });
    if ((x == "local-stability" && c.sampler != "exact") || x == "metastate-sweep" || x == "j-independence")
        check([&] {
            require(c.ensemble_size >= std::max<std::size_t>(c.s, 2), "too-few-replicas",
                    "ensemble_size must be at least s");
        });
    if (x == "metastate-sweep" && c.sampler == "exact")
        for (const auto& v : resolved_volumes(c))
            check([&] {
                std::size_t n = 1;
                for (int L : v) n *= static_cast<std::size_t>(std::max(L, 1));
                require_enumerable(n);
            });
    if (x == "j-independence")
        check([&] { require(c.alpha > 0.0 && c.alpha < 1.0, "bad-alpha", "alpha must lie in (0, 1)"); });
    if (x == "covariance")
        check([&] {
            require(c.perturbations >= 1 || !c.deltas.empty(), "bad-perturbations", "need at least one perturbation");
            require(c.s >= 2 && c.s <= 3, "bad-replica-count", "s must be 2 or 3");
        });
    if (x == "stochastic-stability") {
        check([&] { OverlapFunction::parse(c.function); });
        check([&] { require(c.field_draws >= 2, "bad-draw-count", "field_draws must be at least 2"); });
        check([&] {
            require(!c.atoms.empty() && std::filesystem::is_regular_file(c.atoms), "missing-input",
                    "atoms must name a sampling-measure JSON file");
        });
    }
    if (x == "sk-equivalence") {
        check([&] { require(!c.sizes.empty(), "bad-sizes", "sizes must list at least one N"); });
        for (auto n : c.sizes)
            check([&] {
                require(n >= 2, "bad-sizes", "N must be at least 2");
                require_enumerable(n);
            });
        check([&] { Monomial::parse(c.function); });
        check([&] { require(c.slope_min < c.slope_max, "bad-threshold", "slope_min must be below slope_max"); });
    }
    if (x == "factorize") {
        check([&] {
            require(!c.matrix.empty() && std::filesystem::is_regular_file(c.matrix), "missing-input",
                    "matrix must name an overlap-matrix CSV file");
        });
        check([&] { require(c.tol >= 0.0 && c.congruence_tol >= 0.0, "bad-threshold", "tolerances must be >= 0"); });
    }
    return out;
}

inline void validate(const RunConfig& c) {
    const auto v = violations(c);
    if (v.empty()) return;
    std::string msg = std::to_string(v.size()) + " violated precondition(s)";
    for (const auto& s : v) msg += "\n  - " + s;
    throw Error("invalid-config", msg);
}

// Default run directory: $ROST_OUTPUT_ROOT (or "runs") / <experiment>-<hash prefix>.
inline constexpr const char* kOutputRootEnv = "ROST_OUTPUT_ROOT";

inline std::string default_output_root() {
    const char* env = std::getenv(kOutputRootEnv);
    return env && *env ? std::string(env) : std::string("runs");
}

}  // namespace rost::harness
