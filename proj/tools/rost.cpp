#include <cstdlib>
#include <iostream>
#include <map>
#include <string>
#include <variant>

#include "CLI11.hpp"
#include "rost/error.hpp"
#include "rost/harness/config.hpp"
#include "rost/harness/run.hpp"

namespace {

namespace h = rost::harness;

constexpr int kExitPass = 0;
constexpr int kExitFail = 1;
constexpr int kExitError = 2;

const std::map<std::string, std::string> kDescriptions{
    {"covariance", "Exact covariance identity under window perturbations"},
    {"local-stability", "Overlap law under a fixed window perturbation across volumes"},
    {"stochastic-stability", "Gaussian-field tilt of a sampling measure"},
    {"beta-shift", "Shifted window temperature against a random-field tilt"},
    {"metastate-sweep", "Window overlap moments across a volume sweep"},
    {"j-independence", "Between-disorder dispersion of window overlaps"},
    {"sk-equivalence", "Distinct-site SK moments against exact ones"},
    {"free-energy", "Windowed free energy against the boundary estimate"},
    {"factorize", "Gram factorization of an overlap matrix"},
};

struct Subcommand {
    CLI::App* app = nullptr;
    h::RunConfig cfg;
    std::string config_path;
    bool print_config = false;
    std::map<std::string, CLI::Option*> options;
};

void bind_fields(Subcommand& sc) {
    for (auto& f : h::fields(sc.cfg)) {
        if (std::string(f.key) == "experiment") continue;
        const std::string name = std::string("--") + f.key;
        CLI::Option* opt = std::visit(
            [&](auto* p) -> CLI::Option* {
                using T = std::remove_pointer_t<decltype(p)>;
                if constexpr (std::is_same_v<T, std::vector<std::vector<int>>>) {
                    // Volumes on the command line are "8" or "4x4", one per token.
                    return sc.app
                        ->add_option_function<std::vector<std::string>>(
                            name,
                            [p](const std::vector<std::string>& v) {
                                p->clear();
                                for (const auto& t : v) p->push_back(h::parse_volume(t));
                            },
                            f.help)
                        ->delimiter(',');
                } else if constexpr (std::is_same_v<T, std::vector<int>> || std::is_same_v<T, std::vector<double>> ||
                                     std::is_same_v<T, std::vector<std::size_t>>) {
                    return sc.app->add_option(name, *p, f.help)->delimiter(',');
                } else {
                    return sc.app->add_option(name, *p, f.help);
                }
            },
            f.ref);
        sc.options[f.key] = opt;
    }
    sc.app->add_option("--config", sc.config_path, "TOML config file; flags override its values")
        ->check(CLI::ExistingFile);
    sc.app->add_flag("--print-config", sc.print_config, "Print the resolved config as TOML and exit");
}

// Applies the TOML file, then lets explicitly given flags win by skipping
// those keys.
void resolve(Subcommand& sc, const std::string& kind) {
    if (!sc.config_path.empty()) {
        const auto given = [&](const std::string& key) {
            auto it = sc.options.find(key);
            return it != sc.options.end() && it->second->count() > 0;
        };
        h::load_toml_file(sc.cfg, sc.config_path, given);
        if (!sc.cfg.experiment.empty() && sc.cfg.experiment != kind)
            throw rost::Error("invalid-config",
                              "config names experiment '" + sc.cfg.experiment + "' but subcommand is '" + kind + "'");
    }
    sc.cfg.experiment = kind;
}

int verdict_exit(const std::string& verdict) {
    return verdict == "exact-pass" || verdict == "statistical-pass" ? kExitPass : kExitFail;
}

int run_subcommand(Subcommand& sc, const std::string& kind) {
    resolve(sc, kind);
    if (sc.print_config) {
        std::cout << h::toml_text(sc.cfg);
        return kExitPass;
    }
    const auto rec = h::run_experiment(sc.cfg);
    for (const auto& r : rec.reports) std::cout << rost::summary_text(r);
    std::cout << "output " << h::resolved_output_dir(sc.cfg).string() << '\n';
    return verdict_exit(rec.verdict);
}

int report_subcommand(const std::string& dir, const std::string& format) {
    const auto rec = h::load_result(dir);
    h::RunConfig cfg;
    h::load_toml_file(cfg, (std::filesystem::path(dir) / "config.toml").string());
    if (h::config_hash(cfg) != rec.config_hash)
        throw rost::Error("hash-mismatch", "config.toml does not match the recorded config hash");
    if (!format.empty()) h::emit_report(rec, format, dir);
    for (const auto& r : rec.reports) std::cout << rost::summary_text(r);
    return verdict_exit(rec.verdict);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Overlap-structure stability experiments for short-range spin glasses"};
    app.require_subcommand(1);

    std::map<std::string, Subcommand> subs;
    for (const auto& kind : h::experiment_kinds()) {
        auto& sc = subs[kind];
        sc.app = app.add_subcommand(kind, kDescriptions.at(kind));
        bind_fields(sc);
    }
    std::string report_dir, report_format;
    auto* report = app.add_subcommand("report", "Verify a finished run and print or re-emit its report");
    report->add_option("dir", report_dir, "Run directory")->required();
    report->add_option("--format", report_format, "Re-emit as json, csv or all");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitPass : kExitError;
    }

    try {
        if (report->parsed()) return report_subcommand(report_dir, report_format);
        for (auto& [kind, sc] : subs)
            if (sc.app->parsed()) return run_subcommand(sc, kind);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitError;
    }
    return kExitError;
}
