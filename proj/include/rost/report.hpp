#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "rost/error.hpp"

namespace rost {

inline constexpr int kReportSchemaVersion = 1;

// Default verdict thresholds; experiments may override them.
struct VerdictRule {
    double exact_tol = 1e-10;  // |diff| at or below this is an exact pass
    double n_se = 3.0;         // |diff| within n_se combined standard errors passes statistically
};

// One compared or measured quantity. Rows with a reference compare two sides
// of an identity (lhs vs rhs); rows without one are plain measurements.
struct Statistic {
    std::string group;   // "L=8", "N=12", "beta=0.8 delta#3", ...
    std::string moment;  // "q12^2", "gap(q12)", ...
    double estimate = 0.0;
    double estimate_se = 0.0;
    std::optional<double> reference;
    double reference_se = 0.0;
    double diff = 0.0;
    double diff_se = 0.0;
    std::string verdict = "measured";
};

struct Check {
    std::string name;
    bool pass = false;
    bool judged = true;  // false: reported only, never changes the verdict
    double value = 0.0;
    double threshold = 0.0;
    std::string detail;
    bool exact = false;  // a pass is an exact pass (tolerance-level check)
};

struct Report {
    int schema_version = kReportSchemaVersion;
    std::string test;
    nlohmann::json parameters = nlohmann::json::object();
    std::vector<Statistic> statistics;
    std::vector<Check> checks;
    std::vector<std::string> flags;
    std::optional<double> min_ess;
    std::string verdict;

    // Adds a two-sided row. Graded rows get a verdict from `rule`; ungraded
    // ones (discrepancies that are measured, not asserted) stay "measured".
    Statistic& compare(std::string group, std::string moment, double lhs, double lhs_se, double rhs, double rhs_se,
                       double diff, double diff_se, const VerdictRule& rule, bool graded = true) {
        Statistic s{std::move(group), std::move(moment), lhs, lhs_se, rhs, rhs_se, diff, diff_se, "measured"};
        const double a = std::abs(diff);
        if (!graded) {
            statistics.push_back(std::move(s));
            return statistics.back();
        }
        if (a <= rule.exact_tol)
            s.verdict = "exact-pass";
        else if (a <= rule.n_se * diff_se)
            s.verdict = "statistical-pass";
        else
            s.verdict = "fail";
        statistics.push_back(std::move(s));
        return statistics.back();
    }

    Statistic& measure(std::string group, std::string moment, double estimate, double se) {
        statistics.push_back({std::move(group), std::move(moment), estimate, se, std::nullopt, 0.0, 0.0, 0.0, "measured"});
        return statistics.back();
    }

    void flag(const std::string& f) {
        if (std::find(flags.begin(), flags.end(), f) == flags.end()) flags.push_back(f);
    }

    // Worst of the graded rows, judged checks and "fail:" flags.
    void finalize() {
        int level = 0;  // 0 exact, 1 statistical, 2 fail
        for (const auto& s : statistics) {
            if (s.verdict == "statistical-pass") level = std::max(level, 1);
            if (s.verdict == "fail") level = 2;
        }
        for (const auto& c : checks)
            if (c.judged) level = std::max(level, c.pass ? (c.exact ? 0 : 1) : 2);
        for (const auto& f : flags)
            if (f.rfind("fail:", 0) == 0) level = 2;
        verdict = level == 0 ? "exact-pass" : level == 1 ? "statistical-pass" : "fail";
    }

    bool passed() const { return verdict == "exact-pass" || verdict == "statistical-pass"; }
};

inline nlohmann::json to_json(const Statistic& s) {
    nlohmann::json j{{"group", s.group},      {"moment", s.moment}, {"estimate", s.estimate},
                     {"estimate_se", s.estimate_se}, {"verdict", s.verdict}};
    if (s.reference) {
        j["reference"] = *s.reference;
        j["reference_se"] = s.reference_se;
        j["diff"] = s.diff;
        j["diff_se"] = s.diff_se;
    } else {
        j["reference"] = nullptr;
    }
    return j;
}

inline nlohmann::json to_json(const Check& c) {
    return {{"name", c.name}, {"pass", c.pass},           {"judged", c.judged},
            {"value", c.value}, {"threshold", c.threshold}, {"detail", c.detail}, {"exact", c.exact}};
}

inline nlohmann::json to_json(const Report& r) {
    nlohmann::json stats = nlohmann::json::array();
    for (const auto& s : r.statistics) stats.push_back(to_json(s));
    nlohmann::json checks = nlohmann::json::array();
    for (const auto& c : r.checks) checks.push_back(to_json(c));
    nlohmann::json j{{"schema_version", r.schema_version},
                     {"test", r.test},
                     {"parameters", r.parameters},
                     {"statistics", stats},
                     {"checks", checks},
                     {"flags", r.flags},
                     {"verdict", r.verdict}};
    j["min_ess"] = r.min_ess ? nlohmann::json(*r.min_ess) : nlohmann::json(nullptr);
    return j;
}

inline Report report_from_json(const nlohmann::json& j) {
    Report r;
    r.schema_version = j.at("schema_version").get<int>();
    require(r.schema_version == kReportSchemaVersion, "schema-mismatch",
            "report schema version " + std::to_string(r.schema_version));
    r.test = j.at("test").get<std::string>();
    r.parameters = j.at("parameters");
    for (const auto& s : j.at("statistics")) {
        Statistic x;
        x.group = s.at("group").get<std::string>();
        x.moment = s.at("moment").get<std::string>();
        x.estimate = s.at("estimate").get<double>();
        x.estimate_se = s.at("estimate_se").get<double>();
        x.verdict = s.at("verdict").get<std::string>();
        if (!s.at("reference").is_null()) {
            x.reference = s.at("reference").get<double>();
            x.reference_se = s.at("reference_se").get<double>();
            x.diff = s.at("diff").get<double>();
            x.diff_se = s.at("diff_se").get<double>();
        }
        r.statistics.push_back(std::move(x));
    }
    for (const auto& c : j.at("checks"))
        r.checks.push_back({c.at("name").get<std::string>(), c.at("pass").get<bool>(), c.at("judged").get<bool>(),
                            c.at("value").get<double>(), c.at("threshold").get<double>(),
                            c.at("detail").get<std::string>(), c.value("exact", false)});
    r.flags = j.at("flags").get<std::vector<std::string>>();
    if (!j.at("min_ess").is_null()) r.min_ess = j.at("min_ess").get<double>();
    r.verdict = j.at("verdict").get<std::string>();
    return r;
}

namespace detail {

inline std::string csv_number(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
    return out + "\"";
}

}  // namespace detail

inline constexpr const char* kCsvHeader = "test,group,moment,estimate,estimate_se,reference,reference_se,diff,diff_se,verdict";

// Flat view, one line per statistic after the header.
inline std::string to_csv(const Report& r, bool header = true) {
    std::ostringstream os;
    if (header) os << kCsvHeader << '\n';
    for (const auto& s : r.statistics) {
        using detail::csv_number;
        os << detail::csv_field(r.test) << ',' << detail::csv_field(s.group) << ',' << detail::csv_field(s.moment) << ','
           << csv_number(s.estimate) << ',' << csv_number(s.estimate_se) << ',';
        if (s.reference)
            os << csv_number(*s.reference) << ',' << csv_number(s.reference_se) << ',' << csv_number(s.diff) << ','
               << csv_number(s.diff_se);
        else
            os << ",,,";
        os << ',' << s.verdict << '\n';
    }
    return os.str();
}

inline std::string summary_text(const Report& r) {
    std::ostringstream os;
    os << r.test << ": " << r.verdict << '\n';
    for (const auto& c : r.checks)
        os << "  check " << c.name << (c.judged ? "" : " (info)") << ": " << (c.pass ? "pass" : "fail") << "  value "
           << c.value << "  threshold " << c.threshold << (c.detail.empty() ? "" : "  " + c.detail) << '\n';
    std::size_t fails = 0;
    for (const auto& s : r.statistics) fails += s.verdict == "fail";
    os << "  statistics: " << r.statistics.size() << " (" << fails << " failing)\n";
    for (const auto& f : r.flags) os << "  flag: " << f << '\n';
    if (r.min_ess) os << "  min ESS: " << *r.min_ess << '\n';
    return os.str();
}

}  // namespace rost
