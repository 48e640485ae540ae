#pragma once

#include <array>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "udw/events.hpp"
#include "udw/worldline.hpp"

namespace udw {

inline constexpr const char* tool_version = "0.1.0";

enum class Task { spectrum, rate_vs_time, roots, average, sample, figure1, figure2 };

inline std::optional<Task> task_from_string(const std::string& s) {
    if (s == "spectrum") return Task::spectrum;
    if (s == "rate-vs-time") return Task::rate_vs_time;
    if (s == "roots") return Task::roots;
    if (s == "average") return Task::average;
    if (s == "sample") return Task::sample;
    if (s == "figure1") return Task::figure1;
    if (s == "figure2") return Task::figure2;
    return std::nullopt;
}

inline const char* task_name(Task t) {
    switch (t) {
        case Task::spectrum: return "spectrum";
        case Task::rate_vs_time: return "rate-vs-time";
        case Task::roots: return "roots";
        case Task::average: return "average";
        case Task::sample: return "sample";
        case Task::figure1: return "figure1";
        case Task::figure2: return "figure2";
    }
    return "?";
}

struct ExperimentConfig {
    // [worldline]
    std::string family = "inertial";
    double a = 1.0;
    double torsion = 2.0;
    double v0 = 0.5;
    double omega = 1.0;
    double a0 = 1.0;
    double a1 = 0.0;
    std::vector<double> b_coeffs;
    std::array<std::vector<double>, 3> amp{};
    std::array<std::vector<double>, 3> phase{};
    // [detector]
    double sigma = 50.0;
    double epsilon = 0.0;  // 0 -> 1e-6 sigma
    double radius_factor = 6.0;
    double residue_circle_factor = 1e-3;
    double tol = 1e-10;
    // [task]
    std::optional<Task> task;
    double tau = 0.0;
    double energy = 1.0;
    bool validate = false;
    // [grid]
    double e_min = 0.0, e_max = 0.0;
    int e_count = 0;
    double tau_min = 0.0, tau_max = 0.0;
    int tau_count = 0;
    std::vector<double> v0_list{0.01, 0.1, 0.5, 0.99};
    std::vector<double> x_list{25.0, 50.0, 100.0};
    // [band]
    double band_e_min = 0.0, band_e_max = 0.0;
    int band_count = 33;
    // [sample]
    double horizon = 100.0;
    std::uint64_t seed = 1;
    // [run]
    int threads = 0;
    std::string out = "out";
};

struct ConfigError {
    int line = 0;
    std::string key;
    std::string message;
};

struct ParseResult {
    ExperimentConfig config;
    std::vector<ConfigError> errors;
    std::vector<std::string> warnings;
    bool ok() const { return errors.empty(); }
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline bool parse_double(const std::string& s, double& out) {
    const std::string t = trim(s);
    if (t.empty()) return false;
    char* end = nullptr;
    out = std::strtod(t.c_str(), &end);
    return end == t.c_str() + t.size();
}

inline bool parse_list(const std::string& s, std::vector<double>& out) {
    out.clear();
    std::istringstream is(s);
    std::string tok;
    while (is >> tok) {
        double v;
        if (!parse_double(tok, v)) return false;
        out.push_back(v);
    }
    return true;
}

inline std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string fmt_list(const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + fmt(v[i]);
    return s;
}

}  // namespace detail

/// Line-oriented "[section]" / "key = value" grammar with '#' comments.
/// Collects every violation (not just the first); duplicate keys warn and the
/// last value wins.
inline ParseResult parse_config(const std::string& text) {
    ParseResult res;
    ExperimentConfig& c = res.config;
    std::map<std::string, int> key_lines;  // "section.key" -> first line, for duplicates
    std::string section;
    std::istringstream is(text);
    std::string raw;
    int lineno = 0;

    auto err = [&](int line, const std::string& key, const std::string& msg) {
        res.errors.push_back({line, key, msg});
    };

    while (std::getline(is, raw)) {
        ++lineno;
        std::string line = raw;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') {
                err(lineno, "", "malformed section header");
                continue;
            }
            section = detail::trim(line.substr(1, line.size() - 2));
            static const std::set<std::string> known{"worldline", "detector", "task",
                                                     "grid",      "band",     "sample", "run"};
            if (!known.count(section)) {
                err(lineno, section, "unknown section");
                section.clear();
            }
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos) {
            err(lineno, "", "expected 'key = value'");
            continue;
        }
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string val = detail::trim(line.substr(eq + 1));
        if (section.empty()) {
            err(lineno, key, "key outside any [section]");
            continue;
        }
        const std::string full = section + "." + key;
        if (auto it = key_lines.find(full); it != key_lines.end())
            res.warnings.push_back("duplicate key '" + full + "' (line " +
                                   std::to_string(lineno) + "): last value wins");
        key_lines[full] = lineno;

        auto num = [&](double& target) {
            double v;
            if (detail::parse_double(val, v)) target = v;
            else err(lineno, full, "malformed number '" + val + "'");
        };
        auto integer = [&](int& target) {
            double v;
            if (detail::parse_double(val, v) && v == std::floor(v)) target = int(v);
            else err(lineno, full, "malformed integer '" + val + "'");
        };
        auto list = [&](std::vector<double>& target) {
            if (!detail::parse_list(val, target))
                err(lineno, full, "malformed number list '" + val + "'");
        };

        if (section == "worldline") {
            if (key == "family") c.family = val;
            else if (key == "a") num(c.a);
            else if (key == "torsion") num(c.torsion);
            else if (key == "v0") num(c.v0);
            else if (key == "omega") num(c.omega);
            else if (key == "a0") num(c.a0);
            else if (key == "a1") num(c.a1);
            else if (key == "b_coeffs") list(c.b_coeffs);
            else if (key == "amp_x") list(c.amp[0]);
            else if (key == "amp_y") list(c.amp[1]);
            else if (key == "amp_z") list(c.amp[2]);
            else if (key == "phase_x") list(c.phase[0]);
            else if (key == "phase_y") list(c.phase[1]);
            else if (key == "phase_z") list(c.phase[2]);
            else err(lineno, full, "unknown key");
        } else if (section == "detector") {
            if (key == "sigma") num(c.sigma);
            else if (key == "epsilon") num(c.epsilon);
            else if (key == "radius_factor") num(c.radius_factor);
            else if (key == "residue_circle_factor") num(c.residue_circle_factor);
            else if (key == "tol") num(c.tol);
            else err(lineno, full, "unknown key");
        } else if (section == "task") {
            if (key == "type") {
                auto t = task_from_string(val);
                if (t) c.task = t;
                else err(lineno, full, "unknown task '" + val + "'");
            } else if (key == "tau") num(c.tau);
            else if (key == "energy") num(c.energy);
            else if (key == "validate") {
                if (val == "true" || val == "1") c.validate = true;
                else if (val == "false" || val == "0") c.validate = false;
                else err(lineno, full, "expected true/false");
            } else err(lineno, full, "unknown key");
        } else if (section == "grid") {
            if (key == "e_min") num(c.e_min);
            else if (key == "e_max") num(c.e_max);
            else if (key == "e_count") integer(c.e_count);
            else if (key == "tau_min") num(c.tau_min);
            else if (key == "tau_max") num(c.tau_max);
            else if (key == "tau_count") integer(c.tau_count);
            else if (key == "v0_list") list(c.v0_list);
            else if (key == "x_list") list(c.x_list);
            else err(lineno, full, "unknown key");
        } else if (section == "band") {
            if (key == "e_min") num(c.band_e_min);
            else if (key == "e_max") num(c.band_e_max);
            else if (key == "e_count") integer(c.band_count);
            else err(lineno, full, "unknown key");
        } else if (section == "sample") {
            if (key == "horizon") num(c.horizon);
            else if (key == "seed") {
                double v;
                if (detail::parse_double(val, v) && v >= 0 && v == std::floor(v))
                    c.seed = std::uint64_t(v);
                else err(lineno, full, "malformed seed '" + val + "'");
            } else err(lineno, full, "unknown key");
        } else if (section == "run") {
            if (key == "threads") integer(c.threads);
            else if (key == "out") c.out = val;
            else err(lineno, full, "unknown key");
        }
    }

    // semantic validation, every violation reported with the line it came from
    auto line_of = [&](const std::string& full) {
        auto it = key_lines.find(full);
        return it == key_lines.end() ? 0 : it->second;
    };
    auto must_pos = [&](double v, const std::string& full) {
        if (!(v > 0.0)) err(line_of(full), full, "must be > 0 (got " + detail::fmt(v) + ")");
    };
    must_pos(c.sigma, "detector.sigma");
    if (c.epsilon < 0.0) err(line_of("detector.epsilon"), "detector.epsilon", "must be >= 0");
    if (c.epsilon > 1e-3 * c.sigma)
        err(line_of("detector.epsilon"), "detector.epsilon", "must be <= 1e-3 * sigma");
    must_pos(c.radius_factor, "detector.radius_factor");
    must_pos(c.tol, "detector.tol");

    if (c.family == "uniform_acceleration" || c.family == "cusped") must_pos(c.a, "worldline.a");
    if (c.family == "circular") {
        must_pos(c.a, "worldline.a");
        if (!(std::abs(c.a) < std::abs(c.torsion)))
            err(line_of("worldline.torsion"), "worldline.torsion", "need |a| < |torsion|");
    }
    if (c.family == "rel_harmonic") {
        if (!(c.v0 > 0.0 && c.v0 < 1.0))
            err(line_of("worldline.v0"), "worldline.v0", "need 0 < v0 < 1");
        must_pos(c.omega, "worldline.omega");
    }
    if (c.family == "modulated") {
        must_pos(c.a0, "worldline.a0");
        must_pos(c.omega, "worldline.omega");
        if (c.a1 < 0.0) err(line_of("worldline.a1"), "worldline.a1", "must be >= 0");
    }
    if (c.family == "rapidity_poly" && c.b_coeffs.empty())
        err(line_of("worldline.b_coeffs"), "worldline.b_coeffs", "required for rapidity_poly");
    if (c.family == "nonrel_periodic") {
        must_pos(c.omega, "worldline.omega");
        if (c.amp[0].empty() && c.amp[1].empty() && c.amp[2].empty())
            err(line_of("worldline.amp_x"), "worldline.amp_x", "at least one axis needs modes");
    }
    static const std::set<std::string> fams{"inertial",     "uniform_acceleration",
                                            "rapidity_poly", "rel_harmonic",
                                            "modulated",    "circular",
                                            "cusped",       "nonrel_periodic"};
    if (!fams.count(c.family))
        err(line_of("worldline.family"), "worldline.family", "unknown family '" + c.family + "'");

    if (c.task) {
        switch (*c.task) {
            case Task::spectrum:
            case Task::average:
                if (c.e_count < 1 || !(c.e_min > 0.0) || !(c.e_max >= c.e_min))
                    err(line_of("grid.e_count"), "grid.e_count",
                        "spectrum/average need e_min > 0, e_max >= e_min, e_count >= 1");
                break;
            case Task::rate_vs_time:
                if (c.tau_count < 1)
                    err(line_of("grid.tau_count"), "grid.tau_count",
                        "rate-vs-time needs a non-empty tau grid");
                must_pos(c.energy, "task.energy");
                break;
            case Task::roots:
                break;
            case Task::sample:
                must_pos(c.horizon, "sample.horizon");
                if (!(c.band_e_min > 0.0) || !(c.band_e_max > c.band_e_min) || c.band_count < 2)
                    err(line_of("band.e_min"), "band.e_min",
                        "sample needs band e_min > 0, e_max > e_min, e_count >= 2");
                break;
            case Task::figure1:
                if (c.x_list.empty())
                    err(line_of("grid.x_list"), "grid.x_list", "figure1 needs x_list");
                break;
            case Task::figure2:
                if (c.v0_list.empty())
                    err(line_of("grid.v0_list"), "grid.v0_list", "figure2 needs v0_list");
                must_pos(c.omega, "worldline.omega");
                break;
        }
    }
    return res;
}

/// Canonical emission in the same grammar; parse(render(c)) == c.
inline std::string render_config(const ExperimentConfig& c) {
    using detail::fmt;
    using detail::fmt_list;
    std::ostringstream os;
    os << "[worldline]\n";
    os << "family = " << c.family << "\n";
    os << "a = " << fmt(c.a) << "\n";
    os << "torsion = " << fmt(c.torsion) << "\n";
    os << "v0 = " << fmt(c.v0) << "\n";
    os << "omega = " << fmt(c.omega) << "\n";
    os << "a0 = " << fmt(c.a0) << "\n";
    os << "a1 = " << fmt(c.a1) << "\n";
    if (!c.b_coeffs.empty()) os << "b_coeffs = " << fmt_list(c.b_coeffs) << "\n";
    const char* axes[3] = {"x", "y", "z"};
    for (int i = 0; i < 3; ++i) {
        if (!c.amp[i].empty()) os << "amp_" << axes[i] << " = " << fmt_list(c.amp[i]) << "\n";
        if (!c.phase[i].empty()) os << "phase_" << axes[i] << " = " << fmt_list(c.phase[i]) << "\n";
    }
    os << "[detector]\n";
    os << "sigma = " << fmt(c.sigma) << "\n";
    os << "epsilon = " << fmt(c.epsilon) << "\n";
    os << "radius_factor = " << fmt(c.radius_factor) << "\n";
    os << "residue_circle_factor = " << fmt(c.residue_circle_factor) << "\n";
    os << "tol = " << fmt(c.tol) << "\n";
    os << "[task]\n";
    if (c.task) os << "type = " << task_name(*c.task) << "\n";
    os << "tau = " << fmt(c.tau) << "\n";
    os << "energy = " << fmt(c.energy) << "\n";
    os << "validate = " << (c.validate ? "true" : "false") << "\n";
    os << "[grid]\n";
    os << "e_min = " << fmt(c.e_min) << "\n";
    os << "e_max = " << fmt(c.e_max) << "\n";
    os << "e_count = " << c.e_count << "\n";
    os << "tau_min = " << fmt(c.tau_min) << "\n";
    os << "tau_max = " << fmt(c.tau_max) << "\n";
    os << "tau_count = " << c.tau_count << "\n";
    os << "v0_list = " << fmt_list(c.v0_list) << "\n";
    os << "x_list = " << fmt_list(c.x_list) << "\n";
    os << "[band]\n";
    os << "e_min = " << fmt(c.band_e_min) << "\n";
    os << "e_max = " << fmt(c.band_e_max) << "\n";
    os << "e_count = " << c.band_count << "\n";
    os << "[sample]\n";
    os << "horizon = " << fmt(c.horizon) << "\n";
    os << "seed = " << c.seed << "\n";
    os << "[run]\n";
    os << "threads = " << c.threads << "\n";
    os << "out = " << c.out << "\n";
    return os.str();
}

inline Worldline make_worldline(const ExperimentConfig& c) {
    if (c.family == "inertial") return Worldline::inertial();
    if (c.family == "uniform_acceleration") return Worldline::uniform_acceleration(c.a);
    if (c.family == "rapidity_poly") return Worldline::rapidity_poly(c.b_coeffs);
    if (c.family == "rel_harmonic") return Worldline::rel_harmonic(c.v0, c.omega);
    if (c.family == "modulated") return Worldline::modulated(c.a0, c.a1, c.omega);
    if (c.family == "circular") return Worldline::circular(c.a, c.torsion);
    if (c.family == "cusped") return Worldline::cusped(c.a);
    if (c.family == "nonrel_periodic") return Worldline::nonrel_periodic(c.omega, c.amp, c.phase);
    throw domain_error("unknown worldline family '" + c.family + "'");
}

inline DetectorConfig make_detector(const ExperimentConfig& c) {
    DetectorConfig d;
    d.sigma = c.sigma;
    d.epsilon = c.epsilon;
    d.radius_factor = c.radius_factor;
    d.residue_circle_factor = c.residue_circle_factor;
    d.tol = c.tol;
    return d;
}

/// FNV-1a 64-bit over the canonical rendering, with the [run] block
/// neutralized so the hash identifies the experiment, not where its output
/// lands; stamped into every CSV.
inline std::uint64_t config_hash(const ExperimentConfig& c) {
    ExperimentConfig id = c;
    id.out.clear();
    id.threads = 0;
    const std::string s = render_config(id);
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace udw
