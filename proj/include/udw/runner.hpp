#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <thread>

#include "udw/config.hpp"
#include "udw/events.hpp"
#include "udw/rate.hpp"

namespace udw {

/// Dispatch fn(0..n-1) to a worker pool; results land in caller-owned slots so
/// output order is the grid order regardless of completion order.
inline void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
    int T = threads > 0 ? threads : int(std::thread::hardware_concurrency());
    if (T < 1) T = 1;
    T = int(std::min<std::size_t>(std::size_t(T), n));
    if (T <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(T);
    for (int t = 0; t < T; ++t)
        pool.emplace_back([&] {
            for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
        });
    for (auto& th : pool) th.join();
}

struct RunResult {
    int exit_code = 0;           // 0 ok, 1 config error, 2 numerical failure
    std::vector<std::string> files;
    std::vector<std::string> messages;
};

namespace detail {

struct CsvFile {
    std::ofstream os;
    explicit CsvFile(const std::filesystem::path& p) : os(p, std::ios::binary) {
        if (!os) throw numerical_error("cannot open output file " + p.string());
    }
    void meta(const ExperimentConfig& c, const std::string& extra = "") {
        char hash[24];
        std::snprintf(hash, sizeof hash, "%016llx",
                      static_cast<unsigned long long>(config_hash(c)));
        os << "# udwrate " << tool_version << "\n";
        os << "# config-hash: " << hash << "\n";
        if (!extra.empty()) os << "# " << extra << "\n";
    }
    void row_end() { os << "\n"; }
};

inline std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::vector<double> linspace(double lo, double hi, int n) {
    std::vector<double> g(n);
    if (n == 1) {
        g[0] = lo;
        return g;
    }
    for (int i = 0; i < n; ++i) g[i] = lo + (hi - lo) * i / (n - 1);
    return g;
}

}  // namespace detail

inline RunResult run(const ExperimentConfig& cfg) {
    using detail::num;
    RunResult rr;
    if (!cfg.task) {
        rr.exit_code = 1;
        rr.messages.push_back("error: no task selected");
        return rr;
    }
    std::filesystem::path out_dir(cfg.out);
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);

    try {
        const DetectorConfig det = make_detector(cfg);
        switch (*cfg.task) {
            case Task::spectrum: {
                const Worldline w = make_worldline(cfg);
                const auto grid = detail::linspace(cfg.e_min, cfg.e_max, cfg.e_count);
                const SigmaFn sf = w.sigma_fn(cfg.tau);
                const PoleSet ps = find_poles(sf, det);
                struct Row {
                    double p = 0.0;
                    int n_poles = 0;
                    bool warn = false;
                    double oracle = -1.0;
                    std::string error;
                };
                std::vector<Row> rows(grid.size());
                parallel_for(grid.size(), cfg.threads, [&](std::size_t i) {
                    try {
                        RateResult r = rate_from_poles(sf, ps, grid[i], det);
                        rows[i].p = r.value;
                        rows[i].n_poles = r.n_poles_used;
                        rows[i].warn = r.esigma_warning;
                        if (cfg.validate && (i % std::max<std::size_t>(1, grid.size() / 5) == 0)) {
                            const double o = rate_quadrature_oracle_full(sf, grid[i], det).value;
                            rows[i].oracle = std::abs(r.value - o) /
                                             std::max(std::abs(r.value), 1e-300);
                        }
                    } catch (const std::exception& ex) {
                        rows[i].error = ex.what();
                    }
                });
                detail::CsvFile f(out_dir / "spectrum.csv");
                f.meta(cfg, "worldline: " + w.descriptor());
                f.os << "E,P_over_alpha,n_poles,esigma_warning,oracle_residual,errors\n";
                for (std::size_t i = 0; i < grid.size(); ++i) {
                    f.os << num(grid[i]) << "," << num(rows[i].p) << "," << rows[i].n_poles << ","
                         << (rows[i].warn ? 1 : 0) << ","
                         << (rows[i].oracle >= 0 ? num(rows[i].oracle) : "") << ","
                         << rows[i].error << "\n";
                }
                rr.files.push_back((out_dir / "spectrum.csv").string());
                break;
            }
            case Task::rate_vs_time: {
                const Worldline w = make_worldline(cfg);
                const auto grid = detail::linspace(cfg.tau_min, cfg.tau_max, cfg.tau_count);
                std::vector<std::pair<double, std::string>> rows(grid.size());
                parallel_for(grid.size(), cfg.threads, [&](std::size_t i) {
                    try {
                        rows[i].first = rate_residue(w, grid[i], cfg.energy, det);
                    } catch (const std::exception& ex) {
                        rows[i] = {std::numeric_limits<double>::quiet_NaN(), ex.what()};
                    }
                });
                detail::CsvFile f(out_dir / "rate_vs_time.csv");
                f.meta(cfg, "worldline: " + w.descriptor());
                f.os << "tau,P_over_alpha,errors\n";
                for (std::size_t i = 0; i < grid.size(); ++i)
                    f.os << num(grid[i]) << "," << num(rows[i].first) << "," << rows[i].second
                         << "\n";
                rr.files.push_back((out_dir / "rate_vs_time.csv").string());
                break;
            }
            case Task::roots: {
                const Worldline w = make_worldline(cfg);
                const PoleSet ps = find_poles(w, cfg.tau, det);
                detail::CsvFile f(out_dir / "roots.csv");
                f.meta(cfg, "worldline: " + w.descriptor());
                f.os << "w_re,w_im,multiplicity,residual\n";
                for (const auto& p : ps.poles)
                    f.os << num(p.w.real()) << "," << num(p.w.imag()) << "," << p.multiplicity
                         << "," << num(p.residual) << "\n";
                rr.files.push_back((out_dir / "roots.csv").string());
                break;
            }
            case Task::average: {
                const Worldline w = make_worldline(cfg);
                const auto grid = detail::linspace(cfg.e_min, cfg.e_max, cfg.e_count);
                std::vector<std::pair<double, std::string>> rows(grid.size());
                parallel_for(grid.size(), cfg.threads, [&](std::size_t i) {
                    try {
                        rows[i].first = rate_averaged(w, grid[i], det);
                    } catch (const std::exception& ex) {
                        rows[i] = {std::numeric_limits<double>::quiet_NaN(), ex.what()};
                    }
                });
                detail::CsvFile f(out_dir / "average.csv");
                f.meta(cfg, "worldline: " + w.descriptor());
                f.os << "E,Pbar_over_alpha,errors\n";
                for (std::size_t i = 0; i < grid.size(); ++i)
                    f.os << num(grid[i]) << "," << num(rows[i].first) << "," << rows[i].second
                         << "\n";
                rr.files.push_back((out_dir / "average.csv").string());
                break;
            }
            case Task::sample: {
                const Worldline w = make_worldline(cfg);
                Band band{cfg.band_e_min, cfg.band_e_max, cfg.band_count};
                const ClickTrain train = sample_clicks(w, band, cfg.horizon, cfg.seed, det);
                detail::CsvFile f(out_dir / "clicks.csv");
                f.meta(cfg);
                write_click_csv(f.os, train);
                rr.files.push_back((out_dir / "clicks.csv").string());
                break;
            }
            case Task::figure1: {
                // relative correction C(x, E/T_a) of the asymptotic spectrum
                std::vector<double> betas =
                    cfg.e_count >= 1 ? detail::linspace(cfg.e_min, cfg.e_max, cfg.e_count)
                                     : detail::linspace(0.5, 10.0, 39);
                detail::CsvFile f(out_dir / "figure1.csv");
                f.meta(cfg);
                f.os << "x,E_over_Ta,C\n";
                for (double x : cfg.x_list)
                    for (double b : betas)
                        f.os << num(x) << "," << num(b) << "," << num(uniform_correction_rel(b, x))
                             << "\n";
                rr.files.push_back((out_dir / "figure1.csv").string());
                break;
            }
            case Task::figure2: {
                std::vector<double> eows =
                    cfg.e_count >= 1 ? detail::linspace(cfg.e_min, cfg.e_max, cfg.e_count)
                                     : detail::linspace(1.0, 10.0, 19);
                struct Curve {
                    std::vector<double> p;
                    std::vector<std::string> err;
                };
                std::vector<Curve> curves(cfg.v0_list.size());
                parallel_for(cfg.v0_list.size(), cfg.threads, [&](std::size_t vi) {
                    Curve& cur = curves[vi];
                    cur.p.resize(eows.size());
                    cur.err.resize(eows.size());
                    try {
                        const Worldline w = Worldline::rel_harmonic(cfg.v0_list[vi], cfg.omega);
                        for (std::size_t i = 0; i < eows.size(); ++i) {
                            try {
                                cur.p[i] = rate_averaged(w, eows[i] * cfg.omega, det);
                            } catch (const std::exception& ex) {
                                cur.p[i] = std::numeric_limits<double>::quiet_NaN();
                                cur.err[i] = ex.what();
                            }
                        }
                    } catch (const std::exception& ex) {
                        for (std::size_t i = 0; i < eows.size(); ++i) {
                            cur.p[i] = std::numeric_limits<double>::quiet_NaN();
                            cur.err[i] = ex.what();
                        }
                    }
                });
                detail::CsvFile f(out_dir / "figure2.csv");
                f.meta(cfg);
                f.os << "v0,E_over_omega,log10_P_over_alpha,errors\n";
                for (std::size_t vi = 0; vi < cfg.v0_list.size(); ++vi)
                    for (std::size_t i = 0; i < eows.size(); ++i)
                        f.os << num(cfg.v0_list[vi]) << "," << num(eows[i]) << ","
                             << num(std::log10(std::max(curves[vi].p[i], 1e-320))) << ","
                             << curves[vi].err[i] << "\n";
                rr.files.push_back((out_dir / "figure2.csv").string());
                break;
            }
        }
    } catch (const domain_error& ex) {
        rr.exit_code = 1;
        rr.messages.push_back(std::string("config error: ") + ex.what());
    } catch (const std::exception& ex) {
        rr.exit_code = 2;
        rr.messages.push_back(std::string("numerical failure: ") + ex.what());
    }
    return rr;
}

}  // namespace udw
